mod common;

use std::time::Instant;

use common::desk;
use ctcor::baselines::{com_offset, mirror_lag, xcorr_offset, Method};
use ctcor::simulate::{simulate_phantom_sinogram, Disk, PhantomSpec};
use ctcor::{forward_project, Error, Sinogram};

fn disk_at(x: f64, y: f64, r: f64) -> PhantomSpec {
    PhantomSpec {
        image_size: 64,
        disks: vec![Disk {
            center_x: x,
            center_y: y,
            radius: r,
            value: 1.0,
        }],
        background: 0.0,
    }
}

fn estimates(spec: &PhantomSpec, c: f64) -> [f64; 2] {
    let g = desk(180);
    let b = simulate_phantom_sinogram(spec, &g, c, None, 2).unwrap();
    [com_offset(&b, &g).unwrap().c_hat, xcorr_offset(&b, &g).unwrap().c_hat]
}

#[test]
fn centered_disk_without_offset() {
    for c_hat in estimates(&disk_at(0.0, 0.0, 12.0), 0.0) {
        assert!(c_hat.abs() < 0.1, "{c_hat}");
    }
}

#[test]
fn centered_disk_with_offset() {
    for c_hat in estimates(&disk_at(0.0, 0.0, 12.0), 3.0) {
        assert!((c_hat - 3.0).abs() <= 0.5, "{c_hat}");
    }
}

#[test]
fn off_center_bead_averages_out_over_a_rotation() {
    let g = desk(180);
    let b = simulate_phantom_sinogram(&disk_at(14.0, -6.0, 3.0), &g, 0.0, None, 2).unwrap();
    let mid = (g.n_detector as f64 - 1.0) / 2.0;
    let centroids: Vec<f64> = b
        .rows()
        .map(|r| r.iter().enumerate().map(|(j, v)| j as f64 * v).sum::<f64>() / r.iter().sum::<f64>() - mid)
        .collect();
    let spread = centroids.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(spread > 10.0, "per-angle centroids should swing, max {spread}");
    assert!(com_offset(&b, &g).unwrap().c_hat.abs() < 0.5);
    assert!(xcorr_offset(&b, &g).unwrap().c_hat.abs() < 0.5);
}

#[test]
fn beads_with_offset() {
    for c_hat in estimates(&PhantomSpec::beads(64), 3.0) {
        assert!((c_hat - 3.0).abs() <= 0.5, "{c_hat}");
    }
}

#[test]
fn constructed_shift_gives_twice_the_lag() {
    // symmetric bump centred at mid + k on an odd-length axis
    let n = 61;
    let mid = 30.0;
    for k in [-9i32, -4, 0, 1, 7, 12] {
        let p: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 - mid - k as f64;
                (-(t * t) / 18.0).exp() + if t.abs() <= 2.0 { 1.0 } else { 0.0 }
            })
            .collect();
        let lag = mirror_lag(&p).unwrap();
        assert_eq!(lag.round() as i32, 2 * k);
        assert!((lag - 2.0 * k as f64).abs() < 1e-6, "k {k}: lag {lag}");
    }
}

#[test]
fn estimates_are_invariant_to_rescaling() {
    let g = desk(60);
    let b = simulate_phantom_sinogram(&PhantomSpec::beads(64), &g, 2.0, None, 2).unwrap();
    let base = [com_offset(&b, &g).unwrap(), xcorr_offset(&b, &g).unwrap()];
    for gamma in [0.25, 2.0, 1024.0] {
        let s = Sinogram::from_vec(
            b.n_angles(),
            b.n_detector(),
            b.as_slice().iter().map(|v| v * gamma).collect(),
        )
        .unwrap();
        assert_eq!(com_offset(&s, &g).unwrap().c_hat, base[0].c_hat);
        assert_eq!(xcorr_offset(&s, &g).unwrap().c_hat, base[1].c_hat);
    }
    for gamma in [0.3, 7.1, 1e5] {
        let s = Sinogram::from_vec(
            b.n_angles(),
            b.n_detector(),
            b.as_slice().iter().map(|v| v * gamma).collect(),
        )
        .unwrap();
        assert!((com_offset(&s, &g).unwrap().c_hat - base[0].c_hat).abs() < 1e-12);
        assert!((xcorr_offset(&s, &g).unwrap().c_hat - base[1].c_hat).abs() < 1e-12);
    }
}

#[test]
fn estimates_cost_less_than_a_projection() {
    let g = desk(180);
    let x = ctcor::make_phantom(&PhantomSpec::beads(64)).unwrap();
    let t = Instant::now();
    let b = forward_project(&x, &g, 3.0).unwrap();
    let projection = t.elapsed();
    let t = Instant::now();
    for _ in 0..5 {
        com_offset(&b, &g).unwrap();
        xcorr_offset(&b, &g).unwrap();
    }
    let baselines = t.elapsed() / 5;
    assert!(baselines < projection, "{baselines:?} vs {projection:?}");
}

#[test]
fn partial_scan_sets_the_warning_and_still_reports() {
    let g = desk(180);
    let b = simulate_phantom_sinogram(&PhantomSpec::beads(64), &g, 3.0, None, 2).unwrap();
    let keep = g.angles_within(210f64.to_radians());
    let (g2, b2) = (g.select_angles(&keep).unwrap(), b.select_angles(&keep).unwrap());
    for m in [Method::Com, Method::Xcorr] {
        let full = ctcor::baselines::estimate(m, &b, &g).unwrap();
        let part = ctcor::baselines::estimate(m, &b2, &g2).unwrap();
        assert!(!full.warning);
        assert!(part.warning);
        assert!(part.c_hat.is_finite());
        println!(
            "{m}: 360° error {:.3}, 210° error {:.3}",
            full.c_hat - 3.0,
            part.c_hat - 3.0
        );
    }
}

#[test]
fn zero_sinogram_is_an_estimator_error() {
    let g = desk(4);
    let b = Sinogram::for_geometry(&g);
    assert!(matches!(com_offset(&b, &g), Err(Error::Estimator(_))));
    assert!(matches!(xcorr_offset(&b, &g), Err(Error::Estimator(_))));
}
