//! File formats.
//!
//! * sinogram: `CTSG`, u32 version, u32 n_angles, u32 n_detector, f64 payload (angle-major)
//! * image: `CTIM`, u32 version, u32 size, u32 size, f64 payload (row-major)
//! * chain: CSV with header `iter,lambda,delta,c,mh_accepts`
//! * PGM: binary P5, 16 bit, scaled so the maximum maps to 65535
//!
//! Integers and floats in the binary formats are little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::sampler::ChainRecord;

pub const SINOGRAM_MAGIC: &[u8; 4] = b"CTSG";
pub const IMAGE_MAGIC: &[u8; 4] = b"CTIM";
pub const FORMAT_VERSION: u32 = 1;
pub const CHAIN_HEADER: [&str; 5] = ["iter", "lambda", "delta", "c", "mh_accepts"];

const HEADER_LEN: usize = 16;

fn encode(magic: &[u8; 4], dims: (usize, usize), payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.0 as u32).to_le_bytes());
    out.extend_from_slice(&(dims.1 as u32).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(path: &Path, magic: &[u8; 4], bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "file shorter than the 16-byte header"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let (a, b) = (word(8) as usize, word(12) as usize);
    let expected = a
        .checked_mul(b)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!("payload of {} bytes does not match header ({expected})", payload.len()),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((a, b, data))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_sinogram(path: impl AsRef<Path>, b: &Sinogram) -> Result<()> {
    let bytes = encode(SINOGRAM_MAGIC, (b.n_angles(), b.n_detector()), b.as_slice());
    write_all(path.as_ref(), &bytes)
}

pub fn read_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    let path = path.as_ref();
    let (n_angles, n_detector, data) = decode(path, SINOGRAM_MAGIC, &read_all(path)?)?;
    Sinogram::from_vec(n_angles, n_detector, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_image(path: impl AsRef<Path>, x: &Image) -> Result<()> {
    let bytes = encode(IMAGE_MAGIC, (x.size(), x.size()), x.as_slice());
    write_all(path.as_ref(), &bytes)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let (rows, cols, data) = decode(path, IMAGE_MAGIC, &read_all(path)?)?;
    if rows != cols {
        return Err(Error::format(path, format!("image is {rows}x{cols}, not square")));
    }
    Image::from_vec(rows, data).map_err(|e| Error::format(path, e.to_string()))
}

fn record_fields(r: &ChainRecord) -> [String; 5] {
    [
        r.iter.to_string(),
        format!("{:.16e}", r.lambda),
        format!("{:.16e}", r.delta),
        format!("{:.16e}", r.c),
        r.mh_accepts.to_string(),
    ]
}

/// Appends chain rows to a CSV file, flushing after each one so an
/// interrupted run leaves a readable prefix.
pub struct ChainWriter {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl ChainWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner.write_record(CHAIN_HEADER).map_err(|e| csv_error(&path, e))?;
        inner.flush().map_err(|e| Error::io(&path, e))?;
        Ok(ChainWriter { path, inner })
    }

    pub fn push(&mut self, r: &ChainRecord) -> Result<()> {
        self.inner
            .write_record(record_fields(r))
            .map_err(|e| csv_error(&self.path, e))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

pub fn write_chain(path: impl AsRef<Path>, records: &[ChainRecord]) -> Result<()> {
    let mut w = ChainWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    Ok(())
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<Vec<ChainRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(CHAIN_HEADER.iter().copied()) {
        return Err(Error::format(
            path,
            format!("chain header must be '{}'", CHAIN_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::format(path, format!("row {}: bad {what}", line + 1));
        let int = |i: usize| row[i].trim().parse::<usize>().map_err(|_| bad(CHAIN_HEADER[i]));
        let float = |i: usize| row[i].trim().parse::<f64>().map_err(|_| bad(CHAIN_HEADER[i]));
        out.push(ChainRecord {
            iter: int(0)?,
            lambda: float(1)?,
            delta: float(2)?,
            c: float(3)?,
            mh_accepts: int(4)?,
        });
    }
    Ok(out)
}

/// 16-bit binary PGM of a raw raster, row-major from the top.
pub fn write_pgm_u16(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u16]) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch {
            expected: format!("{width}x{height} raster"),
            found: format!("{} pixels", pixels.len()),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        write!(w, "P5\n{width} {height}\n65535\n")?;
        for p in pixels {
            w.write_all(&p.to_be_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Image scaled so its maximum maps to 65535; negative values clip to 0.
pub fn write_pgm(path: impl AsRef<Path>, x: &Image) -> Result<()> {
    write_pgm_u16(path, x.size(), x.size(), &scale_to_u16(x.as_slice()))
}

pub fn scale_to_u16(values: &[f64]) -> Vec<u16> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v / max).clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect()
}
