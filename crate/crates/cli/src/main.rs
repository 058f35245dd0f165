fn main() {
    std::process::exit(ctcor_cli::main_with_args(std::env::args_os()));
}
