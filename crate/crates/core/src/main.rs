fn main() {
    std::process::exit(gasket::cli::run(std::env::args_os()));
}
