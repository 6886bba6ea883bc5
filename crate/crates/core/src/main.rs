fn main() {
    std::process::exit(ma_radial::cli::run(std::env::args_os()));
}
