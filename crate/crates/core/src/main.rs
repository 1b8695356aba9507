fn main() {
    std::process::exit(gnperc::cli::run(std::env::args_os()));
}
