fn main() {
    std::process::exit(pdtc::cli::run(std::env::args_os()));
}
