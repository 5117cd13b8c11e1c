fn main() {
    std::process::exit(gpgc::cli::run(std::env::args_os()));
}
