fn main() {
    std::process::exit(sivkit::cli::run(std::env::args_os()));
}
