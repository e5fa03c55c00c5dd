fn main() {
    std::process::exit(cmqe::cli::run(std::env::args_os()));
}
