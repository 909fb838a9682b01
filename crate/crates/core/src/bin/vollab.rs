fn main() {
    std::process::exit(vollab::cli::run(std::env::args_os()));
}
