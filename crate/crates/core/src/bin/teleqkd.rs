fn main() {
    std::process::exit(teleqkd::cli::run(std::env::args_os()));
}
