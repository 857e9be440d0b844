fn main() {
    std::process::exit(circdet::cli::run(std::env::args_os()));
}
