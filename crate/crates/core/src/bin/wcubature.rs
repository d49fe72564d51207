fn main() {
    std::process::exit(wcubature::cli::run(std::env::args_os()));
}
