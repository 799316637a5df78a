fn main() {
    std::process::exit(smoothcert_cli::run(std::env::args_os()));
}
