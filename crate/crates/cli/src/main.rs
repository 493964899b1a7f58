fn main() {
    std::process::exit(stemrisk_cli::run(std::env::args_os()));
}
