fn main() {
    std::process::exit(bridgekit::cli::run_cli(std::env::args_os()));
}
