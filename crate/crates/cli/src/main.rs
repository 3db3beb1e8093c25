fn main() {
    std::process::exit(factorgp_cli::cli::run_cli(std::env::args_os()));
}
