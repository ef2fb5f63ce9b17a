fn main() {
    std::process::exit(imagan_cli::run_cli(std::env::args_os()));
}
