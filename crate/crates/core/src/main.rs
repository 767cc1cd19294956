fn main() {
    std::process::exit(power_districts::cli::run_cli(std::env::args_os()));
}
