fn main() {
    std::process::exit(dpd_cli::run_command(std::env::args_os()));
}
