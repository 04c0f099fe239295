fn main() {
    std::process::exit(triz_agents::cli::run_cli(std::env::args_os()));
}
