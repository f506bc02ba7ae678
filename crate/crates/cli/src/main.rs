fn main() {
    std::process::exit(aggrolab_cli::run_command(std::env::args_os()));
}
