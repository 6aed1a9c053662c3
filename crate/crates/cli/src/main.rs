fn main() {
    std::process::exit(feec_heat_cli::run(std::env::args_os()));
}
