fn main() {
    std::process::exit(ptcm_cli::run(std::env::args_os()));
}
