fn main() {
    std::process::exit(tiltprior_cli::run(std::env::args_os()));
}
