fn main() {
    std::process::exit(gkp_cli::run(std::env::args_os()));
}
