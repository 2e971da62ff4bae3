fn main() {
    std::process::exit(mmot_cli::run(std::env::args_os()));
}
