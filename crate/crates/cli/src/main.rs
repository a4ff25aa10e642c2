fn main() {
    std::process::exit(bsa_cli::run(std::env::args_os()));
}
