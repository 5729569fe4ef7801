fn main() {
    std::process::exit(dualcert_cli::run(std::env::args_os()));
}
