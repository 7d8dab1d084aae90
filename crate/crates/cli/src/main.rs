fn main() {
    std::process::exit(monosphere_cli::run(std::env::args_os()));
}
