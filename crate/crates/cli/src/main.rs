fn main() {
    std::process::exit(rulsif_cli::run(std::env::args_os()));
}
