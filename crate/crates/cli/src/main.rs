fn main() {
    std::process::exit(clre_cli::run(std::env::args_os()));
}
