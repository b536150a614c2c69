fn main() {
    std::process::exit(csta::cli::run(std::env::args_os()));
}
