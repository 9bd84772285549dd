fn main() {
    std::process::exit(eigtrack::cli::run(std::env::args_os()));
}
