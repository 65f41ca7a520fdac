fn main() {
    std::process::exit(safevi::cli::run(std::env::args().collect()));
}
