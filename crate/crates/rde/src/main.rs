fn main() {
    std::process::exit(rde::cli::run(std::env::args()));
}
