fn main() {
    std::process::exit(fallkit::cli::run());
}
