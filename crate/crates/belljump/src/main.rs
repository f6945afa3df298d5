fn main() {
    std::process::exit(belljump::cli::run());
}
