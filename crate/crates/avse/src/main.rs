fn main() {
    std::process::exit(avse::cli::run());
}
