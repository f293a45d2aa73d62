fn main() {
    std::process::exit(tgib::cli::run());
}
