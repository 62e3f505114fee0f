fn main() {
    std::process::exit(quickmatch::cli::run());
}
