fn main() {
    std::process::exit(mcner::cli::run(std::env::args_os()));
}
