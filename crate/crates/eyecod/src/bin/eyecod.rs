fn main() {
    std::process::exit(eyecod::cli::run(std::env::args_os()));
}
