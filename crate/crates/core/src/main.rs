fn main() {
    std::process::exit(slidescreen::cli::run(std::env::args_os()));
}
