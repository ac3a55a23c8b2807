fn main() {
    std::process::exit(lublock::cli::run(std::env::args_os()));
}
