fn main() {
    std::process::exit(starksense::cli::run(std::env::args_os()));
}
