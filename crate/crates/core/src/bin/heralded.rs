fn main() {
    std::process::exit(heralded::cli::run(std::env::args_os()));
}
