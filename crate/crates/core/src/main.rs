fn main() {
    std::process::exit(ucc::cli::run(std::env::args_os()));
}
