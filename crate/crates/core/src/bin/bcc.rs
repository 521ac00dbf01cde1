fn main() {
    std::process::exit(bcc::cli::run(std::env::args_os()));
}
