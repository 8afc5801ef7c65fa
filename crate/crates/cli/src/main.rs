fn main() {
    std::process::exit(hpp_cli::run(std::env::args_os()));
}
