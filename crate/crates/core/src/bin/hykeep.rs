fn main() {
    std::process::exit(hykeep::cli::main_with_args(std::env::args_os()));
}
