fn main() {
    std::process::exit(atfrac::cli::main_with_args(std::env::args_os()));
}
