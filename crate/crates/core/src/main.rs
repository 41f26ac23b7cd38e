fn main() {
    std::process::exit(ppoisson::cli::main_with_args(std::env::args_os()));
}
