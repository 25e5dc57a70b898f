fn main() {
    std::process::exit(mipt::cli::main_with_args(std::env::args_os()));
}
