fn main() {
    std::process::exit(magrev::cli::main_with_args(std::env::args_os()));
}
