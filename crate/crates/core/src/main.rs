fn main() {
    std::process::exit(cellflow::cli::main_with_args(std::env::args_os()));
}
