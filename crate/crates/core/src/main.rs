fn main() {
    std::process::exit(ordinal_lab::cli::main_with_args(std::env::args_os()));
}
