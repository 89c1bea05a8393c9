fn main() {
    std::process::exit(cointcast::cli::main_with_args(std::env::args_os()));
}
