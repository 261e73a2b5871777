fn main() {
    std::process::exit(entrobar::cli::main_with_args(std::env::args_os()));
}
