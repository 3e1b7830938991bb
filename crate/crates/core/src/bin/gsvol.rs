fn main() {
    std::process::exit(gsvol::cli::main_with_args(std::env::args_os()));
}
