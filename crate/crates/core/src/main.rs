fn main() {
    std::process::exit(cofrag::cli::main_from(std::env::args_os()));
}
