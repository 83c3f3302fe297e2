fn main() {
    std::process::exit(polyres::cli::main_with_args(std::env::args_os()));
}
