fn main() {
    std::process::exit(prland::cli::main_with_args(std::env::args_os()));
}
