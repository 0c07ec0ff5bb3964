fn main() {
    std::process::exit(historic::cli::main_with_args(std::env::args_os()));
}
