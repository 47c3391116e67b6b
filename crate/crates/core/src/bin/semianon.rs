fn main() {
    std::process::exit(semianon::cli::main_with_args(std::env::args_os()));
}
