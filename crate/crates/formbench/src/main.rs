fn main() {
    std::process::exit(formbench::cli::main_from(std::env::args_os()));
}
