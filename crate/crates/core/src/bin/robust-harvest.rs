fn main() {
    std::process::exit(robust_harvest::cli::main_from(std::env::args_os()));
}
