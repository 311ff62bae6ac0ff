fn main() {
    std::process::exit(misalloc::cli::main_with(std::env::args_os()));
}
