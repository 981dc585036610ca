fn main() {
    std::process::exit(rsrelay::harness::cli::main_with_args(std::env::args_os()));
}
