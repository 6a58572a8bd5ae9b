fn main() {
    std::process::exit(adhdp::harness::cli::main_with_args(std::env::args_os()));
}
