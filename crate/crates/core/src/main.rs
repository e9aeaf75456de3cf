fn main() {
    std::process::exit(gbip::cli::main_with_args(std::env::args_os()));
}
