fn main() {
    std::process::exit(vcsel_rul::cli::main_with_args(std::env::args_os()));
}
