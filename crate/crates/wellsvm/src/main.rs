fn main() {
    std::process::exit(wellsvm::cli::main_with_args(std::env::args_os()));
}
