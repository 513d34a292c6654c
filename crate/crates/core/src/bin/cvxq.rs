fn main() {
    std::process::exit(cvxq::cli::main_with_args(std::env::args_os()));
}
