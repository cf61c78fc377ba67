fn main() {
    std::process::exit(dlctx::cli::main_with_args(std::env::args_os()));
}
