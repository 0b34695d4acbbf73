fn main() {
    std::process::exit(odeepc::cli::main_with_args(std::env::args_os()));
}
