fn main() {
    std::process::exit(tdbem::cli::main_with_args(std::env::args_os()));
}
