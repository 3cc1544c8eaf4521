fn main() {
    std::process::exit(meco_core::cli::main_with(std::env::args_os()));
}
