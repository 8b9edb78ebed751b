fn main() {
    std::process::exit(jot_core::cli::main_with(std::env::args_os()));
}
