fn main() {
    std::process::exit(anneal_cli::main_with(std::env::args_os()));
}
