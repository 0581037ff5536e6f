fn main() {
    std::process::exit(exotic_systems::cli::main_with_args(std::env::args_os()));
}
