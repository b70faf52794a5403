fn main() {
    std::process::exit(center_manifold::cli::main_with_args(std::env::args_os()));
}
