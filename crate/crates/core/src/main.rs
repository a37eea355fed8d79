fn main() {
    std::process::exit(sni_sight::cli::main_with_args(std::env::args_os()));
}
