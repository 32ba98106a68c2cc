fn main() {
    std::process::exit(singular_cotangent_cli::run(std::env::args_os()));
}
