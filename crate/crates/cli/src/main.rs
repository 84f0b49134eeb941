fn main() {
    std::process::exit(tabkit_cli::run(std::env::args_os()));
}
