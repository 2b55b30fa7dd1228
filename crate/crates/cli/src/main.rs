fn main() {
    std::process::exit(kufarev_cli::main_with_args(std::env::args_os()));
}
