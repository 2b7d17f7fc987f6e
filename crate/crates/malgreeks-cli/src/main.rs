fn main() {
    std::process::exit(malgreeks_cli::cli_main(std::env::args_os()));
}
