fn main() {
    std::process::exit(vastab_cli::run(std::env::args_os()));
}
