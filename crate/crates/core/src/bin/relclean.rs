fn main() {
    std::process::exit(relclean::cli::run_command(std::env::args_os()));
}
