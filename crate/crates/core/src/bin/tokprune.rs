fn main() {
    std::process::exit(tokprune::cli::cli_run(std::env::args_os()));
}
