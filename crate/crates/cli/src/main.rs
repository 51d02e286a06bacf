fn main() {
    std::process::exit(dynfit_cli::cli_main(std::env::args_os()));
}
