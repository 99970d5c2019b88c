fn main() {
    std::process::exit(zsadapt::cli::cli_main(std::env::args_os()));
}
