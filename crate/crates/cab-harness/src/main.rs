fn main() {
    std::process::exit(cab_harness::cli::cli_main(std::env::args_os()));
}
