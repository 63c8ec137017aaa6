fn main() {
    std::process::exit(mirrorlab::cli::cli_main(std::env::args()));
}
