fn main() {
    std::process::exit(liso::harness::cli::run(std::env::args_os()));
}
