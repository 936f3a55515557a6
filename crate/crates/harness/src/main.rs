fn main() {
    std::process::exit(genbound_harness::cli::run(std::env::args_os()));
}
