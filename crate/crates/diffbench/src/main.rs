fn main() {
    std::process::exit(diffbench::cli::run(std::env::args_os()));
}
