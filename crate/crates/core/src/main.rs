fn main() {
    std::process::exit(pr_kaczmarz::harness::cli::run(std::env::args_os()));
}
