fn main() {
    std::process::exit(stostab::cli::run(std::env::args_os()));
}
