fn main() {
    std::process::exit(tacmap::cli::run(std::env::args_os()));
}
