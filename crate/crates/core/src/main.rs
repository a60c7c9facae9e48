fn main() {
    std::process::exit(glycopipe::cli::run(std::env::args_os()));
}
