fn main() {
    std::process::exit(dl2u::cli::run(std::env::args_os()));
}
