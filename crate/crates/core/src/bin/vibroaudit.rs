fn main() {
    std::process::exit(vibroaudit::cli::run(std::env::args_os()));
}
