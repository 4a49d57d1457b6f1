fn main() {
    std::process::exit(adla::cli::run(std::env::args_os()));
}
