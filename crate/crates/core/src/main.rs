fn main() {
    std::process::exit(dogfight::cli::run(std::env::args_os()));
}
