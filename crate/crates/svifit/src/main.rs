fn main() {
    std::process::exit(svifit::cli::run(std::env::args_os()));
}
