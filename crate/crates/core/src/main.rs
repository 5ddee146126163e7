fn main() {
    std::process::exit(lenglart::cli::run(std::env::args_os()));
}
