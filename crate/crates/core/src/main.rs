fn main() {
    std::process::exit(travelwave::cli::run(std::env::args_os()));
}
