fn main() {
    std::process::exit(pspin_complexity::cli::run(std::env::args_os()));
}
