fn main() {
    std::process::exit(oseen_lab::cli::run(std::env::args_os()));
}
