fn main() {
    std::process::exit(oodcurate::cli::run(std::env::args_os()));
}
