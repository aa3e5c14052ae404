fn main() {
    std::process::exit(cavity_raman::cli::run(std::env::args_os()));
}
