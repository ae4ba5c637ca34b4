fn main() {
    std::process::exit(betainf::cli::run(std::env::args_os()));
}
