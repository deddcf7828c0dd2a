fn main() {
    std::process::exit(mvl::cli::run(std::env::args_os()));
}
