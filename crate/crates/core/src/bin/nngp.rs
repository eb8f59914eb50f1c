fn main() {
    std::process::exit(nngp::cli::run(std::env::args_os()));
}
