fn main() {
    std::process::exit(bandlab::cli::run(std::env::args_os()));
}
