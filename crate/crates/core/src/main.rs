fn main() {
    std::process::exit(ulab::cli::parse_and_dispatch(std::env::args_os()));
}
