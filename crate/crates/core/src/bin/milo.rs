fn main() {
    std::process::exit(milo::harness::cli_dispatch(std::env::args_os()));
}
