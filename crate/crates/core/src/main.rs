fn main() {
    std::process::exit(treebary::cli::run_cli(std::env::args_os()));
}
