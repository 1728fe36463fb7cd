fn main() {
    std::process::exit(labelset_cli::run(std::env::args_os()));
}
