fn main() {
    std::process::exit(sce::cli::run(std::env::args_os()));
}
