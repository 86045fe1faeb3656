fn main() {
    std::process::exit(glucolens::cli::run(std::env::args_os()));
}
