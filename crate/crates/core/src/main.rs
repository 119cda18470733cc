fn main() {
    std::process::exit(fracstab::cli::run(std::env::args_os()));
}
