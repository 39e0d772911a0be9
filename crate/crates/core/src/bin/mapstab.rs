fn main() {
    std::process::exit(mapstab::cli::run(std::env::args_os()));
}
