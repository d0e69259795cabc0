fn main() {
    std::process::exit(rde_core::cli::run(std::env::args_os()));
}
