fn main() {
    std::process::exit(usaav::experiments::cli::main_with(std::env::args_os()));
}
