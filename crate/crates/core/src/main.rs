fn main() {
    std::process::exit(unmix::cli::main_with_args(std::env::args_os()));
}
