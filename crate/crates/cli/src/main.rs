fn main() {
    std::process::exit(gibbsflow::cli::run(std::env::args_os()));
}
