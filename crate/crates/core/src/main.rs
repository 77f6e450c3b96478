fn main() {
    std::process::exit(trialmon::cli::main_with_args(std::env::args_os()));
}
