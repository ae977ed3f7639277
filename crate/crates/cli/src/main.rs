fn main() {
    std::process::exit(qubit_aging_cli::run(std::env::args_os()));
}
