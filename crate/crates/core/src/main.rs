fn main() {
    std::process::exit(diffpost::cli::main());
}
