fn main() {
    std::process::exit(wscov::cli::main());
}
