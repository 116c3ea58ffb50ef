fn main() {
    std::process::exit(fkdet::cli::main());
}
