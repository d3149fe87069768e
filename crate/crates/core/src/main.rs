fn main() {
    std::process::exit(tdep::cli::main());
}
