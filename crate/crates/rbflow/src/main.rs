fn main() {
    std::process::exit(rbflow::cli::main_entry());
}
