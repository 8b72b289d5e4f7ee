fn main() {
    std::process::exit(frogcert::cli::main_entry());
}
