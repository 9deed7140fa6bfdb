fn main() {
    std::process::exit(corr_ard::cli::main_entry());
}
