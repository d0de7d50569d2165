fn main() {
    std::process::exit(icd_notes::cli::run_cli(std::env::args_os()));
}
