fn main() {
    std::process::exit(cabin_ews::cli::run(std::env::args_os()));
}
