fn main() {
    std::process::exit(wcospec::cli::run(std::env::args_os()));
}
