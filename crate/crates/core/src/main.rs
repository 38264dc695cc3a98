fn main() {
    std::process::exit(sbp_fdec::cli::run(std::env::args_os()));
}
