fn main() -> std::process::ExitCode {
    apsumma::cli::run(std::env::args_os())
}
