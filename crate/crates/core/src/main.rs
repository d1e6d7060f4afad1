fn main() -> std::process::ExitCode {
    modframe::cli::run()
}
