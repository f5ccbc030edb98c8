fn main() -> std::process::ExitCode {
    chorale::app::cli::main()
}
