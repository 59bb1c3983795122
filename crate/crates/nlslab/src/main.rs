fn main() -> std::process::ExitCode {
    nlslab::cli::main()
}
