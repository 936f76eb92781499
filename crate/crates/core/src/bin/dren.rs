fn main() -> std::process::ExitCode {
    dren::cli::main()
}
