fn main() -> std::process::ExitCode {
    spinerecon::cli::main_with_args(std::env::args_os())
}
