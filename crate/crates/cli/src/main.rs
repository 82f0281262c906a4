fn main() -> std::process::ExitCode {
    proper_rank_cli::main_with_args(std::env::args_os())
}
