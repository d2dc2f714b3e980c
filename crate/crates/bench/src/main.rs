fn main() -> std::process::ExitCode {
    stackgp_bench::cli::main()
}
