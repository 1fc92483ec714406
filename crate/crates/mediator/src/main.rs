fn main() -> std::process::ExitCode {
    envyfree_mediator::cli::main()
}
