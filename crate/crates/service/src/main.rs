fn main() -> std::process::ExitCode {
    idiom_graph_service::cli::main()
}
