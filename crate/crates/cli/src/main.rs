fn main() {
    std::process::exit(precond_risk_cli::cli_main(std::env::args_os()));
}
