fn main() {
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    let stderr = std::io::stderr().lock();
    std::process::exit(ucpo::cli::cli_dispatch(std::env::args_os(), stdin, stdout, stderr));
}
