fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = pinching_cr::cli::parse_and_dispatch(
        &args,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
