use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let outcome = pairlab::cli::dispatch(&args);
    std::io::stdout().write_all(outcome.stdout.as_bytes()).ok();
    std::io::stderr().write_all(outcome.stderr.as_bytes()).ok();
    std::process::exit(outcome.code);
}
