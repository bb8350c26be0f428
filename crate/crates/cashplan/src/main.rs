use std::process::exit;

fn main() {
    exit(cashplan::cli::run(std::env::args_os()));
}
