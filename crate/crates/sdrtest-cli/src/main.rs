use std::io::{stderr, stdout};

fn main() {
    let code = sdrtest_cli::run_from(std::env::args_os(), &mut stdout().lock(), &mut stderr().lock());
    std::process::exit(code);
}
