use std::io::{stderr, stdout};

fn main() {
    let (mut out, mut err) = (stdout().lock(), stderr().lock());
    let code = zoea_cli::main_with(std::env::args(), &mut zoea_cli::Io { out: &mut out, err: &mut err });
    std::process::exit(code);
}
