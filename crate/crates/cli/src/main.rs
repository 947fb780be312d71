use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use hcatd_cli::{run, Cli};

const INPUT_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout().lock();
    let code = match run(cli, &mut input, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let cause = cause.to_string();
                if !message.contains(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(INPUT_ERROR)
        }
    };
    let _ = out.flush();
    code
}
