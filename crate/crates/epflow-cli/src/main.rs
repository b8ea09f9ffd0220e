use clap::Parser;
use epflow_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(verdict) => {
            for check in &verdict.checks {
                eprintln!(
                    "check {}: {} (value {:.6e}, tolerance {:.1e})",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" },
                    check.value,
                    check.tolerance
                );
            }
            std::process::exit(if verdict.pass { 0 } else { 1 });
        }
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            std::process::exit(err.exit_code());
        }
    }
}
