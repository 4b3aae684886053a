use std::process::ExitCode;

use clap::Parser;

use skewchain_cli::{run, Cli, Subcommand};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.subcommand, &cli.config, None) {
        Ok(report) => {
            if cli.subcommand == Subcommand::Verify {
                if let Some(suites) = report.summary["suites"].as_array() {
                    for s in suites {
                        println!("{:8} {:18} {}", s["status"].as_str().unwrap_or(""), s["name"].as_str().unwrap_or(""), s["detail"].as_str().unwrap_or(""));
                    }
                }
            }
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            println!("{}: {} (manifest {})", cli.subcommand.name(), report.status, report.manifest.display());
            if report.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
