use clap::Parser;

use quasisys_cli::args::Cli;
use quasisys_cli::commands::Exit;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Parse as i32 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(n) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("worker pool not resized: {e}");
        }
    }
    let code = match quasisys_cli::run(cli, argv) {
        Ok(exit) => exit as i32,
        Err(e) => {
            eprintln!("error: {e:#}");
            Exit::for_error(&e) as i32
        }
    };
    std::process::exit(code);
}
