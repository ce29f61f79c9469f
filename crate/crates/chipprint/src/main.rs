use clap::Parser;

use chipprint::bench::thread_pool;
use chipprint::cli::{run, Cli};
use chipprint::error::exit;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match thread_pool().and_then(|pool| pool.install(|| run(&cli, &mut std::io::stdout()))) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
