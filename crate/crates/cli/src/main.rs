use clap::Parser;
use serde_json::json;

use sdph_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(n) = std::env::var("SDPH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(summary) => {
            let mut summary = summary;
            summary["status"] = json!("ok");
            println!("{summary}");
        }
        Err(e) => {
            let code = e.exit_code();
            println!("{}", json!({ "status": "error", "exit_code": code, "error": e.to_string() }));
            eprintln!("error: {e}");
            std::process::exit(code);
        }
    }
}
