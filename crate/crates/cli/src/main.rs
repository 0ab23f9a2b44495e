use std::path::Path;
use std::process::ExitCode;

use cantor_lab_cli::{config_from_args, exit_code, run, write_outputs, EXIT_CHECK_FAILED, EXIT_OK, EXIT_OTHER};

fn main() -> ExitCode {
    let cfg = match config_from_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    for r in &out.reports {
        let failed = r.failures().count();
        let status = if r.pass { "pass" } else { "FAIL" };
        println!("{}: {status} ({} checks, {failed} failed)", r.statement_id, r.checks.len());
        if let Some(w) = r.worst() {
            println!("  worst: {} = {} {} {}", w.label, w.computed, w.relation.symbol(), w.bound);
        }
        if let Some(serde_json::Value::Array(rows)) = r.data.get("nodes") {
            for row in rows {
                println!("  x_{} = {}", row["k"], row["point"].as_str().unwrap_or(""));
            }
        }
        for n in &r.notes {
            println!("  note: {n}");
        }
    }
    if let Err(e) = write_outputs(Path::new(&cfg.out), &out) {
        eprintln!("error writing output: {e}");
        return ExitCode::from(EXIT_OTHER as u8);
    }
    ExitCode::from(if out.pass() { EXIT_OK } else { EXIT_CHECK_FAILED } as u8)
}
