//! Re-records every cassette in `transcripts/` from `transcripts/scripts.json`.
//! Run after changing prompt text: `cargo run -p scenesmith-core --example author_cassettes`.

use std::path::PathBuf;

use scenesmith_core::planner::record_scripts;
use scenesmith_core::retrieval::MockEmbedder;

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../transcripts");
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| root.join("scripts.json"));
    let runs = match record_scripts(&path, None, &MockEmbedder::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    for run in runs {
        let status = match &run.outcome {
            Ok(out) => format!(
                "{} actions, {}/{} executed, {} instances",
                out.plan.actions.len(),
                out.report.run.executed_count,
                out.report.run.total,
                out.scene.instances.len()
            ),
            Err(e) => format!("failed: {e}"),
        };
        let unused = if run.unused > 0 { format!(" ({} unused replies)", run.unused) } else { String::new() };
        println!("{:<26} {status}{unused}", run.name);
    }
}
