//! Runs the three-layer extraction over the bundled reports with the
//! deterministic mock client and prints the per-attribute accuracy table.

use anyhow::{Context, Result};
use crashsynth::extraction::{
    build_prompt, evaluate_accuracy, extract_abstract, load_reports, mock_from_reports, Layer, PromptPattern,
    RetryPolicy,
};
use crashsynth::fixtures::reports_dir;

fn main() -> Result<()> {
    let reports = load_reports(&reports_dir())?;
    let first = reports.first().context("no bundled reports")?;
    println!("{}\n", build_prompt(&PromptPattern::standard(Layer::Environment), &first.report_text)?);

    let mock = mock_from_reports(&reports);
    let mut preds = Vec::new();
    let mut gold = Vec::new();
    for r in &reports {
        let a = extract_abstract(&mock, &r.report_text, &RetryPolicy::immediate())?;
        println!("{}: {} participants at {}", r.name, a.participants.len(), a.collision_location.label());
        preds.push(a);
        gold.extend(r.ground_truth.clone());
    }
    print!("\n{}", evaluate_accuracy(&preds, &gold)?.to_csv());
    Ok(())
}
