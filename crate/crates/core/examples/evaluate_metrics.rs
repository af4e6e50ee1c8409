//! Builds a confusion matrix from predictions and prints the per-class
//! table, including a class that is never predicted.
//!
//! ```bash
//! cargo run -p flick --example evaluate_metrics
//! ```

use flick::evaluation;

fn main() -> flick::Result<()> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
    let pred = [0, 0, 1, 1, 1, 0, 0, 1, 0, 1];
    let names: Vec<String> = ["news", "sport", "weather"].iter().map(|s| s.to_string()).collect();
    let report = evaluation::evaluate(&truth, &pred, 3)?.with_class_names(&names);
    println!("confusion (rows = truth): {:?}", report.confusion.counts);
    print!("{}", report.render_table());
    println!("{}", serde_json::to_string_pretty(&report.per_class[2]).unwrap());
    Ok(())
}
