//! Runs the bundled scenarios and prints the CSV table, then the JSON report
//! of the last run.
//!
//! cargo run --release --example scenario_reports

use ftswitch::shell::{bundled, report_csv, report_json, Scenario};

fn main() {
    let mut last = None;
    for (i, (_, text)) in bundled::CANONICAL.iter().enumerate() {
        let out = Scenario::parse(text).unwrap().run();
        let csv = report_csv(&out.report);
        let rows = csv.lines().skip(usize::from(i > 0));
        for line in rows {
            println!("{line}");
        }
        last = Some(out);
    }
    println!();
    println!("{}", report_json(&last.unwrap()));
}
