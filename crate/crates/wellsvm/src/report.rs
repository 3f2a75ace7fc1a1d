//! CSV and aligned-text renderings of evaluation reports.

use std::fmt::Write as _;

use wellsvm_core::metrics::EvalReport;

fn task_name(r: &EvalReport) -> String {
    serde_json::to_value(r.task)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// `task,metric,runs,mean,std,values` with values separated by `;`.
pub fn to_csv(r: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "metric", "runs", "mean", "std", "values"])
        .expect("in-memory write");
    let task = task_name(r);
    for m in &r.metrics {
        let values: Vec<String> = m.runs.iter().map(|v| format!("{v:?}")).collect();
        w.write_record([
            task.as_str(),
            m.name.as_str(),
            &m.runs.len().to_string(),
            &format!("{:?}", m.mean),
            &format!("{:?}", m.std),
            &values.join(";"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Fixed-width table of `mean ± std` per metric.
pub fn to_text(r: &EvalReport) -> String {
    let width = r.metrics.iter().map(|m| m.name.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "task: {}", task_name(r));
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>8}  {:>8}", "metric", "runs", "mean", "std");
    for m in &r.metrics {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>8.4}  {:>8.4}",
            m.name,
            m.runs.len(),
            m.mean,
            m.std
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use wellsvm_core::learner::TaskKind;

    #[test]
    fn renders_both_forms() {
        let mut r = EvalReport::new(TaskKind::Ssl);
        r.push("accuracy", vec![0.5, 1.0]).unwrap();
        let csv = to_csv(&r);
        assert_eq!(
            csv,
            "task,metric,runs,mean,std,values\nssl,accuracy,2,0.75,0.3535533905932738,0.5;1.0\n"
        );
        let txt = to_text(&r);
        assert!(txt.contains("accuracy       2    0.7500    0.3536"), "{txt}");
    }
}
