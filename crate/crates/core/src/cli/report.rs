//! Verification rows, the CSV report and the console summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const CSV_HEADER: &str = "task,point_index,coords,closed_form,oracle,abs_diff,pass";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Comparison,
    /// The parallel-gradient hypothesis failed, so no closed form applies.
    Hypothesis,
    /// The metric or frame degenerated at the point.
    Degenerate,
}

/// One comparison at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// `task:quantity`.
    pub task: String,
    pub point_index: usize,
    pub coords: Vec<f64>,
    pub closed_form: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    pub pass: bool,
    pub kind: RowKind,
}

impl Row {
    /// A comparison passing when `|closed − oracle| ≤ tol · max(1, |oracle|)`.
    pub fn compare(task: String, point_index: usize, coords: &[f64], closed_form: f64, oracle: f64, tol: f64) -> Row {
        let abs_diff = (closed_form - oracle).abs();
        Row {
            task,
            point_index,
            coords: coords.to_vec(),
            closed_form,
            oracle,
            abs_diff,
            pass: abs_diff <= tol * oracle.abs().max(1.0),
            kind: RowKind::Comparison,
        }
    }

    /// A failed row with no comparable values.
    pub fn failure(task: String, point_index: usize, coords: &[f64], kind: RowKind, closed_form: f64) -> Row {
        Row {
            task,
            point_index,
            coords: coords.to_vec(),
            closed_form,
            oracle: f64::NAN,
            abs_diff: f64::NAN,
            pass: false,
            kind,
        }
    }

    fn csv_line(&self, out: &mut String) {
        let coords: Vec<String> = self.coords.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{}",
            self.task,
            self.point_index,
            coords.join(";"),
            self.closed_form,
            self.oracle,
            self.abs_diff,
            self.pass
        );
    }
}

/// Per-label aggregate of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSummary {
    pub rows: usize,
    pub failures: usize,
    pub worst_diff: f64,
    pub hypothesis_violations: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: String,
    /// Sorted by task label, then point index.
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(header: String, mut rows: Vec<Row>) -> Report {
        // stable: rows of one (task, point) keep their evaluation order
        rows.sort_by(|a, b| a.task.cmp(&b.task).then(a.point_index.cmp(&b.point_index)));
        Report { header, rows }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// 0 when every row passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            r.csv_line(&mut out);
        }
        out
    }

    pub fn summary(&self) -> BTreeMap<String, TaskSummary> {
        let mut map: BTreeMap<String, TaskSummary> = BTreeMap::new();
        for r in &self.rows {
            let s = map.entry(r.task.clone()).or_insert(TaskSummary {
                rows: 0,
                failures: 0,
                worst_diff: 0.0,
                hypothesis_violations: 0,
                degenerate: 0,
            });
            s.rows += 1;
            s.failures += usize::from(!r.pass);
            if r.abs_diff.is_finite() {
                s.worst_diff = s.worst_diff.max(r.abs_diff);
            }
            s.hypothesis_violations += usize::from(r.kind == RowKind::Hypothesis);
            s.degenerate += usize::from(r.kind == RowKind::Degenerate);
        }
        map
    }

    /// Header, per-label table and totals for the console.
    pub fn render_table(&self) -> String {
        let summary = self.summary();
        let width = summary.keys().map(String::len).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header);
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>12}  {:>10}  {:>10}",
            "task", "rows", "failed", "worst diff", "hypothesis", "degenerate"
        );
        for (task, s) in &summary {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>12.3e}  {:>10}  {:>10}",
                task, s.rows, s.failures, s.worst_diff, s.hypothesis_violations, s.degenerate
            );
        }
        let failed: usize = summary.values().map(|s| s.failures).sum();
        let violations: usize = summary.values().map(|s| s.hypothesis_violations).sum();
        let _ = writeln!(
            out,
            "summary: {} rows, {} failed, {} hypothesis violations: {}",
            self.rows.len(),
            failed,
            violations,
            if failed == 0 { "PASS" } else { "FAIL" }
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_pass_rule() {
        assert!(Row::compare("t".into(), 0, &[], 1001.0, 1000.0, 1e-3).pass);
        assert!(!Row::compare("t".into(), 0, &[], 1.002, 1.0, 1e-3).pass);
        assert!(Row::compare("t".into(), 0, &[], 1e-4, 0.0, 1e-3).pass);
        assert!(!Row::compare("t".into(), 0, &[], f64::NAN, 0.0, 1e-3).pass);
    }

    #[test]
    fn csv_format_and_order() {
        let rows = vec![
            Row::compare("b".into(), 1, &[0.5, 2.0], 1.0, 1.0, 1e-9),
            Row::compare("a".into(), 2, &[1.0], 0.1, 0.1, 1e-9),
            Row::failure("a".into(), 0, &[1.0], RowKind::Degenerate, f64::NAN),
        ];
        let csv = Report::new("h".into(), rows).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "a,0,1.0000000000000000e0,NaN,NaN,NaN,false");
        assert!(lines[2].starts_with("a,2,"));
        assert_eq!(
            lines[3],
            "b,1,5.0000000000000000e-1;2.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,true"
        );
    }
}
