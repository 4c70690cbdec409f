use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::grid::AblationArm;
use super::BenchError;

/// One (family, arm, seed) outcome. `assignment_cost` is measured against
/// the provider fitness for every arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: String,
    pub arm: AblationArm,
    pub seed: u64,
    pub success: bool,
    pub planned_makespan: f64,
    pub realized_makespan: f64,
    pub idle_total: f64,
    pub replans: usize,
    pub solver_status: String,
    pub wall_time: Option<f64>,
    pub assignment_cost: f64,
    pub error: Option<String>,
}

impl CellResult {
    pub fn failed(family: &str, arm: AblationArm, seed: u64, error: String) -> Self {
        Self {
            family: family.to_string(),
            arm,
            seed,
            success: false,
            planned_makespan: f64::NAN,
            realized_makespan: f64::NAN,
            idle_total: f64::NAN,
            replans: 0,
            solver_status: "Error".into(),
            wall_time: None,
            assignment_cost: f64::NAN,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<CellResult>,
}

const COLUMNS: [&str; 12] = [
    "family",
    "arm",
    "seed",
    "success",
    "planned_makespan",
    "realized_makespan",
    "idle_total",
    "replans",
    "solver_status",
    "wall_time",
    "assignment_cost",
    "error",
];

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl BenchReport {
    /// CSV with a header row. Without `timing` the wall-time column is left
    /// empty so the file is reproducible.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let mut r = r.clone();
            if !timing {
                r.wall_time = None;
            }
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers().map_err(|e| BenchError::Csv(e.to_string()))?.iter().map(String::from).collect();
        if header != COLUMNS {
            return Err(BenchError::Csv(format!("unexpected header {header:?}")));
        }
        let rows = rd.deserialize().collect::<Result<Vec<CellResult>, _>>().map_err(|e| BenchError::Csv(e.to_string()))?;
        Ok(Self { rows })
    }

    fn families(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.family.as_str()) {
                out.push(&r.family);
            }
        }
        out
    }

    fn arms(&self) -> Vec<AblationArm> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.arm) {
                out.push(r.arm);
            }
        }
        out
    }

    /// Mean of `metric` over the cells of one (family, arm); error cells
    /// are skipped.
    pub fn mean_of(&self, family: &str, arm: AblationArm, metric: impl Fn(&CellResult) -> f64) -> Option<f64> {
        mean(self.rows.iter().filter(|r| r.family == family && r.arm == arm && r.error.is_none()).map(metric))
    }

    /// Success rate of one (family, arm); error cells count as failures.
    pub fn success_rate(&self, family: &str, arm: AblationArm) -> Option<f64> {
        mean(
            self.rows
                .iter()
                .filter(|r| r.family == family && r.arm == arm)
                .map(|r| if r.success { 1.0 } else { 0.0 }),
        )
    }

    /// Tables of arms by family with a macro-average column, one per
    /// metric. Timing is left out so the output is reproducible.
    pub fn to_markdown(&self) -> String {
        let families = self.families();
        let arms = self.arms();
        let mut out = String::from("# Benchmark report\n");
        let tables: [(&str, &dyn Fn(&str, AblationArm) -> Option<f64>); 5] = [
            ("Success rate", &|f, a| self.success_rate(f, a)),
            ("Planned makespan (mean)", &|f, a| self.mean_of(f, a, |r| r.planned_makespan)),
            ("Realized makespan (mean)", &|f, a| self.mean_of(f, a, |r| r.realized_makespan)),
            ("Idle time (mean)", &|f, a| self.mean_of(f, a, |r| r.idle_total)),
            ("Assignment cost (mean)", &|f, a| self.mean_of(f, a, |r| r.assignment_cost)),
        ];
        for (title, metric) in tables {
            let _ = write!(out, "\n## {title}\n\n| Arm |");
            for f in &families {
                let _ = write!(out, " {f} |");
            }
            out.push_str(" Avg |\n|---|");
            out.push_str(&"---|".repeat(families.len() + 1));
            out.push('\n');
            for &a in &arms {
                let values: Vec<Option<f64>> = families.iter().map(|f| metric(f, a)).collect();
                let avg = mean(values.iter().flatten().copied());
                let _ = write!(out, "| {a} |");
                for v in &values {
                    let _ = write!(out, " {} |", cell(*v));
                }
                let _ = writeln!(out, " {} |", cell(avg));
            }
        }
        let errors = self.rows.iter().filter(|r| r.error.is_some()).count();
        if errors > 0 {
            let _ = write!(out, "\n{errors} cell(s) failed; see the CSV `error` column.\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(family: &str, arm: AblationArm, seed: u64, makespan: f64, success: bool) -> CellResult {
        CellResult {
            family: family.into(),
            arm,
            seed,
            success,
            planned_makespan: makespan,
            realized_makespan: makespan * 1.1,
            idle_total: 0.25,
            replans: 1,
            solver_status: "Optimal".into(),
            wall_time: Some(0.123),
            assignment_cost: 1.0 / 3.0,
            error: None,
        }
    }

    #[test]
    fn empty_report_keeps_headers() {
        let r = BenchReport::default();
        assert_eq!(r.to_csv(true).trim_end(), COLUMNS.join(","));
        assert_eq!(BenchReport::from_csv(&r.to_csv(true)).unwrap(), r);
        assert!(r.to_markdown().contains("| Arm | Avg |"));
    }

    #[test]
    fn csv_round_trip_renders_identically() {
        let mut r = BenchReport {
            rows: vec![
                row("temporal", AblationArm::Base, 0, 10.0, true),
                row("temporal", AblationArm::MilpFitness, 0, 9.0, false),
                row("heterogeneous", AblationArm::Base, 1, 7.5, true),
                CellResult::failed("heterogeneous", AblationArm::MilpFitness, 1, "boom, \"quoted\"".into()),
            ],
        };
        let text = r.to_csv(false);
        let back = BenchReport::from_csv(&text).unwrap();
        assert_eq!(back.to_csv(false), text);
        assert_eq!(back.to_markdown(), r.to_markdown());
        for row in &mut r.rows {
            row.wall_time = None;
        }
        assert_eq!(back.rows[..3], r.rows[..3]);
    }

    #[test]
    fn macro_average() {
        let r = BenchReport {
            rows: vec![
                row("a", AblationArm::Base, 0, 10.0, true),
                row("a", AblationArm::Base, 1, 20.0, false),
                row("b", AblationArm::Base, 0, 6.0, true),
            ],
        };
        assert_eq!(r.success_rate("a", AblationArm::Base), Some(0.5));
        let md = r.to_markdown();
        assert!(md.contains("| Base | 0.500 | 1.000 | 0.750 |"), "{md}");
        assert!(md.contains("| Base | 15.000 | 6.000 | 10.500 |"), "{md}");
    }
}
