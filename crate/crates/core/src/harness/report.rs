//! Selection tallies, convergence tables and their file formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::experiment::{opt_cell, HarnessError, Result};
use crate::engine::{ConvergenceTrace, SelectionLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Rate,
    SampleCount,
    Iteration,
}

impl Stratum {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rate" => Some(Stratum::Rate),
            "sample_count" | "samples" => Some(Stratum::SampleCount),
            "iteration" | "iter" => Some(Stratum::Iteration),
            _ => None,
        }
    }
}

/// A selection log with the conditions of the run that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedLog {
    pub rate: Option<f64>,
    pub sample_count: Option<usize>,
    pub log: SelectionLog,
}

impl TaggedLog {
    pub fn untagged(log: SelectionLog) -> Self {
        TaggedLog {
            rate: None,
            sample_count: None,
            log,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumTally {
    pub key: String,
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub frequencies: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub by: Stratum,
    pub strata: Vec<StratumTally>,
}

impl SelectionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,class,count,frequency\n");
        for s in &self.strata {
            for (class, count) in &s.counts {
                out.push_str(&format!("{},{},{},{}\n", s.key, class, count, s.frequencies[class]));
            }
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Key {
    Int(usize),
    Real(f64),
}

/// Per-class selection frequencies within each stratum. Every
/// (iteration, column) event of a log counts once; constant fallbacks on
/// degenerate columns are not selections and are left out.
pub fn selection_report(logs: &[TaggedLog], by: Stratum) -> Result<SelectionReport> {
    let mut tallies: Vec<(Key, BTreeMap<String, usize>)> = Vec::new();
    for tagged in logs {
        let mut seen = BTreeSet::new();
        for e in &tagged.log.entries {
            if e.fallback || !seen.insert((e.iteration, e.column)) {
                continue;
            }
            let key = match by {
                Stratum::Iteration => Key::Int(e.iteration),
                Stratum::Rate => Key::Real(tagged.rate.ok_or_else(|| HarnessError::Malformed {
                    what: "selection log",
                    reason: "log has no missingness rate attached".into(),
                })?),
                Stratum::SampleCount => Key::Int(tagged.sample_count.ok_or_else(|| HarnessError::Malformed {
                    what: "selection log",
                    reason: "log has no sample count attached".into(),
                })?),
            };
            let slot = match tallies.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    tallies.push((key, BTreeMap::new()));
                    tallies.len() - 1
                }
            };
            *tallies[slot].1.entry(e.class.to_string()).or_insert(0) += 1;
        }
    }
    if tallies.is_empty() {
        return Err(HarnessError::EmptyLogs);
    }
    tallies.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let strata = tallies
        .into_iter()
        .map(|(key, counts)| {
            let total: usize = counts.values().sum();
            let frequencies = counts.iter().map(|(c, &n)| (c.clone(), n as f64 / total as f64)).collect();
            StratumTally {
                key: match key {
                    Key::Int(v) => v.to_string(),
                    Key::Real(v) => v.to_string(),
                },
                total,
                counts,
                frequencies,
            }
        })
        .collect();
    Ok(SelectionReport { by, strata })
}

/// Plot-ready table with one row per recorded iteration (iteration 0 is the
/// baseline fill). Absent values, such as metrics without ground truth,
/// are empty cells.
pub fn convergence_report(traces: &[(String, &ConvergenceTrace)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "iter", "objective", "max_norm_change", "rmse", "wd", "wall_time"])
        .expect("in-memory write");
    for (run, trace) in traces {
        for r in &trace.records {
            w.write_record([
                run.clone(),
                r.iteration.to_string(),
                opt_cell(r.objective),
                opt_cell(r.max_norm_change),
                opt_cell(r.rmse),
                opt_cell(r.wd),
                format!("{:.6}", r.wall_time),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// A gnuplot script drawing `column` of a convergence table against the
/// iteration, one line per run.
pub fn gnuplot_script(csv_path: &str, column: &str, output_png: &str) -> String {
    let index = match column {
        "objective" => 3,
        "max_norm_change" => 4,
        "rmse" => 5,
        "wd" => 6,
        _ => 7,
    };
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,500\n\
         set output '{output_png}'\n\
         set xlabel 'iteration'\n\
         set ylabel '{column}'\n\
         set key off\n\
         plot for [run in system(\"tail -n +2 '{csv_path}' | cut -d, -f1 | uniq\")] \
         '{csv_path}' using 2:(strcol(1) eq run ? ${index} : 1/0) with linespoints\n"
    )
}

fn malformed(what: &'static str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Malformed {
        what,
        reason: e.to_string(),
    }
}

/// Parses a selection log written by the experiment runner.
pub fn parse_selection_log(text: &str) -> Result<SelectionLog> {
    let log: SelectionLog = serde_json::from_str(text).map_err(|e| malformed("selection log", e))?;
    for pair in log.entries.windows(2) {
        if pair[1].iteration < pair[0].iteration {
            return Err(malformed("selection log", "iterations out of order"));
        }
    }
    Ok(log)
}

/// Parses a convergence trace; iterations must start at 0 and increase by one.
pub fn parse_trace(text: &str) -> Result<ConvergenceTrace> {
    let trace: ConvergenceTrace = serde_json::from_str(text).map_err(|e| malformed("convergence trace", e))?;
    for (i, r) in trace.records.iter().enumerate() {
        if r.iteration != i {
            return Err(malformed("convergence trace", format!("record {i} has iteration {}", r.iteration)));
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{IterationRecord, Selection};
    use crate::learners::LearnerClass;

    fn sel(iteration: usize, column: usize, class: LearnerClass) -> Selection {
        Selection {
            iteration,
            column,
            column_name: format!("x{column}"),
            class,
            params: BTreeMap::new(),
            resource_units: 1,
            score: None,
            searched: true,
            fallback: false,
        }
    }

    #[test]
    fn three_to_one_tally() {
        let log = SelectionLog {
            entries: vec![
                sel(1, 0, LearnerClass::LinearRidge),
                sel(1, 1, LearnerClass::LinearRidge),
                sel(2, 0, LearnerClass::LinearRidge),
                sel(2, 1, LearnerClass::RandomForest),
            ],
        };
        let report = selection_report(&[TaggedLog::untagged(log.clone())], Stratum::Iteration).unwrap();
        assert_eq!(report.strata.len(), 2);
        let tagged = TaggedLog {
            rate: Some(0.3),
            sample_count: None,
            log,
        };
        let report = selection_report(&[tagged], Stratum::Rate).unwrap();
        let f = &report.strata[0].frequencies;
        assert_eq!(f["linear_ridge"], 0.75);
        assert_eq!(f["random_forest"], 0.25);
        assert!(selection_report(&[], Stratum::Rate).is_err());
        assert!(selection_report(&[TaggedLog::untagged(SelectionLog::default())], Stratum::Iteration).is_err());
    }

    #[test]
    fn convergence_rows_and_empty_cells() {
        let trace = ConvergenceTrace {
            records: (0..=5)
                .map(|i| IterationRecord {
                    iteration: i,
                    objective: (i > 0).then_some(1.0 / i as f64),
                    max_norm_change: (i > 0).then_some(0.1),
                    rmse: None,
                    wd: None,
                    wall_time: 0.0,
                })
                .collect(),
            stop: None,
        };
        let csv = convergence_report(&[("r".into(), &trace)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "run,iter,objective,max_norm_change,rmse,wd,wall_time");
        assert_eq!(lines[1], "r,0,,,,,0.000000");
        let text = serde_json::to_string(&trace).unwrap();
        assert_eq!(parse_trace(&text).unwrap(), trace);
        assert!(parse_trace("{\"records\":[{\"iteration\":1,\"objective\":null,\"max_norm_change\":null,\"rmse\":null,\"wd\":null,\"wall_time\":0}],\"stop\":null}").is_err());
    }
}
