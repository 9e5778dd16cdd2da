//! Per-(trial, system) score summaries.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::campaign::{Campaign, Role};
use crate::log::LogRecord;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub trial_id: String,
    pub system: String,
    pub role: Role,
    pub scores: Vec<u8>,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemSummary {
    pub system: String,
    pub role: Role,
    pub rated_cells: usize,
    /// Unweighted mean of the non-empty cell means.
    pub mean_of_means: Option<f64>,
    pub median_of_means: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub campaign: String,
    pub cells: Vec<Cell>,
    pub systems: Vec<SystemSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

/// Replays `records` with last-write-wins per (listener, trial) and
/// summarizes the surviving scores.
pub fn aggregate(campaign: &Campaign, records: &[LogRecord]) -> Aggregate {
    let mut latest: BTreeMap<(&str, &str), &LogRecord> = BTreeMap::new();
    for r in records {
        if let LogRecord::Ratings {
            campaign: c,
            listener_id,
            trial_id,
            ..
        } = r
        {
            if *c == campaign.id {
                latest.insert((listener_id.as_str(), trial_id.as_str()), r);
            }
        }
    }
    let mut by_cell: BTreeMap<(&str, &str), Vec<u8>> = BTreeMap::new();
    for r in latest.values() {
        if let LogRecord::Ratings { trial_id, scores, .. } = r {
            for s in scores {
                by_cell.entry((trial_id.as_str(), s.system.as_str())).or_default().push(s.score);
            }
        }
    }

    let mut cells = Vec::new();
    for trial in &campaign.trials {
        for sys in &campaign.systems {
            let scores = by_cell.remove(&(trial.id.as_str(), sys.name.as_str())).unwrap_or_default();
            let values: Vec<f64> = scores.iter().map(|s| f64::from(*s)).collect();
            cells.push(Cell {
                trial_id: trial.id.clone(),
                system: sys.name.clone(),
                role: sys.role,
                mean: mean(&values),
                median: median(&values),
                scores,
            });
        }
    }
    let systems = campaign
        .systems
        .iter()
        .map(|sys| {
            let means: Vec<f64> = cells
                .iter()
                .filter(|c| c.system == sys.name)
                .filter_map(|c| c.mean)
                .collect();
            SystemSummary {
                system: sys.name.clone(),
                role: sys.role,
                rated_cells: means.len(),
                mean_of_means: mean(&means),
                median_of_means: median(&means),
            }
        })
        .collect();
    Aggregate {
        campaign: campaign.id.clone(),
        cells,
        systems,
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Candidate => "candidate",
        Role::LowAnchor => "low_anchor",
        Role::HighAnchor => "high_anchor",
        Role::Natural => "natural",
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn quoted(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl Aggregate {
    /// One row per cell, then one `overall` row per system. Empty cells
    /// leave mean and median blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_id,system,role,n,mean,median\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.trial_id,
                quoted(&c.system),
                role_name(c.role),
                c.scores.len(),
                num(c.mean),
                num(c.median)
            );
        }
        for s in &self.systems {
            let _ = writeln!(
                out,
                "overall,{},{},{},{},{}",
                quoted(&s.system),
                role_name(s.role),
                s.rated_cells,
                num(s.mean_of_means),
                num(s.median_of_means)
            );
        }
        out
    }

    pub fn cell(&self, trial_id: &str, system: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.trial_id == trial_id && c.system == system)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{Stimulus, SystemInfo, Task, Trial};
    use crate::log::ScoredStimulus;

    fn campaign() -> Campaign {
        let systems: Vec<SystemInfo> = ["A", "B", "C"]
            .iter()
            .map(|n| SystemInfo {
                name: n.to_string(),
                role: Role::Candidate,
            })
            .collect();
        Campaign {
            id: "c".into(),
            task: Task::Naturalness,
            prompt: "p".into(),
            seed: 0,
            trials: (1..=2)
                .map(|i| Trial {
                    id: format!("t{i:02}"),
                    sentence: "s".into(),
                    reference: None,
                    stimuli: systems
                        .iter()
                        .map(|s| Stimulus {
                            system: s.name.clone(),
                            path: "x.wav".into(),
                        })
                        .collect(),
                })
                .collect(),
            systems,
        }
    }

    fn rating(listener: &str, trial: &str, scores: &[(&str, u8)]) -> LogRecord {
        LogRecord::Ratings {
            campaign: "c".into(),
            listener_id: listener.into(),
            trial_id: trial.into(),
            scores: scores
                .iter()
                .map(|(s, v)| ScoredStimulus {
                    key: format!("k{s}"),
                    system: s.to_string(),
                    score: *v,
                })
                .collect(),
            timestamp_ms: 0,
        }
    }

    #[test]
    fn cells_and_overall() {
        let log = vec![
            rating("l1", "t01", &[("A", 70), ("B", 60), ("C", 10)]),
            rating("l2", "t01", &[("A", 70), ("B", 80), ("C", 20)]),
            rating("l1", "t02", &[("A", 40), ("B", 50), ("C", 0)]),
        ];
        let agg = aggregate(&campaign(), &log);
        assert_eq!(agg.cell("t01", "A").unwrap().mean, Some(70.0));
        assert_eq!(agg.cell("t01", "B").unwrap().mean, Some(70.0));
        assert_eq!(agg.cell("t01", "B").unwrap().median, Some(70.0));
        let a = &agg.systems[0];
        assert_eq!((a.rated_cells, a.mean_of_means), (2, Some(55.0)));
    }

    #[test]
    fn last_write_wins() {
        let log = vec![
            rating("l1", "t01", &[("A", 10), ("B", 10), ("C", 10)]),
            rating("l1", "t01", &[("A", 90), ("B", 90), ("C", 90)]),
        ];
        let agg = aggregate(&campaign(), &log);
        assert_eq!(agg.cell("t01", "A").unwrap().scores, vec![90]);
    }

    #[test]
    fn empty_cells_are_blank_in_csv() {
        let agg = aggregate(&campaign(), &[]);
        let csv = agg.to_csv();
        assert!(csv.lines().any(|l| l == "t01,A,candidate,0,,"));
        assert!(csv.lines().any(|l| l == "overall,A,candidate,0,,"));
        assert_eq!(csv.lines().count(), 1 + 6 + 3);
    }
}
