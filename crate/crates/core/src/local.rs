//! Greedy descent over single-DOF toggles and the topology-sensitivity map.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reanalysis::{Counters, Move, StructureState};

/// Wall clock that reads zero when timing is off. Instants are never
/// requested on targets without a clock.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: Option<std::time::Instant>,
}

impl Stopwatch {
    pub fn new(enabled: bool) -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Stopwatch { start: enabled.then(std::time::Instant::now) }
        }
        #[cfg(target_arch = "wasm32")]
        {
            let _ = enabled;
            Stopwatch {}
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalStop {
    /// No single toggle improves the objective: the word is 1-swap optimal.
    NoImprovingMove,
    /// The last commit improved f by less than eps_loc relative.
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub f: f64,
    /// `None` for the starting point.
    pub mv: Option<Move>,
    pub counters: Counters,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrace {
    pub entries: Vec<TraceEntry>,
    pub stop: LocalStop,
}

impl LocalTrace {
    pub fn commits(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn final_f(&self) -> f64 {
        self.entries.last().map_or(f64::INFINITY, |e| e.f)
    }
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    if !prev.is_finite() || !cur.is_finite() {
        return f64::INFINITY;
    }
    if prev == 0.0 {
        return (prev - cur).abs();
    }
    (prev - cur).abs() / prev.abs()
}

/// Commits the best strictly improving toggle until none is left, the
/// relative improvement drops below `eps_loc`, or `max_iters` commits.
/// Ties go to the lowest DOF index.
pub fn local_search(state: &mut StructureState, eps_loc: f64, max_iters: usize, timing: bool) -> Result<LocalTrace> {
    let clock = Stopwatch::new(timing);
    let mut entries = vec![TraceEntry {
        iteration: 0,
        f: state.f_val(),
        mv: None,
        counters: state.counters(),
        elapsed_s: clock.elapsed_s(),
    }];
    let stop = loop {
        if entries.len() > max_iters {
            break LocalStop::MaxIters;
        }
        let f_cur = state.f_val();
        let best = state
            .evaluate_candidates()
            .into_iter()
            .filter(|s| s.f_candidate < f_cur)
            .min_by(|a, b| a.f_candidate.total_cmp(&b.f_candidate).then(a.mv.dof().cmp(&b.mv.dof())));
        let Some(best) = best else { break LocalStop::NoImprovingMove };
        state.commit(best.mv)?;
        entries.push(TraceEntry {
            iteration: entries.len(),
            f: state.f_val(),
            mv: Some(best.mv),
            counters: state.counters(),
            elapsed_s: clock.elapsed_s(),
        });
        if relative_change(f_cur, state.f_val()) < eps_loc {
            break LocalStop::Converged;
        }
    };
    Ok(LocalTrace { entries, stop })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub dof_index: usize,
    pub enabled: bool,
    pub mv: Move,
    /// f_candidate − f; negative means the toggle improves the objective.
    pub tau: f64,
    pub f_candidate: f64,
}

/// τ of toggling every controllable DOF, ascending by DOF index.
pub fn sensitivity_map(state: &mut StructureState) -> Vec<SensitivityRow> {
    let mut rows: Vec<SensitivityRow> = state
        .evaluate_candidates()
        .into_iter()
        .map(|s| SensitivityRow {
            dof_index: s.mv.dof(),
            enabled: matches!(s.mv, Move::Remove(_)),
            mv: s.mv,
            tau: s.tau,
            f_candidate: s.f_candidate,
        })
        .collect();
    rows.sort_by_key(|r| r.dof_index);
    rows
}

pub const SENSITIVITY_HEADER: &str = "dof_index,enabled,move,tau,f_candidate";

pub fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from(SENSITIVITY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.dof_index, u8::from(r.enabled), r.mv.name(), r.tau, r.f_candidate);
    }
    out
}

pub fn parse_sensitivity_csv(text: &str) -> Result<Vec<SensitivityRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SENSITIVITY_HEADER) {
        return Err(Error::Format("sensitivity CSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, line)| {
            let bad = || Error::Format(format!("sensitivity CSV row {}: {line:?}", k + 1));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            let dof_index: usize = cols[0].parse().map_err(|_| bad())?;
            let enabled = match cols[1] {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            };
            let mv = match cols[2] {
                "remove" => Move::Remove(dof_index),
                "add" => Move::Add(dof_index),
                _ => return Err(bad()),
            };
            Ok(SensitivityRow {
                dof_index,
                enabled,
                mv,
                tau: cols[3].parse().map_err(|_| bad())?,
                f_candidate: cols[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn write_sensitivity_csv(rows: &[SensitivityRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, sensitivity_csv(rows))?;
    Ok(())
}

pub fn read_sensitivity_csv(path: impl AsRef<Path>) -> Result<Vec<SensitivityRow>> {
    parse_sensitivity_csv(&std::fs::read_to_string(path)?)
}
