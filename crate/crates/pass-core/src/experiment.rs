//! Seeded experiment sweeps.
//!
//! Each experiment kind expands into a deterministic list of cells, runs the
//! cells on a worker pool, and emits a CSV table (fixed header, RFC-4180
//! quoting) plus a JSON summary echoing the spec and a content hash of the
//! resolved configuration. Cell results are written in declaration order no
//! matter the completion order, and rerunning with the same seed reproduces
//! the files byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_baseline_ee, BaselineKind, BaselineLayout};
use crate::config::{SystemConfig, UserLayout};
use crate::error::{Error, Result};
use crate::metrics::{energy_efficiency, mc_energy_efficiency};
use crate::optim::{maximize_energy_efficiency, reference_state, OptimizerConfig, TraceRecord};
use crate::protocol::{GridConfig, GridSets, ProtocolKind};
use crate::rng::SeedStreams;

/// The experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Closed-form energy efficiency against Monte-Carlo evaluation.
    TheoryValidation,
    /// Full optimizer trace of one run.
    Convergence,
    /// MIMO / cell-free / waveguide-system comparison over the power budget.
    ArchitectureCompare,
    /// Baseline vs optimized energy efficiency across array sizes.
    MnSweep,
    /// Impact of coarse and fine grid resolution.
    ResolutionSweep,
    /// The four deployment protocols over the power budget.
    ProtocolCompare,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theory-validation" => Ok(Self::TheoryValidation),
            "convergence" => Ok(Self::Convergence),
            "architecture-compare" => Ok(Self::ArchitectureCompare),
            "mn-sweep" => Ok(Self::MnSweep),
            "resolution-sweep" => Ok(Self::ResolutionSweep),
            "protocol-compare" => Ok(Self::ProtocolCompare),
            other => Err(Error::Config(vec![format!(
                "experiment.kind: unknown value {other:?}"
            )])),
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::TheoryValidation => "theory-validation",
            Self::Convergence => "convergence",
            Self::ArchitectureCompare => "architecture-compare",
            Self::MnSweep => "mn-sweep",
            Self::ResolutionSweep => "resolution-sweep",
            Self::ProtocolCompare => "protocol-compare",
        };
        f.write_str(s)
    }
}

/// Fully resolved sweep description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Swept transmit power budgets (dBW).
    pub p_max_dbw: Vec<f64>,
    /// Swept `(M, N)` array sizes.
    pub mn_pairs: Vec<(usize, usize)>,
    /// Protocols for the protocol comparison; first entry is the default
    /// protocol of the other experiments.
    pub protocols: Vec<ProtocolKind>,
    /// Coarse resolutions for the resolution sweep (m).
    pub coarse_steps_m: Vec<f64>,
    /// Fine resolutions for the resolution sweep (m).
    pub fine_steps_m: Vec<f64>,
    /// Seeds averaged over (and used for Monte-Carlo streams).
    pub seeds: Vec<u64>,
    /// Monte-Carlo draw count per validation cell.
    pub mc_draws: usize,
    /// Batches for the Monte-Carlo standard error.
    pub mc_batches: usize,
    /// Penalty schedule of the optimizer for this experiment.
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Pre-deployed base multiplier applied to the base-selection protocols
    /// in the protocol comparison.
    pub sat_base_multiplier: usize,
}

impl ExperimentSpec {
    /// Per-kind defaults for every sweep dimension and penalty schedule.
    pub fn defaults_for(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            p_max_dbw: vec![5.0],
            mn_pairs: vec![(3, 4)],
            protocols: vec![ProtocolKind::Stt],
            coarse_steps_m: vec![1.0],
            fine_steps_m: vec![1e-4],
            seeds: vec![0],
            mc_draws: 10_000,
            mc_batches: 20,
            penalty_init: 230.0,
            penalty_growth: 1.0 / 0.9,
            sat_base_multiplier: 1,
        };
        match kind {
            ExperimentKind::TheoryValidation => Self {
                p_max_dbw: vec![-10.0, -5.0, 0.0, 5.0],
                mn_pairs: vec![(3, 4), (4, 4), (3, 6)],
                ..base
            },
            ExperimentKind::Convergence => base,
            ExperimentKind::ArchitectureCompare => Self {
                p_max_dbw: vec![-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0],
                seeds: (0..20).collect(),
                ..base
            },
            ExperimentKind::MnSweep => Self {
                p_max_dbw: vec![-8.0, -5.0, -2.0, 1.0, 4.0],
                mn_pairs: vec![(3, 4), (3, 6), (3, 9)],
                seeds: (0..10).collect(),
                penalty_init: 200.0,
                penalty_growth: 2.0,
                ..base
            },
            ExperimentKind::ResolutionSweep => Self {
                coarse_steps_m: vec![1.0, 10.0],
                fine_steps_m: vec![1e-4, 1e-2],
                mn_pairs: vec![(3, 1), (3, 6)],
                penalty_init: 90.0,
                penalty_growth: 1.0 / 0.6,
                ..base
            },
            ExperimentKind::ProtocolCompare => Self {
                p_max_dbw: vec![-5.0, 0.0, 5.0],
                protocols: ProtocolKind::ALL.to_vec(),
                seeds: (0..20).collect(),
                penalty_init: 450.0,
                penalty_growth: 1.0 / 0.6,
                sat_base_multiplier: 2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.p_max_dbw.is_empty() {
            errs.push("experiment.p_max_dbw: sweep list must not be empty".into());
        }
        if self.mn_pairs.is_empty() {
            errs.push("experiment.mn_pairs: sweep list must not be empty".into());
        }
        if self.protocols.is_empty() {
            errs.push("experiment.protocols: sweep list must not be empty".into());
        }
        if self.seeds.is_empty() {
            errs.push("experiment.seeds: at least one seed required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            errs.push("experiment.seeds: seeds must be distinct".into());
        }
        if self.mc_draws == 0 || self.mc_batches < 2 || self.mc_draws % self.mc_batches != 0 {
            errs.push(format!(
                "experiment.mc: draws {} must split into >= 2 batches ({})",
                self.mc_draws, self.mc_batches
            ));
        }
        if !(self.penalty_init > 0.0) || !(self.penalty_growth > 1.0) {
            errs.push("experiment.penalty: init > 0 and growth > 1 required".into());
        }
        errs
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryValidationRow {
    pub p_max_dbw: f64,
    pub m: usize,
    pub n: usize,
    pub ee_closed_form: f64,
    pub ee_monte_carlo: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchitectureRow {
    pub p_max_dbw: f64,
    pub arch: String,
    pub ee: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MnSweepRow {
    pub m: usize,
    pub n: usize,
    pub p_max_dbw: f64,
    pub ee_baseline: f64,
    pub ee_optimized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionRow {
    pub coarse_step_m: f64,
    pub fine_step_m: f64,
    pub n: usize,
    pub ee: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRow {
    pub protocol: String,
    pub p_max_dbw: f64,
    pub ee: f64,
}

/// Result table of one experiment run.
#[derive(Debug, Clone)]
pub enum ExperimentTable {
    TheoryValidation(Vec<TheoryValidationRow>),
    Convergence(Vec<TraceRecord<f64>>),
    Architecture(Vec<ArchitectureRow>),
    MnSweep(Vec<MnSweepRow>),
    Resolution(Vec<ResolutionRow>),
    Protocol(Vec<ProtocolRow>),
}

impl ExperimentTable {
    pub fn len(&self) -> usize {
        match self {
            Self::TheoryValidation(v) => v.len(),
            Self::Convergence(v) => v.len(),
            Self::Architecture(v) => v.len(),
            Self::MnSweep(v) => v.len(),
            Self::Resolution(v) => v.len(),
            Self::Protocol(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serialize as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match self {
            Self::TheoryValidation(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Self::Convergence(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Self::Architecture(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Self::MnSweep(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Self::Resolution(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            Self::Protocol(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows_json(&self) -> serde_json::Value {
        match self {
            Self::TheoryValidation(rows) => serde_json::to_value(rows),
            Self::Convergence(rows) => serde_json::to_value(rows),
            Self::Architecture(rows) => serde_json::to_value(rows),
            Self::MnSweep(rows) => serde_json::to_value(rows),
            Self::Resolution(rows) => serde_json::to_value(rows),
            Self::Protocol(rows) => serde_json::to_value(rows),
        }
        .expect("experiment rows serialize")
    }
}

/// Outcome of an experiment: the table plus any per-cell failures (the table
/// still holds every cell that completed).
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub table: ExperimentTable,
    pub failures: Vec<String>,
}

/// Seed-averaged evaluation with caching.
///
/// The optimization pipeline is deterministic given the configuration, so
/// identical cells across seeds collapse onto one computation; the average
/// over seeds is then exact and free.
struct CellCache {
    map: Mutex<HashMap<String, f64>>,
}

impl CellCache {
    fn new() -> Self {
        Self { map: Mutex::new(HashMap::new()) }
    }

    fn get_or_compute(&self, key: String, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.map.lock().unwrap().insert(key, v);
        Ok(v)
    }
}

fn optimizer_for(spec: &ExperimentSpec, base: &OptimizerConfig<f64>) -> OptimizerConfig<f64> {
    OptimizerConfig {
        penalty_init: spec.penalty_init,
        penalty_growth: spec.penalty_growth,
        ..*base
    }
}

fn cell_config(base: &SystemConfig<f64>, m: usize, n: usize, p_max_dbw: f64) -> SystemConfig<f64> {
    base.clone()
        .with_waveguides(m)
        .with_pas(n)
        .with_p_max_dbw(p_max_dbw)
}

/// Run an experiment. Sweep cells execute on the rayon pool; the result rows
/// keep declaration order. `streams` provides the Monte-Carlo substreams.
pub fn run_experiment(
    spec: &ExperimentSpec,
    base_cfg: &SystemConfig<f64>,
    users: &UserLayout<f64>,
    base_grid: &GridConfig<f64>,
    base_opt: &OptimizerConfig<f64>,
    streams: SeedStreams,
) -> Result<ExperimentOutcome> {
    let spec_errs = spec.validate();
    if !spec_errs.is_empty() {
        return Err(Error::Config(spec_errs));
    }
    let opt = optimizer_for(spec, base_opt);
    let protocol = spec.protocols[0];

    match spec.kind {
        ExperimentKind::TheoryValidation => {
            let mut cells = Vec::new();
            for &(m, n) in &spec.mn_pairs {
                for &p in &spec.p_max_dbw {
                    cells.push((m, n, p));
                }
            }
            let results: Vec<Result<TheoryValidationRow>> = cells
                .par_iter()
                .enumerate()
                .map(|(idx, &(m, n, p))| {
                    let cfg = cell_config(base_cfg, m, n, p);
                    let (w, s, _placement, ch) = reference_state(&cfg, users)?;
                    let closed = energy_efficiency(&w, &s, &ch, &cfg, protocol).ee;
                    let mut rng = streams.stream(idx as u64);
                    let (mc, stderr) = mc_energy_efficiency(
                        &w,
                        &s,
                        &ch,
                        &cfg,
                        protocol,
                        spec.mc_draws,
                        spec.mc_batches,
                        &mut rng,
                    );
                    Ok(TheoryValidationRow {
                        p_max_dbw: p,
                        m,
                        n,
                        ee_closed_form: closed,
                        ee_monte_carlo: mc,
                        stderr,
                    })
                })
                .collect();
            collect_rows(results, ExperimentTable::TheoryValidation)
        }

        ExperimentKind::Convergence => {
            let cfg = cell_config(
                base_cfg,
                spec.mn_pairs[0].0,
                spec.mn_pairs[0].1,
                spec.p_max_dbw[0],
            );
            let grids = GridSets::build(protocol, &cfg, base_grid)?;
            let sol = maximize_energy_efficiency(&cfg, users, protocol, &grids, &opt)?;
            Ok(ExperimentOutcome {
                table: ExperimentTable::Convergence(sol.trace),
                failures: Vec::new(),
            })
        }

        ExperimentKind::ArchitectureCompare => {
            let cache = CellCache::new();
            let archs = ["mimo", "cellfree", "pass-reference", "pass-optimized"];
            let mut cells = Vec::new();
            for &p in &spec.p_max_dbw {
                for arch in archs {
                    cells.push((p, arch));
                }
            }
            let results: Vec<Result<ArchitectureRow>> = cells
                .par_iter()
                .map(|&(p, arch)| {
                    let mut acc = 0.0f64;
                    for _seed in &spec.seeds {
                        let key = format!("{arch}:{p}");
                        let ee = cache.get_or_compute(key, || {
                            let cfg = cell_config(
                                base_cfg,
                                spec.mn_pairs[0].0,
                                spec.mn_pairs[0].1,
                                p,
                            );
                            match arch {
                                "mimo" | "cellfree" => {
                                    let kind = BaselineKind::from_str(arch)?;
                                    let layout = BaselineLayout::build(kind, &cfg);
                                    Ok(evaluate_baseline_ee(&layout, users, &cfg, &opt)?.ee)
                                }
                                "pass-reference" => {
                                    let (w, s, _pl, ch) = reference_state(&cfg, users)?;
                                    Ok(energy_efficiency(&w, &s, &ch, &cfg, protocol).ee)
                                }
                                _ => {
                                    let grids = GridSets::build(protocol, &cfg, base_grid)?;
                                    let sol = maximize_energy_efficiency(
                                        &cfg, users, protocol, &grids, &opt,
                                    )?;
                                    Ok(sol.report.ee)
                                }
                            }
                        })?;
                        acc += ee;
                    }
                    Ok(ArchitectureRow {
                        p_max_dbw: p,
                        arch: arch.to_string(),
                        ee: acc / spec.seeds.len() as f64,
                    })
                })
                .collect();
            collect_rows(results, ExperimentTable::Architecture)
        }

        ExperimentKind::MnSweep => {
            let cache = CellCache::new();
            let mut cells = Vec::new();
            for &(m, n) in &spec.mn_pairs {
                for &p in &spec.p_max_dbw {
                    cells.push((m, n, p));
                }
            }
            let results: Vec<Result<MnSweepRow>> = cells
                .par_iter()
                .map(|&(m, n, p)| {
                    let cfg = cell_config(base_cfg, m, n, p);
                    let (w, s, _pl, ch) = reference_state(&cfg, users)?;
                    let baseline = energy_efficiency(&w, &s, &ch, &cfg, protocol).ee;
                    let mut acc = 0.0f64;
                    for _seed in &spec.seeds {
                        let key = format!("opt:{m}:{n}:{p}");
                        let ee = cache.get_or_compute(key, || {
                            let grids = GridSets::build(protocol, &cfg, base_grid)?;
                            Ok(maximize_energy_efficiency(&cfg, users, protocol, &grids, &opt)?
                                .report
                                .ee)
                        })?;
                        acc += ee;
                    }
                    Ok(MnSweepRow {
                        m,
                        n,
                        p_max_dbw: p,
                        ee_baseline: baseline,
                        ee_optimized: acc / spec.seeds.len() as f64,
                    })
                })
                .collect();
            collect_rows(results, ExperimentTable::MnSweep)
        }

        ExperimentKind::ResolutionSweep => {
            let mut cells = Vec::new();
            for &(m, n) in &spec.mn_pairs {
                for &cs in &spec.coarse_steps_m {
                    for &fs in &spec.fine_steps_m {
                        cells.push((m, n, cs, fs));
                    }
                }
            }
            let results: Vec<Result<ResolutionRow>> = cells
                .par_iter()
                .map(|&(m, n, cs, fs)| {
                    let cfg = cell_config(base_cfg, m, n, spec.p_max_dbw[0]);
                    let grid = GridConfig {
                        coarse_step: cs,
                        fine_step: fs,
                        ..*base_grid
                    };
                    let grids = GridSets::build(protocol, &cfg, &grid)?;
                    let sol = maximize_energy_efficiency(&cfg, users, protocol, &grids, &opt)?;
                    Ok(ResolutionRow {
                        coarse_step_m: cs,
                        fine_step_m: fs,
                        n,
                        ee: sol.report.ee,
                    })
                })
                .collect();
            collect_rows(results, ExperimentTable::Resolution)
        }

        ExperimentKind::ProtocolCompare => {
            let cache = CellCache::new();
            let mut cells = Vec::new();
            for &proto in &spec.protocols {
                for &p in &spec.p_max_dbw {
                    cells.push((proto, p));
                }
            }
            let results: Vec<Result<ProtocolRow>> = cells
                .par_iter()
                .map(|&(proto, p)| {
                    let cfg = cell_config(
                        base_cfg,
                        spec.mn_pairs[0].0,
                        spec.mn_pairs[0].1,
                        p,
                    );
                    let grid = GridConfig {
                        base_multiplier: if proto == ProtocolKind::Sat {
                            spec.sat_base_multiplier
                        } else {
                            base_grid.base_multiplier
                        },
                        ..*base_grid
                    };
                    let mut acc = 0.0f64;
                    for _seed in &spec.seeds {
                        let key = format!("{proto}:{p}");
                        let ee = cache.get_or_compute(key, || {
                            let grids = GridSets::build(proto, &cfg, &grid)?;
                            Ok(maximize_energy_efficiency(&cfg, users, proto, &grids, &opt)?
                                .report
                                .ee)
                        })?;
                        acc += ee;
                    }
                    Ok(ProtocolRow {
                        protocol: proto.to_string(),
                        p_max_dbw: p,
                        ee: acc / spec.seeds.len() as f64,
                    })
                })
                .collect();
            collect_rows(results, ExperimentTable::Protocol)
        }
    }
}

fn collect_rows<R>(
    results: Vec<Result<R>>,
    wrap: impl FnOnce(Vec<R>) -> ExperimentTable,
) -> Result<ExperimentOutcome> {
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(e.to_string()),
        }
    }
    Ok(ExperimentOutcome { table: wrap(rows), failures })
}

/// JSON summary: the spec echo, a content hash of the resolved
/// configuration, and every cell result.
pub fn write_summary(
    table: &ExperimentTable,
    spec: &ExperimentSpec,
    config_hash: &str,
    failures: &[String],
    path: &Path,
) -> Result<()> {
    let summary = serde_json::json!({
        "kind": spec.kind.to_string(),
        "spec": spec,
        "config_hash": config_hash,
        "cells": table.rows_json(),
        "failures": failures,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Hex SHA-256 of a canonical byte representation, truncated git-style.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(12);
    for b in digest.iter().take(6) {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_kind() {
        for kind in [
            ExperimentKind::TheoryValidation,
            ExperimentKind::Convergence,
            ExperimentKind::ArchitectureCompare,
            ExperimentKind::MnSweep,
            ExperimentKind::ResolutionSweep,
            ExperimentKind::ProtocolCompare,
        ] {
            let spec = ExperimentSpec::defaults_for(kind);
            assert!(spec.validate().is_empty(), "{kind}: {:?}", spec.validate());
        }
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let mut spec = ExperimentSpec::defaults_for(ExperimentKind::MnSweep);
        spec.seeds = vec![1, 1];
        assert!(!spec.validate().is_empty());
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for kind in [
            ExperimentKind::TheoryValidation,
            ExperimentKind::ProtocolCompare,
        ] {
            let s = kind.to_string();
            assert_eq!(ExperimentKind::from_str(&s).unwrap(), kind);
        }
        assert!(ExperimentKind::from_str("nope").is_err());
    }

    #[test]
    fn theory_validation_runs_and_agrees_on_a_small_cell() {
        let spec = ExperimentSpec {
            mn_pairs: vec![(2, 2)],
            p_max_dbw: vec![0.0],
            mc_draws: 2000,
            mc_batches: 10,
            ..ExperimentSpec::defaults_for(ExperimentKind::TheoryValidation)
        };
        let cfg = SystemConfig::defaults();
        let users = UserLayout::defaults();
        let out = run_experiment(
            &spec,
            &cfg,
            &users,
            &GridConfig::defaults(),
            &OptimizerConfig::defaults(),
            SeedStreams::new(0),
        )
        .unwrap();
        assert!(out.failures.is_empty());
        match out.table {
            ExperimentTable::TheoryValidation(rows) => {
                assert_eq!(rows.len(), 1);
                let r = &rows[0];
                assert!(r.stderr > 0.0);
                assert!(
                    (r.ee_closed_form - r.ee_monte_carlo).abs() < 4.0 * r.stderr,
                    "closed {} mc {} stderr {}",
                    r.ee_closed_form,
                    r.ee_monte_carlo,
                    r.stderr
                );
            }
            _ => panic!("wrong table"),
        }
    }

    #[test]
    fn content_hash_is_stable() {
        assert_eq!(content_hash(b"abc"), content_hash(b"abc"));
        assert_ne!(content_hash(b"abc"), content_hash(b"abd"));
        assert_eq!(content_hash(b"abc").len(), 12);
    }
}
