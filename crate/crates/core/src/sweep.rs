//! Experiment sweeps: every SBM cell, walk arm, walk length and trial is
//! clustered once and appended to a results CSV.
//!
//! Seeds for each unit of work are derived from the master seed and the
//! unit's coordinates, so results do not depend on scheduling or on which
//! rows were already present when a sweep resumed. Trials of the same SBM
//! cell share one graph across arms.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::KmeansParams;
use crate::embed::SgnsParams;
use crate::error::{Error, Result};
use crate::graph::{generate_sbm, SbmParams};
use crate::par::{self, Execution};
use crate::pipeline::{run_pipeline, PipelineParams};
use crate::rng::derive_seed;
use crate::walks::{WalkParams, WalkPolicy};

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 12] = [
    "arm",
    "n",
    "k",
    "c",
    "lambda",
    "l",
    "r",
    "w",
    "trial",
    "ccr",
    "nmi",
    "wall_time_seconds",
];

const TAG_GRAPH: u64 = 0x6772_6170;
const TAG_WALK: u64 = 0x7761_6c6b;
const TAG_EMBED: u64 = 0x656d_6264;
const TAG_CLUSTER: u64 = 0x6b6d_6e73;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmGrid {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Default for SbmGrid {
    fn default() -> Self {
        SbmGrid {
            n: vec![1000],
            k: vec![2],
            c: (2..=20).map(f64::from).collect(),
            lambda: vec![0.9],
        }
    }
}

/// One algorithm arm: a walk policy with its corpus and window settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    pub policy: WalkPolicy,
    pub r: usize,
    /// Walk lengths; each is a separate arm setting.
    pub l: Vec<usize>,
    pub w: usize,
}

impl ArmConfig {
    pub fn bt() -> Self {
        ArmConfig {
            name: "BT".into(),
            policy: WalkPolicy::Simple,
            r: 10,
            l: vec![60],
            w: 8,
        }
    }

    pub fn nbt() -> Self {
        ArmConfig {
            name: "NBT".into(),
            policy: WalkPolicy::Begrudging,
            r: 20,
            l: vec![10],
            w: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    /// Exclude degree-0 nodes from the metrics.
    pub mask_isolated: bool,
    /// When false, `wall_time_seconds` is written as 0 so reruns are
    /// byte-identical.
    pub record_wall_time: bool,
    /// How sweep units are scheduled. Each unit runs single-threaded.
    pub execution: Execution,
    pub sbm: SbmGrid,
    pub arms: Vec<ArmConfig>,
    /// `window` and `seed` are set per unit.
    pub embed: SgnsParams,
    /// `k` and `seed` are set per unit.
    pub cluster: KmeansParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 10,
            mask_isolated: true,
            record_wall_time: true,
            execution: Execution::Parallel,
            sbm: SbmGrid::default(),
            arms: vec![ArmConfig::bt(), ArmConfig::nbt()],
            embed: SgnsParams::default(),
            cluster: KmeansParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        let g = &self.sbm;
        if g.n.is_empty() || g.k.is_empty() || g.c.is_empty() || g.lambda.is_empty() {
            return Err(Error::param("every sbm list needs at least one value"));
        }
        if self.arms.is_empty() {
            return Err(Error::param("at least one arm is required"));
        }
        let mut names = HashSet::new();
        for arm in &self.arms {
            if !names.insert(arm.name.as_str()) {
                return Err(Error::param(format!("duplicate arm name `{}`", arm.name)));
            }
            if arm.name.contains([',', '"', '\n']) {
                return Err(Error::param(format!("arm name `{}` is not CSV-safe", arm.name)));
            }
            if arm.l.is_empty() {
                return Err(Error::param(format!("arm `{}` has no walk lengths", arm.name)));
            }
        }
        for unit in self.units() {
            unit.sbm(self).validate()?;
            unit.walk(self).validate()?;
            unit.embed(self).validate()?;
            unit.cluster(self).validate()?;
        }
        Ok(())
    }

    /// Every unit of work, in output order.
    pub fn units(&self) -> Vec<Unit> {
        let mut out = Vec::new();
        for &n in &self.sbm.n {
            for &k in &self.sbm.k {
                for &lambda in &self.sbm.lambda {
                    for &c in &self.sbm.c {
                        for trial in 0..self.trials {
                            for (arm, a) in self.arms.iter().enumerate() {
                                for &l in &a.l {
                                    out.push(Unit {
                                        n,
                                        k,
                                        c,
                                        lambda,
                                        trial,
                                        arm,
                                        l,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Coordinates of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub lambda: f64,
    pub trial: usize,
    /// Index into [`ExperimentConfig::arms`].
    pub arm: usize,
    pub l: usize,
}

impl Unit {
    fn graph_seed(&self, cfg: &ExperimentConfig) -> u64 {
        derive_seed(
            cfg.seed,
            &[
                TAG_GRAPH,
                self.n as u64,
                self.k as u64,
                self.c.to_bits(),
                self.lambda.to_bits(),
                self.trial as u64,
            ],
        )
    }

    fn arm_seed(&self, cfg: &ExperimentConfig, tag: u64) -> u64 {
        let a = &cfg.arms[self.arm];
        derive_seed(
            self.graph_seed(cfg),
            &[tag, a.policy as u64, a.r as u64, self.l as u64, a.w as u64],
        )
    }

    pub fn sbm(&self, cfg: &ExperimentConfig) -> SbmParams {
        SbmParams {
            n: self.n,
            k: self.k,
            c: self.c,
            lambda: self.lambda,
            seed: self.graph_seed(cfg),
        }
    }

    pub fn walk(&self, cfg: &ExperimentConfig) -> WalkParams {
        let a = &cfg.arms[self.arm];
        WalkParams {
            r: a.r,
            l: self.l,
            policy: a.policy,
            seed: self.arm_seed(cfg, TAG_WALK),
        }
    }

    pub fn embed(&self, cfg: &ExperimentConfig) -> SgnsParams {
        SgnsParams {
            window: cfg.arms[self.arm].w,
            seed: self.arm_seed(cfg, TAG_EMBED),
            ..cfg.embed
        }
    }

    pub fn cluster(&self, cfg: &ExperimentConfig) -> KmeansParams {
        KmeansParams {
            k: self.k,
            seed: self.arm_seed(cfg, TAG_CLUSTER),
            exec: Execution::Sequential,
            ..cfg.cluster
        }
    }

    fn key(&self, cfg: &ExperimentConfig) -> RowKey {
        let a = &cfg.arms[self.arm];
        RowKey {
            arm: a.name.clone(),
            n: self.n,
            k: self.k,
            c: self.c.to_bits(),
            lambda: self.lambda.to_bits(),
            l: self.l,
            r: a.r,
            w: a.w,
            trial: self.trial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arm: String,
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub lambda: f64,
    pub l: usize,
    pub r: usize,
    pub w: usize,
    pub trial: usize,
    pub ccr: f64,
    pub nmi: f64,
    pub wall_time_seconds: f64,
}

impl ResultRow {
    fn key(&self) -> RowKey {
        RowKey {
            arm: self.arm.clone(),
            n: self.n,
            k: self.k,
            c: self.c.to_bits(),
            lambda: self.lambda.to_bits(),
            l: self.l,
            r: self.r,
            w: self.w,
            trial: self.trial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RowKey {
    arm: String,
    n: usize,
    k: usize,
    c: u64,
    lambda: u64,
    l: usize,
    r: usize,
    w: usize,
    trial: usize,
}

/// Runs a single unit. Deterministic given the config, apart from
/// `wall_time_seconds`.
pub fn run_unit(cfg: &ExperimentConfig, unit: &Unit) -> Result<ResultRow> {
    let (g, truth) = generate_sbm(&unit.sbm(cfg))?;
    let params = PipelineParams {
        walk: unit.walk(cfg),
        embed: unit.embed(cfg),
        cluster: unit.cluster(cfg),
        mask_isolated: cfg.mask_isolated,
        exec: Execution::Sequential,
    };
    let out = run_pipeline(&g, unit.k, &params, Some(&truth))?;
    let m = out.metrics.expect("truth supplied");
    let a = &cfg.arms[unit.arm];
    Ok(ResultRow {
        arm: a.name.clone(),
        n: unit.n,
        k: unit.k,
        c: unit.c,
        lambda: unit.lambda,
        l: unit.l,
        r: a.r,
        w: a.w,
        trial: unit.trial,
        ccr: m.ccr,
        nmi: m.nmi,
        wall_time_seconds: if cfg.record_wall_time {
            out.timings.total()
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub written: usize,
    pub skipped: usize,
}

/// Reads a results CSV, checking the header.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(bad) = header.iter().find(|h| !CSV_HEADER.contains(h)) {
        return Err(Error::UnknownColumn(bad.to_string()));
    }
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    rdr.deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Runs every unit of `cfg` that has no row in `output` yet and appends the
/// new rows. Rows are written in unit order, a batch at a time, so an
/// interrupted sweep keeps every completed batch.
pub fn run_sweep(cfg: &ExperimentConfig, output: &Path) -> Result<SweepSummary> {
    cfg.validate()?;
    let existing = match std::fs::metadata(output) {
        Ok(meta) if meta.len() > 0 => read_results(output)?,
        Ok(_) => Vec::new(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let done: HashSet<RowKey> = existing.iter().map(ResultRow::key).collect();
    let units = cfg.units();
    let todo: Vec<&Unit> = units.iter().filter(|u| !done.contains(&u.key(cfg))).collect();
    let summary = SweepSummary {
        written: todo.len(),
        skipped: units.len() - todo.len(),
    };

    let file: File = OpenOptions::new().create(true).append(true).open(output)?;
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(existing.is_empty() && file.metadata()?.len() == 0)
        .from_writer(file);
    let batch = 2 * par::num_threads(cfg.execution);
    for chunk in todo.chunks(batch.max(1)) {
        let rows = par::map_range(cfg.execution, chunk.len(), |i| run_unit(cfg, chunk[i]));
        for row in rows {
            wtr.serialize(row?)?;
        }
        wtr.flush()?;
    }
    wtr.into_inner()
        .map_err(|e| Error::Io(e.into_error()))?
        .flush()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            seed: 3,
            trials: 2,
            record_wall_time: false,
            sbm: SbmGrid {
                n: vec![60],
                k: vec![2],
                c: vec![4.0, 8.0],
                lambda: vec![0.9],
            },
            arms: vec![
                ArmConfig {
                    l: vec![10],
                    r: 2,
                    ..ArmConfig::bt()
                },
                ArmConfig {
                    l: vec![5, 10],
                    r: 2,
                    ..ArmConfig::nbt()
                },
            ],
            embed: SgnsParams {
                dim: 8,
                epochs: 2,
                ..SgnsParams::default()
            },
            cluster: KmeansParams {
                restarts: 2,
                ..KmeansParams::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn row_count_matches_grid() {
        let cfg = ExperimentConfig {
            trials: 3,
            ..ExperimentConfig::default()
        };
        assert_eq!(cfg.units().len(), 19 * 2 * 3);
        assert_eq!(tiny().units().len(), 2 * 2 * 3);
    }

    #[test]
    fn header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let s = run_sweep(&tiny(), &path).unwrap();
        assert_eq!(s, SweepSummary { written: 12, skipped: 0 });
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        let rows = read_results(&path).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert!((0.5..=1.0).contains(&r.ccr), "{r:?}");
            assert!((0.0..=1.0).contains(&r.nmi), "{r:?}");
            assert_eq!(r.wall_time_seconds, 0.0);
        }
        assert_eq!(rows[0].arm, "BT");
        assert_eq!((rows[1].arm.as_str(), rows[1].l), ("NBT", 5));
    }

    #[test]
    fn resume_skips_existing_rows_and_matches_fresh_run() {
        let dir = tempfile::tempdir().unwrap();
        let fresh = dir.path().join("fresh.csv");
        run_sweep(&tiny(), &fresh).unwrap();

        let partial = dir.path().join("partial.csv");
        let mut first = tiny();
        first.sbm.c = vec![4.0];
        run_sweep(&first, &partial).unwrap();
        let s = run_sweep(&tiny(), &partial).unwrap();
        assert_eq!(s, SweepSummary { written: 6, skipped: 6 });
        assert_eq!(
            std::fs::read(&fresh).unwrap(),
            std::fs::read(&partial).unwrap()
        );
        let s = run_sweep(&tiny(), &partial).unwrap();
        assert_eq!(s, SweepSummary { written: 0, skipped: 12 });
    }

    #[test]
    fn schedule_does_not_change_output() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let seq = ExperimentConfig {
            execution: Execution::Sequential,
            ..tiny()
        };
        run_sweep(&seq, &a).unwrap();
        run_sweep(&tiny(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn arms_share_the_graph() {
        let cfg = tiny();
        let units = cfg.units();
        let (bt, nbt) = (&units[0], &units[1]);
        assert_eq!(bt.sbm(&cfg), nbt.sbm(&cfg));
        assert_ne!(bt.walk(&cfg).seed, nbt.walk(&cfg).seed);
        assert_ne!(units[0].sbm(&cfg).seed, units[3].sbm(&cfg).seed);
    }

    #[test]
    fn rejects_bad_configs_and_files() {
        let mut cfg = tiny();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.arms[1].name = "BT".into();
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.sbm.lambda = vec![1.5];
        assert!(cfg.validate().is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "arm,n,bogus\n").unwrap();
        assert!(matches!(run_sweep(&tiny(), &path), Err(Error::UnknownColumn(c)) if c == "bogus"));
    }
}
