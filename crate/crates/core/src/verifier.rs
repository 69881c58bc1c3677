//! Refinement driver: a volume-ordered frontier of simplices decided in parallel
//! batches, with longest-edge bisection of inconclusive ones.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{CertReason, Counterexample, Decision, Problem};
use crate::dynamics::{ControlAffine, DynamicsModel};
use crate::error::{Error, Result};
use crate::lbp::ValueBounds;
use crate::mesh::{bisect_longest_edge, triangulate_box, Simplex};
use crate::network::Network;
use crate::safe_set::{classify_safe, SafeClass, SafeSetDef};

fn default_eta() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    1.0
}
fn default_max_depth() -> u32 {
    60
}
fn default_volume_floor() -> f64 {
    1e-12
}
fn default_batch_size() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: u32,
    /// Smallest simplex volume as a fraction of the initial simplex volume.
    #[serde(default = "default_volume_floor")]
    pub volume_floor: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// `0` uses all available cores.
    #[serde(default)]
    pub worker_count: usize,
    #[serde(default)]
    pub epsilon_strict: f64,
    #[serde(default)]
    pub epsilon_fp: f64,
    /// Cells per axis of the initial grid before triangulation.
    #[serde(default)]
    pub initial_grid: Option<Vec<usize>>,
    /// Keep going after the first counterexample.
    #[serde(default)]
    pub exhaustive: bool,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            eta: default_eta(),
            alpha: default_alpha(),
            max_depth: default_max_depth(),
            volume_floor: default_volume_floor(),
            batch_size: default_batch_size(),
            worker_count: 0,
            epsilon_strict: 0.0,
            epsilon_fp: 0.0,
            initial_grid: None,
            exhaustive: false,
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.volume_floor >= 0.0 && self.volume_floor < 1.0) {
            return bad(format!("volume_floor must lie in [0, 1), got {}", self.volume_floor));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, v) in [("epsilon_strict", self.epsilon_strict), ("epsilon_fp", self.epsilon_fp)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if let Some(g) = &self.initial_grid {
            if g.contains(&0) {
                return bad("initial_grid entries must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Valid,
    Invalid,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexStatus {
    Certified,
    Counterexample,
    /// Undecided at the depth or volume budget.
    Inconclusive,
    /// Left in the frontier after an early exit.
    Unprocessed,
}

/// One final simplex of the refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub depth: u32,
    pub vertices: Vec<Vec<f64>>,
    pub safe_class: SafeClass,
    pub status: SimplexStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<CertReason>,
    pub volume: f64,
}

impl SimplexRecord {
    fn new(s: &Simplex, class: SafeClass, status: SimplexStatus, reason: Option<CertReason>) -> Self {
        SimplexRecord {
            id: s.id,
            parent_id: s.parent_id,
            depth: s.depth,
            vertices: s.vertex_rows(),
            safe_class: class,
            status,
            reason,
            volume: s.volume(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub status: Status,
    pub system: String,
    pub counterexamples: Vec<Counterexample>,
    /// Simplices decided, each counted once.
    pub regions_total: u64,
    pub regions_certified: u64,
    pub certified_fraction: f64,
    pub inconclusive_fraction: f64,
    pub max_depth_reached: u32,
    pub wall_time: f64,
    pub config: VerifierConfig,
    pub per_simplex: Vec<SimplexRecord>,
}

impl VerdictReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Same report with the timing zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        VerdictReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

/// Frontier item; `parent` holds the value bounds of the simplex it was split from.
#[derive(Debug)]
struct Entry(Simplex, Option<Arc<ValueBounds>>);

impl Entry {
    fn key(&self) -> (f64, std::cmp::Reverse<u64>) {
        (self.0.volume(), std::cmp::Reverse(self.0.id))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        let (va, ia) = self.key();
        let (vb, ib) = other.key();
        va.total_cmp(&vb).then(ia.cmp(&ib))
    }
}

/// Classify and decide each simplex; output order matches input order.
pub fn verify_batch<D: ControlAffine>(problem: &Problem<'_, D>, simplices: &[Simplex]) -> Result<Vec<(SafeClass, Decision)>> {
    simplices
        .par_iter()
        .map(|s| {
            let class = classify_safe(s, problem.safe);
            problem.decide(s, class).map(|d| (class, d))
        })
        .collect()
}

fn decide_entries<D: ControlAffine>(problem: &Problem<'_, D>, batch: &[Entry]) -> Result<Vec<(SafeClass, Decision, ValueBounds)>> {
    batch
        .par_iter()
        .map(|Entry(s, parent)| {
            let class = classify_safe(s, problem.safe);
            problem
                .decide_within(s, class, parent.as_deref())
                .map(|(d, vb)| (class, d, vb))
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

pub fn verify<D: ControlAffine>(
    net: &Network,
    model: &DynamicsModel<D>,
    safe: &SafeSetDef,
    cfg: &VerifierConfig,
) -> Result<VerdictReport> {
    cfg.validate()?;
    safe.validate()?;
    let mut problem = Problem::new(net, model, safe)?;
    problem.eta = cfg.eta;
    problem.alpha = cfg.alpha;
    problem.epsilon_strict = cfg.epsilon_strict;
    problem.epsilon_fp = cfg.epsilon_fp;
    let pool = pool(cfg.worker_count)?;
    let start = Instant::now();

    let initial = triangulate_box(&safe.state_box, cfg.initial_grid.as_deref())?;
    let floor = cfg.volume_floor * initial.iter().map(Simplex::volume).fold(0.0, f64::max);
    let mut next_id = initial.len() as u64;
    let mut frontier: BinaryHeap<Entry> = initial.into_iter().map(|s| Entry(s, None)).collect();
    let mut records = Vec::new();
    let mut counterexamples = Vec::new();
    let (mut total, mut certified) = (0u64, 0u64);
    let mut certified_volume = 0.0;
    let mut inconclusive_volume = 0.0;
    let mut max_depth_reached = 0;

    while !frontier.is_empty() {
        let take = cfg.batch_size.min(frontier.len());
        let batch: Vec<Entry> = (0..take).map(|_| frontier.pop().expect("non-empty")).collect();
        let decisions = pool.install(|| decide_entries(&problem, &batch))?;
        for (Entry(s, _), (class, d, vb)) in batch.into_iter().zip(decisions) {
            total += 1;
            max_depth_reached = max_depth_reached.max(s.depth);
            match d {
                Decision::Certified(r) => {
                    certified += 1;
                    certified_volume += s.volume();
                    records.push(SimplexRecord::new(&s, class, SimplexStatus::Certified, Some(r)));
                }
                Decision::Counterexample(c) => {
                    counterexamples.push(*c);
                    records.push(SimplexRecord::new(&s, class, SimplexStatus::Counterexample, None));
                }
                Decision::Inconclusive => {
                    let split = if s.depth < cfg.max_depth {
                        match bisect_longest_edge(&s, floor) {
                            Ok(ch) => Some(ch),
                            Err(Error::VolumeFloor { .. }) => None,
                            Err(e) => return Err(e),
                        }
                    } else {
                        None
                    };
                    match split {
                        Some((a, b)) => {
                            let vb = Arc::new(vb);
                            frontier.push(Entry(a.with_id(next_id), Some(Arc::clone(&vb))));
                            frontier.push(Entry(b.with_id(next_id + 1), Some(vb)));
                            next_id += 2;
                        }
                        None => {
                            inconclusive_volume += s.volume();
                            records.push(SimplexRecord::new(&s, class, SimplexStatus::Inconclusive, None));
                        }
                    }
                }
            }
        }
        if !cfg.exhaustive && !counterexamples.is_empty() {
            break;
        }
    }
    for Entry(s, _) in frontier.into_sorted_vec().into_iter().rev() {
        inconclusive_volume += s.volume();
        let class = classify_safe(&s, safe);
        records.push(SimplexRecord::new(&s, class, SimplexStatus::Unprocessed, None));
    }
    records.sort_by_key(|r| r.id);

    let all_certified = records.iter().all(|r| r.status == SimplexStatus::Certified);
    let status = if !counterexamples.is_empty() {
        Status::Invalid
    } else if all_certified {
        Status::Valid
    } else {
        Status::Inconclusive
    };
    let box_volume = safe.state_box.volume();
    Ok(VerdictReport {
        status,
        system: model.name().to_string(),
        counterexamples,
        regions_total: total,
        regions_certified: certified,
        certified_fraction: (certified_volume / box_volume).clamp(0.0, 1.0),
        inconclusive_fraction: (inconclusive_volume / box_volume).clamp(0.0, 1.0),
        max_depth_reached,
        wall_time: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
        per_simplex: records,
    })
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    dim: usize,
    simplices: Vec<SimplexRecord>,
}

pub fn write_mesh_json(path: impl AsRef<Path>, records: &[SimplexRecord]) -> Result<()> {
    let path = path.as_ref();
    let dim = records.first().map_or(0, |r| r.vertices.first().map_or(0, Vec::len));
    let file = MeshFile {
        dim,
        simplices: records.to_vec(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_mesh_json(path: impl AsRef<Path>) -> Result<Vec<SimplexRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: MeshFile = serde_json::from_str(&text)?;
    Ok(file.simplices)
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One row per simplex: bookkeeping columns then `v{i}_x{k}` vertex coordinates.
pub fn write_mesh_csv<W: Write>(out: W, records: &[SimplexRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.vertices.first().map_or(0, Vec::len));
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["id", "parent_id", "depth", "safe_class", "status", "volume"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..=dim {
        for k in 0..dim {
            header.push(format!("v{i}_x{k}"));
        }
    }
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.id.to_string(),
            r.parent_id.map_or(String::new(), |p| p.to_string()),
            r.depth.to_string(),
            snake(&r.safe_class),
            snake(&r.status),
            format!("{:?}", r.volume),
        ];
        for v in &r.vertices {
            row.extend(v.iter().map(|x| format!("{x:?}")));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_mesh_csv_file(path: impl AsRef<Path>, records: &[SimplexRecord]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_mesh_csv(std::io::BufWriter::new(f), records)
}
