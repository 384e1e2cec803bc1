//! Largest `|n>` population reachable by Gaussian-transformed core states
//! with at most `p` probability above `n`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ansatz::fidelity_and_tail;
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Bumped whenever the frontier file layout or the optimizer changes.
pub const FRONTIER_VERSION: u32 = 1;
/// Targets above the frontier grid are rounded up to this step before optimizing.
const UPPER_STEP: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    pub restarts: usize,
    /// Weight `mu` of the penalty `mu v^2` on the relative violation
    /// `v = max(0, p / target - 1)`; the optimum overshoots by about
    /// `B / (6 mu)`, well inside the feasibility slack.
    pub penalty: f64,
    pub max_evals: usize,
    /// Budget of the final refinement of the best restarts.
    pub polish_evals: usize,
    /// Number of restart optima refined further.
    pub polish: usize,
    /// Points with `p <= target (1 + slack)` count as feasible.
    pub feasibility_slack: f64,
    pub grid_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            restarts: 32,
            penalty: 1e4,
            max_evals: 3000,
            polish_evals: 30_000,
            polish: 2,
            feasibility_slack: 1e-3,
            grid_points: 64,
            p_min: 1e-6,
            p_max: 0.5,
            seed: 0,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_evals < 100 || self.grid_points < 2 {
            return Err(Error::Domain(
                "bound optimizer needs restarts >= 1, max_evals >= 100, grid_points >= 2".into(),
            ));
        }
        if !(self.p_min > 0.0 && self.p_max > self.p_min && self.p_max < 1.0) {
            return Err(Error::Domain(
                "frontier grid needs 0 < p_min < p_max < 1".into(),
            ));
        }
        if !(self.penalty > 0.0 && self.feasibility_slack >= 0.0) {
            return Err(Error::Domain(
                "penalty must be positive and slack nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, tagged with the frontier version.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(FRONTIER_VERSION.to_le_bytes());
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }

    pub fn grid(&self) -> Vec<f64> {
        crate::preparation::log_spaced(self.p_min, self.p_max, self.grid_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub p_nplus: f64,
    /// Reported bound: running maximum over all targets up to this one.
    pub bound: f64,
    /// Best feasible value found at this target alone.
    pub optimized: f64,
    /// At least one restart converged to a feasible point.
    pub converged: bool,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub bound: f64,
    /// The optimizer did not converge on any restart: the bound may be too low.
    pub flagged: bool,
}

fn restart_seed(base: u64, n: usize, target: f64, restart: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update(target.to_bits().to_le_bytes());
    h.update((restart as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Displacement giving a coherent state `p_{n+}` equal to `target`.
fn coherent_seed(n: usize, target: f64) -> f64 {
    let tail = |a: f64| fidelity_and_tail(n, &[1.0, 0.0, a, 0.0, 0.0, 0.0]).1;
    let (mut lo, mut hi) = (0.0, super::ansatz::ALPHA_MAX);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

fn starts(n: usize, target: f64, count: usize, seed: u64, warm: Option<&[f64]>) -> Vec<Vec<f64>> {
    let dim = 2 * n + 4;
    let mut out = Vec::with_capacity(count);
    if let Some(w) = warm {
        out.push(w.to_vec());
    }
    // |n-1> nudged by a small displacement: F ~ n a^2, p ~ n(n+1) a^4 / 2
    let mut top = vec![0.0; dim];
    top[2 * (n - 1)] = 1.0;
    top[2 * n] = (2.0 * target / (n * (n + 1)) as f64).powf(0.25).min(1.0);
    out.push(top);
    let mut coherent = vec![0.0; dim];
    coherent[0] = 1.0;
    coherent[2 * n] = coherent_seed(n, target);
    out.push(coherent);
    let mut k = 0;
    while out.len() < count {
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, n, target, k));
        let mut x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        x.push(rng.gen_range(-1.0..1.0));
        x.push(rng.gen_range(-1.0..1.0));
        x.push(rng.gen_range(0.0..0.6));
        x.push(rng.gen_range(0.0..std::f64::consts::TAU));
        out.push(x);
        k += 1;
    }
    out.truncate(count.max(1));
    out
}

struct Best {
    value: f64,
    converged: bool,
    params: Vec<f64>,
}

fn optimize_target(n: usize, target: f64, cfg: &BoundConfig, warm: Option<&[f64]>) -> Best {
    let limit = target * (1.0 + cfg.feasibility_slack);
    let objective = |x: &[f64]| {
        let (f, p) = fidelity_and_tail(n, x);
        let v = (p / target - 1.0).max(0.0);
        -f + cfg.penalty * v * v
    };
    let opts = NelderMeadOptions {
        max_evals: cfg.max_evals,
        f_tol: 1e-12,
        x_tol: 1e-8,
        rebuilds: 1,
    };
    let mut runs: Vec<(Vec<f64>, f64)> = starts(n, target, cfg.restarts, cfg.seed, warm)
        .into_par_iter()
        .map(|x0| {
            let r = nelder_mead(objective, &x0, 0.2, &opts);
            (r.x, r.value)
        })
        .collect();
    runs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let polish = NelderMeadOptions {
        max_evals: cfg.polish_evals,
        f_tol: 1e-12,
        x_tol: 1e-3,
        rebuilds: 8,
    };
    let polished: Vec<(Vec<f64>, bool)> = runs
        .par_iter()
        .take(cfg.polish)
        .map(|(x0, _)| {
            let r = nelder_mead(objective, x0, 0.05, &polish);
            (r.x, r.converged)
        })
        .collect();
    let candidates = polished
        .into_iter()
        .chain(runs.into_iter().map(|(x, _)| (x, false)));
    let mut best = Best {
        value: 0.0,
        converged: false,
        params: Vec::new(),
    };
    for (x, converged) in candidates {
        let (f, p) = fidelity_and_tail(n, &x);
        if p > limit {
            continue;
        }
        best.converged |= converged;
        if f > best.value || best.params.is_empty() {
            best.value = f;
            best.params = x;
        }
    }
    best
}

/// `B_n(p)` at a single target by direct optimization.
pub fn bound_b(n: usize, p_nplus: f64, cfg: &BoundConfig) -> Result<BoundResult> {
    check_n(n)?;
    cfg.validate()?;
    if !(0.0..1.0).contains(&p_nplus) {
        return Err(Error::Domain(format!(
            "p_n+ must lie in [0, 1), got {p_nplus}"
        )));
    }
    if p_nplus == 0.0 {
        return Ok(BoundResult {
            bound: 0.0,
            flagged: false,
        });
    }
    let best = optimize_target(n, p_nplus, cfg, None);
    Ok(BoundResult {
        bound: best.value,
        flagged: !best.converged,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > 20 {
        return Err(Error::Domain(format!(
            "witness order must lie in 1..=20, got {n}"
        )));
    }
    Ok(())
}

/// Precomputed `B_n` on a log grid of `p_{n+}`, nondecreasing by construction.
#[derive(Debug, Serialize, Deserialize)]
pub struct Frontier {
    pub version: u32,
    pub n: usize,
    pub config_hash: String,
    pub config: BoundConfig,
    /// Ascending in `p_nplus`; the first point is the exact `B_n(0) = 0`.
    pub points: Vec<BoundPoint>,
    #[serde(skip)]
    upper: Mutex<HashMap<u64, BoundPoint>>,
}

impl Clone for Frontier {
    fn clone(&self) -> Self {
        Frontier {
            version: self.version,
            n: self.n,
            config_hash: self.config_hash.clone(),
            config: self.config.clone(),
            points: self.points.clone(),
            upper: Mutex::new(self.upper.lock().unwrap().clone()),
        }
    }
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.n == other.n
            && self.config_hash == other.config_hash
            && self.points == other.points
    }
}

impl Frontier {
    /// Optimize every grid target in ascending order, warm-starting each from
    /// the previous optimum.
    pub fn compute(n: usize, cfg: &BoundConfig) -> Result<Self> {
        check_n(n)?;
        cfg.validate()?;
        // a state confined to 0..=n with a nonzero |n> component has stellar
        // rank n, which Gaussian unitaries cannot raise from a rank < n core
        let mut points = vec![BoundPoint {
            p_nplus: 0.0,
            bound: 0.0,
            optimized: 0.0,
            converged: true,
            params: Vec::new(),
        }];
        let mut warm: Option<Vec<f64>> = None;
        for target in cfg.grid() {
            let best = optimize_target(n, target, cfg, warm.as_deref());
            let prev = points.last().unwrap();
            let point = if best.value >= prev.bound {
                BoundPoint {
                    p_nplus: target,
                    bound: best.value,
                    optimized: best.value,
                    converged: best.converged,
                    params: best.params.clone(),
                }
            } else {
                BoundPoint {
                    p_nplus: target,
                    bound: prev.bound,
                    optimized: best.value,
                    converged: prev.converged,
                    params: prev.params.clone(),
                }
            };
            log::debug!("B_{n}({target:.3e}) = {:.6}", point.bound);
            if !best.params.is_empty() {
                warm = Some(best.params);
            }
            points.push(point);
        }
        Ok(Frontier {
            version: FRONTIER_VERSION,
            n,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            points,
            upper: Mutex::new(HashMap::new()),
        })
    }

    /// Bound at `p`: the value at the smallest grid target `>= p`, which can
    /// only overestimate the bound. Targets beyond the grid are optimized
    /// directly (rounded up to a 1/256 step) and memoized.
    pub fn query(&self, p: f64) -> Result<BoundResult> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(Error::Domain(format!("p_n+ must lie in [0, 1], got {p}")));
        }
        if p == 0.0 {
            return Ok(BoundResult {
                bound: 0.0,
                flagged: false,
            });
        }
        if let Some(pt) = self.points.iter().find(|pt| pt.p_nplus >= p) {
            return Ok(BoundResult {
                bound: pt.bound,
                flagged: !pt.converged,
            });
        }
        let last = self.points.last().unwrap();
        let target = (p / UPPER_STEP).ceil() * UPPER_STEP;
        if target >= 1.0 {
            return Ok(BoundResult {
                bound: 1.0,
                flagged: false,
            });
        }
        let key = target.to_bits();
        if let Some(pt) = self.upper.lock().unwrap().get(&key) {
            return Ok(BoundResult {
                bound: pt.bound,
                flagged: !pt.converged,
            });
        }
        let best = optimize_target(
            self.n,
            target,
            &self.config,
            Some(&last.params).filter(|p| !p.is_empty()).map(|v| &v[..]),
        );
        let (bound, converged) = if best.value >= last.bound {
            (best.value, best.converged)
        } else {
            (last.bound, last.converged)
        };
        let pt = BoundPoint {
            p_nplus: target,
            bound,
            optimized: best.value,
            converged,
            params: best.params,
        };
        self.upper.lock().unwrap().insert(key, pt);
        Ok(BoundResult {
            bound,
            flagged: !converged,
        })
    }
}

/// Directory of frontier files keyed by `(n, config hash)`.
#[derive(Debug, Clone)]
pub struct FrontierCache {
    dir: PathBuf,
}

impl FrontierCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FrontierCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, n: usize, cfg: &BoundConfig) -> PathBuf {
        self.dir
            .join(format!("frontier-n{n}-{}.json", &cfg.hash()[..16]))
    }

    /// Load a matching frontier or compute and store it. Files are written
    /// to a temporary name and renamed into place, so readers never see a
    /// partial record; a concurrent writer that wins the race is kept.
    pub fn load_or_compute(&self, n: usize, cfg: &BoundConfig) -> Result<Frontier> {
        let path = self.path(n, cfg);
        if let Some(f) = self.load(&path, n, cfg) {
            return Ok(f);
        }
        let frontier = Frontier::compute(n, cfg)?;
        std::fs::create_dir_all(&self.dir)?;
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(tmp.as_file(), &frontier)
            .map_err(|e| Error::Io(e.to_string()))?;
        tmp.as_file().sync_all()?;
        if let Err(e) = tmp.persist_noclobber(&path) {
            if e.error.kind() != std::io::ErrorKind::AlreadyExists {
                return Err(e.error.into());
            }
        }
        Ok(frontier)
    }

    fn load(&self, path: &Path, n: usize, cfg: &BoundConfig) -> Option<Frontier> {
        let text = std::fs::read_to_string(path).ok()?;
        let f: Frontier = serde_json::from_str(&text).ok()?;
        (f.version == FRONTIER_VERSION
            && f.n == n
            && f.config_hash == cfg.hash()
            && &f.config == cfg)
            .then_some(f)
    }
}
