//! Monte Carlo simulation of `(Y, log Z, φ)`.
//!
//! Paths are grouped in fixed blocks of [`BLOCK`] paths. Block `k` draws from
//! its own ChaCha8 stream (`seed`, stream `k`) and blocks are merged in block
//! order, so results are bit-identical for any worker count, not just equal in
//! distribution.
//!
//! Absorption: `Y` is stopped at an inner barrier `ℓ+ε` / `r−ε` (or at caller
//! barriers) and `log Z`, `φ` stop accumulating. Between grid points a
//! Brownian-bridge test with the frozen local volatility catches crossings that
//! the discrete path misses; without it exit frequencies are biased towards
//! the side the path started nearer to by O(√Δt).

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DiffusionSpec;

pub const BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    /// Milstein correction on `Y` only; `log Z` uses the Euler increment.
    Milstein,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Milstein => "milstein",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scheme> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "milstein" => Ok(Scheme::Milstein),
            _ => Err(Error::Validation(format!("unknown scheme '{s}' (euler, milstein)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub path_count: u64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Offset of the inner barriers from finite endpoints; `None` means
    /// `1e-6 · max(1, |x₀|)`.
    pub epsilon: Option<f64>,
    /// Explicit absorbing barriers, overriding the ε rule.
    pub barriers: Option<(f64, f64)>,
    pub y_cap: f64,
    pub phi_cap: f64,
    pub scheme: Scheme,
    /// 0 uses the global rayon pool.
    pub workers: usize,
    pub antithetic: bool,
    pub bridge: bool,
    /// Capped-path fraction above which an estimate is low-confidence.
    pub low_confidence_fraction: f64,
}

impl Default for McConfig {
    fn default() -> McConfig {
        McConfig {
            path_count: 100_000,
            dt: 1e-3,
            horizon: 1.0,
            seed: 1,
            epsilon: None,
            barriers: None,
            y_cap: 1e9,
            phi_cap: 1e9,
            scheme: Scheme::Euler,
            workers: 0,
            antithetic: false,
            bridge: true,
            low_confidence_fraction: 0.01,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if self.path_count < 1 {
            return bad("path_count must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad("epsilon must be positive");
            }
        }
        if !(self.y_cap > 0.0) || !(self.phi_cap > 0.0) {
            return bad("caps must be positive");
        }
        if !(0.0..=1.0).contains(&self.low_confidence_fraction) {
            return bad("low_confidence_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt).round().max(1.0) as u64
    }

    /// Absorbing levels and whether each side is a true barrier (as opposed
    /// to an explosion cap on an infinite end).
    pub fn effective_barriers(&self, spec: &DiffusionSpec) -> Result<Barriers> {
        let (l, r) = spec.interval();
        let x0 = spec.start();
        let b = if let Some((lo, hi)) = self.barriers {
            if !(lo < hi && lo >= l && hi <= r) || (lo == l && l.is_finite()) || (hi == r && r.is_finite()) {
                return Err(Error::Validation(format!("barriers ({lo}, {hi}) must lie strictly inside ({l}, {r})")));
            }
            Barriers { lo, hi, lo_absorbs: lo.is_finite(), hi_absorbs: hi.is_finite() }
        } else {
            let eps = self.epsilon.unwrap_or(1e-6 * x0.abs().max(1.0));
            let (lo, lo_absorbs) = if l.is_finite() { (l + eps, true) } else { (-self.y_cap, false) };
            let (hi, hi_absorbs) = if r.is_finite() { (r - eps, true) } else { (self.y_cap, false) };
            if !(lo < hi) {
                return Err(Error::Validation(format!("epsilon {eps} leaves no room inside ({l}, {r})")));
            }
            Barriers { lo, hi, lo_absorbs, hi_absorbs }
        };
        if !(b.lo <= x0 && x0 <= b.hi) {
            return Err(Error::Validation(format!("start {x0} lies outside the barriers ({}, {})", b.lo, b.hi)));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barriers {
    pub lo: f64,
    pub hi: f64,
    pub lo_absorbs: bool,
    pub hi_absorbs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Survived = 0,
    AbsorbedLeft = 1,
    AbsorbedRight = 2,
    Capped = 3,
}

/// Terminal state of one path. Absorbed and capped paths keep the values they
/// had when stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub y: f64,
    pub log_z: f64,
    pub phi: f64,
    pub stop_time: f64,
    pub status: PathStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tallies {
    pub absorbed_left: u64,
    pub absorbed_right: u64,
    pub capped: u64,
    pub survived: u64,
}

impl Tallies {
    pub fn of(records: &[PathRecord]) -> Tallies {
        let mut t = Tallies::default();
        for r in records {
            match r.status {
                PathStatus::Survived => t.survived += 1,
                PathStatus::AbsorbedLeft => t.absorbed_left += 1,
                PathStatus::AbsorbedRight => t.absorbed_right += 1,
                PathStatus::Capped => t.capped += 1,
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.absorbed_left + self.absorbed_right + self.capped + self.survived
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub label: String,
    pub mean: f64,
    pub standard_error: f64,
    pub path_count: u64,
    pub tallies: Tallies,
    pub low_confidence: bool,
    pub quantiles: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

impl McEstimate {
    /// Distance of `target` from the mean in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.standard_error
    }
}

struct Coeffs<'a> {
    spec: &'a DiffusionSpec,
    rho_perp: f64,
}

impl Coeffs<'_> {
    fn sigma_prime(&self, y: f64) -> f64 {
        let h = 1e-6 * y.abs().max(1.0);
        (self.spec.sigma(y + h) - self.spec.sigma(y - h)) / (2.0 * h)
    }
}

fn crossed(rng: &mut ChaCha8Rng, d0: f64, d1: f64, sigma: f64, dt: f64) -> bool {
    // Probability that a Brownian bridge with variance σ²Δt between two points
    // at distances d0, d1 > 0 from a level touches it.
    let p = (-2.0 * d0 * d1 / (sigma * sigma * dt)).exp();
    p > 0.0 && rng.random::<f64>() < p
}

fn simulate_one(
    c: &Coeffs,
    cfg: &McConfig,
    bars: &Barriers,
    rng: &mut ChaCha8Rng,
    replay: Option<&[(f64, f64)]>,
    record: &mut Vec<(f64, f64)>,
) -> PathRecord {
    let spec = c.spec;
    let dt = cfg.dt;
    let sdt = dt.sqrt();
    let rho = spec.rho();
    let steps = cfg.steps();
    let mut y = spec.start();
    let mut log_z = 0.0;
    let mut phi = 0.0;
    record.clear();
    let stop = |y, log_z, phi, k: u64, status| PathRecord { y, log_z, phi, stop_time: k as f64 * dt, status };
    if bars.lo_absorbs && y <= bars.lo {
        return stop(bars.lo, 0.0, 0.0, 0, PathStatus::AbsorbedLeft);
    }
    if bars.hi_absorbs && y >= bars.hi {
        return stop(bars.hi, 0.0, 0.0, 0, PathStatus::AbsorbedRight);
    }
    for k in 0..steps {
        let (z1, z2) = match replay.and_then(|r| r.get(k as usize)) {
            Some(&(a, b)) => (-a, -b),
            None => (rng.sample(StandardNormal), rng.sample(StandardNormal)),
        };
        record.push((z1, z2));
        let dw = z1 * sdt;
        let dw1 = (rho * z1 + c.rho_perp * z2) * sdt;
        let yt = y.clamp(bars.lo, bars.hi);
        let (mu, sigma, b) = (spec.mu(yt), spec.sigma(yt), spec.b(yt));
        let mut next = yt + mu * dt + sigma * dw;
        if cfg.scheme == Scheme::Milstein {
            next += 0.5 * sigma * c.sigma_prime(yt) * (dw * dw - dt);
        }
        log_z += b * dw1 - 0.5 * b * b * dt;
        phi += b * b * dt;
        let done = k + 1;
        if !next.is_finite() || !log_z.is_finite() || !phi.is_finite() {
            return stop(y, if log_z.is_finite() { log_z } else { f64::NEG_INFINITY }, phi, done, PathStatus::Capped);
        }
        if next <= bars.lo || (cfg.bridge && crossed(rng, yt - bars.lo, next - bars.lo, sigma, dt)) {
            if bars.lo_absorbs {
                return stop(bars.lo, log_z, phi, done, PathStatus::AbsorbedLeft);
            }
            return stop(next, log_z, phi, done, PathStatus::Capped);
        }
        if next >= bars.hi || (cfg.bridge && crossed(rng, bars.hi - yt, bars.hi - next, sigma, dt)) {
            if bars.hi_absorbs {
                return stop(bars.hi, log_z, phi, done, PathStatus::AbsorbedRight);
            }
            return stop(next, log_z, phi, done, PathStatus::Capped);
        }
        if phi > cfg.phi_cap {
            return stop(next, log_z, phi, done, PathStatus::Capped);
        }
        y = next;
    }
    stop(y, log_z, phi, steps, PathStatus::Survived)
}

fn simulate_block(spec: &DiffusionSpec, cfg: &McConfig, bars: &Barriers, block: u64) -> Vec<PathRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block);
    let n = (cfg.path_count - block * BLOCK).min(BLOCK) as usize;
    let c = Coeffs { spec, rho_perp: (1.0 - spec.rho() * spec.rho()).max(0.0).sqrt() };
    let mut out = Vec::with_capacity(n);
    let mut first = Vec::new();
    let mut scratch = Vec::new();
    while out.len() < n {
        out.push(simulate_one(&c, cfg, bars, &mut rng, None, &mut first));
        if cfg.antithetic && out.len() < n {
            out.push(simulate_one(&c, cfg, bars, &mut rng, Some(&first), &mut scratch));
        }
    }
    out
}

/// Simulates `cfg.path_count` paths of `spec` as given (pass `tilde(spec)` to
/// simulate under the auxiliary measure). Records come back in path order.
pub fn simulate_paths(spec: &DiffusionSpec, cfg: &McConfig) -> Result<Vec<PathRecord>> {
    cfg.validate()?;
    let bars = cfg.effective_barriers(spec)?;
    let blocks = cfg.path_count.div_ceil(BLOCK);
    let run = || -> Vec<PathRecord> {
        (0..blocks)
            .into_par_iter()
            .map(|k| simulate_block(spec, cfg, &bars, k))
            .collect::<Vec<_>>()
            .concat()
    };
    if cfg.workers == 0 {
        Ok(run())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", cfg.workers)))?;
        Ok(pool.install(run))
    }
}

/// Mean and standard error; with antithetic pairs the error comes from the
/// spread of pair averages.
fn mean_se(values: &[f64], antithetic: bool) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let units: Vec<f64> = if antithetic {
        values.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    } else {
        values.to_vec()
    };
    let m = units.len() as f64;
    if m < 2.0 {
        return (mean, f64::INFINITY);
    }
    let um = units.iter().sum::<f64>() / m;
    let var = units.iter().map(|v| (v - um) * (v - um)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn capped_note(t: &Tallies, cfg: &McConfig) -> (bool, Vec<String>) {
    let frac = t.capped as f64 / t.total() as f64;
    if frac > cfg.low_confidence_fraction {
        (true, vec![format!("{:.3}% of paths hit a cap; low confidence", 100.0 * frac)])
    } else {
        (false, Vec::new())
    }
}

/// Estimates `E[Z_T]` at `T = cfg.horizon`. Stopped paths contribute the `Z`
/// they had when stopped.
pub fn estimate_ez(spec: &DiffusionSpec, cfg: &McConfig) -> Result<McEstimate> {
    let recs = simulate_paths(spec, cfg)?;
    let zs: Vec<f64> = recs.iter().map(|r| r.log_z.exp()).collect();
    let (mean, se) = mean_se(&zs, cfg.antithetic);
    let tallies = Tallies::of(&recs);
    let (low_confidence, notes) = capped_note(&tallies, cfg);
    Ok(McEstimate {
        label: "ez".into(),
        mean,
        standard_error: se,
        path_count: recs.len() as u64,
        tallies,
        low_confidence,
        quantiles: Vec::new(),
        notes,
    })
}

/// Left- and right-exit frequencies between two barriers, among paths that
/// were absorbed before the horizon.
pub fn estimate_exit(spec: &DiffusionSpec, barriers: (f64, f64), cfg: &McConfig) -> Result<[McEstimate; 2]> {
    if !(barriers.0.is_finite() && barriers.1.is_finite()) {
        return Err(Error::Validation("exit barriers must be finite".into()));
    }
    let cfg = McConfig { barriers: Some(barriers), ..cfg.clone() };
    let recs = simulate_paths(spec, &cfg)?;
    let tallies = Tallies::of(&recs);
    let absorbed = tallies.absorbed_left + tallies.absorbed_right;
    let (low_confidence, mut notes) = capped_note(&tallies, &cfg);
    if tallies.survived > 0 {
        notes.push(format!("{} paths not absorbed by the horizon were left out", tallies.survived));
    }
    let make = |label: &str, hits: u64| {
        let p = hits as f64 / absorbed as f64;
        McEstimate {
            label: label.into(),
            mean: p,
            standard_error: (p * (1.0 - p) / absorbed as f64).sqrt(),
            path_count: recs.len() as u64,
            tallies,
            low_confidence: low_confidence || absorbed == 0,
            quantiles: Vec::new(),
            notes: notes.clone(),
        }
    };
    Ok([make("exit_left", tallies.absorbed_left), make("exit_right", tallies.absorbed_right)])
}

pub const PHI_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Distribution of `φ` at the stopping time `ζ ∧ T`. The mean is the fraction
/// of paths whose `φ` ran past the cap.
pub fn estimate_phi(spec: &DiffusionSpec, cfg: &McConfig) -> Result<McEstimate> {
    let recs = simulate_paths(spec, cfg)?;
    let n = recs.len() as f64;
    let over: Vec<f64> = recs.iter().map(|r| if r.phi > cfg.phi_cap { 1.0 } else { 0.0 }).collect();
    let (mean, se) = mean_se(&over, false);
    let mut phis: Vec<f64> = recs.iter().map(|r| r.phi).collect();
    phis.sort_by(f64::total_cmp);
    let quantiles = PHI_QUANTILES
        .iter()
        .map(|&q| {
            let i = ((q * n).ceil() as usize).clamp(1, phis.len()) - 1;
            (q, phis[i])
        })
        .collect();
    let tallies = Tallies::of(&recs);
    let (low_confidence, notes) = capped_note(&tallies, cfg);
    Ok(McEstimate {
        label: "phi_cap_exceedance".into(),
        mean,
        standard_error: se,
        path_count: recs.len() as u64,
        tallies,
        low_confidence,
        quantiles,
        notes,
    })
}

pub const DUMP_MAGIC: &[u8; 8] = b"SVMPATH1";

/// Writes records in the columnar layout described in the README: magic,
/// little-endian `u64` count, then the `y`, `log_z`, `phi`, `stop_time`
/// columns as `f64`, then one status byte per path.
pub fn write_path_dump(path: &Path, records: &[PathRecord]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    let mut buf = Vec::with_capacity(16 + records.len() * 33);
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    let cols: [fn(&PathRecord) -> f64; 4] = [|r| r.y, |r| r.log_z, |r| r.phi, |r| r.stop_time];
    for col in cols {
        for r in records {
            buf.extend_from_slice(&col(r).to_le_bytes());
        }
    }
    buf.extend(records.iter().map(|r| r.status as u8));
    std::fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::CanonicalParams;
    use crate::model::builtin;

    fn unit(x0: f64, rho: f64, b: fn(f64) -> f64) -> DiffusionSpec {
        DiffusionSpec::from_fns(|_| 0.0, |_| 1.0, b, (f64::NEG_INFINITY, f64::INFINITY), x0, rho).unwrap()
    }

    fn small(paths: u64) -> McConfig {
        McConfig { path_count: paths, dt: 1e-2, ..McConfig::default() }
    }

    #[test]
    fn zero_exponent_gives_unit_z() {
        let e = estimate_ez(&unit(0.0, 0.3, |_| 0.0), &small(5000)).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.standard_error, 0.0);
        let p = estimate_phi(&unit(0.0, 0.3, |_| 0.0), &small(500)).unwrap();
        assert!(p.quantiles.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn geometric_exponential_has_unit_mean() {
        let e = estimate_ez(&unit(0.0, 0.7, |_| 1.0), &McConfig { path_count: 100_000, dt: 1e-2, ..McConfig::default() }).unwrap();
        assert!(e.z_score(1.0).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn tallies_sum_to_path_count() {
        let s = builtin(&CanonicalParams::Heston { kappa: 1.0, theta: 1.0, xi: 2.0, rho: 0.0 }).unwrap();
        let e = estimate_ez(&s, &small(9000)).unwrap();
        assert_eq!(e.tallies.total(), 9000);
        assert_eq!(e.path_count, 9000);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let s = builtin(&CanonicalParams::Heston { kappa: 1.0, theta: 1.0, xi: 2.0, rho: 0.5 }).unwrap();
        let a = simulate_paths(&s, &McConfig { workers: 1, ..small(10_000) }).unwrap();
        let b = simulate_paths(&s, &McConfig { workers: 3, ..small(10_000) }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn absorbed_paths_are_frozen_at_the_barrier() {
        let s = unit(0.5, 0.0, |_| 1.0);
        let cfg = McConfig { barriers: Some((0.0, 1.0)), horizon: 10.0, ..small(2000) };
        for r in simulate_paths(&s, &cfg).unwrap() {
            match r.status {
                PathStatus::AbsorbedLeft => assert_eq!(r.y, 0.0),
                PathStatus::AbsorbedRight => assert_eq!(r.y, 1.0),
                _ => {}
            }
            // φ = t for b ≡ 1, so accumulation stopped exactly at absorption.
            assert!((r.phi - r.stop_time).abs() < 1e-9);
        }
    }

    #[test]
    fn start_on_a_barrier_exits_there() {
        let s = unit(1.0, 0.0, |_| 1.0);
        let [l, r] = estimate_exit(&s, (0.0, 1.0), &small(100)).unwrap();
        assert_eq!((l.mean, r.mean), (0.0, 1.0));
        let near = unit(1.0 - 1e-4, 0.0, |_| 1.0);
        let [_, r] = estimate_exit(&near, (0.0, 1.0), &small(2000)).unwrap();
        assert!(r.mean > 0.99, "{r:?}");
    }

    #[test]
    fn antithetic_pairs_mirror_normals() {
        let s = unit(0.0, 0.0, |_| 1.0);
        let cfg = McConfig { antithetic: true, bridge: false, horizon: 0.05, ..small(10) };
        let recs = simulate_paths(&s, &cfg).unwrap();
        for pair in recs.chunks(2) {
            assert!((pair[0].y + pair[1].y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let s = unit(0.0, 0.0, |_| 1.0);
        assert!(simulate_paths(&s, &McConfig { dt: 0.0, ..small(10) }).is_err());
        assert!(simulate_paths(&s, &McConfig { path_count: 0, ..small(10) }).is_err());
        assert!(simulate_paths(&s, &McConfig { barriers: Some((0.5, 1.0)), ..small(10) }).is_err());
    }
}
