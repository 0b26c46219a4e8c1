//! Exact Boltzmann sampling of structures and the block-count statistic `X_n`.
//!
//! The sampler walks the same grammar as [`WeightedSeries`], drawing each
//! production with probability proportional to its weight. Tables are kept
//! as `f64` after rescaling entry `n` by `x^n` with `x` close to the radius of
//! convergence, which keeps them in range without changing any ratio that a
//! decision uses.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::EnergyParams;
use crate::error::AnalysisError;
use crate::exec::Execution;
use crate::scaled::ScaledReal;
use crate::series::{WeightedSeries, MIN_BLOCK};
use crate::singularity::{classify, Regime, DEFAULT_TOL};
use crate::stats::{
    empirical_pmf, ks_lattice, normal_cdf, pmf_moments, rayleigh_cdf, total_variation,
};
use crate::structures::{Arc, SecondaryStructure};

/// Rescaled grammar tables for lengths `0..=nmax`.
#[derive(Clone, Debug)]
pub struct Sampler {
    params: EnergyParams,
    nmax: usize,
    x: f64,
    hairpin: Vec<f64>,
    interior: Vec<f64>,
    c: Vec<f64>,
    tail: Vec<f64>,
    tails1: Vec<f64>,
    tails2: Vec<f64>,
    inner: Vec<f64>,
    s: Vec<f64>,
    /// `(g + 1) v^{beta2 g} x^g`
    gap: Vec<f64>,
    interior_close: f64,
    branch: f64,
}

/// Work items of the stochastic traceback; positions are 1-based.
#[derive(Clone, Copy, Debug)]
enum Task {
    Block { at: usize, len: usize },
    Inner { at: usize, len: usize },
    Tails1 { at: usize, len: usize },
    Tails2 { at: usize, len: usize },
    Tail { at: usize, len: usize },
}

/// One sampled structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub blocks: u32,
    pub energy: f64,
    pub arcs: u32,
    pub structure: Option<SecondaryStructure>,
}

/// Picks the first index whose cumulative weight exceeds `u`; falls back to the
/// last positive option when rounding leaves `u` uncovered.
struct Chooser {
    u: f64,
    last: Option<usize>,
}

impl Chooser {
    fn new(rng: &mut ChaCha8Rng, total: f64) -> Self {
        Chooser {
            u: rng.gen::<f64>() * total,
            last: None,
        }
    }

    #[inline]
    fn take(&mut self, idx: usize, w: f64) -> bool {
        if w > 0.0 {
            self.last = Some(idx);
            self.u -= w;
            if self.u < 0.0 {
                return true;
            }
        }
        false
    }

    /// Scans `lo..=hi` alternately from both ends.
    fn boustrophedon(&mut self, lo: usize, hi: usize, w: impl Fn(usize) -> f64) -> Option<usize> {
        let (mut a, mut b) = (lo, hi);
        while a <= b {
            if self.take(a, w(a)) {
                return Some(a);
            }
            if a != b && self.take(b, w(b)) {
                return Some(b);
            }
            a += 1;
            b = match b.checked_sub(1) {
                Some(b) => b,
                None => break,
            };
        }
        self.last
    }

    fn ascending(&mut self, lo: usize, hi: usize, w: impl Fn(usize) -> f64) -> Option<usize> {
        for i in lo..=hi {
            if self.take(i, w(i)) {
                return Some(i);
            }
        }
        self.last
    }
}

impl Sampler {
    pub fn new(params: &EnergyParams, nmax: usize) -> Self {
        Self::from_series(&WeightedSeries::<ScaledReal>::compute(params, nmax.max(MIN_BLOCK + 1)))
    }

    pub fn from_series(series: &WeightedSeries<ScaledReal>) -> Self {
        let nmax = series.nmax();
        let x = series.s()[nmax - 1].ratio(series.s()[nmax]);
        let lnx = x.ln();
        let scale = |v: &[ScaledReal]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(n, &w)| (w * ScaledReal::from_ln(n as f64 * lnx)).to_f64())
                .collect()
        };
        let w = &series.weights;
        Sampler {
            params: *series.params(),
            nmax,
            x,
            hairpin: scale(&series.hairpin),
            interior: scale(&series.interior),
            c: scale(&series.c),
            tail: scale(&series.tail),
            tails1: scale(&series.tails1),
            tails2: scale(&series.tails2),
            inner: scale(&series.inner),
            s: scale(&series.s),
            gap: scale(&w.interior_gap),
            interior_close: (w.interior_close * ScaledReal::new(x * x)).to_f64(),
            branch: w.branch.to_f64(),
        }
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    /// One structure of length `n <= nmax`.
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng, keep_structure: bool) -> Draw {
        assert!(n <= self.nmax, "length {n} beyond sampler tables ({})", self.nmax);
        let pr = &self.params;
        let mut arcs: Vec<Arc> = Vec::new();
        let mut n_arcs = 0u32;
        let mut energy = 0.0;
        let mut blocks = 0u32;
        let mut stack: Vec<Task> = Vec::new();

        // exterior: peel the last vertex or the last block
        let mut len = n;
        while len >= MIN_BLOCK {
            let mut ch = Chooser::new(rng, self.s[len]);
            if ch.take(0, self.x * self.s[len - 1]) {
                len -= 1;
                continue;
            }
            let m = ch
                .boustrophedon(MIN_BLOCK, len, |m| self.c[m] * self.s[len - m])
                .unwrap_or(0);
            if m == 0 {
                len -= 1;
                continue;
            }
            blocks += 1;
            stack.push(Task::Block { at: len - m + 1, len: m });
            len -= m;
        }

        while let Some(task) = stack.pop() {
            match task {
                Task::Block { at, len } => {
                    n_arcs += 1;
                    if keep_structure {
                        arcs.push(Arc::new(at, at + len - 1));
                    }
                    let mut ch = Chooser::new(rng, self.c[len]);
                    if ch.take(0, self.hairpin[len]) {
                        energy += pr.hairpin_energy(len - 2).expect("block length >= 5");
                    } else if ch.take(1, self.interior[len]) {
                        let mut inner = Chooser::new(rng, self.interior[len] / self.interior_close);
                        let g = inner
                            .ascending(0, len - 7, |g| self.gap[g] * self.c[len - 2 - g])
                            .expect("interior weight is positive");
                        let left = rng.gen_range(0..=g);
                        energy += pr.interior_energy(g);
                        stack.push(Task::Block {
                            at: at + 1 + left,
                            len: len - 2 - g,
                        });
                    } else {
                        energy += pr.gamma1() + pr.gamma2();
                        stack.push(Task::Inner { at: at + 1, len: len - 2 });
                    }
                }
                Task::Inner { at, len } => {
                    // leading unpaired run r, then two or more tails
                    let mut ch = Chooser::new(rng, self.inner[len]);
                    let mut xr = 1.0;
                    let mut pick = None;
                    for r in 0..=len - 2 * MIN_BLOCK {
                        if ch.take(r, xr * self.tails2[len - r]) {
                            pick = Some(r);
                            break;
                        }
                        xr *= self.x;
                    }
                    let r = pick.or(ch.last).expect("multiloop inside has positive weight");
                    stack.push(Task::Tails2 { at: at + r, len: len - r });
                }
                Task::Tails1 { at, len } => {
                    let mut ch = Chooser::new(rng, self.tails1[len]);
                    if ch.take(0, self.tail[len]) {
                        stack.push(Task::Tail { at, len });
                    } else {
                        stack.push(Task::Tails2 { at, len });
                    }
                }
                Task::Tails2 { at, len } => {
                    let mut ch = Chooser::new(rng, self.tails2[len]);
                    let m = ch
                        .boustrophedon(MIN_BLOCK, len - MIN_BLOCK, |m| self.tail[m] * self.tails1[len - m])
                        .expect("two tails have positive weight");
                    stack.push(Task::Tails1 { at: at + m, len: len - m });
                    stack.push(Task::Tail { at, len: m });
                }
                Task::Tail { at, len } => {
                    // branch of length c followed by len - c unpaired vertices
                    let mut ch = Chooser::new(rng, self.tail[len]);
                    let mut run = 1.0;
                    let mut pick = None;
                    for c in (MIN_BLOCK..=len).rev() {
                        if ch.take(c, self.branch * self.c[c] * run) {
                            pick = Some(c);
                            break;
                        }
                        run *= self.x;
                    }
                    let c = pick.or(ch.last).expect("tail has positive weight");
                    energy += pr.gamma2();
                    stack.push(Task::Block { at, len: c });
                }
            }
        }
        let structure = keep_structure.then(|| {
            arcs.sort();
            SecondaryStructure::from_sorted_unchecked(n, arcs)
        });
        Draw {
            blocks,
            energy,
            arcs: n_arcs,
            structure,
        }
    }

    /// Reproducible batch: sample `i` uses stream `i` of a generator seeded by `seed`.
    pub fn sample(
        &self,
        n: usize,
        count: usize,
        seed: u64,
        keep_structures: bool,
        exec: Execution,
    ) -> SampleBatch {
        let draws = exec.map_indexed(count, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            self.draw(n, &mut rng, keep_structures)
        });
        let mut batch = SampleBatch {
            params: self.params,
            n,
            count,
            seed,
            blocks: Vec::with_capacity(count),
            energy: Vec::with_capacity(count),
            arcs: Vec::with_capacity(count),
            structures: keep_structures.then(Vec::new),
        };
        for d in draws {
            batch.blocks.push(d.blocks);
            batch.energy.push(d.energy);
            batch.arcs.push(d.arcs);
            if let (Some(all), Some(s)) = (batch.structures.as_mut(), d.structure) {
                all.push(s);
            }
        }
        batch
    }
}

/// `count` structures of length `n` drawn with probability `weight / S[n]`.
pub fn sample(
    n: usize,
    count: usize,
    params: &EnergyParams,
    seed: u64,
    exec: Execution,
) -> SampleBatch {
    Sampler::new(params, n).sample(n, count, seed, false, exec)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub params: EnergyParams,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// `X(s)`, the number of irreducible blocks.
    pub blocks: Vec<u32>,
    pub energy: Vec<f64>,
    pub arcs: Vec<u32>,
    pub structures: Option<Vec<SecondaryStructure>>,
}

impl SampleBatch {
    pub fn block_pmf(&self) -> Vec<f64> {
        empirical_pmf(&self.blocks)
    }

    /// `sample_id,X,G,arcs`.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("sample_id,X,G,arcs\n");
        for i in 0..self.count {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i, self.blocks[i], self.energy[i], self.arcs[i]
            );
        }
        out
    }
}

/// `k,empirical,exact,limit_law`; missing columns are left empty.
pub fn histogram_csv(
    empirical: &[f64],
    exact: Option<&[f64]>,
    limit: Option<&[f64]>,
    header: &[String],
) -> String {
    let len = [Some(empirical), exact, limit]
        .iter()
        .flatten()
        .map(|v| v.len())
        .max()
        .unwrap_or(0);
    let cell = |v: Option<&[f64]>, k: usize| match v {
        Some(v) => format!("{:e}", v.get(k).copied().unwrap_or(0.0)),
        None => String::new(),
    };
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("k,empirical,exact,limit_law\n");
    for k in 0..len {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            k,
            cell(Some(empirical), k),
            cell(exact, k),
            cell(limit, k)
        );
    }
    out
}

/// `P(X_n = k)` for `k = 0..=n/5`, from the block-count table.
pub fn exact_block_pmf(n: usize, params: &EnergyParams, exec: Execution) -> Result<Vec<f64>, AnalysisError> {
    let series = WeightedSeries::<ScaledReal>::compute(params, n);
    series.blocks(n / MIN_BLOCK, exec).pmf(n, series.s()[n])
}

/// `q_k = k tau^{k-1} (1 - tau)^2` for `k = 0..=kmax` (`q_0 = 0`); subcritical only.
pub fn discrete_limit_pmf(params: &EnergyParams, kmax: usize) -> Result<Vec<f64>, AnalysisError> {
    let report = classify(params, DEFAULT_TOL)?;
    if report.regime != Regime::Subcritical {
        return Err(AnalysisError::WrongRegime {
            expected: Regime::Subcritical.to_string(),
            actual: report.regime.to_string(),
        });
    }
    Ok(limit_pmf_for_tau(report.tau_h, kmax))
}

pub fn limit_pmf_for_tau(tau: f64, kmax: usize) -> Vec<f64> {
    (0..=kmax)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                k as f64 * tau.powi(k as i32 - 1) * (1.0 - tau) * (1.0 - tau)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Law {
    DiscreteLimit,
    Gaussian,
    Rayleigh,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawFit {
    pub law: Law,
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_over_n: f64,
    pub variance_over_n: f64,
    /// Fitted Rayleigh scale of `X_n / sqrt(n)`.
    pub sigma: Option<f64>,
    /// Total variation (discrete law) or Kolmogorov distance (continuous laws).
    pub distance: f64,
}

impl LawFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

fn fit_base(law: Law, pmf: &[f64], n: usize, count: usize) -> LawFit {
    let (mean, variance) = pmf_moments(pmf);
    LawFit {
        law,
        n,
        count,
        mean,
        variance,
        mean_over_n: mean / n as f64,
        variance_over_n: variance / n as f64,
        sigma: None,
        distance: f64::NAN,
    }
}

/// Kolmogorov distance of the standardized block count to `N(0, 1)`.
pub fn fit_gaussian_pmf(pmf: &[f64], n: usize, count: usize) -> Result<LawFit, AnalysisError> {
    let mut fit = fit_base(Law::Gaussian, pmf, n, count);
    if !(fit.variance > 0.0) {
        return Err(AnalysisError::Degenerate("zero variance".into()));
    }
    let (m, sd) = (fit.mean, fit.variance.sqrt());
    fit.distance = ks_lattice(pmf, |x| normal_cdf((x - m) / sd));
    Ok(fit)
}

/// Maximum-likelihood Rayleigh fit of `X_n / sqrt(n)` and its Kolmogorov distance.
pub fn fit_rayleigh_pmf(pmf: &[f64], n: usize, count: usize) -> Result<LawFit, AnalysisError> {
    let mut fit = fit_base(Law::Rayleigh, pmf, n, count);
    let second: f64 = pmf
        .iter()
        .enumerate()
        .map(|(k, p)| (k * k) as f64 * p)
        .sum::<f64>()
        / n as f64;
    if !(second > 0.0) {
        return Err(AnalysisError::Degenerate("all samples are zero".into()));
    }
    let sigma = (second / 2.0).sqrt();
    let root_n = (n as f64).sqrt();
    fit.sigma = Some(sigma);
    fit.distance = ks_lattice(pmf, |x| rayleigh_cdf(x / root_n, sigma));
    Ok(fit)
}

pub fn fit_discrete_pmf(pmf: &[f64], q: &[f64], n: usize, count: usize) -> LawFit {
    let mut fit = fit_base(Law::DiscreteLimit, pmf, n, count);
    fit.distance = total_variation(pmf, q);
    fit
}

pub fn fit_gaussian(batch: &SampleBatch) -> Result<LawFit, AnalysisError> {
    fit_gaussian_pmf(&batch.block_pmf(), batch.n, batch.count)
}

pub fn fit_rayleigh(batch: &SampleBatch) -> Result<LawFit, AnalysisError> {
    fit_rayleigh_pmf(&batch.block_pmf(), batch.n, batch.count)
}
