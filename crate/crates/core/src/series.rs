//! Exact weighted counts of irreducible structures `C[n]`, of all structures
//! `S[n]`, and of structures with `k` irreducible blocks `Sk[n][k]`.
//!
//! The irreducible structures of length `n` (those with the rainbow `(1, n)`)
//! split by the loop the rainbow closes:
//!
//! * hairpin: `p v^{alpha1 + alpha2 (n-2)}` (tetra-loop at `n = 6`);
//! * interior: `p v^{beta1} sum_g (g+1) v^{beta2 g} C[n-2-g]`, `g` unpaired bases
//!   split in `g + 1` ways between the two sides;
//! * multiloop: `p v^{gamma1 + gamma2}` times the inside, which is an unpaired
//!   run followed by at least two "tails". A tail is an irreducible branch
//!   (weighted by an extra `v^{gamma2}`) followed by an unpaired run.
//!
//! With `T` the tail series, `B = T + T B` (one or more tails) and `A = T B`
//! (two or more), the inside of a multiloop is `A / (1 - z)`. Every table is
//! causal, so one pass over `n` fills all of them in `O(nmax^2)`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::energy::EnergyParams;
use crate::error::AnalysisError;
use crate::exec::Execution;
use crate::scaled::{ScaledReal, Weight};
use crate::structures::enumerate_structures;

/// Smallest irreducible structure.
pub const MIN_BLOCK: usize = 5;
/// Largest `n` accepted by [`brute_force_enumerate`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

/// Per-parameter-set weights shared by the count tables and the sampler.
#[derive(Clone, Debug)]
pub struct GrammarWeights<W> {
    pub hairpin: Vec<W>,
    /// `(g + 1) v^{beta2 g}`.
    pub interior_gap: Vec<W>,
    pub interior_close: W,
    pub multi_close: W,
    pub branch: W,
}

impl<W: Weight> GrammarWeights<W> {
    pub fn new(params: &EnergyParams, nmax: usize) -> Self {
        let v = params.v();
        let p = ScaledReal::new(params.p());
        let hairpin = (0..=nmax)
            .map(|n| {
                if n < MIN_BLOCK {
                    W::zero()
                } else {
                    let e = params.hairpin_energy(n - 2).expect("n >= 5");
                    W::from_scaled(p * ScaledReal::powf(v, e))
                }
            })
            .collect();
        let interior_gap = (0..=nmax)
            .map(|g| {
                W::from_scaled(
                    ScaledReal::new((g + 1) as f64) * ScaledReal::powf(v, params.beta2() * g as f64),
                )
            })
            .collect();
        GrammarWeights {
            hairpin,
            interior_gap,
            interior_close: W::from_scaled(p * ScaledReal::powf(v, params.beta1())),
            multi_close: W::from_scaled(
                p * ScaledReal::powf(v, params.gamma1() + params.gamma2()),
            ),
            branch: W::from_scaled(ScaledReal::powf(v, params.gamma2())),
        }
    }
}

/// Coefficient tables for one parameter set, indexed by length `0..=nmax`.
#[derive(Clone, Debug)]
pub struct WeightedSeries<W = ScaledReal> {
    params: EnergyParams,
    nmax: usize,
    pub(crate) weights: GrammarWeights<W>,
    /// Irreducible structures by closing loop type.
    pub(crate) hairpin: Vec<W>,
    pub(crate) interior: Vec<W>,
    pub(crate) multi: Vec<W>,
    pub(crate) c: Vec<W>,
    /// Branch followed by an unpaired run.
    pub(crate) tail: Vec<W>,
    /// One or more tails.
    pub(crate) tails1: Vec<W>,
    /// Two or more tails.
    pub(crate) tails2: Vec<W>,
    /// Unpaired run followed by two or more tails: the inside of a multiloop.
    pub(crate) inner: Vec<W>,
    pub(crate) s: Vec<W>,
}

impl<W: Weight> WeightedSeries<W> {
    pub fn compute(params: &EnergyParams, nmax: usize) -> Self {
        let w = GrammarWeights::<W>::new(params, nmax);
        let zero = W::zero();
        let len = nmax + 1;
        let mut hairpin = vec![zero; len];
        let mut interior = vec![zero; len];
        let mut multi = vec![zero; len];
        let mut c = vec![zero; len];
        let mut tail = vec![zero; len];
        let mut tails1 = vec![zero; len];
        let mut tails2 = vec![zero; len];
        let mut inner = vec![zero; len];
        for n in 0..len {
            hairpin[n] = w.hairpin[n];
            if n >= MIN_BLOCK + 2 {
                let mut acc = zero;
                for g in 0..=n - 7 {
                    acc += w.interior_gap[g] * c[n - 2 - g];
                }
                interior[n] = w.interior_close * acc;
            }
            if n >= 2 {
                multi[n] = w.multi_close * inner[n - 2];
            }
            c[n] = hairpin[n] + interior[n] + multi[n];

            let run = if n > 0 { tail[n - 1] } else { zero };
            tail[n] = run + w.branch * c[n];
            let mut two = zero;
            for m in MIN_BLOCK..=n.saturating_sub(MIN_BLOCK) {
                two += tail[m] * tails1[n - m];
            }
            tails2[n] = two;
            tails1[n] = tail[n] + two;
            inner[n] = if n > 0 { inner[n - 1] + two } else { two };
        }
        let s = total_series(&c);
        WeightedSeries {
            params: *params,
            nmax,
            weights: w,
            hairpin,
            interior,
            multi,
            c,
            tail,
            tails1,
            tails2,
            inner,
            s,
        }
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn c(&self) -> &[W] {
        &self.c
    }

    /// Irreducible weights split by closing loop: hairpin, interior, multiloop.
    pub fn c_by_loop(&self) -> (&[W], &[W], &[W]) {
        (&self.hairpin, &self.interior, &self.multi)
    }

    pub fn s(&self) -> &[W] {
        &self.s
    }

    /// `C[n] / S[n]`.
    pub fn ratio(&self, n: usize) -> f64 {
        self.c[n].ratio(self.s[n])
    }

    /// Truncated power series `sum_{n <= upto} C[n] z^n` in plain floats.
    pub fn eval_c(&self, z: f64, upto: usize) -> f64 {
        let zs = ScaledReal::new(z);
        let mut zn = ScaledReal::ONE;
        let mut acc = ScaledReal::ZERO;
        for n in 0..=upto.min(self.nmax) {
            acc += self.c[n].to_scaled() * zn;
            zn *= zs;
        }
        acc.to_f64()
    }

    /// Block-count table with columns `0..=kmax`.
    pub fn blocks(&self, kmax: usize, exec: Execution) -> BlockTable<W> {
        BlockTable::compute(&self.c, kmax, exec)
    }

    /// `gcd` of `n - n0` over the support `{n <= limit : C[n] > 0}`, `n0` its minimum.
    pub fn aperiodicity_gcd(&self, limit: usize) -> usize {
        let support: Vec<usize> = (0..=limit.min(self.nmax))
            .filter(|&n| !self.c[n].is_zero())
            .collect();
        match support.first() {
            None => 0,
            Some(&n0) => support.iter().fold(0, |g, &n| gcd(g, n - n0)),
        }
    }

    pub fn ratio_trace(&self, from: usize) -> Vec<RatioPoint> {
        (from.max(MIN_BLOCK)..=self.nmax)
            .map(|n| {
                let r = self.ratio(n);
                let ln_r = self.c[n].ln() - self.s[n].ln();
                RatioPoint {
                    n,
                    r,
                    n_r: n as f64 * r,
                    ln_r_over_n: ln_r / n as f64,
                    ln_r,
                }
            })
            .collect()
    }

    /// `n,S,C,r` rows after `# `-prefixed header lines.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("n,S,C,r\n");
        for n in 0..=self.nmax {
            let _ = writeln!(
                out,
                "{},{},{},{:e}",
                n,
                self.s[n].to_scaled(),
                self.c[n].to_scaled(),
                self.ratio(n)
            );
        }
        out
    }
}

/// `S[n] = S[n-1] + sum_{m >= 5} C[m] S[n-m]`, `S[0] = 1`.
fn total_series<W: Weight>(c: &[W]) -> Vec<W> {
    let mut s = vec![W::zero(); c.len()];
    for n in 0..c.len() {
        let mut acc = if n > 0 { s[n - 1] } else { W::one() };
        for m in MIN_BLOCK..=n {
            acc += c[m] * s[n - m];
        }
        s[n] = acc;
    }
    s
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioPoint {
    pub n: usize,
    pub r: f64,
    pub n_r: f64,
    pub ln_r: f64,
    pub ln_r_over_n: f64,
}

/// `Sk[n][k]` for `n <= nmax`, `k <= kmax`, stored by column.
#[derive(Clone, Debug)]
pub struct BlockTable<W = ScaledReal> {
    kmax: usize,
    cols: Vec<Vec<W>>,
}

impl<W: Weight> BlockTable<W> {
    /// Column `k` is the prefix sum of `C * column(k-1)`; within a column the
    /// convolutions are independent and run on `exec`.
    pub fn compute(c: &[W], kmax: usize, exec: Execution) -> Self {
        let len = c.len();
        let mut cols: Vec<Vec<W>> = Vec::with_capacity(kmax + 1);
        cols.push(vec![W::one(); len]);
        for k in 1..=kmax {
            let prev = &cols[k - 1];
            let first = k * MIN_BLOCK;
            let conv = exec.map_indexed(len, |n| {
                let mut acc = W::zero();
                if n >= first {
                    // prev[n - m] is zero unless n - m >= (k-1) * 5
                    for m in MIN_BLOCK..=n - (k - 1) * MIN_BLOCK {
                        acc += c[m] * prev[n - m];
                    }
                }
                acc
            });
            let mut col = conv;
            for n in 1..len {
                let before = col[n - 1];
                col[n] += before;
            }
            cols.push(col);
        }
        BlockTable { kmax, cols }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn nmax(&self) -> usize {
        self.cols[0].len() - 1
    }

    /// True if some structure of length `n` has more than `kmax` blocks.
    pub fn truncated_at(&self, n: usize) -> bool {
        n / MIN_BLOCK > self.kmax
    }

    pub fn get(&self, n: usize, k: usize) -> W {
        self.cols[k][n]
    }

    /// `Sk[n][0..=kmax]`.
    pub fn row(&self, n: usize) -> Vec<W> {
        self.cols.iter().map(|col| col[n]).collect()
    }

    /// `Sk[n][k] / S[n]`; fails when the table is truncated at `n`.
    pub fn pmf(&self, n: usize, s_n: W) -> Result<Vec<f64>, AnalysisError> {
        if n > self.nmax() {
            return Err(AnalysisError::OutOfTable {
                n,
                nmax: self.nmax(),
            });
        }
        if self.truncated_at(n) {
            return Err(AnalysisError::Truncated {
                kmax: self.kmax,
                needed: n / MIN_BLOCK,
            });
        }
        Ok((0..=n / MIN_BLOCK).map(|k| self.cols[k][n].ratio(s_n)).collect())
    }

    /// `n,k,Sk,P` rows for the given lengths.
    pub fn to_csv(&self, s: &[W], lengths: &[usize], header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("n,k,Sk,P\n");
        for &n in lengths {
            for k in 0..=self.kmax.min(n / MIN_BLOCK) {
                let v = self.cols[k][n];
                let _ = writeln!(out, "{},{},{},{:e}", n, k, v.to_scaled(), v.ratio(s[n]));
            }
        }
        out
    }
}

/// Exhaustive totals at one length.
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub n: usize,
    pub structures: usize,
    pub s: ScaledReal,
    pub c: ScaledReal,
    /// Weight by block count.
    pub sk: Vec<ScaledReal>,
}

/// Scores every valid structure on `n <= 16` vertices.
pub fn brute_force_enumerate(n: usize, params: &EnergyParams) -> Result<BruteForce, AnalysisError> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(AnalysisError::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let all = enumerate_structures(n)?;
    let mut out = BruteForce {
        n,
        structures: all.len(),
        s: ScaledReal::ZERO,
        c: ScaledReal::ZERO,
        sk: vec![ScaledReal::ZERO; n / MIN_BLOCK + 1],
    };
    for s in &all {
        let w = params.structure_weight(s);
        out.s += w;
        if s.arcs().first().is_some_and(|a| a.i == 1 && a.j == n) {
            out.c += w;
        }
        out.sk[s.block_count()] += w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaled::ScaledDouble;

    fn rel(a: ScaledReal, b: ScaledReal) -> f64 {
        ScaledReal::rel_diff(a, b)
    }

    #[test]
    fn first_coefficients() {
        let sub = EnergyParams::subcritical();
        let ser = WeightedSeries::<ScaledReal>::compute(&sub, 12);
        for n in 0..5 {
            assert!(ser.c()[n].is_zero());
            assert_eq!(ser.s()[n].to_f64(), 1.0);
        }
        let v = sub.v();
        assert!((ser.c()[5].to_f64() - 0.375 * v.powf(-5.03)).abs() < 1e-15);
        assert!((ser.c()[6].to_f64() - 0.375 * v.powf(2.53)).abs() < 1e-13);
        assert!(rel(ser.s()[5], ScaledReal::ONE + ser.c()[5]) < 1e-15);
        // oracle values from an independent enumeration
        assert!((ser.c()[5].to_f64() - 0.017274680292974083).abs() < 1e-15);
        assert!((ser.c()[6].to_f64() - 1.7633066297431481).abs() < 1e-13);
        assert!((ser.s()[12].to_f64() - 624.2047183903815).abs() < 1e-9);
    }

    #[test]
    fn matches_enumeration() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            let ser = WeightedSeries::<ScaledReal>::compute(&params, 14);
            let blocks = ser.blocks(14, Execution::Sequential);
            for n in 0..=14 {
                let bf = brute_force_enumerate(n, &params).unwrap();
                assert!(rel(ser.c()[n], bf.c) < 1e-9, "C[{n}]");
                assert!(rel(ser.s()[n], bf.s) < 1e-9, "S[{n}]");
                for (k, &w) in bf.sk.iter().enumerate() {
                    assert!(rel(blocks.get(n, k), w) < 1e-9, "Sk[{n}][{k}]");
                }
            }
        }
    }

    #[test]
    fn brute_force_guards() {
        let sub = EnergyParams::subcritical();
        let bf = brute_force_enumerate(4, &sub).unwrap();
        assert_eq!((bf.s.to_f64(), bf.c.to_f64()), (1.0, 0.0));
        assert_eq!(brute_force_enumerate(5, &sub).unwrap().structures, 2);
        assert!(brute_force_enumerate(17, &sub).is_err());
        let c14 = brute_force_enumerate(14, &sub).unwrap();
        assert!((c14.c.to_f64() - 1660.3344952397936).abs() < 1e-8);
        assert!((c14.s.to_f64() - 4299.451125102059).abs() < 1e-8);
    }

    #[test]
    fn block_table_identities() {
        let sup = EnergyParams::supercritical();
        let ser = WeightedSeries::<ScaledReal>::compute(&sup, 200);
        let blocks = ser.blocks(200, Execution::Parallel);
        for n in 0..=200 {
            assert_eq!(blocks.get(n, 0).to_f64(), 1.0);
            let total: ScaledReal = blocks.row(n).into_iter().sum();
            assert!(rel(total, ser.s()[n]) < 1e-12, "n = {n}");
        }
        let c5 = ser.c()[5];
        assert!(rel(blocks.get(10, 2), c5 * c5) < 1e-15);
        let pmf = blocks.pmf(10, ser.s()[10]).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let short = ser.blocks(3, Execution::Sequential);
        assert!(short.truncated_at(20));
        assert!(matches!(
            short.pmf(20, ser.s()[20]),
            Err(AnalysisError::Truncated { .. })
        ));
    }

    #[test]
    fn parallel_blocks_are_bit_identical() {
        let ser = WeightedSeries::<ScaledReal>::compute(&EnergyParams::subcritical(), 300);
        let a = ser.blocks(60, Execution::Sequential);
        let b = ser.blocks(60, Execution::Parallel);
        for n in 0..=300 {
            assert_eq!(a.row(n), b.row(n));
        }
    }

    #[test]
    fn positivity_and_aperiodicity() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            let ser = WeightedSeries::<ScaledReal>::compute(&params, 400);
            assert!(ser.c()[5..].iter().all(|c| !c.is_zero()));
            assert!(ser.s().iter().all(|s| *s >= ScaledReal::ONE));
            assert_eq!(ser.aperiodicity_gcd(20), 1);
        }
    }

    #[test]
    fn double_precision_agrees() {
        let sub = EnergyParams::subcritical();
        let single = WeightedSeries::<ScaledReal>::compute(&sub, 1500);
        let double = WeightedSeries::<ScaledDouble>::compute(&sub, 1500);
        for n in (0..=1500).step_by(50) {
            assert!(rel(single.s()[n], double.s()[n].to_scaled()) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn csv_shape() {
        let ser = WeightedSeries::<ScaledReal>::compute(&EnergyParams::subcritical(), 30);
        let csv = ser.to_csv(&["params x".to_string()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# params x");
        assert_eq!(lines[1], "n,S,C,r");
        assert_eq!(lines.len(), 2 + 31);
        let fields: Vec<&str> = lines[7].split(',').collect();
        let s5: ScaledReal = fields[1].parse().unwrap();
        assert!(rel(s5, ser.s()[5]) < 1e-13);
    }
}
