//! Maximum-score folding of nucleotide sequences under the loop energies,
//! with an optional candidate-list sparsification of the multiloop tables.
//!
//! Scores are kept as integers in units of `1e-9` so that the full and the
//! sparse recursions produce bit-identical tables. The traceback reads only
//! table values, so both variants also return the same structure.
//!
//! Tie-break: at every open-region cell the traceback prefers leaving the last
//! vertex unpaired, then the smallest split point; inside a pair it prefers
//! hairpin, then interior loops by increasing left and right gap, then
//! multiloop. Within a multiloop a prefix scoring exactly zero is left unpaired.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{EnergyParams, Loop};
use crate::error::AnalysisError;
use crate::exec::Execution;
use crate::stats::{bootstrap_loglog_slope, SlopeEstimate};
use crate::structures::{enumerate_structures, Arc, SecondaryStructure, MIN_CHORD};

/// One score unit in energy units.
pub const SCORE_UNIT: f64 = 1e-9;
pub const DEFAULT_MAX_INTERIOR: usize = 30;
/// Longest sequence folded without an interior-loop cap.
pub const UNCAPPED_LIMIT: usize = 120;
pub const BRUTE_FOLD_LIMIT: usize = 16;
const NEG: i64 = i64::MIN / 4;

pub fn to_units(x: f64) -> i64 {
    (x / SCORE_UNIT).round() as i64
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sequence {
    bases: Vec<u8>,
}

impl Sequence {
    pub fn new(text: &str) -> Result<Self, AnalysisError> {
        let bases = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .map(|(i, c)| match c.to_ascii_uppercase() {
                'A' | 'C' | 'G' | 'U' => Ok(c.to_ascii_uppercase() as u8),
                other => Err(AnalysisError::Degenerate(format!(
                    "invalid nucleotide `{other}` at position {}",
                    i + 1
                ))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Sequence { bases })
    }

    /// FASTA-like text: `>` header lines are skipped, the rest is concatenated.
    pub fn parse_fasta(text: &str) -> Result<Self, AnalysisError> {
        let body: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('>'))
            .collect::<Vec<_>>()
            .concat();
        Sequence::new(&body)
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        const ALPHABET: &[u8; 4] = b"ACGU";
        Sequence {
            bases: (0..n).map(|_| ALPHABET[rng.gen_range(0..4)]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.bases).expect("ascii")
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sequence({})", self.as_str())
    }
}

impl FromStr for Sequence {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sequence::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum PairingRule {
    /// GC, CG, AU, UA, GU, UG.
    #[default]
    WatsonCrickWobble,
    /// Every pair allowed (sequence-agnostic model).
    Any,
    None,
}

impl PairingRule {
    pub fn allows(self, a: u8, b: u8) -> bool {
        match self {
            PairingRule::Any => true,
            PairingRule::None => false,
            PairingRule::WatsonCrickWobble => matches!(
                (a, b),
                (b'G', b'C') | (b'C', b'G') | (b'A', b'U') | (b'U', b'A') | (b'G', b'U') | (b'U', b'G')
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FoldOptions {
    /// Largest number of unpaired bases in an interior loop; `None` is uncapped.
    pub max_interior: Option<usize>,
    pub rule: PairingRule,
}

impl Default for FoldOptions {
    fn default() -> Self {
        FoldOptions {
            max_interior: Some(DEFAULT_MAX_INTERIOR),
            rule: PairingRule::WatsonCrickWobble,
        }
    }
}

impl FoldOptions {
    pub fn uncapped() -> Self {
        FoldOptions {
            max_interior: None,
            ..FoldOptions::default()
        }
    }

    pub fn with_rule(self, rule: PairingRule) -> Self {
        FoldOptions { rule, ..self }
    }
}

/// Integer loop scores.
#[derive(Clone, Debug)]
struct Scores {
    /// By number of unpaired bases (entries below 3 unused).
    hairpin: Vec<i64>,
    /// By number of unpaired bases.
    interior: Vec<i64>,
    /// `gamma1 + gamma2`, charged once per multiloop for the closing pair.
    multi_close: i64,
    /// `gamma2`, charged per inner branch.
    branch: i64,
}

impl Scores {
    fn new(params: &EnergyParams, n: usize) -> Self {
        Scores {
            hairpin: (0..=n)
                .map(|l| params.hairpin_energy(l).map(to_units).unwrap_or(NEG))
                .collect(),
            interior: (0..=n).map(|g| to_units(params.interior_energy(g))).collect(),
            multi_close: to_units(params.gamma1() + params.gamma2()),
            branch: to_units(params.gamma2()),
        }
    }

    fn of_loop(&self, lp: &Loop) -> i64 {
        match *lp {
            Loop::Hairpin { unpaired, .. } => self.hairpin[unpaired],
            Loop::Interior { unpaired, .. } => self.interior[unpaired],
            Loop::Multi { branches, .. } => self.multi_close + (branches as i64 - 1) * self.branch,
        }
    }
}

/// Integer score of a structure, loop by loop, as the folding tables count it.
pub fn structure_score_units(params: &EnergyParams, s: &SecondaryStructure) -> i64 {
    let scores = Scores::new(params, s.len());
    s.loop_decomposition().iter().map(|lp| scores.of_loop(lp)).sum()
}

/// Work counters of one fold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FoldStats {
    pub n: usize,
    /// Pairs `(i, j)` with a finite closed score.
    pub intervals: usize,
    /// Closed intervals kept as split points (all of them for the full fold).
    pub candidates: usize,
    /// Split-point evaluations in the multiloop tables.
    pub cells: u64,
    /// Entries of the three quadratic tables.
    pub table_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub score_units: i64,
    pub structure: SecondaryStructure,
    pub stats: FoldStats,
}

impl FoldResult {
    /// Optimal total score (largest `G`).
    pub fn score(&self) -> f64 {
        self.score_units as f64 * SCORE_UNIT
    }
}

struct Tables {
    n: usize,
    v: Vec<i64>,
    m1: Vec<i64>,
    m2: Vec<i64>,
    f: Vec<i64>,
}

impl Tables {
    #[inline]
    fn at(&self, t: &[i64], i: usize, j: usize) -> i64 {
        t[i * self.n + j]
    }
}

struct Folder<'a> {
    seq: &'a [u8],
    n: usize,
    scores: Scores,
    opts: FoldOptions,
}

impl<'a> Folder<'a> {
    fn new(seq: &'a Sequence, params: &EnergyParams, opts: FoldOptions) -> Result<Self, AnalysisError> {
        let n = seq.len();
        if opts.max_interior.is_none() && n > UNCAPPED_LIMIT {
            return Err(AnalysisError::TooLarge {
                n,
                limit: UNCAPPED_LIMIT,
            });
        }
        Ok(Folder {
            seq: &seq.bases,
            n,
            scores: Scores::new(params, n),
            opts,
        })
    }

    fn can_pair(&self, i: usize, j: usize) -> bool {
        j >= i + MIN_CHORD && self.opts.rule.allows(self.seq[i], self.seq[j])
    }

    /// Closed score of `(i, j)` from already filled cells.
    fn closed(&self, t: &Tables, i: usize, j: usize) -> i64 {
        if !self.can_pair(i, j) {
            return NEG;
        }
        let mut best = self.scores.hairpin[j - i - 1];
        let cap = self.opts.max_interior.unwrap_or(usize::MAX).min(j - i - 1);
        for l in 0..=cap {
            let p = i + 1 + l;
            for r in 0..=cap - l {
                let q = j - 1 - r;
                if q < p + MIN_CHORD {
                    break;
                }
                let inner = t.at(&t.v, p, q);
                if inner > NEG {
                    best = best.max(self.scores.interior[l + r] + inner);
                }
            }
        }
        if j >= i + 2 + 2 * (MIN_CHORD + 1) {
            let m2 = t.at(&t.m2, i + 1, j - 1);
            if m2 > NEG {
                best = best.max(self.scores.multi_close + m2);
            }
        }
        best
    }

    fn fill(&self, sparse: bool) -> (Tables, FoldStats) {
        let n = self.n;
        let mut t = Tables {
            n,
            v: vec![NEG; n * n],
            m1: vec![NEG; n * n],
            m2: vec![NEG; n * n],
            f: vec![0; n + 1],
        };
        let mut stats = FoldStats {
            n,
            table_cells: 3 * n * n,
            ..FoldStats::default()
        };
        let any_pair = (0..n).any(|i| (i + MIN_CHORD..n).any(|j| self.can_pair(i, j)));
        if !any_pair {
            return (t, stats);
        }
        let branch = self.scores.branch;
        // candidate left ends of the current column, in decreasing order
        let mut cand: Vec<usize> = Vec::new();
        for j in 0..n {
            cand.clear();
            for i in (0..j.saturating_sub(MIN_CHORD - 1)).rev() {
                let idx = i * n + j;
                let v = self.closed(&t, i, j);
                t.v[idx] = v;
                if v > NEG {
                    stats.intervals += 1;
                }
                let vb = if v > NEG { v + branch } else { NEG };
                let prev_m1 = if j > 0 { t.m1[idx - 1] } else { NEG };
                let prev_m2 = if j > 0 { t.m2[idx - 1] } else { NEG };
                let mut m1 = prev_m1;
                let mut m2 = prev_m2;
                let relax = |k: usize, t: &Tables, m1: &mut i64, m2: &mut i64| {
                    let vk = t.v[k * n + j];
                    if vk == NEG {
                        return;
                    }
                    let vk = vk + branch;
                    let prefix = t.m1[i * n + k - 1];
                    *m1 = (*m1).max(prefix.max(0) + vk);
                    if prefix > NEG {
                        *m2 = (*m2).max(prefix + vk);
                    }
                };
                if sparse {
                    for &k in &cand {
                        stats.cells += 1;
                        relax(k, &t, &mut m1, &mut m2);
                    }
                    if vb > m1 {
                        cand.push(i);
                        stats.candidates += 1;
                    }
                } else {
                    for k in i + 1..=j - MIN_CHORD {
                        stats.cells += 1;
                        relax(k, &t, &mut m1, &mut m2);
                    }
                }
                t.m1[idx] = m1.max(vb);
                t.m2[idx] = m2;
            }
        }
        if !sparse {
            stats.candidates = stats.intervals;
        }
        for j in 1..=n {
            let mut best = t.f[j - 1];
            for k in 0..j.saturating_sub(MIN_CHORD) {
                let v = t.at(&t.v, k, j - 1);
                if v > NEG {
                    best = best.max(t.f[k] + v);
                }
            }
            t.f[j] = best;
        }
        (t, stats)
    }

    fn traceback(&self, t: &Tables) -> SecondaryStructure {
        enum Task {
            Closed(usize, usize),
            M1(usize, usize),
            M2(usize, usize),
        }
        let n = self.n;
        let branch = self.scores.branch;
        let mut arcs = Vec::new();
        let mut stack = Vec::new();
        let mut j = n;
        while j > 0 {
            if t.f[j] == t.f[j - 1] {
                j -= 1;
                continue;
            }
            let k = (0..j.saturating_sub(MIN_CHORD))
                .find(|&k| {
                    let v = t.at(&t.v, k, j - 1);
                    v > NEG && t.f[k] + v == t.f[j]
                })
                .expect("exterior cell has a witness");
            stack.push(Task::Closed(k, j - 1));
            j = k;
        }
        while let Some(task) = stack.pop() {
            match task {
                Task::Closed(i, j) => {
                    arcs.push(Arc::new(i + 1, j + 1));
                    let v = t.at(&t.v, i, j);
                    if self.scores.hairpin[j - i - 1] == v {
                        continue;
                    }
                    let cap = self.opts.max_interior.unwrap_or(usize::MAX).min(j - i - 1);
                    let mut found = None;
                    'outer: for l in 0..=cap {
                        let p = i + 1 + l;
                        for r in 0..=cap - l {
                            let q = j - 1 - r;
                            if q < p + MIN_CHORD {
                                break;
                            }
                            let inner = t.at(&t.v, p, q);
                            if inner > NEG && self.scores.interior[l + r] + inner == v {
                                found = Some((p, q));
                                break 'outer;
                            }
                        }
                    }
                    match found {
                        Some((p, q)) => stack.push(Task::Closed(p, q)),
                        None => stack.push(Task::M2(i + 1, j - 1)),
                    }
                }
                Task::M1(i, j) => {
                    let here = t.at(&t.m1, i, j);
                    if j > i && t.at(&t.m1, i, j - 1) == here {
                        stack.push(Task::M1(i, j - 1));
                        continue;
                    }
                    let k = (i..=j - MIN_CHORD)
                        .find(|&k| {
                            let vk = t.at(&t.v, k, j);
                            let prefix = if k > i { t.at(&t.m1, i, k - 1).max(0) } else { 0 };
                            vk > NEG && prefix + vk + branch == here
                        })
                        .expect("m1 cell has a witness");
                    stack.push(Task::Closed(k, j));
                    if k > i && t.at(&t.m1, i, k - 1) > 0 {
                        stack.push(Task::M1(i, k - 1));
                    }
                }
                Task::M2(i, j) => {
                    let here = t.at(&t.m2, i, j);
                    if t.at(&t.m2, i, j - 1) == here {
                        stack.push(Task::M2(i, j - 1));
                        continue;
                    }
                    let k = (i + 1..=j - MIN_CHORD)
                        .find(|&k| {
                            let vk = t.at(&t.v, k, j);
                            let prefix = t.at(&t.m1, i, k - 1);
                            vk > NEG && prefix > NEG && prefix + vk + branch == here
                        })
                        .expect("m2 cell has a witness");
                    stack.push(Task::Closed(k, j));
                    stack.push(Task::M1(i, k - 1));
                }
            }
        }
        arcs.sort();
        SecondaryStructure::from_sorted_unchecked(n, arcs)
    }

    fn run(&self, sparse: bool) -> FoldResult {
        let (t, stats) = self.fill(sparse);
        FoldResult {
            score_units: t.f[self.n],
            structure: self.traceback(&t),
            stats,
        }
    }
}

/// Dense recursion: every closed interval is tried as a multiloop split point.
pub fn fold_full(seq: &Sequence, params: &EnergyParams, opts: FoldOptions) -> Result<FoldResult, AnalysisError> {
    Ok(Folder::new(seq, params, opts)?.run(false))
}

/// Split points restricted to candidates: closed intervals whose score beats
/// every decomposition into smaller optimal pieces.
pub fn fold_sparse(seq: &Sequence, params: &EnergyParams, opts: FoldOptions) -> Result<FoldResult, AnalysisError> {
    Ok(Folder::new(seq, params, opts)?.run(true))
}

/// Best score, number of optimal structures and the first optimal one in
/// enumeration order, over all pairing-compatible structures (`n <= 16`).
#[derive(Clone, Debug, PartialEq)]
pub struct BruteFold {
    pub score_units: i64,
    pub optimal_count: usize,
    pub structure: SecondaryStructure,
}

pub fn brute_force_fold(seq: &Sequence, params: &EnergyParams, rule: PairingRule) -> Result<BruteFold, AnalysisError> {
    let n = seq.len();
    if n > BRUTE_FOLD_LIMIT {
        return Err(AnalysisError::TooLarge {
            n,
            limit: BRUTE_FOLD_LIMIT,
        });
    }
    let scores = Scores::new(params, n);
    let mut best: Option<BruteFold> = None;
    for s in enumerate_structures(n)? {
        if !s
            .arcs()
            .iter()
            .all(|a| rule.allows(seq.bases[a.i - 1], seq.bases[a.j - 1]))
        {
            continue;
        }
        let score: i64 = s.loop_decomposition().iter().map(|lp| scores.of_loop(lp)).sum();
        match best.as_mut() {
            Some(b) if score < b.score_units => {}
            Some(b) if score == b.score_units => b.optimal_count += 1,
            _ => {
                best = Some(BruteFold {
                    score_units: score,
                    optimal_count: 1,
                    structure: s,
                })
            }
        }
    }
    Ok(best.expect("the empty structure is always admissible"))
}

/// Full and sparse fold of one instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CandidateStats {
    pub n: usize,
    pub trial: usize,
    pub intervals: usize,
    pub candidates: usize,
    pub pruned_fraction: f64,
    pub t_full_ms: f64,
    pub t_sparse_ms: f64,
    pub cells_full: u64,
    pub cells_sparse: u64,
    pub table_cells: usize,
    pub score_units: i64,
}

pub fn compare_folds(
    seq: &Sequence,
    params: &EnergyParams,
    opts: FoldOptions,
    trial: usize,
) -> Result<CandidateStats, AnalysisError> {
    let start = Instant::now();
    let full = fold_full(seq, params, opts)?;
    let t_full = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let sparse = fold_sparse(seq, params, opts)?;
    let t_sparse = start.elapsed().as_secs_f64() * 1e3;
    assert_eq!(full.score_units, sparse.score_units, "sparse fold lost optimality");
    let intervals = full.stats.intervals;
    let candidates = sparse.stats.candidates;
    Ok(CandidateStats {
        n: seq.len(),
        trial,
        intervals,
        candidates,
        pruned_fraction: if intervals == 0 {
            0.0
        } else {
            1.0 - candidates as f64 / intervals as f64
        },
        t_full_ms: t_full,
        t_sparse_ms: t_sparse,
        cells_full: full.stats.cells,
        cells_sparse: sparse.stats.cells,
        table_cells: full.stats.table_cells,
        score_units: full.score_units,
    })
}

/// The random sequence of trial `trial` at length `n`.
pub fn sweep_sequence(n: usize, trial: usize, seed: u64) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | trial as u64);
    Sequence::random(n, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthSummary {
    pub n: usize,
    pub mean_candidates: f64,
    pub mean_intervals: f64,
    pub mean_pruned_fraction: f64,
    pub mean_t_full_ms: f64,
    pub mean_t_sparse_ms: f64,
    /// Mean sparse over mean full wall-clock.
    pub time_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub params: EnergyParams,
    pub seed: u64,
    pub rows: Vec<CandidateStats>,
    pub summary: Vec<LengthSummary>,
    pub candidate_slope: SlopeEstimate,
    pub interval_slope: SlopeEstimate,
    pub full_time_slope: SlopeEstimate,
    pub sparse_time_slope: SlopeEstimate,
}

/// Folds `trials` random sequences at every length, full and sparse.
pub fn count_candidates_sweep(
    lengths: &[usize],
    trials: usize,
    params: &EnergyParams,
    opts: FoldOptions,
    seed: u64,
    exec: Execution,
) -> Result<Sweep, AnalysisError> {
    let jobs: Vec<(usize, usize)> = lengths
        .iter()
        .flat_map(|&n| (0..trials).map(move |t| (n, t)))
        .collect();
    let rows = exec
        .map_slice(&jobs, |&(n, trial)| {
            compare_folds(&sweep_sequence(n, trial, seed), params, opts, trial)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let per_length = |f: &dyn Fn(&CandidateStats) -> f64| -> Vec<Vec<f64>> {
        lengths
            .iter()
            .map(|&n| rows.iter().filter(|r| r.n == n).map(f).collect())
            .collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cands = per_length(&|r| r.candidates as f64);
    let ints = per_length(&|r| r.intervals as f64);
    let tf = per_length(&|r| r.t_full_ms);
    let ts = per_length(&|r| r.t_sparse_ms);
    let pruned = per_length(&|r| r.pruned_fraction);
    let summary = lengths
        .iter()
        .enumerate()
        .map(|(i, &n)| LengthSummary {
            n,
            mean_candidates: mean(&cands[i]),
            mean_intervals: mean(&ints[i]),
            mean_pruned_fraction: mean(&pruned[i]),
            mean_t_full_ms: mean(&tf[i]),
            mean_t_sparse_ms: mean(&ts[i]),
            time_ratio: mean(&ts[i]) / mean(&tf[i]),
        })
        .collect();
    let x: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let slope = |g: &[Vec<f64>]| bootstrap_loglog_slope(&x, g, 1000, 0.95, seed);
    Ok(Sweep {
        params: *params,
        seed,
        candidate_slope: slope(&cands),
        interval_slope: slope(&ints),
        full_time_slope: slope(&tf),
        sparse_time_slope: slope(&ts),
        rows,
        summary,
    })
}

impl Sweep {
    /// `n,trial,candidates,intervals,t_full_ms,t_sparse_ms,cells_full,cells_sparse`.
    /// Without timing the two wall-clock columns are left empty, which makes
    /// the file a deterministic function of the inputs.
    pub fn to_csv(&self, header: &[String], timing: bool) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("n,trial,candidates,intervals,t_full_ms,t_sparse_ms,cells_full,cells_sparse\n");
        for r in &self.rows {
            let (tf, ts) = if timing {
                (format!("{:.3}", r.t_full_ms), format!("{:.3}", r.t_sparse_ms))
            } else {
                (String::new(), String::new())
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n, r.trial, r.candidates, r.intervals, tf, ts, r.cells_full, r.cells_sparse
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> Sequence {
        s.parse().unwrap()
    }

    #[test]
    fn sequence_parsing() {
        assert_eq!(seq("acgu").as_str(), "ACGU");
        assert!("ACGT".parse::<Sequence>().is_err());
        let s = Sequence::parse_fasta(">x\nGGGG\nAAAA\n").unwrap();
        assert_eq!(s.as_str(), "GGGGAAAA");
    }

    #[test]
    fn no_pairs_gives_empty_structure() {
        let sub = EnergyParams::subcritical();
        let r = fold_full(&seq("AAAAAAAAAA"), &sub, FoldOptions::default()).unwrap();
        assert_eq!(r.score_units, 0);
        assert!(r.structure.arcs().is_empty());
        let s = sweep_sequence(300, 0, 1);
        for f in [fold_full, fold_sparse] {
            let r = f(&s, &sub, FoldOptions::default().with_rule(PairingRule::None)).unwrap();
            assert!(r.structure.arcs().is_empty());
            assert_eq!(r.stats.cells, 0);
        }
    }

    #[test]
    fn hairpin_stack_matches_brute_force() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            let s = seq("GGGGAAAACCCC");
            let full = fold_full(&s, &params, FoldOptions::default()).unwrap();
            let bf = brute_force_fold(&s, &params, PairingRule::WatsonCrickWobble).unwrap();
            assert_eq!(full.score_units, bf.score_units);
            assert!(!full.structure.arcs().is_empty());
            if bf.optimal_count == 1 {
                assert_eq!(full.structure, bf.structure);
            }
        }
    }

    #[test]
    fn single_pair_is_taken_iff_profitable() {
        let sub = EnergyParams::subcritical();
        // only (1, 7) can pair: four unpaired bases in between, tetra-loop bonus
        let r = fold_full(&seq("GAAAAAC"), &sub, FoldOptions::default()).unwrap();
        assert!(sub.hairpin_energy(5).unwrap() < 0.0);
        assert!(r.structure.arcs().is_empty());
        let r = fold_full(&seq("GAAAAC"), &sub, FoldOptions::default()).unwrap();
        assert!(sub.hairpin_energy(4).unwrap() > 0.0);
        assert_eq!(r.structure.arcs(), &[Arc::new(1, 6)]);
        assert!((r.score() - 2.53).abs() < 1e-9);
        let empty = brute_force_fold(&seq(""), &sub, PairingRule::WatsonCrickWobble).unwrap();
        assert!(empty.structure.arcs().is_empty());
    }

    #[test]
    fn sequence_agnostic_fold_matches_brute_force() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            for n in [5, 9, 12, 16] {
                let s = seq(&"A".repeat(n));
                let opts = FoldOptions::default().with_rule(PairingRule::Any);
                let full = fold_full(&s, &params, opts).unwrap();
                let bf = brute_force_fold(&s, &params, PairingRule::Any).unwrap();
                assert_eq!(full.score_units, bf.score_units, "n = {n}");
            }
        }
    }

    #[test]
    fn uncapped_mode_is_guarded() {
        let s = sweep_sequence(121, 0, 0);
        assert!(fold_full(&s, &EnergyParams::subcritical(), FoldOptions::uncapped()).is_err());
        let s = sweep_sequence(80, 0, 0);
        let a = fold_full(&s, &EnergyParams::subcritical(), FoldOptions::uncapped()).unwrap();
        let b = fold_sparse(&s, &EnergyParams::subcritical(), FoldOptions::uncapped()).unwrap();
        assert_eq!(a.score_units, b.score_units);
    }

    #[test]
    fn sweep_csv_is_deterministic_without_timing() {
        let sub = EnergyParams::subcritical();
        let a = count_candidates_sweep(&[40, 80], 3, &sub, FoldOptions::default(), 7, Execution::Parallel).unwrap();
        let b = count_candidates_sweep(&[40, 80], 3, &sub, FoldOptions::default(), 7, Execution::Sequential).unwrap();
        assert_eq!(a.to_csv(&[], false), b.to_csv(&[], false));
        assert!(a.to_csv(&[], false).starts_with(
            "n,trial,candidates,intervals,t_full_ms,t_sparse_ms,cells_full,cells_sparse\n40,0,"
        ));
        assert_eq!(a.summary.len(), 2);
    }

    fn arb_sequence(max: usize) -> impl Strategy<Value = Sequence> {
        proptest::collection::vec(proptest::sample::select(b"ACGU".to_vec()), 0..=max)
            .prop_map(|b| Sequence::new(std::str::from_utf8(&b).unwrap()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn full_matches_brute_force(s in arb_sequence(16)) {
            for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
                let full = fold_full(&s, &params, FoldOptions::default()).unwrap();
                let bf = brute_force_fold(&s, &params, PairingRule::WatsonCrickWobble).unwrap();
                prop_assert_eq!(full.score_units, bf.score_units);
                if bf.optimal_count == 1 {
                    prop_assert_eq!(&full.structure, &bf.structure);
                }
            }
        }

        #[test]
        fn sparse_equals_full(s in arb_sequence(150)) {
            for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
                let full = fold_full(&s, &params, FoldOptions::default()).unwrap();
                let sparse = fold_sparse(&s, &params, FoldOptions::default()).unwrap();
                prop_assert_eq!(full.score_units, sparse.score_units);
                prop_assert_eq!(&full.structure, &sparse.structure);
                prop_assert!(sparse.stats.candidates <= full.stats.intervals);
                let e = params.structure_energy(&full.structure);
                prop_assert!((e - full.score()).abs() <= 1e-9 * full.score().abs().max(1.0));
                prop_assert_eq!(structure_score_units(&params, &full.structure), full.score_units);
            }
        }
    }
}
