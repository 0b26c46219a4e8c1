//! Closed form of the irreducible-structure series and its singularities.
//!
//! `C(z)` solves `w2 C^2 + w1 C + w0 = 0` with polynomial coefficients in `z`.
//! The dominant singularity of `C` is the branch point `rho_r` (first sign
//! change of the discriminant); the all-structure series `S = 1 / (1 - z - C)`
//! additionally has a pole `rho_p` when `1 - z - C(z)` vanishes before
//! `rho_r`. Which case occurs is decided by `tau_h = C(rho_r) / (1 - rho_r)`.

use serde::Serialize;

use crate::energy::{EnergyParams, ParamName};
use crate::error::SingularityError;
use crate::scaled::ScaledReal;
use crate::series::WeightedSeries;

pub const DEFAULT_SCAN_STEP: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Target `|gap|` of [`tune_to_critical`].
pub const TUNE_GAP: f64 = 1e-10;
const ROOT_RTOL: f64 = 1e-12;
/// Terms of the truncated series used to pick the branch.
const VALIDATION_TERMS: usize = 40;
const VALIDATION_RTOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WValues {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub disc: f64,
}

impl WValues {
    /// Magnitude used to judge discriminant residuals.
    pub fn scale(&self) -> f64 {
        self.w1 * self.w1 + (4.0 * self.w2 * self.w0).abs()
    }
}

/// The three quadratic coefficients as functions of `z`.
#[derive(Clone, Copy, Debug)]
pub struct WPolynomials {
    params: EnergyParams,
}

impl WPolynomials {
    pub fn new(params: &EnergyParams) -> Self {
        WPolynomials { params: *params }
    }

    pub fn eval(&self, z: f64) -> WValues {
        let pr = &self.params;
        let v = |x: f64| pr.vpow(x);
        let (a1, a2, a3) = (pr.alpha1(), pr.alpha2(), pr.alpha3());
        let (b1, b2) = (pr.beta1(), pr.beta2());
        let (g1, g2) = (pr.gamma1(), pr.gamma2());
        // pair weight in units of 1/16
        let six = 16.0 * pr.p();
        let sixteen = 16.0;
        let u = 1.0 - z;
        let ha = 1.0 - z * v(a2);
        let ib = 1.0 - z * v(b2);
        let tetra = v(4.0 * a2) - v(a3);
        let z2 = z * z;
        let z5 = z2 * z2 * z;

        let w2 = (sixteen * v(g2) * u * u + six * z2 * v(g1 + 3.0 * g2)) * ha * ib * ib
            - six * z2 * v(b1 + g2) * u * u * ha;
        let w1 = six * z2 * v(b1) * u.powi(3) * ha
            - six * v(a1 + g2 + 3.0 * a2) * z5 * ib * ib * u * u
            + six * z5 * z * v(a1 + g2) * tetra * u * u * ha * ib * ib
            - sixteen * u.powi(3) * ha * ib * ib;
        let w0 = six * v(a1) * z5 * u.powi(3) * ib * ib * (v(3.0 * a2) - z * tetra * ha);
        WValues {
            w0,
            w1,
            w2,
            disc: w1 * w1 - 4.0 * w2 * w0,
        }
    }

    /// Smallest `w0` on an evenly spaced interior grid of `(0, 1)`.
    pub fn w0_min_on_grid(&self, points: usize) -> f64 {
        (1..=points)
            .map(|i| self.eval(i as f64 / (points + 1) as f64).w0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A root with its final bracket and residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub bracket: (f64, f64),
    /// `|f(root)|` relative to the local scale of `f`.
    pub residual: f64,
}

/// Which root of the quadratic, `(-w1 + sqrt(disc)) / (2 w2)` or `(-w1 - sqrt(disc)) / (2 w2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= ROOT_RTOL * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// First sign change of `f` on the grid `step, 2 step, ..` below 1, refined by bisection.
fn first_sign_change(f: impl Fn(f64) -> f64 + Copy, step: f64) -> Option<(f64, f64)> {
    let steps = (1.0 / step).round() as usize;
    let mut prev = f(step);
    for i in 2..steps {
        let z = i as f64 * step;
        let fz = f(z);
        if prev == 0.0 {
            let z0 = (i - 1) as f64 * step;
            return Some((z0, z0));
        }
        if (fz > 0.0) != (prev > 0.0) {
            return Some(bisect(f, z - step, z));
        }
        prev = fz;
    }
    None
}

/// Branch point of `C`: the smallest zero of the discriminant in `(0, 1)`.
pub fn find_rho_r_with_step(params: &EnergyParams, step: f64) -> Result<Root, SingularityError> {
    let w = WPolynomials::new(params);
    let (lo, hi) =
        first_sign_change(|z| w.eval(z).disc, step).ok_or(SingularityError::NoBranchPoint)?;
    // keep the side where disc >= 0 so the closed form stays real
    let value = if w.eval(lo).disc >= 0.0 { lo } else { hi };
    let at = w.eval(value);
    Ok(Root {
        value,
        bracket: (lo, hi),
        residual: at.disc.abs() / at.scale(),
    })
}

pub fn find_rho_r(params: &EnergyParams) -> Result<Root, SingularityError> {
    find_rho_r_with_step(params, DEFAULT_SCAN_STEP)
}

/// `C(z)` on `(0, rho_r]` from the quadratic, with the branch chosen against the series.
#[derive(Clone, Copy, Debug)]
pub struct ClosedForm {
    w: WPolynomials,
    branch: Branch,
    rho_r: Root,
}

impl ClosedForm {
    pub fn new(params: &EnergyParams) -> Result<Self, SingularityError> {
        let rho_r = find_rho_r(params)?;
        let w = WPolynomials::new(params);
        let z = rho_r.value / 2.0;
        let series = WeightedSeries::<ScaledReal>::compute(params, VALIDATION_TERMS).eval_c(z, VALIDATION_TERMS);
        let at = w.eval(z);
        let plus = Self::root(at, Branch::Plus);
        let minus = Self::root(at, Branch::Minus);
        let close = |x: f64| (x - series).abs() <= VALIDATION_RTOL * series.abs();
        let branch = match (close(plus), close(minus)) {
            (_, true) => Branch::Minus,
            (true, false) => Branch::Plus,
            (false, false) => {
                return Err(SingularityError::BranchValidation {
                    z,
                    series,
                    plus,
                    minus,
                })
            }
        };
        Ok(ClosedForm { w, branch, rho_r })
    }

    /// Rationalized root: `2 w0 / (-w1 -+ sqrt(disc))` stays finite where `w2 = 0`.
    fn root(at: WValues, branch: Branch) -> f64 {
        let sq = at.disc.max(0.0).sqrt();
        match branch {
            Branch::Plus => 2.0 * at.w0 / (-at.w1 - sq),
            Branch::Minus => 2.0 * at.w0 / (-at.w1 + sq),
        }
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn rho_r(&self) -> Root {
        self.rho_r
    }

    pub fn polynomials(&self) -> &WPolynomials {
        &self.w
    }

    pub fn eval(&self, z: f64) -> Result<f64, SingularityError> {
        let at = self.w.eval(z);
        if at.disc < 0.0 {
            return Err(SingularityError::PastBranchPoint { z });
        }
        Ok(Self::root(at, self.branch))
    }

    /// `C(rho_r) = -w1 / (2 w2) = 2 w0 / (-w1)`, free of the square root.
    pub fn at_branch_point(&self) -> f64 {
        let at = self.w.eval(self.rho_r.value);
        2.0 * at.w0 / -at.w1
    }
}

/// `C(z)` for `0 < z <= rho_r`.
pub fn eval_c_closed(z: f64, params: &EnergyParams) -> Result<f64, SingularityError> {
    ClosedForm::new(params)?.eval(z)
}

/// Removable singularity: the smallest root of `w2` in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RemovableRoot {
    pub root: Root,
    /// `-w0 / w1` at the root.
    pub limit: f64,
    /// Largest deviation of the closed form from `limit` at `rho_d +- 1e-7`,
    /// when `rho_d < rho_r`.
    pub continuity_gap: Option<f64>,
}

pub fn find_rho_d(params: &EnergyParams) -> Result<Option<RemovableRoot>, SingularityError> {
    let w = WPolynomials::new(params);
    let Some((lo, hi)) = first_sign_change(|z| w.eval(z).w2, DEFAULT_SCAN_STEP) else {
        return Ok(None);
    };
    let value = 0.5 * (lo + hi);
    let at = w.eval(value);
    let limit = -at.w0 / at.w1;
    let closed = ClosedForm::new(params)?;
    let continuity_gap = if value < closed.rho_r.value {
        let eps = 1e-7;
        let a = closed.eval(value - eps)?;
        let b = closed.eval(value + eps)?;
        Some((a - limit).abs().max((b - limit).abs()))
    } else {
        None
    };
    let scale = at.w0.abs().max(at.w1.abs()).max(1.0);
    Ok(Some(RemovableRoot {
        root: Root {
            value,
            bracket: (lo, hi),
            residual: at.w2.abs() / scale,
        },
        limit,
        continuity_gap,
    }))
}

/// Pole of `S`: the root of `1 - z - C(z)` in `(0, rho_r]`, with the slope there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pole {
    pub root: Root,
    /// Numerical derivative of `1 - z - C(z)` at the root; negative for a simple pole.
    pub slope: f64,
}

fn pole_of(closed: &ClosedForm) -> Result<Option<Pole>, SingularityError> {
    let rho = closed.rho_r.value;
    let f = |z: f64| 1.0 - z - closed.eval(z.min(rho)).unwrap_or_else(|_| closed.at_branch_point());
    if 1.0 - rho - closed.at_branch_point() > 0.0 {
        return Ok(None);
    }
    let (lo, hi) = bisect(f, 0.0, rho);
    let value = 0.5 * (lo + hi);
    let h = 1e-6 * value.min(rho - value).max(1e-9);
    let slope = (f((value + h).min(rho)) - f(value - h)) / ((value + h).min(rho) - (value - h));
    Ok(Some(Pole {
        root: Root {
            value,
            bracket: (lo, hi),
            residual: f(value).abs(),
        },
        slope,
    }))
}

pub fn find_rho_p(params: &EnergyParams) -> Result<Option<Pole>, SingularityError> {
    pole_of(&ClosedForm::new(params)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub params: EnergyParams,
    pub regime: Regime,
    pub tolerance: f64,
    pub rho_r: Root,
    pub rho_d: Option<RemovableRoot>,
    pub rho_p: Option<Pole>,
    pub rho_c: f64,
    pub rho_s: f64,
    pub branch: Branch,
    pub c_at_rho_r: f64,
    pub tau_h: f64,
    pub gap: f64,
    /// Smallest `w0` on a `10^4`-point grid of `(0, 1)`.
    pub w0_grid_min: f64,
}

impl RegimeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `tau_h - 1`, the signed distance from criticality.
pub fn criticality_gap(params: &EnergyParams) -> Result<f64, SingularityError> {
    let closed = ClosedForm::new(params)?;
    Ok(closed.at_branch_point() / (1.0 - closed.rho_r.value) - 1.0)
}

pub fn classify(params: &EnergyParams, tol: f64) -> Result<RegimeReport, SingularityError> {
    let closed = ClosedForm::new(params)?;
    let rho_r = closed.rho_r;
    let c_at = closed.at_branch_point();
    let tau_h = c_at / (1.0 - rho_r.value);
    let gap = tau_h - 1.0;
    let rho_p = pole_of(&closed)?;
    let regime = if gap < -tol {
        Regime::Subcritical
    } else if gap > tol {
        Regime::Supercritical
    } else {
        Regime::Critical
    };
    let pole_says = if rho_p.is_some() { "pole" } else { "no pole" };
    let consistent = match regime {
        Regime::Subcritical => rho_p.is_none(),
        Regime::Supercritical => rho_p.is_some_and(|p| p.slope < 0.0),
        Regime::Critical => true,
    };
    if !consistent {
        return Err(SingularityError::Inconsistent {
            gap,
            pole: pole_says.to_string(),
        });
    }
    let rho_s = rho_p.map_or(rho_r.value, |p| p.root.value);
    Ok(RegimeReport {
        params: *params,
        regime,
        tolerance: tol,
        rho_r,
        rho_d: find_rho_d(params)?,
        rho_p,
        rho_c: rho_r.value,
        rho_s,
        branch: closed.branch,
        c_at_rho_r: c_at,
        tau_h,
        gap,
        w0_grid_min: closed.w.w0_min_on_grid(10_000),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub params: EnergyParams,
    pub free: ParamName,
    pub value: f64,
    pub gap: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Bisection of `x -> gap(params with free = x)` on `bracket` until `|gap| < 1e-10`.
///
/// Every evaluated gap must lie between the gaps at the current bracket ends;
/// otherwise the map is not monotone there and the bracket is rejected.
pub fn tune_to_critical(
    params: &EnergyParams,
    free: ParamName,
    bracket: (f64, f64),
) -> Result<TuneResult, SingularityError> {
    let gap_at = |x: f64| -> Result<f64, SingularityError> { criticality_gap(&params.with(free, x)?) };
    let (mut lo, mut hi) = bracket;
    let mut glo = gap_at(lo)?;
    let mut ghi = gap_at(hi)?;
    if (glo > 0.0) == (ghi > 0.0) {
        return Err(SingularityError::BracketNoSignChange {
            lo,
            hi,
            lo_gap: glo,
            hi_gap: ghi,
        });
    }
    // coarse monotonicity screen before bisecting
    let mut prev = glo;
    for i in 1..=16 {
        let x = lo + (hi - lo) * i as f64 / 16.0;
        let g = if i == 16 { ghi } else { gap_at(x)? };
        if (g - prev) * (ghi - glo) < 0.0 {
            return Err(SingularityError::NonMonotone { at: x });
        }
        prev = g;
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        let gm = gap_at(mid)?;
        iterations += 1;
        if gm < glo.min(ghi) || gm > glo.max(ghi) {
            return Err(SingularityError::NonMonotone { at: mid });
        }
        let done = gm.abs() < TUNE_GAP || mid <= lo.min(hi) || mid >= hi.max(lo) || iterations >= 200;
        if done {
            return Ok(TuneResult {
                params: params.with(free, mid)?,
                free,
                value: mid,
                gap: gm,
                bracket: (lo, hi),
                iterations,
            });
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_classify() {
        let sub = classify(&EnergyParams::subcritical(), DEFAULT_TOL).unwrap();
        assert_eq!(sub.regime, Regime::Subcritical);
        assert!(sub.rho_p.is_none());
        assert_eq!(sub.rho_s, sub.rho_r.value);
        assert!((sub.rho_r.value - 0.3780191342465702).abs() < 1e-9);
        assert!((sub.tau_h - 0.66070).abs() < 1e-4);
        let sup = classify(&EnergyParams::supercritical(), DEFAULT_TOL).unwrap();
        assert_eq!(sup.regime, Regime::Supercritical);
        let p = sup.rho_p.unwrap();
        assert!(p.slope < 0.0);
        assert!((p.root.value - 0.56797).abs() < 1e-4);
        assert!((sup.rho_r.value - 0.59157).abs() < 1e-4);
        assert!(sup.rho_s < sup.rho_c);
        for r in [&sub, &sup] {
            assert!(r.rho_r.residual < 1e-10);
            assert!(r.w0_grid_min > 0.0);
            assert!(0.0 < r.rho_s && r.rho_s <= r.rho_c && r.rho_c < 1.0);
            let d = r.rho_d.unwrap();
            assert!((d.root.value - r.rho_r.value).abs() > 1e-6);
        }
        assert!(sup.rho_p.unwrap().root.residual < 1e-10);
    }

    #[test]
    fn closed_form_matches_series() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            let closed = ClosedForm::new(&params).unwrap();
            let rho = closed.rho_r().value;
            let ser = WeightedSeries::<ScaledReal>::compute(&params, 200);
            for frac in [0.1, 0.3, 0.5] {
                let z = rho * frac;
                let a = closed.eval(z).unwrap();
                let b = ser.eval_c(z, 200);
                assert!((a - b).abs() < 1e-8 * b, "z = {z}: {a} vs {b}");
            }
            let z: f64 = 1e-6;
            let lead = ser.c()[5].to_f64() * z.powi(5);
            assert!((closed.eval(z).unwrap() / lead - 1.0).abs() < 1e-3);
            let near = closed.eval(rho * (1.0 - 1e-12)).unwrap();
            assert!((near - closed.at_branch_point()).abs() < 1e-4);
            let w = closed.polynomials().eval(rho);
            assert!((closed.at_branch_point() - (-w.w1 / (2.0 * w.w2))).abs() < 1e-6);
            assert!(matches!(
                closed.eval(rho + 1e-4),
                Err(SingularityError::PastBranchPoint { .. })
            ));
        }
    }

    #[test]
    fn general_pair_weight() {
        let params = EnergyParams::subcritical().with_weights(2.2, 0.6).unwrap();
        let closed = ClosedForm::new(&params).unwrap();
        let rho = closed.rho_r().value;
        let ser = WeightedSeries::<ScaledReal>::compute(&params, 300);
        let z = 0.4 * rho;
        assert!((closed.eval(z).unwrap() / ser.eval_c(z, 300) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn removable_singularity_is_continuous() {
        // pushing gamma2 up moves the w2 root below the branch point
        for g2 in [-0.2, 0.0, 0.3, 0.6] {
            let params = EnergyParams::subcritical().with(ParamName::Gamma2, g2).unwrap();
            if let Ok(Some(d)) = find_rho_d(&params) {
                if let Some(gap) = d.continuity_gap {
                    assert!(gap < 1e-5, "gamma2 = {g2}: {gap}");
                }
            }
        }
    }

    #[test]
    fn tuning_reaches_criticality() {
        let t = tune_to_critical(&EnergyParams::subcritical(), ParamName::Gamma1, (-10.0, -3.4)).unwrap();
        assert!(t.gap.abs() < TUNE_GAP);
        assert!((t.value + 6.592741490611409).abs() < 1e-6);
        let r = classify(&t.params, DEFAULT_TOL).unwrap();
        assert_eq!(r.regime, Regime::Critical);
        let e = tune_to_critical(&EnergyParams::subcritical(), ParamName::Gamma1, (-3.4, -3.0)).unwrap_err();
        assert!(e.to_string().contains("bracket does not straddle the transition"));
    }

    #[test]
    fn w0_positive() {
        for params in [EnergyParams::subcritical(), EnergyParams::supercritical()] {
            assert!(WPolynomials::new(&params).w0_min_on_grid(10_000) > 0.0);
        }
    }
}
