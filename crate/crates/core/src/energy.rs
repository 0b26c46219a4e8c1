//! The seven-parameter loop energy model.
//!
//! Scores follow the "larger is better" convention: bonuses are positive,
//! penalties negative, and a structure `s` carries the sampling weight
//! `p^{arcs(s)} * v^{G_s}` with `v > 1`. The optimum of a fold is therefore
//! the structure with the largest total score.
//!
//! Hairpins with exactly four unpaired bases (tetra-loops) score
//! `alpha1 + alpha3`: the tetra-loop score replaces the `4 * alpha2`
//! unpaired term instead of being added to it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::scaled::ScaledReal;
use crate::structures::{Arc, SecondaryStructure};

/// Default Boltzmann base `e^{1/RT}`.
pub const DEFAULT_V: f64 = 1.843868184;
/// Default pair weight: 6 of the 16 dinucleotides form a valid pair.
pub const DEFAULT_P: f64 = 6.0 / 16.0;

/// Smallest number of unpaired bases in a hairpin (chord length 4).
pub const MIN_HAIRPIN: usize = 3;
/// Hairpin size that receives the tetra-loop score.
pub const TETRA_LOOP: usize = 4;

/// Names of the loop-score parameters, in parameter-file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    Alpha1,
    Alpha2,
    Alpha3,
    Beta1,
    Beta2,
    Gamma1,
    Gamma2,
}

impl ParamName {
    pub const ALL: [ParamName; 7] = [
        ParamName::Alpha1,
        ParamName::Alpha2,
        ParamName::Alpha3,
        ParamName::Beta1,
        ParamName::Beta2,
        ParamName::Gamma1,
        ParamName::Gamma2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Alpha1 => "alpha1",
            ParamName::Alpha2 => "alpha2",
            ParamName::Alpha3 => "alpha3",
            ParamName::Beta1 => "beta1",
            ParamName::Beta2 => "beta2",
            ParamName::Gamma1 => "gamma1",
            ParamName::Gamma2 => "gamma2",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ModelError::UnknownParam(s.to_string()))
    }
}

/// Loop scores plus the weight bases `v` and `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParams {
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
    beta1: f64,
    beta2: f64,
    gamma1: f64,
    gamma2: f64,
    v: f64,
    p: f64,
}

impl EnergyParams {
    /// Builds a validated parameter set.
    ///
    /// Requires `v > 1`, `0 < p <= 1`, `alpha2 < 0` and `alpha3 > 0`; the last
    /// two guarantee `v^{4 alpha2} < v^{alpha3}`, which keeps every coefficient
    /// of the irreducible-structure grammar positive.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        beta1: f64,
        beta2: f64,
        gamma1: f64,
        gamma2: f64,
        v: f64,
        p: f64,
    ) -> Result<Self, ModelError> {
        let params = EnergyParams {
            alpha1,
            alpha2,
            alpha3,
            beta1,
            beta2,
            gamma1,
            gamma2,
            v,
            p,
        };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<(), ModelError> {
        let scores = [
            self.alpha1,
            self.alpha2,
            self.alpha3,
            self.beta1,
            self.beta2,
            self.gamma1,
            self.gamma2,
        ];
        if scores.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidParams("scores must be finite".into()));
        }
        if !(self.v > 1.0 && self.v.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "v must exceed 1, got {}",
                self.v
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if self.alpha2 >= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "alpha2 must be negative (unpaired hairpin penalty), got {}",
                self.alpha2
            )));
        }
        if self.alpha3 <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "alpha3 must be positive (tetra-loop bonus), got {}",
                self.alpha3
            )));
        }
        Ok(())
    }

    /// Reference subcritical parameter set.
    pub fn subcritical() -> Self {
        EnergyParams::new(-5.0, -0.01, 7.53, 4.0, -1.0, -3.4, -0.6, DEFAULT_V, DEFAULT_P)
            .expect("preset is valid")
    }

    /// Reference supercritical parameter set.
    pub fn supercritical() -> Self {
        EnergyParams::new(-5.0, -0.01, 7.53, 2.0, -1.0, -10.0, -3.0, DEFAULT_V, DEFAULT_P)
            .expect("preset is valid")
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn alpha3(&self) -> f64 {
        self.alpha3
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    pub fn v(&self) -> f64 {
        self.v
    }
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::Alpha1 => self.alpha1,
            ParamName::Alpha2 => self.alpha2,
            ParamName::Alpha3 => self.alpha3,
            ParamName::Beta1 => self.beta1,
            ParamName::Beta2 => self.beta2,
            ParamName::Gamma1 => self.gamma1,
            ParamName::Gamma2 => self.gamma2,
        }
    }

    /// Copy with one score replaced (re-validated).
    pub fn with(&self, name: ParamName, value: f64) -> Result<Self, ModelError> {
        let mut out = *self;
        match name {
            ParamName::Alpha1 => out.alpha1 = value,
            ParamName::Alpha2 => out.alpha2 = value,
            ParamName::Alpha3 => out.alpha3 = value,
            ParamName::Beta1 => out.beta1 = value,
            ParamName::Beta2 => out.beta2 = value,
            ParamName::Gamma1 => out.gamma1 = value,
            ParamName::Gamma2 => out.gamma2 = value,
        }
        out.check()?;
        Ok(out)
    }

    pub fn with_weights(&self, v: f64, p: f64) -> Result<Self, ModelError> {
        let mut out = *self;
        out.v = v;
        out.p = p;
        out.check()?;
        Ok(out)
    }

    /// `v^x` as a float.
    pub fn vpow(&self, x: f64) -> f64 {
        self.v.powf(x)
    }

    /// Score of a hairpin with `unpaired` bases between the closing pair.
    pub fn hairpin_energy(&self, unpaired: usize) -> Result<f64, ModelError> {
        if unpaired < MIN_HAIRPIN {
            return Err(ModelError::HairpinTooShort { unpaired });
        }
        Ok(if unpaired == TETRA_LOOP {
            self.alpha1 + self.alpha3
        } else {
            self.alpha1 + self.alpha2 * unpaired as f64
        })
    }

    /// Score of an interior loop (a stack when `unpaired == 0`).
    pub fn interior_energy(&self, unpaired: usize) -> f64 {
        self.beta1 + self.beta2 * unpaired as f64
    }

    /// Score of a multiloop with `branches` pairs (closing pair included).
    /// Unpaired bases are free; `unpaired` is accepted for symmetry only.
    pub fn multiloop_energy(&self, branches: usize, _unpaired: usize) -> Result<f64, ModelError> {
        if branches < 3 {
            return Err(ModelError::MultiloopTooFewBranches { branches });
        }
        Ok(self.gamma1 + branches as f64 * self.gamma2)
    }

    pub fn loop_energy(&self, lp: &Loop) -> Result<f64, ModelError> {
        match *lp {
            Loop::Hairpin { unpaired, .. } => self.hairpin_energy(unpaired),
            Loop::Interior { unpaired, .. } => Ok(self.interior_energy(unpaired)),
            Loop::Multi {
                branches, unpaired, ..
            } => self.multiloop_energy(branches, unpaired),
        }
    }

    /// Total score `G_s`: the sum over the loop decomposition. Exterior bases score 0.
    pub fn structure_energy(&self, s: &SecondaryStructure) -> f64 {
        s.loop_decomposition()
            .iter()
            .map(|lp| self.loop_energy(lp).expect("valid structures only have valid loops"))
            .sum()
    }

    /// `p^{arcs} * v^{G_s}`.
    pub fn structure_weight(&self, s: &SecondaryStructure) -> ScaledReal {
        self.weight_of(s.arcs().len(), self.structure_energy(s))
    }

    /// Weight of a structure with the given arc count and total score.
    pub fn weight_of(&self, arcs: usize, energy: f64) -> ScaledReal {
        ScaledReal::from_ln(arcs as f64 * self.p.ln() + energy * self.v.ln())
    }

    /// Parses `key=value` lines; `#` starts a comment. `v` and `p` default.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut scores: [Option<f64>; 7] = [None; 7];
        let mut v = None;
        let mut p = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ModelError::ParamFile {
                line: line_no,
                message: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| ModelError::ParamFile {
                line: line_no,
                message: format!("`{}` is not a number", value.trim()),
            })?;
            let slot = match key {
                "v" => &mut v,
                "p" => &mut p,
                other => {
                    let name: ParamName = other.parse().map_err(|_| ModelError::ParamFile {
                        line: line_no,
                        message: format!("unknown key `{other}`"),
                    })?;
                    &mut scores[name as usize]
                }
            };
            if slot.replace(value).is_some() {
                return Err(ModelError::ParamFile {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        let mut vals = [0.0; 7];
        for (i, name) in ParamName::ALL.iter().enumerate() {
            vals[i] = scores[i].ok_or_else(|| ModelError::ParamFile {
                line: 0,
                message: format!("missing key `{name}`"),
            })?;
        }
        EnergyParams::new(
            vals[0],
            vals[1],
            vals[2],
            vals[3],
            vals[4],
            vals[5],
            vals[6],
            v.unwrap_or(DEFAULT_V),
            p.unwrap_or(DEFAULT_P),
        )
    }

    /// Inverse of [`EnergyParams::parse`]; floats are written in shortest
    /// round-trip form so a parse of the output is bit-exact.
    pub fn to_param_file(&self) -> String {
        let mut out = String::new();
        for name in ParamName::ALL {
            out.push_str(&format!("{}={}\n", name, self.get(name)));
        }
        out.push_str(&format!("v={}\np={}\n", self.v, self.p));
        out
    }

    /// One-line `key=value` rendering used in artifact headers.
    pub fn summary(&self) -> String {
        self.to_param_file().trim_end().replace('\n', " ")
    }
}

impl FromStr for EnergyParams {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnergyParams::parse(s)
    }
}

/// One loop of the loop decomposition, keyed by its closing arc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Loop {
    Hairpin {
        closing: Arc,
        unpaired: usize,
    },
    Interior {
        outer: Arc,
        inner: Arc,
        unpaired: usize,
    },
    /// `branches` counts the closing pair.
    Multi {
        closing: Arc,
        branches: usize,
        unpaired: usize,
    },
}

impl Loop {
    pub fn closing_arc(&self) -> Arc {
        match *self {
            Loop::Hairpin { closing, .. } | Loop::Multi { closing, .. } => closing,
            Loop::Interior { outer, .. } => outer,
        }
    }

    pub fn unpaired(&self) -> usize {
        match *self {
            Loop::Hairpin { unpaired, .. }
            | Loop::Interior { unpaired, .. }
            | Loop::Multi { unpaired, .. } => unpaired,
        }
    }
}
