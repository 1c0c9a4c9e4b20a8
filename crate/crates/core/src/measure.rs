//! Interference hierarchy arithmetic.
//!
//! Probabilities are produced from complex path amplitudes by a
//! [`ProbabilityRule`]; the order-k interference term of a set of paths is
//! the inclusion–exclusion sum over all of its non-empty sub-unions. For the
//! three-path experiment the eight measured probabilities live in a
//! [`ProbabilityVector`] and [`sorkin`] reduces them to ε, δ and ρ.

use std::fmt;
use std::ops::Add;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default lower bound on δ below which ρ is reported as undefined.
pub const DEFAULT_GUARD: f64 = 1e-9;

/// Largest interference order accepted by [`interference_term`] (2^k subsets).
pub const MAX_ORDER: usize = 8;

/// Largest number of paths a [`PathSet`] can address.
pub const MAX_PATHS: usize = 26;

/// Complex amplitude per path, labelled A, B, C, … in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAmplitudes(Vec<Complex64>);

impl PathAmplitudes {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 path amplitudes, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.len() > MAX_PATHS {
            return Err(Error::invalid(format!(
                "at most {MAX_PATHS} paths are supported, got {}",
                amplitudes.len()
            )));
        }
        if let Some(i) = amplitudes.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid(format!(
                "amplitude of path {} is not finite",
                path_label(i)
            )));
        }
        Ok(Self(amplitudes))
    }

    /// Convenience constructor from real amplitudes.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Every path of this amplitude list.
    pub fn all_paths(&self) -> PathSet {
        PathSet::from_indices(0..self.len()).expect("length bounded by MAX_PATHS")
    }

    /// Coherent sum of the amplitudes of the paths in `subset`.
    pub fn superpose(&self, subset: PathSet) -> Result<Complex64> {
        if !subset.within(self.len()) {
            return Err(Error::invalid(format!(
                "path set {subset} refers to paths beyond the {} available",
                self.len()
            )));
        }
        Ok(subset.iter().map(|i| self.0[i]).sum())
    }
}

fn path_label(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// Set of path indices, stored as a bitmask. Index 0 is path A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PathSet(u32);

impl PathSet {
    pub const EMPTY: PathSet = PathSet(0);

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = 0u32;
        for i in indices {
            if i >= MAX_PATHS {
                return Err(Error::invalid(format!("path index {i} out of range")));
            }
            bits |= 1 << i;
        }
        Ok(Self(bits))
    }

    /// Parses labels such as `"AB"`; `"0"` or `""` is the empty set.
    pub fn from_labels(labels: &str) -> Result<Self> {
        let labels = labels.trim();
        if labels == "0" {
            return Ok(Self::EMPTY);
        }
        let mut bits = 0u32;
        for ch in labels.chars() {
            let upper = ch.to_ascii_uppercase();
            if !upper.is_ascii_uppercase() {
                return Err(Error::invalid(format!("invalid path label {ch:?}")));
            }
            let bit = 1 << (upper as u8 - b'A');
            if bits & bit != 0 {
                return Err(Error::invalid(format!("duplicate path label {upper:?}")));
            }
            bits |= bit;
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 32 && self.0 & (1 << index) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: PathSet) -> PathSet {
        PathSet(self.0 | other.0)
    }

    /// True if every member indexes one of `n` paths.
    pub fn within(self, n: usize) -> bool {
        n >= 32 || self.0 >> n == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.0 & (1 << i) != 0)
    }
}

impl fmt::Display for PathSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0");
        }
        for i in self.iter() {
            write!(f, "{}", path_label(i))?;
        }
        Ok(())
    }
}

/// Map from a path amplitude to a detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilityRule {
    /// |ψ|²
    #[default]
    Born,
    /// |ψ|² + α|ψ|³, the lowest-order term that breaks the quadratic algebra.
    PerturbedCubic { alpha: f64 },
}

impl ProbabilityRule {
    pub fn probability(&self, amplitude: Complex64) -> f64 {
        match *self {
            ProbabilityRule::Born => amplitude.norm_sqr(),
            ProbabilityRule::PerturbedCubic { alpha } => {
                let norm_sqr = amplitude.norm_sqr();
                norm_sqr + alpha * norm_sqr * norm_sqr.sqrt()
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            ProbabilityRule::Born => 0.0,
            ProbabilityRule::PerturbedCubic { alpha } => alpha,
        }
    }
}

/// Rule applied to the coherent sum of the amplitudes in `subset`.
///
/// The empty subset superposes to zero amplitude, giving probability 0.
pub fn rule_probability(
    rule: &ProbabilityRule,
    amps: &PathAmplitudes,
    subset: PathSet,
) -> Result<f64> {
    Ok(rule.probability(amps.superpose(subset)?))
}

/// Order-k interference term of the listed paths:
/// I_k = Σ over non-empty subsets S of (−1)^(k−|S|) p_S.
///
/// k = 1 is p_A, k = 2 is p_AB − p_A − p_B, k = 3 is the triple term.
pub fn interference_term(
    rule: &ProbabilityRule,
    amps: &PathAmplitudes,
    paths: &[usize],
) -> Result<f64> {
    let k = paths.len();
    if k == 0 {
        return Err(Error::invalid("interference term needs at least one path"));
    }
    if k > MAX_ORDER {
        return Err(Error::invalid(format!(
            "interference order {k} exceeds the maximum of {MAX_ORDER}"
        )));
    }
    let mut seen = PathSet::EMPTY;
    for &p in paths {
        if p >= amps.len() {
            return Err(Error::invalid(format!(
                "path index {p} not present among {} amplitudes",
                amps.len()
            )));
        }
        if seen.contains(p) {
            return Err(Error::invalid(format!(
                "duplicate path {} in interference term",
                path_label(p)
            )));
        }
        seen = seen.union(PathSet(1 << p));
    }

    let mut total = 0.0;
    for mask in 1u32..(1 << k) {
        let mut amplitude = Complex64::new(0.0, 0.0);
        for (bit, &p) in paths.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                amplitude += amps.0[p];
            }
        }
        let p_s = rule.probability(amplitude);
        if (k - mask.count_ones() as usize).is_multiple_of(2) {
            total += p_s;
        } else {
            total -= p_s;
        }
    }
    Ok(total)
}

/// One of the 2³ open/closed configurations of three slits.
///
/// Declaration order is the column order used throughout: the all-closed
/// background first, then singles, pairs and the all-open combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Combination {
    #[serde(rename = "0")]
    Zero,
    A,
    B,
    C,
    AB,
    BC,
    CA,
    ABC,
}

impl Combination {
    pub const ALL: [Combination; 8] = [
        Combination::Zero,
        Combination::A,
        Combination::B,
        Combination::C,
        Combination::AB,
        Combination::BC,
        Combination::CA,
        Combination::ABC,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Combination::Zero => "0",
            Combination::A => "A",
            Combination::B => "B",
            Combination::C => "C",
            Combination::AB => "AB",
            Combination::BC => "BC",
            Combination::CA => "CA",
            Combination::ABC => "ABC",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == label.trim())
            .ok_or_else(|| Error::invalid(format!("unknown combination label {label:?}")))
    }

    pub fn paths(self) -> PathSet {
        let bits = match self {
            Combination::Zero => 0b000,
            Combination::A => 0b001,
            Combination::B => 0b010,
            Combination::C => 0b100,
            Combination::AB => 0b011,
            Combination::BC => 0b110,
            Combination::CA => 0b101,
            Combination::ABC => 0b111,
        };
        PathSet(bits)
    }

    /// Whether slit `index` (0 = A) is open in this combination.
    pub fn is_open(self, index: usize) -> bool {
        self.paths().contains(index)
    }

    /// Coefficient of this combination in ε.
    pub fn epsilon_coefficient(self) -> f64 {
        match self.paths().len() {
            0 | 2 => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The eight probabilities p0, pA, pB, pC, pAB, pBC, pCA, pABC.
///
/// Entries may be probability densities, powers, count rates or raw counts;
/// ε and δ carry that unit and ρ is unitless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityVector([f64; 8]);

impl ProbabilityVector {
    /// Values in [`Combination::ALL`] order. All must be finite and ≥ 0.
    pub fn new(values: [f64; 8]) -> Result<Self> {
        for (c, v) in Combination::ALL.iter().zip(values) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "probability p_{c} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(Self(values))
    }

    /// Eight probabilities from three amplitudes under `rule`, plus a
    /// `background` present in every combination (p0 is the background).
    pub fn from_amplitudes(
        rule: &ProbabilityRule,
        amps: &PathAmplitudes,
        background: f64,
    ) -> Result<Self> {
        if amps.len() != 3 {
            return Err(Error::invalid(format!(
                "the eight-combination vector needs exactly 3 paths, got {}",
                amps.len()
            )));
        }
        let mut values = [0.0; 8];
        for c in Combination::ALL {
            values[c.index()] = rule_probability(rule, amps, c.paths())? + background;
        }
        Self::new(values)
    }

    pub fn get(&self, c: Combination) -> f64 {
        self.0[c.index()]
    }

    pub fn values(&self) -> [f64; 8] {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Adds the same non-negative background to all eight entries.
    pub fn add_constant(&self, background: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v + background))
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.0.map(f))
    }
}

impl Add for ProbabilityVector {
    type Output = ProbabilityVector;

    fn add(self, rhs: Self) -> Self::Output {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        ProbabilityVector(out)
    }
}

/// ε = pABC − pAB − pBC − pCA + pA + pB + pC − p0.
pub fn epsilon(pv: &ProbabilityVector) -> f64 {
    use Combination::*;
    pv.get(ABC) - pv.get(AB) - pv.get(BC) - pv.get(CA) + pv.get(A) + pv.get(B) + pv.get(C)
        - pv.get(Zero)
}

/// ε, pairwise terms, δ and ρ for one probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SorkinResult {
    pub epsilon: f64,
    pub delta: f64,
    /// `None` when δ fell below the guard.
    pub rho: Option<f64>,
    pub i_ab: f64,
    pub i_bc: f64,
    pub i_ca: f64,
    pub s_ab: i8,
    pub s_bc: i8,
    pub s_ca: i8,
}

impl SorkinResult {
    pub fn rho_defined(&self) -> bool {
        self.rho.is_some()
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Background-subtracted pairwise term pXY − pX − pY + p0.
fn pair_term(pv: &ProbabilityVector, pair: Combination, x: Combination, y: Combination) -> f64 {
    pv.get(pair) - pv.get(x) - pv.get(y) + pv.get(Combination::Zero)
}

/// Reduces the eight probabilities to ε, δ = |I_AB| + |I_BC| + |I_CA| and
/// ρ = ε/δ. ρ is `None` exactly when δ < `guard`.
pub fn sorkin(pv: &ProbabilityVector, guard: f64) -> SorkinResult {
    use Combination::*;
    let i_ab = pair_term(pv, AB, A, B);
    let i_bc = pair_term(pv, BC, B, C);
    let i_ca = pair_term(pv, CA, C, A);
    let delta = i_ab.abs() + i_bc.abs() + i_ca.abs();
    let eps = epsilon(pv);
    let rho = if delta < guard {
        None
    } else {
        Some(eps / delta)
    };
    SorkinResult {
        epsilon: eps,
        delta,
        rho,
        i_ab,
        i_bc,
        i_ca,
        s_ab: sign(i_ab),
        s_bc: sign(i_bc),
        s_ca: sign(i_ca),
    }
}
