//! Systematic error mechanisms that can fake a nonzero ρ.
//!
//! * Source power fluctuations: first-order propagation of independent
//!   relative errors of equal size into ρ, and its photon-counting variant
//!   where each variance equals the count.
//! * Mask leakage combined with a per-combination mask misalignment.
//! * Detector dead time and soft saturation.

use rand::RngCore;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{sorkin, Combination, ProbabilityVector, SorkinResult};
use crate::optics::{
    build_combination_aperture, combination_apertures, CombinationAperture, OpeningMask, SlitPlate,
};
use crate::rng::{substream, DOMAIN_DISPLACEMENT};
use crate::{Error, Result};

/// Quoted detector dead time, seconds.
pub const DEFAULT_DEAD_TIME: f64 = 50e-9;
/// Mean count rate of the overnight run, counts per second.
pub const DEFAULT_PEAK_RATE: f64 = 80_000.0;
/// Max/min detected power ratio used for the nonlinearity sweep.
pub const DEFAULT_DYNAMIC_RANGE: f64 = 100.0;
/// Spurious intensity transmission of the reference misalignment study.
pub const REFERENCE_INTENSITY_LEAKAGE: f64 = 0.05;
/// Upper bound of the per-combination mask displacement, meters.
pub const REFERENCE_MAX_DISPLACEMENT: f64 = 10e-6;

/// Source power model for sequential measurement of the combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub mean_power: f64,
    /// Relative fluctuation Δp = ΔP/P averaged over one combination dwell.
    pub relative_fluctuation: f64,
    /// Relative power change per repetition (eight dwells).
    pub linear_drift_rate: f64,
    pub order: SequenceOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceOrder {
    /// 0, A, B, C, AB, BC, CA, ABC every repetition.
    Fixed,
    /// A fresh random permutation per repetition.
    RandomizedPerRepetition,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            mean_power: 1.0,
            relative_fluctuation: 0.0,
            linear_drift_rate: 0.0,
            order: SequenceOrder::Fixed,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_power.is_finite() && self.mean_power > 0.0) {
            return Err(Error::invalid("mean power must be positive"));
        }
        if !(self.relative_fluctuation.is_finite() && self.relative_fluctuation >= 0.0) {
            return Err(Error::invalid("relative power fluctuation must be ≥ 0"));
        }
        if !self.linear_drift_rate.is_finite() {
            return Err(Error::invalid("power drift rate must be finite"));
        }
        Ok(())
    }
}

/// Counting detector: dark counts, non-paralyzable dead time and a quadratic
/// soft saturation, applied in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Dead time τ in seconds.
    pub dead_time: f64,
    /// Fractional response deficit β at `full_scale_rate`.
    pub nonlinearity_beta: f64,
    pub full_scale_rate: f64,
    pub dark_rate: f64,
    /// Dwell time per combination, seconds.
    pub dwell_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorModel {
    /// Linear detector, no dark counts, 37.5 s per combination.
    pub fn ideal() -> Self {
        Self {
            dead_time: 0.0,
            nonlinearity_beta: 0.0,
            full_scale_rate: DEFAULT_PEAK_RATE,
            dark_rate: 0.0,
            dwell_time: 37.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(Error::invalid("dead time must be ≥ 0"));
        }
        if !(0.0..1.0).contains(&self.nonlinearity_beta) {
            return Err(Error::invalid("nonlinearity beta must lie in [0, 1)"));
        }
        if !(self.full_scale_rate.is_finite() && self.full_scale_rate > 0.0) {
            return Err(Error::invalid("full scale rate must be positive"));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(Error::invalid("dark rate must be ≥ 0"));
        }
        if !(self.dwell_time.is_finite() && self.dwell_time > 0.0) {
            return Err(Error::invalid("dwell time must be positive"));
        }
        Ok(())
    }

    /// Measured rate for a true incident rate (counts per second).
    pub fn response(&self, true_rate: f64) -> f64 {
        let mut rate = true_rate.max(0.0) + self.dark_rate;
        if self.dead_time > 0.0 {
            rate /= 1.0 + rate * self.dead_time;
        }
        if self.nonlinearity_beta > 0.0 {
            // r(1 − βr/F) peaks at r = F/(2β); hold the peak value beyond it
            let knee = self.full_scale_rate / (2.0 * self.nonlinearity_beta);
            let r = rate.min(knee);
            rate = r * (1.0 - self.nonlinearity_beta * r / self.full_scale_rate);
        }
        rate
    }

    /// Inverse of the dead-time stage alone: m/(1 − mτ).
    pub fn correct_dead_time(measured_rate: f64, dead_time: f64) -> f64 {
        let denom = 1.0 - measured_rate * dead_time;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            measured_rate / denom
        }
    }
}

/// Measured rate for a true incident rate; see [`DetectorModel::response`].
pub fn detector_response(model: &DetectorModel, true_rate: f64) -> f64 {
    model.response(true_rate)
}

/// Maps relative far-field intensity to an incident count rate.
///
/// The ideal all-open forward maximum maps to `peak_rate`. With a dynamic
/// range R the dark parts of the pattern sit at `peak_rate / R`, so the
/// detector sees rates spanning [peak/R, peak].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateScaling {
    pub peak_rate: f64,
    pub dynamic_range: Option<f64>,
}

impl RateScaling {
    pub fn new(peak_rate: f64, dynamic_range: Option<f64>) -> Result<Self> {
        if !(peak_rate.is_finite() && peak_rate > 0.0) {
            return Err(Error::invalid("peak rate must be positive"));
        }
        if let Some(r) = dynamic_range {
            if !(r.is_finite() && r > 1.0) {
                return Err(Error::invalid("dynamic range must exceed 1"));
            }
        }
        Ok(Self {
            peak_rate,
            dynamic_range,
        })
    }

    pub fn floor(&self) -> f64 {
        self.dynamic_range.map_or(0.0, |r| self.peak_rate / r)
    }

    /// `relative` is intensity divided by the ideal all-open forward peak.
    pub fn rate(&self, relative: f64) -> f64 {
        let floor = self.floor();
        floor + (self.peak_rate - floor) * relative
    }
}

fn pair_terms(result: &SorkinResult, rho: f64) -> [f64; 8] {
    let (ab, bc, ca) = (
        f64::from(result.s_ab),
        f64::from(result.s_bc),
        f64::from(result.s_ca),
    );
    // weights in Combination::ALL order: 0, A, B, C, AB, BC, CA, ABC
    [
        1.0 + (bc + ca + ab) * rho,
        1.0 + (ca + ab) * rho,
        1.0 + (bc + ab) * rho,
        1.0 + (bc + ca) * rho,
        1.0 + ab * rho,
        1.0 + bc * rho,
        1.0 + ca * rho,
        1.0,
    ]
}

/// Δρ from equal relative fluctuations `dp` of all eight measurements.
///
/// (Δρ)² = (1/δ²) Σ_x w_x P_x² (Δp)², with w_ABC = 1, w_XY = 1 + s_XY ρ,
/// w_X = 1 + ρ(sum of the signs of the two pairs containing X), and
/// w_0 = 1 + ρ(s_AB + s_BC + s_CA). `None` when ρ is undefined.
pub fn power_sigma(pv: &ProbabilityVector, result: &SorkinResult, dp: f64) -> Option<f64> {
    let rho = result.rho?;
    let weights = pair_terms(result, rho);
    let sum: f64 = weights
        .iter()
        .zip(pv.values())
        .map(|(w, p)| w * p * p)
        .sum();
    Some(sum.max(0.0).sqrt() * dp / result.delta)
}

/// Δρ for raw photocounts: the power formula with every P_x² replaced by
/// P_x and (Δp)² by 1, since a Poisson count has variance equal to its mean.
pub fn poisson_sigma(counts: &ProbabilityVector, result: &SorkinResult) -> Option<f64> {
    let rho = result.rho?;
    let weights = pair_terms(result, rho);
    let sum: f64 = weights
        .iter()
        .zip(counts.values())
        .map(|(w, n)| w * n)
        .sum();
    Some(sum.max(0.0).sqrt() / result.delta)
}

/// Exact first-order propagation: each term carries the squared factor
/// (1 + s·ρ)² where [`power_sigma`] keeps it unsquared. The two agree to O(ρ).
pub fn power_sigma_linearized(
    pv: &ProbabilityVector,
    result: &SorkinResult,
    dp: f64,
) -> Option<f64> {
    let rho = result.rho?;
    let weights = pair_terms(result, rho);
    let sum: f64 = weights
        .iter()
        .zip(pv.values())
        .map(|(w, p)| w * w * p * p)
        .sum();
    Some(sum.sqrt() * dp / result.delta)
}

/// One grid point of a ρ(u) curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPoint {
    pub u: f64,
    /// The eight values in [`Combination::ALL`] order that ρ was computed from.
    pub values: [f64; 8],
    pub result: SorkinResult,
}

impl RhoPoint {
    fn from_values(u: f64, values: [f64; 8], guard: f64) -> Result<Self> {
        let pv = ProbabilityVector::new(values)?;
        Ok(Self {
            u,
            values,
            result: sorkin(&pv, guard),
        })
    }

    pub fn probability_vector(&self) -> ProbabilityVector {
        ProbabilityVector::new(self.values).expect("validated at construction")
    }
}

/// Largest |ρ| over the defined points, if any.
pub fn max_abs_rho(points: &[RhoPoint]) -> Option<f64> {
    points
        .iter()
        .filter_map(|p| p.result.rho)
        .map(f64::abs)
        .reduce(f64::max)
}

/// Squared total width of the first three slits: the ideal all-open
/// forward intensity, used as the common intensity unit.
pub fn reference_intensity(plate: &SlitPlate) -> f64 {
    let open: f64 = plate.slits().iter().take(3).map(|s| s.width).sum();
    open * open
}

fn relative_row(apertures: &[CombinationAperture], u: f64, reference: f64) -> [f64; 8] {
    let mut row = [0.0; 8];
    for (slot, ap) in row.iter_mut().zip(apertures) {
        *slot = ap.far_field(u).norm_sqr() / reference;
    }
    row
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("u grid must be non-empty and finite"));
    }
    Ok(())
}

/// ρ(u) from patterns in relative intensity units, for one mask position.
pub fn rho_curve(
    plate: &SlitPlate,
    mask: &OpeningMask,
    grid: &[f64],
    guard: f64,
) -> Result<Vec<RhoPoint>> {
    check_grid(grid)?;
    let apertures = combination_apertures(plate, mask)?;
    rho_from_apertures(&apertures, reference_intensity(plate), grid, guard)
}

fn rho_from_apertures(
    apertures: &[CombinationAperture],
    reference: f64,
    grid: &[f64],
    guard: f64,
) -> Result<Vec<RhoPoint>> {
    grid.par_iter()
        .map(|&u| RhoPoint::from_values(u, relative_row(apertures, u, reference), guard))
        .collect()
}

/// Point of the power-fluctuation sweep: ρ and Δρ/Δp from [`power_sigma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSigmaPoint {
    pub point: RhoPoint,
    pub sigma_per_dp: Option<f64>,
}

/// Δρ/Δp across the pattern. It diverges where δ has a zero; such points
/// are flagged undefined rather than reported.
pub fn power_sigma_sweep(
    plate: &SlitPlate,
    mask: &OpeningMask,
    grid: &[f64],
    guard: f64,
) -> Result<Vec<PowerSigmaPoint>> {
    Ok(rho_curve(plate, mask, grid, guard)?
        .into_iter()
        .map(|point| PowerSigmaPoint {
            sigma_per_dp: power_sigma(&point.probability_vector(), &point.result, 1.0),
            point,
        })
        .collect())
}

/// ρ(u) seen through a nonideal detector with otherwise ideal optics.
///
/// Each relative intensity is mapped to an incident rate by `scaling`, passed
/// through [`DetectorModel::response`], and ρ is computed from the measured
/// rates.
pub fn detector_rho_sweep(
    plate: &SlitPlate,
    mask: &OpeningMask,
    model: &DetectorModel,
    scaling: &RateScaling,
    grid: &[f64],
    guard: f64,
) -> Result<Vec<RhoPoint>> {
    check_grid(grid)?;
    model.validate()?;
    if plate.leakage_amplitude() != 0.0
        || mask.leakage_amplitude() != 0.0
        || mask.displacement() != 0.0
    {
        return Err(Error::invalid(
            "detector sweep requires ideal optics: zero leakage and zero displacement",
        ));
    }
    let apertures = combination_apertures(plate, mask)?;
    let reference = reference_intensity(plate);
    grid.par_iter()
        .map(|&u| {
            let measured =
                relative_row(&apertures, u, reference).map(|i| model.response(scaling.rate(i)));
            RhoPoint::from_values(u, measured, guard)
        })
        .collect()
}

/// Source of per-combination mask displacements (meters).
pub trait DisplacementSampler: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisplacementDistribution {
    Fixed { value: f64 },
    Uniform { min: f64, max: f64 },
    Normal { mean: f64, std: f64 },
}

impl Default for DisplacementDistribution {
    fn default() -> Self {
        DisplacementDistribution::Uniform {
            min: 0.0,
            max: REFERENCE_MAX_DISPLACEMENT,
        }
    }
}

impl DisplacementDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DisplacementDistribution::Fixed { value } => value.is_finite(),
            DisplacementDistribution::Uniform { min, max } => {
                min.is_finite() && max.is_finite() && min <= max
            }
            DisplacementDistribution::Normal { mean, std } => {
                mean.is_finite() && std.is_finite() && std >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid displacement distribution {self:?}"
            )))
        }
    }
}

impl DisplacementSampler for DisplacementDistribution {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            DisplacementDistribution::Fixed { value } => value,
            DisplacementDistribution::Uniform { min, max } if min == max => min,
            DisplacementDistribution::Uniform { min, max } => Uniform::new_inclusive(min, max)
                .expect("validated bounds")
                .sample(rng),
            DisplacementDistribution::Normal { mean, std } => {
                Normal::new(mean, std).expect("validated std").sample(rng)
            }
        }
    }
}

/// Result of one seeded misalignment draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MisalignmentSweep {
    /// Mask displacement used for each combination, in combination order.
    pub displacements: [f64; 8],
    pub points: Vec<RhoPoint>,
}

/// The eight displacements drawn for `seed`; each combination has its own
/// substream so the draw is independent of evaluation order.
pub fn sample_displacements(sampler: &dyn DisplacementSampler, seed: u64) -> [f64; 8] {
    let mut out = [0.0; 8];
    for c in Combination::ALL {
        let mut rng = substream(seed, DOMAIN_DISPLACEMENT, 0, c.index() as u64);
        out[c.index()] = sampler.sample(&mut rng);
    }
    out
}

/// ρ(u) when every combination is measured with an independently displaced
/// mask. Leakage in the plate and mask is taken from their configuration.
pub fn misalignment_rho_sweep(
    plate: &SlitPlate,
    mask: &OpeningMask,
    sampler: &dyn DisplacementSampler,
    grid: &[f64],
    seed: u64,
    guard: f64,
) -> Result<MisalignmentSweep> {
    check_grid(grid)?;
    let displacements = sample_displacements(sampler, seed);
    let apertures = Combination::ALL
        .into_iter()
        .map(|c| {
            let shifted = mask.with_displacement(displacements[c.index()]);
            build_combination_aperture(plate, &shifted, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let points = rho_from_apertures(&apertures, reference_intensity(plate), grid, guard)?;
    Ok(MisalignmentSweep {
        displacements,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{PathAmplitudes, ProbabilityRule, DEFAULT_GUARD};
    use crate::optics::{
        leakage_amplitude_from_intensity, linspace, MaskScheme, DEFAULT_OPENING_WIDTH,
        DEFAULT_PLATE_HALF_WIDTH, DEFAULT_SLIT_SEPARATION, DEFAULT_SLIT_WIDTH,
    };
    use proptest::prelude::*;

    fn geometry(leak_plate: f64, leak_mask: f64) -> (SlitPlate, OpeningMask) {
        let plate = SlitPlate::three_slit(
            DEFAULT_SLIT_WIDTH,
            DEFAULT_SLIT_SEPARATION,
            DEFAULT_PLATE_HALF_WIDTH,
            leak_plate,
        )
        .unwrap();
        let mask = OpeningMask::for_plate(
            &plate,
            MaskScheme::Opening,
            DEFAULT_OPENING_WIDTH,
            leak_mask,
        )
        .unwrap();
        (plate, mask)
    }

    fn synthetic_result(delta: f64, rho: f64, signs: (i8, i8, i8)) -> SorkinResult {
        SorkinResult {
            epsilon: rho * delta,
            delta,
            rho: Some(rho),
            i_ab: 0.0,
            i_bc: 0.0,
            i_ca: 0.0,
            s_ab: signs.0,
            s_bc: signs.1,
            s_ca: signs.2,
        }
    }

    #[test]
    fn power_sigma_all_ones() {
        let pv = ProbabilityVector::new([1.0; 8]).unwrap();
        let dp = 1e-3;
        let r = synthetic_result(1.0, 0.0, (1, 1, 1));
        let s = power_sigma(&pv, &r, dp).unwrap();
        assert!((s - 8f64.sqrt() * dp).abs() < 1e-15);
        for signs in [(-1, 1, 0), (-1, -1, -1), (0, 0, 1)] {
            let other = power_sigma(&pv, &synthetic_result(1.0, 0.0, signs), dp).unwrap();
            assert_eq!(other, s);
        }
    }

    #[test]
    fn power_sigma_reduces_to_quadrature_sum_at_zero_rho() {
        let pv = ProbabilityVector::new([0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let r = synthetic_result(2.5, 0.0, (1, -1, 1));
        let sum_sq: f64 = pv.values().iter().map(|p| p * p).sum();
        let expect = sum_sq.sqrt() * 0.01 / 2.5;
        assert!((power_sigma(&pv, &r, 0.01).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn power_sigma_weights_follow_signs() {
        // one nonzero entry at a time isolates each weight
        let rho = 0.1;
        let r = synthetic_result(1.0, rho, (1, -1, 1));
        let expected = [
            1.0 + (-1.0 + 1.0 + 1.0) * rho, // 0
            1.0 + (1.0 + 1.0) * rho,        // A: s_CA + s_AB
            1.0 + (-1.0 + 1.0) * rho,       // B: s_BC + s_AB
            1.0 + (-1.0 + 1.0) * rho,       // C: s_BC + s_CA
            1.0 + rho,                      // AB
            1.0 - rho,                      // BC
            1.0 + rho,                      // CA
            1.0,                            // ABC
        ];
        for (i, w) in expected.iter().enumerate() {
            let mut v = [0.0; 8];
            v[i] = 1.0;
            let pv = ProbabilityVector::new(v).unwrap();
            let s = power_sigma(&pv, &r, 1.0).unwrap();
            assert!((s * s - w).abs() < 1e-14, "index {i}");
            let lin = power_sigma_linearized(&pv, &r, 1.0).unwrap();
            assert!((lin * lin - w * w).abs() < 1e-14, "index {i}");
        }
    }

    #[test]
    fn undefined_rho_propagates() {
        let pv = ProbabilityVector::new([0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        let r = sorkin(&pv, DEFAULT_GUARD);
        assert!(power_sigma(&pv, &r, 0.01).is_none());
        assert!(poisson_sigma(&pv, &r).is_none());
    }

    #[test]
    fn poisson_sigma_all_equal() {
        let n = 1e5;
        let counts = ProbabilityVector::new([n; 8]).unwrap();
        let s = poisson_sigma(&counts, &synthetic_result(n, 0.0, (1, 1, 1))).unwrap();
        assert!((s - (8.0 / n).sqrt()).abs() < 1e-15);

        let amps = PathAmplitudes::from_real(&[1.0, 0.7, -0.4]).unwrap();
        let pv = ProbabilityVector::from_amplitudes(&ProbabilityRule::Born, &amps, 0.01)
            .unwrap()
            .map(|p| p * 1e5)
            .unwrap();
        let quad = pv.map(|p| 4.0 * p).unwrap();
        let s1 = poisson_sigma(&pv, &sorkin(&pv, DEFAULT_GUARD)).unwrap();
        let s4 = poisson_sigma(&quad, &sorkin(&quad, DEFAULT_GUARD)).unwrap();
        assert!((s4 / s1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detector_identity_and_closed_forms() {
        let ideal = DetectorModel::ideal();
        for r in [0.0, 1.0, 1234.5, 8e4] {
            assert_eq!(detector_response(&ideal, r), r);
        }

        let dead = DetectorModel {
            dead_time: 50e-9,
            ..ideal
        };
        let m = detector_response(&dead, 80_000.0);
        assert!((m - 80_000.0 / 1.004).abs() < 1e-9);
        assert!((m - 79_681.3).abs() < 0.05);
        let deficit = 1.0 - m / 80_000.0;
        assert!((deficit - 0.003_984).abs() < 1e-6, "{deficit}");
        assert!((DetectorModel::correct_dead_time(m, 50e-9) - 80_000.0).abs() < 1e-8);

        let sat = DetectorModel {
            nonlinearity_beta: 0.01,
            full_scale_rate: 1e5,
            ..ideal
        };
        assert!((detector_response(&sat, 1e5) - 0.99e5).abs() < 1e-9);

        let dark = DetectorModel {
            dark_rate: 100.0,
            ..ideal
        };
        assert_eq!(detector_response(&dark, 0.0), 100.0);
    }

    #[test]
    fn detector_validation() {
        let ideal = DetectorModel::ideal();
        assert!(DetectorModel {
            dead_time: -1.0,
            ..ideal
        }
        .validate()
        .is_err());
        assert!(DetectorModel {
            nonlinearity_beta: 1.0,
            ..ideal
        }
        .validate()
        .is_err());
        assert!(DetectorModel {
            dwell_time: 0.0,
            ..ideal
        }
        .validate()
        .is_err());
        assert!(ideal.validate().is_ok());
    }

    proptest! {
        #[test]
        fn detector_response_is_monotone(
            tau in 0.0f64..1e-6,
            beta in 0.0f64..=0.5,
            dark in 0.0f64..1e4,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let model = DetectorModel {
                dead_time: tau,
                nonlinearity_beta: beta,
                full_scale_rate: 1e5,
                dark_rate: dark,
                dwell_time: 1.0,
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(model.response(lo * 1e5) <= model.response(hi * 1e5));
        }
    }

    #[test]
    fn ideal_detector_sweep_is_null() {
        let (plate, mask) = geometry(0.0, 0.0);
        let grid = linspace(-6e4, 6e4, 401);
        let scaling = RateScaling::new(DEFAULT_PEAK_RATE, Some(100.0)).unwrap();
        let points = detector_rho_sweep(
            &plate,
            &mask,
            &DetectorModel::ideal(),
            &scaling,
            &grid,
            DEFAULT_GUARD,
        )
        .unwrap();
        for p in &points {
            if let Some(rho) = p.result.rho {
                assert!(rho.abs() < 1e-9, "u = {}: {rho}", p.u);
            }
        }
    }

    #[test]
    fn detector_sweep_requires_ideal_optics() {
        let (plate, mask) = geometry(0.1, 0.0);
        let scaling = RateScaling::new(DEFAULT_PEAK_RATE, None).unwrap();
        assert!(detector_rho_sweep(
            &plate,
            &mask,
            &DetectorModel::ideal(),
            &scaling,
            &[0.0],
            DEFAULT_GUARD
        )
        .is_err());
    }

    #[test]
    fn center_of_pattern_quadratic_response() {
        // A response r − k r² gives ρ = −k·Σc_x p_x²/δ; at u = 0 with unit
        // slit amplitudes a² that is −6k·a², independent of any floor.
        let (plate, mask) = geometry(0.0, 0.0);
        let model = DetectorModel {
            nonlinearity_beta: 0.01,
            full_scale_rate: DEFAULT_PEAK_RATE,
            ..DetectorModel::ideal()
        };
        let scaling = RateScaling::new(DEFAULT_PEAK_RATE, None).unwrap();
        let p =
            detector_rho_sweep(&plate, &mask, &model, &scaling, &[0.0], DEFAULT_GUARD).unwrap()[0];
        let a2 = DEFAULT_PEAK_RATE / 9.0;
        let k = 0.01 / DEFAULT_PEAK_RATE;
        let rates = [0.0, a2, a2, a2, 4.0 * a2, 4.0 * a2, 4.0 * a2, 9.0 * a2];
        let measured = rates.map(|r| r - k * r * r);
        let eps = measured[7] - 3.0 * measured[4] + 3.0 * measured[1] - measured[0];
        let delta = 3.0 * (measured[4] - 2.0 * measured[1] + measured[0]);
        let oracle = eps / delta;
        assert!((p.result.rho.unwrap() - oracle).abs() < 1e-12);
        assert!((oracle + 6.0 * k * a2).abs() < 1e-4);
    }

    #[test]
    fn leakage_without_displacement_is_null() {
        let g = leakage_amplitude_from_intensity(REFERENCE_INTENSITY_LEAKAGE);
        let (plate, mask) = geometry(g, g);
        let grid = linspace(-1e5, 1e5, 1000);
        let sweep = misalignment_rho_sweep(
            &plate,
            &mask,
            &DisplacementDistribution::Fixed { value: 0.0 },
            &grid,
            3,
            DEFAULT_GUARD,
        )
        .unwrap();
        assert_eq!(sweep.displacements, [0.0; 8]);
        for p in &sweep.points {
            if let Some(rho) = p.result.rho {
                assert!(rho.abs() <= 1e-10, "u = {}: {rho}", p.u);
            }
        }
    }

    #[test]
    fn displacement_inside_margin_without_leakage_is_exactly_null() {
        let (plate, mask) = geometry(0.0, 0.0);
        let grid = linspace(-1e5, 1e5, 501);
        let sweep = misalignment_rho_sweep(
            &plate,
            &mask,
            &DisplacementDistribution::Uniform {
                min: -30e-6,
                max: 30e-6,
            },
            &grid,
            11,
            DEFAULT_GUARD,
        )
        .unwrap();
        assert!(sweep.displacements.iter().any(|&d| d != 0.0));
        let ideal = rho_curve(&plate, &mask, &grid, DEFAULT_GUARD).unwrap();
        assert_eq!(sweep.points, ideal);
    }

    #[test]
    fn mask_only_leakage_is_blind_to_small_displacements() {
        // with an opaque plate the leaky mask only multiplies closed slits,
        // which keeps the field affine in the slit indicators
        let g = leakage_amplitude_from_intensity(REFERENCE_INTENSITY_LEAKAGE);
        let (plate, mask) = geometry(0.0, g);
        let sweep = misalignment_rho_sweep(
            &plate,
            &mask,
            &DisplacementDistribution::default(),
            &linspace(-1e5, 1e5, 200),
            5,
            DEFAULT_GUARD,
        )
        .unwrap();
        assert!(max_abs_rho(&sweep.points).unwrap() < 1e-10);
    }

    #[test]
    fn misalignment_with_leaky_plate_is_seeded_and_nonzero() {
        let g = leakage_amplitude_from_intensity(REFERENCE_INTENSITY_LEAKAGE);
        let (plate, mask) = geometry(g, g);
        let grid = linspace(-1e5, 1e5, 300);
        let sampler = DisplacementDistribution::default();
        let a = misalignment_rho_sweep(&plate, &mask, &sampler, &grid, 42, DEFAULT_GUARD).unwrap();
        let b = misalignment_rho_sweep(&plate, &mask, &sampler, &grid, 42, DEFAULT_GUARD).unwrap();
        let c = misalignment_rho_sweep(&plate, &mask, &sampler, &grid, 43, DEFAULT_GUARD).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.displacements, c.displacements);
        assert!(a
            .displacements
            .iter()
            .all(|d| (0.0..=REFERENCE_MAX_DISPLACEMENT).contains(d)));
        assert!(max_abs_rho(&a.points).unwrap() > 1e-6);
        for p in &a.points {
            if let Some(rho) = p.result.rho {
                assert!(rho.abs() <= 1.0 / DEFAULT_GUARD);
            }
        }
    }

    #[test]
    fn power_sweep_flags_delta_zeros() {
        let (plate, mask) = geometry(0.0, 0.0);
        // u = 1/w is a zero of every single-slit envelope, so δ = 0 there
        let grid = vec![0.0, 1.0 / DEFAULT_SLIT_WIDTH, 1.2e4];
        let sweep = power_sigma_sweep(&plate, &mask, &grid, DEFAULT_GUARD).unwrap();
        assert!(sweep[0].sigma_per_dp.is_some());
        assert!(sweep[1].sigma_per_dp.is_none());
        assert!(!sweep[1].point.result.rho_defined());
        // at the centre all pair terms equal 2a², all P ≈ multiples of a²
        let s0 = sweep[0].sigma_per_dp.unwrap();
        let a2: f64 = 1.0 / 9.0;
        let sum_sq = (3.0 * 1.0 + 3.0 * 16.0 + 81.0) * a2 * a2;
        assert!((s0 - sum_sq.sqrt() / (6.0 * a2)).abs() < 1e-9);
    }
}
