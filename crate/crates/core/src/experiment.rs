//! Virtual counting experiment and ρ estimation across repetitions.
//!
//! Each repetition measures the eight combinations in sequence at one detector
//! position. The incident rate is the ideal far-field intensity scaled to
//! counts per second, multiplied by the source power for that dwell, and
//! passed through the detector model. Counts are Poisson draws of
//! `rate × dwell`, or their expectation when Poisson noise is off.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{sorkin, Combination, ProbabilityVector};
use crate::optics::{combination_apertures, OpeningMask, SlitPlate};
use crate::rng::{substream, DOMAIN_EXPERIMENT};
use crate::systematics::{
    reference_intensity, DetectorModel, PowerModel, RateScaling, SequenceOrder,
};
use crate::{Error, Result};

/// Run parameters that are not part of the optics, power or detector models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Detector position in the far field, cycles per meter.
    pub position_u: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub scaling: RateScaling,
    /// Draw Poisson counts; when false the expected counts are recorded.
    pub poisson: bool,
    /// Reference-arm monitor rate at mean power (counts per second). When
    /// set, every dwell also records monitor counts.
    pub reference_rate: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.position_u.is_finite() {
            return Err(Error::invalid("detector position must be finite"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be ≥ 1"));
        }
        if let Some(r) = self.reference_rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid("reference monitor rate must be positive"));
            }
        }
        RateScaling::new(self.scaling.peak_rate, self.scaling.dynamic_range)?;
        Ok(())
    }
}

/// One dwell: a single combination measured for `dwell_time` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub combination: Combination,
    /// Photocounts. Integral when drawn from the Poisson model, the expected
    /// value otherwise.
    pub counts: f64,
    pub dwell_time: f64,
    /// Global dwell index: repetition × 8 + position within the repetition.
    pub slot: u64,
    pub reference_counts: Option<f64>,
}

/// The eight dwells of one repetition, in measurement order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub repetition: usize,
    pub entries: Vec<CountEntry>,
}

impl CountsRecord {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != 8 {
            return Err(Error::invalid(format!(
                "repetition {} has {} entries, expected 8",
                self.repetition,
                self.entries.len()
            )));
        }
        let mut seen = [false; 8];
        for e in &self.entries {
            if seen[e.combination.index()] {
                return Err(Error::invalid(format!(
                    "repetition {} measures {} twice",
                    self.repetition, e.combination
                )));
            }
            seen[e.combination.index()] = true;
            if !(e.counts.is_finite() && e.counts >= 0.0) {
                return Err(Error::invalid("counts must be finite and ≥ 0"));
            }
            if !(e.dwell_time.is_finite() && e.dwell_time > 0.0) {
                return Err(Error::invalid("dwell time must be positive"));
            }
        }
        Ok(())
    }

    pub fn entry(&self, combination: Combination) -> Option<&CountEntry> {
        self.entries.iter().find(|e| e.combination == combination)
    }

    /// Raw counts in combination order.
    pub fn counts(&self) -> Result<ProbabilityVector> {
        self.validate()?;
        let mut values = [0.0; 8];
        for e in &self.entries {
            values[e.combination.index()] = e.counts;
        }
        ProbabilityVector::new(values)
    }
}

fn draw_counts(mean: f64, poisson: bool, rng: &mut impl rand::Rng) -> f64 {
    if !poisson || mean <= 0.0 {
        return mean.max(0.0);
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng)
}

/// Simulates `cfg.repetitions` repetitions at one detector position.
///
/// Every repetition draws from its own substream of `cfg.seed`, so the
/// records do not depend on the number of worker threads.
pub fn run_experiment(
    plate: &SlitPlate,
    mask: &OpeningMask,
    power: &PowerModel,
    detector: &DetectorModel,
    cfg: &ExperimentConfig,
) -> Result<Vec<CountsRecord>> {
    cfg.validate()?;
    power.validate()?;
    detector.validate()?;
    let apertures = combination_apertures(plate, mask)?;
    let reference = reference_intensity(plate);
    let mut incident = [0.0; 8];
    for (slot, ap) in incident.iter_mut().zip(&apertures) {
        *slot = cfg
            .scaling
            .rate(ap.far_field(cfg.position_u).norm_sqr() / reference);
    }
    let fluctuation = Normal::new(0.0, power.relative_fluctuation).expect("validated");
    let dwell = detector.dwell_time;

    let records = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(cfg.seed, DOMAIN_EXPERIMENT, rep as u64, 0);
            let mut order = Combination::ALL;
            if power.order == SequenceOrder::RandomizedPerRepetition {
                order.shuffle(&mut rng);
            }
            let entries = order
                .iter()
                .enumerate()
                .map(|(k, &combination)| {
                    let slot = (rep * 8 + k) as u64;
                    let mut factor = 1.0 + power.linear_drift_rate * slot as f64 / 8.0;
                    if power.relative_fluctuation > 0.0 {
                        factor += fluctuation.sample(&mut rng);
                    }
                    let factor = factor.max(0.0);
                    let true_rate = incident[combination.index()] * factor;
                    let rate = detector.response(true_rate);
                    let counts = draw_counts(rate * dwell, cfg.poisson, &mut rng);
                    let reference_counts = cfg
                        .reference_rate
                        .map(|r| draw_counts(r * factor * dwell, cfg.poisson, &mut rng));
                    CountEntry {
                        combination,
                        counts,
                        dwell_time: dwell,
                        slot,
                        reference_counts,
                    }
                })
                .collect();
            CountsRecord {
                repetition: rep,
                entries,
            }
        })
        .collect();
    Ok(records)
}

/// Aggregated ρ over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoSeries {
    /// Per-repetition ρ; `None` where δ fell below the guard.
    pub values: Vec<Option<f64>>,
    pub mean: f64,
    pub sample_std: f64,
    pub standard_error: f64,
    pub defined: usize,
    pub undefined: usize,
}

/// How counts are turned into rates before ρ is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub guard: f64,
    /// Invert a non-paralyzable dead time of this many seconds.
    pub dead_time_correction: Option<f64>,
    /// Divide by the reference-arm counts when they were recorded.
    pub normalize_by_reference: bool,
}

impl EstimateOptions {
    pub fn with_guard(guard: f64) -> Self {
        Self {
            guard,
            dead_time_correction: None,
            normalize_by_reference: true,
        }
    }
}

/// Rates for one repetition: counts/dwell, optionally dead-time corrected
/// and normalised by the reference monitor.
pub fn record_rates(record: &CountsRecord, opts: &EstimateOptions) -> Result<ProbabilityVector> {
    record.validate()?;
    let mut values = [0.0; 8];
    for e in &record.entries {
        let mut rate = e.counts / e.dwell_time;
        if let Some(tau) = opts.dead_time_correction {
            rate = DetectorModel::correct_dead_time(rate, tau);
        }
        if opts.normalize_by_reference {
            if let Some(reference) = e.reference_counts {
                if reference <= 0.0 {
                    return Err(Error::invalid(format!(
                        "repetition {} has no reference counts for {}",
                        record.repetition, e.combination
                    )));
                }
                rate /= reference / e.dwell_time;
            }
        }
        values[e.combination.index()] = rate;
    }
    ProbabilityVector::new(values)
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Mean, sample standard deviation (n − 1) and standard error of the mean of
/// the defined values. A single value has zero spread.
pub fn summarize(values: Vec<Option<f64>>) -> Result<RhoSeries> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let undefined = values.len() - defined.len();
    if defined.is_empty() {
        return Err(Error::EmptySeries { undefined });
    }
    let n = defined.len() as f64;
    let mean = compensated_sum(defined.iter().copied()) / n;
    let sample_std = if defined.len() > 1 {
        (compensated_sum(defined.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RhoSeries {
        mean,
        sample_std,
        standard_error: sample_std / n.sqrt(),
        defined: defined.len(),
        undefined,
        values,
    })
}

/// ρ per repetition from raw counts, with the all-closed measurement as
/// background, aggregated over the repetitions where ρ is defined.
pub fn estimate_rho_series(records: &[CountsRecord], guard: f64) -> Result<RhoSeries> {
    estimate_rho_series_with(records, &EstimateOptions::with_guard(guard))
}

pub fn estimate_rho_series_with(
    records: &[CountsRecord],
    opts: &EstimateOptions,
) -> Result<RhoSeries> {
    if records.is_empty() {
        return Err(Error::invalid("at least one repetition is required"));
    }
    let values = records
        .iter()
        .map(|r| Ok(sorkin(&record_rates(r, opts)?, opts.guard).rho))
        .collect::<Result<Vec<_>>>()?;
    summarize(values)
}
