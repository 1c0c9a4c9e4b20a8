//! Plain-text run configuration.
//!
//! The format is flat `key = value` TOML. Every key is optional; omitted keys
//! take the defaults listed in [`RunConfig::default`]. Lengths are meters,
//! rates counts per second, times seconds, and leakages are *intensity*
//! fractions (the amplitude transmission is their square root).
//!
//! ```text
//! # three 30 µm slits, 100 µm apart, 100 µm openings, 800 nm
//! wavelength = 800e-9
//! slit_width = 30e-6
//! slit_separation = 100e-6
//! plate_leakage = 0.05
//! mask_leakage = 0.05
//! displacement_max = 10e-6
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentConfig;
use crate::measure::{ProbabilityRule, DEFAULT_GUARD};
use crate::optics::{
    leakage_amplitude_from_intensity, linspace, MaskScheme, OpeningMask, OpticalConfig, SlitPlate,
    Window, DEFAULT_OPENING_WIDTH, DEFAULT_PLATE_HALF_WIDTH, DEFAULT_SLIT_SEPARATION,
    DEFAULT_SLIT_WIDTH, DEFAULT_WAVELENGTH,
};
use crate::systematics::{
    DetectorModel, DisplacementDistribution, PowerModel, RateScaling, SequenceOrder,
    DEFAULT_DYNAMIC_RANGE, DEFAULT_PEAK_RATE, REFERENCE_MAX_DISPLACEMENT,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Born,
    PerturbedCubic,
}

/// Validated configuration for every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub wavelength: f64,
    pub slit_centers: Vec<f64>,
    pub slit_widths: Vec<f64>,
    pub plate_half_width: f64,
    pub plate_leakage: f64,
    pub mask_scheme: MaskScheme,
    pub mask_window_width: f64,
    pub mask_leakage: f64,
    pub mask_displacement: f64,
    pub displacement_min: f64,
    pub displacement_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub points: usize,
    pub position_u: f64,
    pub rule: RuleKind,
    pub alpha: f64,
    pub mean_power: f64,
    pub power_fluctuation: f64,
    pub drift_rate: f64,
    pub sequence_order: SequenceOrder,
    pub dead_time: f64,
    pub nonlinearity: f64,
    pub full_scale_rate: f64,
    pub dark_rate: f64,
    pub dwell_time: f64,
    pub peak_rate: f64,
    pub dynamic_range: Option<f64>,
    pub poisson: bool,
    pub reference_rate: Option<f64>,
    pub dead_time_correction: bool,
    pub repetitions: usize,
    pub seed: u64,
    pub guard: f64,
    pub hierarchy_samples: usize,
    pub counts_input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH,
            slit_centers: vec![-DEFAULT_SLIT_SEPARATION, 0.0, DEFAULT_SLIT_SEPARATION],
            slit_widths: vec![DEFAULT_SLIT_WIDTH; 3],
            plate_half_width: DEFAULT_PLATE_HALF_WIDTH,
            plate_leakage: 0.0,
            mask_scheme: MaskScheme::Opening,
            mask_window_width: DEFAULT_OPENING_WIDTH,
            mask_leakage: 0.0,
            mask_displacement: 0.0,
            displacement_min: 0.0,
            displacement_max: REFERENCE_MAX_DISPLACEMENT,
            u_min: -1e5,
            u_max: 1e5,
            points: 1001,
            position_u: 0.0,
            rule: RuleKind::Born,
            alpha: 0.0,
            mean_power: 1.0,
            power_fluctuation: 0.0,
            drift_rate: 0.0,
            sequence_order: SequenceOrder::Fixed,
            dead_time: 0.0,
            nonlinearity: 0.0,
            full_scale_rate: DEFAULT_PEAK_RATE,
            dark_rate: 0.0,
            dwell_time: 37.5,
            peak_rate: DEFAULT_PEAK_RATE,
            dynamic_range: Some(DEFAULT_DYNAMIC_RANGE),
            poisson: true,
            reference_rate: None,
            dead_time_correction: false,
            repetitions: 100,
            seed: 0,
            guard: DEFAULT_GUARD,
            hierarchy_samples: 10_000,
            counts_input: None,
            output_dir: PathBuf::from("."),
            format: OutputFormat::Csv,
        }
    }
}

/// On-disk form. Every key optional; `slit_width`/`slit_separation` are
/// shorthand for three equal slits centred on the axis.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    wavelength: Option<f64>,
    slit_width: Option<f64>,
    slit_separation: Option<f64>,
    slit_centers: Option<Vec<f64>>,
    slit_widths: Option<Vec<f64>>,
    plate_half_width: Option<f64>,
    plate_leakage: Option<f64>,
    mask_scheme: Option<MaskScheme>,
    mask_window_width: Option<f64>,
    mask_leakage: Option<f64>,
    mask_displacement: Option<f64>,
    displacement_min: Option<f64>,
    displacement_max: Option<f64>,
    u_min: Option<f64>,
    u_max: Option<f64>,
    points: Option<u64>,
    position_u: Option<f64>,
    rule: Option<RuleKind>,
    alpha: Option<f64>,
    mean_power: Option<f64>,
    power_fluctuation: Option<f64>,
    drift_rate: Option<f64>,
    sequence_order: Option<SequenceOrder>,
    dead_time: Option<f64>,
    nonlinearity: Option<f64>,
    full_scale_rate: Option<f64>,
    dark_rate: Option<f64>,
    dwell_time: Option<f64>,
    peak_rate: Option<f64>,
    dynamic_range: Option<f64>,
    poisson: Option<bool>,
    reference_rate: Option<f64>,
    dead_time_correction: Option<bool>,
    repetitions: Option<u64>,
    seed: Option<u64>,
    guard: Option<f64>,
    hierarchy_samples: Option<u64>,
    counts_input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    format: Option<OutputFormat>,
}

const KNOWN_KEYS: &[&str] = &[
    "wavelength",
    "slit_width",
    "slit_separation",
    "slit_centers",
    "slit_widths",
    "plate_half_width",
    "plate_leakage",
    "mask_scheme",
    "mask_window_width",
    "mask_leakage",
    "mask_displacement",
    "displacement_min",
    "displacement_max",
    "u_min",
    "u_max",
    "points",
    "position_u",
    "rule",
    "alpha",
    "mean_power",
    "power_fluctuation",
    "drift_rate",
    "sequence_order",
    "dead_time",
    "nonlinearity",
    "full_scale_rate",
    "dark_rate",
    "dwell_time",
    "peak_rate",
    "dynamic_range",
    "poisson",
    "reference_rate",
    "dead_time_correction",
    "repetitions",
    "seed",
    "guard",
    "hierarchy_samples",
    "counts_input",
    "output_dir",
    "format",
];

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigSyntax(e.message().to_string()))?;
    if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::config(key.clone(), "unknown key"));
    }
    let file: ConfigFile = table.try_into().map_err(|e: toml::de::Error| {
        Error::ConfigSyntax(e.to_string().trim().replace('\n', " "))
    })?;
    RunConfig::from_file(file)
}

fn to_usize(key: &str, v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::config(key, "value too large"))
}

impl RunConfig {
    fn from_file(f: ConfigFile) -> Result<Self> {
        let d = RunConfig::default();
        let (slit_centers, slit_widths) = match (f.slit_centers, f.slit_widths) {
            (Some(centers), Some(widths)) => {
                if f.slit_width.is_some() || f.slit_separation.is_some() {
                    return Err(Error::config(
                        "slit_centers",
                        "cannot be combined with slit_width or slit_separation",
                    ));
                }
                (centers, widths)
            }
            (Some(_), None) => {
                return Err(Error::config(
                    "slit_widths",
                    "required when slit_centers is given",
                ))
            }
            (None, Some(_)) => {
                return Err(Error::config(
                    "slit_centers",
                    "required when slit_widths is given",
                ))
            }
            (None, None) => {
                let w = f.slit_width.unwrap_or(DEFAULT_SLIT_WIDTH);
                let s = f.slit_separation.unwrap_or(DEFAULT_SLIT_SEPARATION);
                (vec![-s, 0.0, s], vec![w; 3])
            }
        };
        let cfg = RunConfig {
            wavelength: f.wavelength.unwrap_or(d.wavelength),
            slit_centers,
            slit_widths,
            plate_half_width: f.plate_half_width.unwrap_or(d.plate_half_width),
            plate_leakage: f.plate_leakage.unwrap_or(d.plate_leakage),
            mask_scheme: f.mask_scheme.unwrap_or(d.mask_scheme),
            mask_window_width: f.mask_window_width.unwrap_or(d.mask_window_width),
            mask_leakage: f.mask_leakage.unwrap_or(d.mask_leakage),
            mask_displacement: f.mask_displacement.unwrap_or(d.mask_displacement),
            displacement_min: f.displacement_min.unwrap_or(d.displacement_min),
            displacement_max: f.displacement_max.unwrap_or(d.displacement_max),
            u_min: f.u_min.unwrap_or(d.u_min),
            u_max: f.u_max.unwrap_or(d.u_max),
            points: f
                .points
                .map(|v| to_usize("points", v))
                .transpose()?
                .unwrap_or(d.points),
            position_u: f.position_u.unwrap_or(d.position_u),
            rule: f.rule.unwrap_or(d.rule),
            alpha: f.alpha.unwrap_or(d.alpha),
            mean_power: f.mean_power.unwrap_or(d.mean_power),
            power_fluctuation: f.power_fluctuation.unwrap_or(d.power_fluctuation),
            drift_rate: f.drift_rate.unwrap_or(d.drift_rate),
            sequence_order: f.sequence_order.unwrap_or(d.sequence_order),
            dead_time: f.dead_time.unwrap_or(d.dead_time),
            nonlinearity: f.nonlinearity.unwrap_or(d.nonlinearity),
            full_scale_rate: f.full_scale_rate.unwrap_or(d.full_scale_rate),
            dark_rate: f.dark_rate.unwrap_or(d.dark_rate),
            dwell_time: f.dwell_time.unwrap_or(d.dwell_time),
            peak_rate: f.peak_rate.unwrap_or(d.peak_rate),
            // a dynamic range of 0 in the file disables the background floor
            dynamic_range: match f.dynamic_range {
                Some(0.0) => None,
                Some(r) => Some(r),
                None => d.dynamic_range,
            },
            poisson: f.poisson.unwrap_or(d.poisson),
            reference_rate: f.reference_rate.or(d.reference_rate),
            dead_time_correction: f.dead_time_correction.unwrap_or(d.dead_time_correction),
            repetitions: f
                .repetitions
                .map(|v| to_usize("repetitions", v))
                .transpose()?
                .unwrap_or(d.repetitions),
            seed: f.seed.unwrap_or(d.seed),
            guard: f.guard.unwrap_or(d.guard),
            hierarchy_samples: f
                .hierarchy_samples
                .map(|v| to_usize("hierarchy_samples", v))
                .transpose()?
                .unwrap_or(d.hierarchy_samples),
            counts_input: f.counts_input.or(d.counts_input),
            output_dir: f.output_dir.unwrap_or(d.output_dir),
            format: f.format.unwrap_or(d.format),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every physical bound, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        }
        fn non_negative(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be ≥ 0 and finite, got {v}"),
                ))
            }
        }
        fn finite(key: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite, got {v}")))
            }
        }
        fn fraction(key: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in [0, 1], got {v}")))
            }
        }

        positive("wavelength", self.wavelength)?;
        if self.slit_centers.len() != self.slit_widths.len() {
            return Err(Error::config(
                "slit_widths",
                "must have one entry per slit center",
            ));
        }
        if self.slit_centers.len() < 3 {
            return Err(Error::config(
                "slit_centers",
                "at least three slits are required",
            ));
        }
        for &c in &self.slit_centers {
            finite("slit_centers", c)?;
        }
        for &w in &self.slit_widths {
            positive("slit_widths", w)?;
        }
        positive("plate_half_width", self.plate_half_width)?;
        fraction("plate_leakage", self.plate_leakage)?;
        positive("mask_window_width", self.mask_window_width)?;
        fraction("mask_leakage", self.mask_leakage)?;
        finite("mask_displacement", self.mask_displacement)?;
        finite("displacement_min", self.displacement_min)?;
        finite("displacement_max", self.displacement_max)?;
        if self.displacement_max < self.displacement_min {
            return Err(Error::config(
                "displacement_max",
                "must not be below displacement_min",
            ));
        }
        finite("u_min", self.u_min)?;
        finite("u_max", self.u_max)?;
        if self.u_max < self.u_min {
            return Err(Error::config("u_max", "must not be below u_min"));
        }
        if self.points == 0 {
            return Err(Error::config("points", "must be ≥ 1"));
        }
        finite("position_u", self.position_u)?;
        non_negative("alpha", self.alpha)?;
        if self.rule == RuleKind::Born && self.alpha != 0.0 {
            return Err(Error::config(
                "alpha",
                "only applies to rule = \"perturbed_cubic\"",
            ));
        }
        positive("mean_power", self.mean_power)?;
        non_negative("power_fluctuation", self.power_fluctuation)?;
        finite("drift_rate", self.drift_rate)?;
        non_negative("dead_time", self.dead_time)?;
        if !(0.0..1.0).contains(&self.nonlinearity) {
            return Err(Error::config(
                "nonlinearity",
                format!("must lie in [0, 1), got {}", self.nonlinearity),
            ));
        }
        positive("full_scale_rate", self.full_scale_rate)?;
        non_negative("dark_rate", self.dark_rate)?;
        positive("dwell_time", self.dwell_time)?;
        positive("peak_rate", self.peak_rate)?;
        if let Some(r) = self.dynamic_range {
            if !(r.is_finite() && r > 1.0) {
                return Err(Error::config(
                    "dynamic_range",
                    format!("must exceed 1 (or be 0 to disable), got {r}"),
                ));
            }
        }
        if let Some(r) = self.reference_rate {
            positive("reference_rate", r)?;
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be ≥ 1"));
        }
        positive("guard", self.guard)?;
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(Error::config(
                "seed",
                format!("must not exceed {}", i64::MAX),
            ));
        }
        if self.hierarchy_samples == 0 {
            return Err(Error::config("hierarchy_samples", "must be ≥ 1"));
        }

        self.plate()
            .map_err(|e| Error::config("slit_centers", e.to_string()))?;
        self.mask()
            .map_err(|e| Error::config("mask_window_width", e.to_string()))?;
        Ok(())
    }

    /// Serialises every key, so that parsing the text reproduces `self`.
    pub fn to_text(&self) -> String {
        let file = ConfigFile {
            wavelength: Some(self.wavelength),
            slit_width: None,
            slit_separation: None,
            slit_centers: Some(self.slit_centers.clone()),
            slit_widths: Some(self.slit_widths.clone()),
            plate_half_width: Some(self.plate_half_width),
            plate_leakage: Some(self.plate_leakage),
            mask_scheme: Some(self.mask_scheme),
            mask_window_width: Some(self.mask_window_width),
            mask_leakage: Some(self.mask_leakage),
            mask_displacement: Some(self.mask_displacement),
            displacement_min: Some(self.displacement_min),
            displacement_max: Some(self.displacement_max),
            u_min: Some(self.u_min),
            u_max: Some(self.u_max),
            points: Some(self.points as u64),
            position_u: Some(self.position_u),
            rule: Some(self.rule),
            alpha: Some(self.alpha),
            mean_power: Some(self.mean_power),
            power_fluctuation: Some(self.power_fluctuation),
            drift_rate: Some(self.drift_rate),
            sequence_order: Some(self.sequence_order),
            dead_time: Some(self.dead_time),
            nonlinearity: Some(self.nonlinearity),
            full_scale_rate: Some(self.full_scale_rate),
            dark_rate: Some(self.dark_rate),
            dwell_time: Some(self.dwell_time),
            peak_rate: Some(self.peak_rate),
            dynamic_range: Some(self.dynamic_range.unwrap_or(0.0)),
            poisson: Some(self.poisson),
            reference_rate: self.reference_rate,
            dead_time_correction: Some(self.dead_time_correction),
            repetitions: Some(self.repetitions as u64),
            seed: Some(self.seed),
            guard: Some(self.guard),
            hierarchy_samples: Some(self.hierarchy_samples as u64),
            counts_input: self.counts_input.clone(),
            output_dir: Some(self.output_dir.clone()),
            format: Some(self.format),
        };
        toml::to_string(&file).expect("config serialises")
    }

    pub fn optical(&self) -> OpticalConfig {
        OpticalConfig {
            wavelength: self.wavelength,
        }
    }

    pub fn plate(&self) -> Result<SlitPlate> {
        let slits = self
            .slit_centers
            .iter()
            .zip(&self.slit_widths)
            .map(|(&c, &w)| Window::new(c, w))
            .collect();
        SlitPlate::new(
            slits,
            self.plate_half_width,
            leakage_amplitude_from_intensity(self.plate_leakage),
        )
    }

    /// Mask at the configured common displacement.
    pub fn mask(&self) -> Result<OpeningMask> {
        let plate = self.plate()?;
        Ok(OpeningMask::for_plate(
            &plate,
            self.mask_scheme,
            self.mask_window_width,
            leakage_amplitude_from_intensity(self.mask_leakage),
        )?
        .with_displacement(self.mask_displacement))
    }

    pub fn grid(&self) -> Vec<f64> {
        linspace(self.u_min, self.u_max, self.points)
    }

    pub fn probability_rule(&self) -> ProbabilityRule {
        match self.rule {
            RuleKind::Born => ProbabilityRule::Born,
            RuleKind::PerturbedCubic => ProbabilityRule::PerturbedCubic { alpha: self.alpha },
        }
    }

    pub fn power_model(&self) -> PowerModel {
        PowerModel {
            mean_power: self.mean_power,
            relative_fluctuation: self.power_fluctuation,
            linear_drift_rate: self.drift_rate,
            order: self.sequence_order,
        }
    }

    pub fn detector(&self) -> DetectorModel {
        DetectorModel {
            dead_time: self.dead_time,
            nonlinearity_beta: self.nonlinearity,
            full_scale_rate: self.full_scale_rate,
            dark_rate: self.dark_rate,
            dwell_time: self.dwell_time,
        }
    }

    pub fn scaling(&self) -> RateScaling {
        RateScaling {
            peak_rate: self.peak_rate,
            dynamic_range: self.dynamic_range,
        }
    }

    pub fn displacement_distribution(&self) -> DisplacementDistribution {
        DisplacementDistribution::Uniform {
            min: self.displacement_min,
            max: self.displacement_max,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            position_u: self.position_u,
            repetitions: self.repetitions,
            seed: self.seed,
            scaling: self.scaling(),
            poisson: self.poisson,
            reference_rate: self.reference_rate,
        }
    }
}
