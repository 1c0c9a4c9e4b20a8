//! Two-plate aperture model and analytic Fraunhofer patterns.
//!
//! A fixed [`SlitPlate`] sits in contact with an [`OpeningMask`] that is moved
//! between measurements to select one of the eight open/closed combinations.
//! Their pointwise product is a piecewise-constant transmission function, and
//! its far field is evaluated exactly as a sum of shifted sinc terms, one per
//! constant interval. There is no sampling grid in aperture space.
//!
//! Transverse coordinates are in meters; the far-field variable `u` is the
//! spatial frequency sinθ/λ in cycles per meter.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{Combination, ProbabilityVector};
use crate::{Error, Result};

pub const DEFAULT_SLIT_WIDTH: f64 = 30e-6;
pub const DEFAULT_SLIT_SEPARATION: f64 = 100e-6;
pub const DEFAULT_OPENING_WIDTH: f64 = 100e-6;
pub const DEFAULT_WAVELENGTH: f64 = 800e-9;
pub const DEFAULT_PLATE_HALF_WIDTH: f64 = 2e-3;

/// Intensity leakage fraction → amplitude transmission.
pub fn leakage_amplitude_from_intensity(fraction: f64) -> f64 {
    fraction.sqrt()
}

/// A transverse interval `[center − width/2, center + width/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub width: f64,
}

impl Window {
    pub fn new(center: f64, width: f64) -> Self {
        Self { center, width }
    }

    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.start() && x < self.end()
    }

    fn shifted(&self, dx: f64) -> Window {
        Window::new(self.center + dx, self.width)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !self.center.is_finite() || !self.width.is_finite() || self.width <= 0.0 {
            return Err(Error::invalid(format!(
                "{what} must have finite center and positive width, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn check_leakage(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!(
            "{what} leakage amplitude {value} must lie in [0, 1]"
        )));
    }
    Ok(())
}

fn check_disjoint(windows: &[Window], what: &str) -> Result<()> {
    let mut sorted = windows.to_vec();
    sorted.sort_by(|a, b| a.start().total_cmp(&b.start()));
    for pair in sorted.windows(2) {
        if pair[1].start() < pair[0].end() {
            return Err(Error::invalid(format!(
                "{what} at {} and {} overlap",
                pair[0].center, pair[1].center
            )));
        }
    }
    Ok(())
}

/// The stationary plate carrying the slits.
///
/// Transmission is 1 inside a slit, `leakage_amplitude` elsewhere within
/// `[−half_width, half_width]`, and 0 outside the plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitPlate {
    slits: Vec<Window>,
    half_width: f64,
    leakage_amplitude: f64,
}

impl SlitPlate {
    pub fn new(slits: Vec<Window>, half_width: f64, leakage_amplitude: f64) -> Result<Self> {
        if slits.is_empty() {
            return Err(Error::invalid("slit plate needs at least one slit"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(format!(
                "plate half width {half_width} must be positive and finite"
            )));
        }
        check_leakage(leakage_amplitude, "plate")?;
        for s in &slits {
            s.validate("slit")?;
            if s.start() < -half_width || s.end() > half_width {
                return Err(Error::invalid(format!(
                    "slit at {} extends beyond the plate half width {half_width}",
                    s.center
                )));
            }
        }
        check_disjoint(&slits, "slits")?;
        Ok(Self {
            slits,
            half_width,
            leakage_amplitude,
        })
    }

    /// Three equal slits A, B, C centred at −separation, 0, +separation.
    pub fn three_slit(
        width: f64,
        separation: f64,
        half_width: f64,
        leakage_amplitude: f64,
    ) -> Result<Self> {
        let slits = (-1..=1)
            .map(|k| Window::new(k as f64 * separation, width))
            .collect();
        Self::new(slits, half_width, leakage_amplitude)
    }

    pub fn slits(&self) -> &[Window] {
        &self.slits
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn leakage_amplitude(&self) -> f64 {
        self.leakage_amplitude
    }

    pub fn with_leakage(&self, leakage_amplitude: f64) -> Result<Self> {
        Self::new(self.slits.clone(), self.half_width, leakage_amplitude)
    }

    pub fn transmission(&self, x: f64) -> f64 {
        if x < -self.half_width || x >= self.half_width {
            0.0
        } else if self.slits.iter().any(|s| s.contains(x)) {
            1.0
        } else {
            self.leakage_amplitude
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskScheme {
    /// Transparent plate with opaque blockers over the closed slits.
    Blocking,
    /// Opaque plate with openings over the open slits.
    Opening,
}

/// The moving mask that selects a combination.
///
/// For each combination the mask lists its windows: openings under the
/// [`MaskScheme::Opening`] scheme, blockers under [`MaskScheme::Blocking`].
/// Opaque parts transmit `leakage_amplitude`. The whole mask is shifted
/// rigidly by `displacement` before it is laid over the plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningMask {
    scheme: MaskScheme,
    patterns: BTreeMap<Combination, Vec<Window>>,
    leakage_amplitude: f64,
    displacement: f64,
}

impl OpeningMask {
    pub fn new(
        scheme: MaskScheme,
        patterns: BTreeMap<Combination, Vec<Window>>,
        leakage_amplitude: f64,
        displacement: f64,
    ) -> Result<Self> {
        check_leakage(leakage_amplitude, "mask")?;
        if !displacement.is_finite() {
            return Err(Error::invalid("mask displacement must be finite"));
        }
        for (comb, windows) in &patterns {
            for w in windows {
                w.validate(&format!("mask window for combination {comb}"))?;
            }
        }
        Ok(Self {
            scheme,
            patterns,
            leakage_amplitude,
            displacement,
        })
    }

    /// Standard mask for a plate: one window of `window_width` centred on each
    /// slit that the scheme needs to expose (Opening) or cover (Blocking).
    /// Only the first three slits are addressed by combinations.
    pub fn for_plate(
        plate: &SlitPlate,
        scheme: MaskScheme,
        window_width: f64,
        leakage_amplitude: f64,
    ) -> Result<Self> {
        if plate.slits().len() < 3 {
            return Err(Error::invalid(
                "combination masks need a plate with at least three slits",
            ));
        }
        let patterns = Combination::ALL
            .into_iter()
            .map(|comb| {
                let windows = plate.slits()[..3]
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| match scheme {
                        MaskScheme::Opening => comb.is_open(*i),
                        MaskScheme::Blocking => !comb.is_open(*i),
                    })
                    .map(|(_, s)| Window::new(s.center, window_width))
                    .collect();
                (comb, windows)
            })
            .collect();
        Self::new(scheme, patterns, leakage_amplitude, 0.0)
    }

    pub fn scheme(&self) -> MaskScheme {
        self.scheme
    }

    pub fn leakage_amplitude(&self) -> f64 {
        self.leakage_amplitude
    }

    pub fn displacement(&self) -> f64 {
        self.displacement
    }

    pub fn patterns(&self) -> &BTreeMap<Combination, Vec<Window>> {
        &self.patterns
    }

    pub fn with_displacement(&self, displacement: f64) -> Self {
        Self {
            displacement,
            ..self.clone()
        }
    }

    pub fn with_leakage(&self, leakage_amplitude: f64) -> Result<Self> {
        check_leakage(leakage_amplitude, "mask")?;
        Ok(Self {
            leakage_amplitude,
            ..self.clone()
        })
    }

    fn windows(&self, combination: Combination) -> Result<&[Window]> {
        self.patterns
            .get(&combination)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "mask defines no pattern for combination {combination}"
                ))
            })
    }

    /// Mask transmission at plate coordinate `x`, displacement applied.
    pub fn transmission(&self, combination: Combination, x: f64) -> Result<f64> {
        let local = x - self.displacement;
        let inside = self.windows(combination)?.iter().any(|w| w.contains(local));
        Ok(match (self.scheme, inside) {
            (MaskScheme::Opening, true) | (MaskScheme::Blocking, false) => 1.0,
            _ => self.leakage_amplitude,
        })
    }
}

/// One constant piece `[start, end)` of a transmission function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: Complex64,
}

/// Piecewise-constant amplitude transmission for one combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationAperture {
    pub combination: Combination,
    segments: Vec<Segment>,
}

impl CombinationAperture {
    pub fn new(combination: Combination, segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.start.is_finite() && s.end.is_finite() && s.start < s.end) {
                return Err(Error::invalid(format!("degenerate segment {s:?}")));
            }
            if !s.value.is_finite() || s.value.norm() > 1.0 {
                return Err(Error::invalid(format!(
                    "segment transmission {} must have modulus ≤ 1",
                    s.value
                )));
            }
        }
        Ok(Self {
            combination,
            segments,
        })
    }

    /// Non-zero pieces in increasing position.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn transmission(&self, x: f64) -> Complex64 {
        self.segments
            .iter()
            .find(|s| x >= s.start && x < s.end)
            .map_or(Complex64::new(0.0, 0.0), |s| s.value)
    }

    /// ∫|t(x)|² dx, the power transmitted for unit incident intensity.
    pub fn transmitted_power(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.value.norm_sqr() * (s.end - s.start))
            .sum()
    }

    /// Fourier transform of the transmission at spatial frequency `u`.
    pub fn far_field(&self, u: f64) -> Complex64 {
        self.segments
            .iter()
            .map(|s| {
                let width = s.end - s.start;
                let center = 0.5 * (s.start + s.end);
                let phase = Complex64::from_polar(1.0, -2.0 * PI * center * u);
                s.value * (width * sinc(PI * width * u)) * phase
            })
            .sum()
    }
}

/// sin(x)/x with the removable singularity filled.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Pointwise product of plate and displaced mask for `combination`.
pub fn build_combination_aperture(
    plate: &SlitPlate,
    mask: &OpeningMask,
    combination: Combination,
) -> Result<CombinationAperture> {
    let windows = mask.windows(combination)?;
    let h = plate.half_width();

    let mut edges = vec![-h, h];
    for s in plate.slits() {
        edges.extend([s.start(), s.end()]);
    }
    for w in windows {
        let w = w.shifted(mask.displacement());
        edges.extend([w.start(), w.end()]);
    }
    edges.retain(|&x| (-h..=h).contains(&x));
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut segments: Vec<Segment> = Vec::new();
    for pair in edges.windows(2) {
        let (start, end) = (pair[0], pair[1]);
        if end <= start {
            continue;
        }
        let mid = 0.5 * (start + end);
        let value = plate.transmission(mid) * mask.transmission(combination, mid)?;
        if value == 0.0 {
            continue;
        }
        let value = Complex64::new(value, 0.0);
        match segments.last_mut() {
            Some(last) if last.end == start && last.value == value => last.end = end,
            _ => segments.push(Segment { start, end, value }),
        }
    }
    CombinationAperture::new(combination, segments)
}

/// Far-field amplitude of `aperture` at `u` (cycles per meter).
pub fn far_field_amplitude(aperture: &CombinationAperture, u: f64) -> Complex64 {
    aperture.far_field(u)
}

/// Wavelength and the mapping between detector geometry and `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    pub wavelength: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH,
        }
    }
}

impl OpticalConfig {
    pub fn new(wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::invalid(format!(
                "wavelength {wavelength} must be positive"
            )));
        }
        Ok(Self { wavelength })
    }

    /// u = sinθ/λ.
    pub fn u_from_angle(&self, theta: f64) -> f64 {
        theta.sin() / self.wavelength
    }

    /// u = x/(λL) for a detector at transverse position `x`, distance `distance`.
    pub fn u_from_screen(&self, x: f64, distance: f64) -> f64 {
        x / (self.wavelength * distance)
    }

    pub fn screen_from_u(&self, u: f64, distance: f64) -> f64 {
        u * self.wavelength * distance
    }
}

/// `points` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (min + max)],
        n => {
            let step = (max - min) / (n - 1) as f64;
            (0..n).map(|i| min + step * i as f64).collect()
        }
    }
}

/// The eight combination apertures, indexed by [`Combination::index`].
pub fn combination_apertures(
    plate: &SlitPlate,
    mask: &OpeningMask,
) -> Result<Vec<CombinationAperture>> {
    Combination::ALL
        .into_iter()
        .map(|c| build_combination_aperture(plate, mask, c))
        .collect()
}

/// Intensities of all eight combinations over a grid of `u` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub grid: Vec<f64>,
    /// One row per grid point, columns in [`Combination::ALL`] order.
    pub intensities: Vec<[f64; 8]>,
}

impl PatternSet {
    pub fn curve(&self, combination: Combination) -> Vec<f64> {
        self.intensities
            .iter()
            .map(|row| row[combination.index()])
            .collect()
    }

    pub fn probability_vector(&self, point: usize) -> Result<ProbabilityVector> {
        ProbabilityVector::new(self.intensities[point])
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("u grid must not be empty"));
    }
    if grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("u grid values must be finite"));
    }
    Ok(())
}

/// |far field|² for each of `apertures` (in combination order) at each `u`.
///
/// Grid points are evaluated independently, so the parallel result is
/// bit-identical to a sequential pass.
pub fn patterns_from_apertures(
    apertures: &[CombinationAperture],
    grid: &[f64],
) -> Result<PatternSet> {
    check_grid(grid)?;
    if apertures.len() != 8 {
        return Err(Error::invalid(format!(
            "expected 8 combination apertures, got {}",
            apertures.len()
        )));
    }
    let intensities = grid
        .par_iter()
        .map(|&u| {
            let mut row = [0.0; 8];
            for (slot, aperture) in row.iter_mut().zip(apertures) {
                *slot = aperture.far_field(u).norm_sqr();
            }
            row
        })
        .collect();
    Ok(PatternSet {
        grid: grid.to_vec(),
        intensities,
    })
}

/// Diffraction patterns of the eight combinations for one mask position.
pub fn pattern_set(plate: &SlitPlate, mask: &OpeningMask, grid: &[f64]) -> Result<PatternSet> {
    check_grid(grid)?;
    let apertures = combination_apertures(plate, mask)?;
    patterns_from_apertures(&apertures, grid)
}
