//! Rydberg-line spectroscopy under dc bias fields.
//!
//! The transition model covers the linear (Paschen-Back) Zeeman regime plus a
//! quadratic Stark shift that is common to both ΔmL = ±1 lines. Cloud-averaged
//! spectral lines are synthesized by Monte Carlo over Gaussian atom positions —
//! each atom sees the local dc fields, contributes one Gaussian of homogeneous
//! width per line — and are decomposed again by a shared-width double-Gaussian
//! fit. The broadening helpers invert linewidths into field inhomogeneity.

use crate::constants::{BOHR_MAGNETON, PLANCK, TESLA_PER_GAUSS};
use crate::error::{Error, Result};
use crate::fieldsolve::{CloudSpec, FieldMap};
use crate::fit::{self, LmOptions};
use crate::parallel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write as IoWrite;
use std::path::Path;

/// Magnetic fields below this (but above zero) fall in the intermediate-Zeeman
/// region the linear model does not cover; results there carry a warning tag.
pub const PASCHEN_BACK_THRESHOLD: f64 = 3.0 * TESLA_PER_GAUSS;

/// Gaussian FWHM in units of σ; two fitted peaks closer than one FWHM are
/// reported as unresolved.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045;

/// The driven two-level ladder: one field-free carrier, two Zeeman lines with
/// individual zero-field offsets, a shared quadratic Stark response, and a
/// single-atom (homogeneous) linewidth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RydbergSystem {
    /// field-free transition frequency ν0 (Hz)
    pub nu0: f64,
    /// zero-field offset of the mL = +1 line from ν0 (Hz); absorbs fine structure
    pub offset_plus: f64,
    /// zero-field offset of the mL = −1 line from ν0 (Hz)
    pub offset_minus: f64,
    /// magnitude of the differential polarizability, Hz per (V/m)²; the Stark
    /// shift is −½·δα·E² on both lines
    pub delta_alpha: f64,
    /// orbital g-factor of the Zeeman splitting
    pub g_l: f64,
    /// homogeneous Gaussian width σ_h of a single atom's line (Hz)
    pub sigma_h: f64,
}

impl Default for RydbergSystem {
    /// The 42s → 42p system the cavity was probed with: ν0 = 20.542 GHz,
    /// offsets −2.5 / −0.5 MHz, |δα| = 444 MHz/(V/cm)² = 4.44·10⁴ Hz/(V/m)²,
    /// gL = 1, σ_h = 1 MHz.
    fn default() -> Self {
        RydbergSystem {
            nu0: 20.542e9,
            offset_plus: -2.5e6,
            offset_minus: -0.5e6,
            delta_alpha: 4.44e4,
            g_l: 1.0,
            sigma_h: 1.0e6,
        }
    }
}

impl RydbergSystem {
    fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0) || !self.nu0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "carrier frequency must be positive, got {}",
                self.nu0
            )));
        }
        for (o, name) in [(self.offset_plus, "+1"), (self.offset_minus, "-1")] {
            if !o.is_finite() || o.abs() > 1e-3 * self.nu0 {
                return Err(Error::InvalidInput(format!(
                    "zero-field offset of the mL = {name} line must be small against the carrier"
                )));
            }
        }
        if !(self.delta_alpha >= 0.0) || !self.delta_alpha.is_finite() {
            return Err(Error::InvalidInput(
                "polarizability difference is a magnitude; must be ≥ 0".into(),
            ));
        }
        if !(self.sigma_h > 0.0) || !self.sigma_h.is_finite() {
            return Err(Error::InvalidInput("homogeneous width must be positive".into()));
        }
        if !self.g_l.is_finite() {
            return Err(Error::InvalidInput("g-factor must be finite".into()));
        }
        Ok(())
    }

    /// Zeeman half-splitting μB·gL·B/h (Hz) at field `b` (tesla).
    fn zeeman_term(&self, b: f64) -> f64 {
        BOHR_MAGNETON * self.g_l * b / PLANCK
    }

    /// Quadratic Stark shift −½·δα·E² (Hz), equal on both lines, never positive.
    pub fn stark_shift(&self, e_field: f64) -> Result<f64> {
        if !(e_field >= 0.0) || !e_field.is_finite() {
            return Err(Error::InvalidInput(format!(
                "electric field magnitude must be ≥ 0, got {e_field}"
            )));
        }
        Ok(-0.5 * self.delta_alpha * (e_field * e_field))
    }

    /// Both line frequencies without validation or tagging — Monte Carlo hot path.
    fn line_pair(&self, e_field: f64, b_field: f64) -> (f64, f64) {
        let z = self.zeeman_term(b_field);
        let s = -0.5 * self.delta_alpha * (e_field * e_field);
        (self.nu0 + self.offset_plus + z + s, self.nu0 + self.offset_minus - z + s)
    }
}

/// Where a magnetic field strength sits relative to the model's validity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ZeemanRegime {
    /// B = 0: both lines sit at their zero-field offsets
    ZeroField,
    /// 0 < B < 3 G: intermediate-Zeeman region; the linear splitting reported
    /// here is an extrapolation, not a prediction
    BelowThreshold,
    /// B ≥ 3 G: linear Paschen-Back splitting applies
    PaschenBack,
}

/// The two ΔmL = ±1 transition frequencies under uniform dc fields.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TransitionPair {
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub regime: ZeemanRegime,
}

/// Transition frequencies at electric field `e_field` (V/m) and magnetic field
/// `b_field` (tesla):  ν±1 = ν0 + ν0,±1 ± μB·gL·B/h − ½·δα·E².
pub fn transition_frequencies(
    system: &RydbergSystem,
    e_field: f64,
    b_field: f64,
) -> Result<TransitionPair> {
    system.validate()?;
    system.stark_shift(e_field)?; // validates E ≥ 0
    if !(b_field >= 0.0) || !b_field.is_finite() {
        return Err(Error::InvalidInput(format!(
            "magnetic field magnitude must be ≥ 0, got {b_field}"
        )));
    }
    let (nu_plus, nu_minus) = system.line_pair(e_field, b_field);
    let regime = if b_field == 0.0 {
        ZeemanRegime::ZeroField
    } else if b_field < PASCHEN_BACK_THRESHOLD {
        ZeemanRegime::BelowThreshold
    } else {
        ZeemanRegime::PaschenBack
    };
    Ok(TransitionPair { nu_plus, nu_minus, regime })
}

// ---------------------------------------------------------------------------
// line synthesis
// ---------------------------------------------------------------------------

/// A dc field as seen by the atom cloud: spatially uniform, or the magnitude of
/// a solved field map interpolated at each atom position.
#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    /// same magnitude everywhere (V/m or tesla)
    Uniform(f64),
    Map(&'a FieldMap),
}

impl<'a> FieldSource<'a> {
    fn validate(&self, what: &str) -> Result<()> {
        if let FieldSource::Uniform(v) = self {
            if !(*v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "uniform {what} magnitude must be ≥ 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn map(&self) -> Option<&'a FieldMap> {
        match self {
            FieldSource::Uniform(_) => None,
            FieldSource::Map(m) => Some(m),
        }
    }

    fn at(&self, p: [f64; 3]) -> Result<f64> {
        match self {
            FieldSource::Uniform(v) => Ok(*v),
            FieldSource::Map(m) => m.sample_magnitude(p),
        }
    }

    fn tag(&self) -> SourceTag {
        match self {
            FieldSource::Uniform(v) => SourceTag::Uniform(*v),
            FieldSource::Map(_) => SourceTag::FromMap,
        }
    }
}

/// Provenance record of how a field entered a synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum SourceTag {
    Uniform(f64),
    FromMap,
}

/// Uniform frequency grid (Hz) a line is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FrequencyGrid {
    fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start >= self.stop {
            return Err(Error::InvalidInput(format!(
                "frequency grid must run upward, got [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidInput("frequency grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + i as f64 * step).collect()
    }
}

/// How a synthesized line came to be.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineProvenance {
    pub seed: u64,
    pub samples: usize,
    pub cloud: CloudSpec,
    pub e_source: SourceTag,
    pub b_source: SourceTag,
}

/// A cloud-averaged spectral line, peak-normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLine {
    /// strictly increasing frequency grid (Hz)
    pub frequencies: Vec<f64>,
    /// normalized signal, same length as `frequencies`
    pub signal: Vec<f64>,
    pub provenance: LineProvenance,
}

impl SpectralLine {
    /// CSV export: provenance comment lines, a header, one row per grid point.
    pub fn to_writer<W: IoWrite>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# cavitydc spectrum v1")?;
        writeln!(
            w,
            "# seed={} samples={} cloud_diameter_m={}",
            self.provenance.seed, self.provenance.samples, self.provenance.cloud.diameter
        )?;
        writeln!(w, "frequency_hz,signal")?;
        for (f, s) in self.frequencies.iter().zip(&self.signal) {
            writeln!(w, "{f},{s}")?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut w)
    }
}

/// Synthesize the cloud-averaged line: draw `samples` Gaussian atom positions
/// (σ = cloud diameter / 2), look up the local dc fields, and let every atom
/// contribute one homogeneous-width Gaussian per Zeeman line.
///
/// Atom positions are drawn from per-sample counter-seeded streams
/// (`set_stream(i)` on a ChaCha generator seeded with `seed`), and all
/// reductions are ordered, so the result is bit-identical for a given seed no
/// matter how many threads run. When a field comes from a map, atoms must land
/// inside it: stray draws are retried up to 100 times, then clamped to the
/// domain; the cloud itself (±3σ) must fit inside the map up front.
pub fn synthesize_spectrum(
    system: &RydbergSystem,
    e_source: FieldSource,
    b_source: FieldSource,
    cloud: &CloudSpec,
    grid: &FrequencyGrid,
    samples: usize,
    seed: u64,
) -> Result<SpectralLine> {
    system.validate()?;
    e_source.validate("electric field")?;
    b_source.validate("magnetic field")?;
    grid.validate()?;
    if samples < 1000 {
        return Err(Error::TooFewSamples { needed: 1000, got: samples });
    }
    if !(cloud.diameter > 0.0) || !cloud.diameter.is_finite() {
        return Err(Error::InvalidInput("cloud diameter must be positive".into()));
    }

    // the first map source anchors the spatial domain; with two maps they must
    // describe the same box
    let domain = e_source.map().or_else(|| b_source.map());
    if let (Some(a), Some(b)) = (e_source.map(), b_source.map()) {
        if a.origin != b.origin || a.extent() != b.extent() {
            return Err(Error::InvalidInput(
                "electric and magnetic field maps cover different domains".into(),
            ));
        }
    }
    let center = match domain {
        Some(m) => {
            let c = cloud.center(m);
            let ext = m.extent();
            let reach = 3.0 * cloud.sigma();
            for d in 0..3 {
                if c[d] - reach < m.origin[d] - 1e-12 || c[d] + reach > m.origin[d] + ext[d] + 1e-12
                {
                    return Err(Error::InvalidInput(
                        "cloud (±3σ) extends outside the field map".into(),
                    ));
                }
            }
            c
        }
        // with uniform fields positions never matter; keep the cloud offset as
        // a nominal center so provenance still reflects the request
        None => cloud.offset,
    };

    let sigma = cloud.sigma();
    let bounds = domain.map(|m| {
        let ext = m.extent();
        (m.origin, [m.origin[0] + ext[0], m.origin[1] + ext[1], m.origin[2] + ext[2]])
    });

    // per-atom line pairs, one independent RNG stream each
    let pairs: Vec<(f64, f64)> = {
        let results: Vec<Result<(f64, f64)>> = parallel::map_indexed(samples, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut p = [0.0; 3];
            for attempt in 0..100 {
                for (d, c) in center.iter().enumerate() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    p[d] = c + sigma * n;
                }
                let inside = bounds
                    .map(|(lo, hi)| (0..3).all(|d| p[d] >= lo[d] && p[d] <= hi[d]))
                    .unwrap_or(true);
                if inside {
                    break;
                }
                if attempt == 99 {
                    let (lo, hi) = bounds.expect("only map-backed sources can be outside");
                    for d in 0..3 {
                        p[d] = p[d].clamp(lo[d], hi[d]);
                    }
                }
            }
            let e = e_source.at(p)?;
            let b = b_source.at(p)?;
            Ok(system.line_pair(e, b))
        });
        results.into_iter().collect::<Result<Vec<_>>>()?
    };

    // accumulate the two-Gaussian comb of every atom on the grid
    let freqs = grid.values();
    let inv_two_sig2 = 1.0 / (2.0 * system.sigma_h * system.sigma_h);
    let signal: Vec<f64> = parallel::map_indexed(freqs.len(), |g| {
        let nu = freqs[g];
        let mut acc = 0.0;
        for &(np, nm) in &pairs {
            let dp = nu - np;
            let dm = nu - nm;
            acc += (-dp * dp * inv_two_sig2).exp() + (-dm * dm * inv_two_sig2).exp();
        }
        acc
    });

    let peak = signal.iter().cloned().fold(0.0f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::InvalidInput(
            "frequency grid does not overlap the synthesized line (peak signal is zero)".into(),
        ));
    }
    let signal = signal.into_iter().map(|s| s / peak).collect();

    Ok(SpectralLine {
        frequencies: freqs,
        signal,
        provenance: LineProvenance {
            seed,
            samples,
            cloud: *cloud,
            e_source: e_source.tag(),
            b_source: b_source.tag(),
        },
    })
}

// ---------------------------------------------------------------------------
// line fitting
// ---------------------------------------------------------------------------

/// Parameters extracted from a spectral line by the shared-width Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    /// higher-frequency line center (Hz); equals `nu_minus` when unresolved
    pub nu_plus: f64,
    /// lower-frequency line center (Hz)
    pub nu_minus: f64,
    /// common Gaussian width σ (Hz)
    pub sigma: f64,
    pub amplitude_plus: f64,
    pub amplitude_minus: f64,
    pub baseline: f64,
    /// true when the two fitted centers are farther apart than one FWHM;
    /// false means the single-Gaussian fallback was reported
    pub resolved: bool,
    /// 1σ statistical uncertainties of (nu_plus, nu_minus) from the fit
    /// covariance, when the normal matrix was invertible
    pub center_sigma: Option<(f64, f64)>,
}

/// Indices of local maxima sorted by height, highest first. Monotonic data
/// falls back to the single global maximum.
fn local_maxima_by_height(signal: &[f64]) -> Vec<usize> {
    let mut maxima: Vec<usize> = (1..signal.len() - 1)
        .filter(|&i| signal[i] > signal[i - 1] && signal[i] >= signal[i + 1])
        .collect();
    if maxima.is_empty() {
        let best = (0..signal.len())
            .max_by(|&a, &b| signal[a].total_cmp(&signal[b]))
            .unwrap_or(0);
        return vec![best];
    }
    maxima.sort_by(|&a, &b| signal[b].total_cmp(&signal[a]));
    maxima
}

/// Rough σ from the half-height width around one peak (grid units → Hz).
fn width_estimate(freqs: &[f64], signal: &[f64], peak: usize, base: f64) -> f64 {
    let half = base + 0.5 * (signal[peak] - base);
    let mut right = peak;
    while right + 1 < signal.len() && signal[right] > half {
        right += 1;
    }
    let mut left = peak;
    while left > 0 && signal[left] > half {
        left -= 1;
    }
    let fwhm = (freqs[right] - freqs[left]).abs();
    let step = freqs[1] - freqs[0];
    (fwhm / FWHM_PER_SIGMA).max(step)
}

fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let d = (x - center) / sigma;
    (-0.5 * d * d).exp()
}

/// Fit a spectral line with two Gaussians of shared width on a flat baseline.
///
/// Initial guesses come from the two highest distinct local maxima. When the
/// fitted centers are closer than one FWHM — or only one maximum exists — the
/// line is refit with a single Gaussian and reported with `resolved = false`.
pub fn fit_spectrum(line: &SpectralLine) -> Result<LineFit> {
    let n = line.frequencies.len();
    if n < 20 {
        return Err(Error::TooFewSamples { needed: 20, got: n });
    }
    if line.signal.len() != n {
        return Err(Error::InvalidInput("frequency and signal lengths differ".into()));
    }
    if !line.frequencies.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("frequency grid must be strictly increasing".into()));
    }
    if !line.signal.iter().all(|s| s.is_finite()) {
        return Err(Error::InvalidInput("signal contains non-finite values".into()));
    }

    // fit in offset space around the grid midpoint: the centers are ~10 orders
    // of magnitude above the widths, and the normal equations like it flat
    let nu_ref = 0.5 * (line.frequencies[0] + line.frequencies[n - 1]);
    let xs: Vec<f64> = line.frequencies.iter().map(|f| f - nu_ref).collect();
    let ys = &line.signal;
    let step = xs[1] - xs[0];

    let base0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let maxima = local_maxima_by_height(ys);
    let m1 = maxima[0];
    let sigma0 = width_estimate(&line.frequencies, ys, m1, base0);
    // the second initial center must clear the first by a good fraction of the
    // estimated width, or a noise wiggle on the same peak top gets picked and
    // the fit starts with both Gaussians stacked on one line
    let min_gap = (1.5 * sigma0 / step).ceil().max(3.0) as usize;
    let m2 = maxima[1..].iter().copied().find(|&i| i.abs_diff(m1) >= min_gap);

    let single = |xs: &[f64]| -> Result<LineFit> {
        let p0 = [ys[m1] - base0, xs[m1], sigma0, base0];
        let steps = [1e-3, step, step, 1e-3];
        let model =
            |p: &[f64], x: f64| -> f64 { p[3] + p[0] * gaussian(x, p[1], p[2]) };
        let fit = fit::curve_fit(model, xs, ys, None, &p0, &steps, &LmOptions::default())?;
        let center = nu_ref + fit.params[1];
        let cs = fit.variance.as_ref().map(|v| (v[1].sqrt(), v[1].sqrt()));
        Ok(LineFit {
            nu_plus: center,
            nu_minus: center,
            sigma: fit.params[2].abs(),
            amplitude_plus: fit.params[0],
            amplitude_minus: fit.params[0],
            baseline: fit.params[3],
            resolved: false,
            center_sigma: cs,
        })
    };

    let Some(m2) = m2 else {
        return single(&xs);
    };

    // params: [a1, c1, a2, c2, σ, baseline]
    let p0 = [ys[m1] - base0, xs[m1], ys[m2] - base0, xs[m2], sigma0, base0];
    let steps = [1e-3, step, 1e-3, step, step, 1e-3];
    let model = |p: &[f64], x: f64| -> f64 {
        p[5] + p[0] * gaussian(x, p[1], p[4]) + p[2] * gaussian(x, p[3], p[4])
    };
    let fit = match fit::curve_fit(model, &xs, ys, None, &p0, &steps, &LmOptions::default()) {
        Ok(f) => f,
        // a degenerate double fit (e.g. both centers collapsing) is not fatal:
        // the line is simply not two peaks
        Err(Error::FitFailed(_)) => return single(&xs),
        Err(e) => return Err(e),
    };

    let sigma = fit.params[4].abs();
    let separation = (fit.params[1] - fit.params[3]).abs();
    if separation <= FWHM_PER_SIGMA * sigma {
        return single(&xs);
    }

    // order the two lines by frequency, high first
    let (hi, lo) = if fit.params[1] >= fit.params[3] { (1, 3) } else { (3, 1) };
    let center_sigma = fit
        .variance
        .as_ref()
        .map(|v| (v[hi].sqrt(), v[lo].sqrt()));
    Ok(LineFit {
        nu_plus: nu_ref + fit.params[hi],
        nu_minus: nu_ref + fit.params[lo],
        sigma,
        amplitude_plus: fit.params[hi - 1],
        amplitude_minus: fit.params[lo - 1],
        baseline: fit.params[5],
        resolved: true,
        center_sigma,
    })
}

// ---------------------------------------------------------------------------
// broadening & calibration
// ---------------------------------------------------------------------------

/// Inhomogeneous-broadening decomposition of a measured linewidth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Broadening {
    /// field-induced width σ_ν,E = √(σ²(E) − σ²(0)) (Hz)
    pub sigma_field: f64,
    /// relative field inhomogeneity σ_E/E = σ_ν,E / (2·|Δν|)
    pub relative_inhomogeneity: f64,
}

/// Subtract the zero-field width in quadrature and convert the rest into a
/// relative field inhomogeneity via the quadratic-Stark factor 2.
pub fn broadening_analysis(
    sigma_at_field: f64,
    sigma_at_zero: f64,
    stark_shift: f64,
) -> Result<Broadening> {
    if !(sigma_at_zero > 0.0) || !sigma_at_field.is_finite() || !sigma_at_zero.is_finite() {
        return Err(Error::InvalidInput("linewidths must be positive and finite".into()));
    }
    if sigma_at_field < sigma_at_zero {
        return Err(Error::InvalidInput(format!(
            "width at field ({sigma_at_field} Hz) is below the zero-field width \
             ({sigma_at_zero} Hz); quadrature deconvolution is undefined"
        )));
    }
    if stark_shift == 0.0 || !stark_shift.is_finite() {
        return Err(Error::InvalidInput("Stark shift must be nonzero".into()));
    }
    let sigma_field =
        (sigma_at_field * sigma_at_field - sigma_at_zero * sigma_at_zero).sqrt();
    Ok(Broadening {
        sigma_field,
        relative_inhomogeneity: sigma_field / (2.0 * stark_shift.abs()),
    })
}

/// One spectroscopy run at a known coil current: the two fitted line centers
/// and a statistical weight (1/σ² of the centers, or 1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CalibrationPoint {
    /// coil current (A)
    pub current: f64,
    /// fitted mL = +1 line center (Hz)
    pub nu_plus: f64,
    /// fitted mL = −1 line center (Hz)
    pub nu_minus: f64,
    pub weight: f64,
}

/// Result of the joint Zeeman calibration fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ZeemanCalibration {
    /// field-per-current conversion (gauss per ampere)
    pub gauss_per_ampere: f64,
    /// zero-current intercept of the mL = +1 line (Hz, absolute)
    pub intercept_plus: f64,
    /// zero-current intercept of the mL = −1 line (Hz, absolute)
    pub intercept_minus: f64,
    /// weighted rms of the fit residuals (Hz)
    pub residual_rms: f64,
}

/// Weighted linear least squares of both lines jointly:
///   ν±(I) = o± ± μB·gL·(m·I)/h,   m in gauss per ampere,
/// sharing the slope between the lines. Three linear parameters (o₊, o₋, m),
/// solved through the normal equations.
pub fn linear_calibration_fit(
    system: &RydbergSystem,
    points: &[CalibrationPoint],
) -> Result<ZeemanCalibration> {
    system.validate()?;
    if points.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: points.len() });
    }
    for p in points {
        if !(p.weight > 0.0)
            || !p.weight.is_finite()
            || !p.current.is_finite()
            || !p.nu_plus.is_finite()
            || !p.nu_minus.is_finite()
        {
            return Err(Error::InvalidInput(
                "calibration points need finite values and positive weights".into(),
            ));
        }
    }

    // Hz of Zeeman shift per (G/A of slope × A of current)
    let q = BOHR_MAGNETON * system.g_l * TESLA_PER_GAUSS / PLANCK;

    // rows: ν₊ = (1, 0, +q·I)·p and ν₋ = (0, 1, −q·I)·p with p = (o₊, o₋, m)
    let mut a = [0.0f64; 9];
    let mut b = [0.0f64; 3];
    let mut add_row = |x: [f64; 3], y: f64, w: f64| {
        for r in 0..3 {
            for c in 0..3 {
                a[r * 3 + c] += w * x[r] * x[c];
            }
            b[r] += w * x[r] * y;
        }
    };
    for p in points {
        add_row([1.0, 0.0, q * p.current], p.nu_plus, p.weight);
        add_row([0.0, 1.0, -q * p.current], p.nu_minus, p.weight);
    }
    if !fit::solve_linear(&mut a, &mut b, 3) {
        return Err(Error::FitFailed(
            "calibration data are rank-deficient (need spread in coil current)".into(),
        ));
    }
    let (o_plus, o_minus, slope) = (b[0], b[1], b[2]);

    let mut wsum = 0.0;
    let mut rss = 0.0;
    for p in points {
        let rp = p.nu_plus - (o_plus + q * p.current * slope);
        let rm = p.nu_minus - (o_minus - q * p.current * slope);
        rss += p.weight * (rp * rp + rm * rm);
        wsum += 2.0 * p.weight;
    }

    Ok(ZeemanCalibration {
        gauss_per_ampere: slope,
        intercept_plus: o_plus,
        intercept_minus: o_minus,
        residual_rms: (rss / wsum).sqrt(),
    })
}
