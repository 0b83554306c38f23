//! Cavity transmission traces and the power ↔ photon-number bookkeeping.
//!
//! The resonance is the symmetric two-port input-output amplitude
//! |S21(Δ)| = κ_ext/√(Δ² + (κ/2)²) with κ_ext per port; traces are normalized
//! to unit peak, fitted as power Lorentzians, and converted between drive
//! power, intra-cavity photon number, and thermal occupation. All public rates
//! are ordinary frequencies (κ/2π in Hz); the angular factors live inside
//! `photon_number`, the one place where absolute scale matters.

use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};
use crate::fit::{self, LmOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, Write as IoWrite};
use std::path::Path;

/// Fitted traces must span at least this many linewidths, or the linewidth is
/// extrapolated rather than measured.
const MIN_SPAN_LINEWIDTHS: f64 = 3.0;

/// Fewest samples accepted by the Lorentzian fitter.
const MIN_FIT_SAMPLES: usize = 15;

fn check_rates(kappa: f64, kappa_ext: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidInput(format!("total linewidth must be positive, got {kappa}")));
    }
    if !(kappa_ext >= 0.0) || !kappa_ext.is_finite() {
        return Err(Error::InvalidInput(format!(
            "external coupling must be ≥ 0, got {kappa_ext}"
        )));
    }
    Ok(())
}

/// Transmission amplitude |S21| of a symmetric two-port cavity at `detuning`
/// Hz from resonance. `kappa` is the total linewidth and `kappa_ext` the
/// per-port external coupling, both as κ/2π in Hz. The peak is 2κ_ext/κ, so a
/// lossless symmetric cavity (κ_ext = κ/2) transmits fully on resonance.
pub fn s21_amplitude(kappa: f64, kappa_ext: f64, detuning: f64) -> Result<f64> {
    check_rates(kappa, kappa_ext)?;
    if 2.0 * kappa_ext > kappa {
        return Err(Error::InvalidInput(format!(
            "two ports coupling at {kappa_ext} Hz each exceed the total linewidth {kappa} Hz"
        )));
    }
    if !detuning.is_finite() {
        return Err(Error::InvalidInput("detuning must be finite".into()));
    }
    Ok(kappa_ext / (detuning * detuning + 0.25 * kappa * kappa).sqrt())
}

/// One measured (or synthesized) transmission resonance: amplitude versus
/// probe detuning, plus the drive conditions it was taken under.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    /// probe detuning from resonance (Hz), strictly increasing, symmetric
    /// about zero by convention
    pub detuning: Vec<f64>,
    /// normalized transmission amplitude, in [0, 1] with unit peak
    pub amplitude: Vec<f64>,
    /// power applied to the cavity input (W)
    pub drive_power: f64,
    /// stage temperature during the sweep (K)
    pub temperature: f64,
}

impl TransmissionTrace {
    fn validate(&self) -> Result<()> {
        if self.detuning.len() != self.amplitude.len() || self.detuning.is_empty() {
            return Err(Error::InvalidInput(
                "detuning and amplitude columns must be equal length and non-empty".into(),
            ));
        }
        if self.detuning.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("detunings must be strictly increasing".into()));
        }
        if self.amplitude.iter().any(|a| !a.is_finite() || *a < 0.0 || *a > 1.0) {
            return Err(Error::InvalidInput(
                "amplitudes must be finite and normalized into [0, 1]".into(),
            ));
        }
        if !(self.drive_power >= 0.0) || !(self.temperature >= 0.0) {
            return Err(Error::InvalidInput("drive power and temperature must be ≥ 0".into()));
        }
        Ok(())
    }

    /// CSV export: metadata comment lines, a unit-bearing header, one row per
    /// sample. Floats are printed shortest-roundtrip, so a re-import
    /// reproduces the trace bit-exactly.
    pub fn to_writer<W: IoWrite>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# cavitydc trace v1")?;
        writeln!(w, "# drive_power_w={}", self.drive_power)?;
        writeln!(w, "# temperature_k={}", self.temperature)?;
        writeln!(w, "detuning_hz,amplitude")?;
        for (d, a) in self.detuning.iter().zip(&self.amplitude) {
            writeln!(w, "{d},{a}")?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut w)
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut drive_power = 0.0;
        let mut temperature = 0.0;
        let mut detuning = Vec::new();
        let mut amplitude = Vec::new();
        let mut saw_header = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("drive_power_w=") {
                    drive_power = v
                        .parse()
                        .map_err(|_| Error::CsvFormat(format!("bad drive power {v:?}")))?;
                } else if let Some(v) = rest.strip_prefix("temperature_k=") {
                    temperature = v
                        .parse()
                        .map_err(|_| Error::CsvFormat(format!("bad temperature {v:?}")))?;
                }
                continue;
            }
            if !saw_header {
                if line != "detuning_hz,amplitude" {
                    return Err(Error::CsvFormat(format!("unexpected header row: {line:?}")));
                }
                saw_header = true;
                continue;
            }
            let (d, a) = line
                .split_once(',')
                .ok_or_else(|| Error::CsvFormat(format!("expected 2 columns: {line:?}")))?;
            detuning.push(
                d.parse::<f64>().map_err(|_| Error::CsvFormat(format!("bad float {d:?}")))?,
            );
            amplitude.push(
                a.parse::<f64>().map_err(|_| Error::CsvFormat(format!("bad float {a:?}")))?,
            );
        }
        if !saw_header {
            return Err(Error::CsvFormat("missing 'detuning_hz,amplitude' header".into()));
        }
        let trace = TransmissionTrace { detuning, amplitude, drive_power, temperature };
        trace.validate()?;
        Ok(trace)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_reader(r)
    }
}

/// Synthesize a normalized trace of `points` samples across `span` Hz centered
/// on resonance. `noise` is the rms of additive Gaussian amplitude noise in
/// units of the peak (0 gives the bare model); the trace is re-normalized to
/// unit peak afterwards and clamped non-negative, and `seed` makes the draw
/// reproducible. `drive_power` (W) and `temperature` (K) are carried along as
/// sweep metadata.
pub fn synthesize_trace(
    kappa: f64,
    kappa_ext: f64,
    span: f64,
    points: usize,
    noise: f64,
    seed: u64,
    drive_power: f64,
    temperature: f64,
) -> Result<TransmissionTrace> {
    check_rates(kappa, kappa_ext)?;
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::InvalidInput(format!("span must be positive, got {span}")));
    }
    if points < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: points });
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidInput(format!("noise rms must be ≥ 0, got {noise}")));
    }
    if !(drive_power >= 0.0) || !(temperature >= 0.0) {
        return Err(Error::InvalidInput("drive power and temperature must be ≥ 0".into()));
    }
    let peak = s21_amplitude(kappa, kappa_ext, 0.0)?;
    if peak == 0.0 {
        return Err(Error::InvalidInput("dark trace: external coupling is zero".into()));
    }
    let step = span / (points - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut detuning = Vec::with_capacity(points);
    let mut amplitude = Vec::with_capacity(points);
    for i in 0..points {
        let d = -0.5 * span + i as f64 * step;
        let mut a = s21_amplitude(kappa, kappa_ext, d)? / peak;
        if noise > 0.0 {
            let draw: f64 = StandardNormal.sample(&mut rng);
            a += noise * draw;
        }
        detuning.push(d);
        amplitude.push(a.max(0.0));
    }
    let max = amplitude.iter().cloned().fold(0.0_f64, f64::max);
    for a in &mut amplitude {
        *a /= max;
    }
    let trace = TransmissionTrace { detuning, amplitude, drive_power, temperature };
    trace.validate()?;
    Ok(trace)
}

/// Result of fitting a trace's squared amplitude with a Lorentzian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    /// fitted line center (Hz of detuning)
    pub center: f64,
    /// fitted linewidth, the full width at half maximum of the power (κ/2π, Hz)
    pub kappa: f64,
    /// fitted peak amplitude (not power)
    pub peak_amplitude: f64,
}

/// Fit the squared amplitude of `trace` with a Lorentzian and return the
/// center, the power FWHM (= κ/2π), and the peak amplitude. Needs at least 15
/// samples, and the grid must span at least three fitted linewidths — a
/// narrower sweep extrapolates the wings instead of measuring them.
pub fn fit_lorentzian(trace: &TransmissionTrace) -> Result<LorentzianFit> {
    trace.validate()?;
    let n = trace.detuning.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: n });
    }
    let xs = &trace.detuning;
    let ys: Vec<f64> = trace.amplitude.iter().map(|a| a * a).collect();
    let step = (xs[n - 1] - xs[0]) / (n - 1) as f64;

    // initial guesses straight off the data: peak sample, then a half-power
    // walk outwards on both sides
    let (imax, &ymax) =
        ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let half = 0.5 * ymax;
    let mut lo = imax;
    while lo > 0 && ys[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < n && ys[hi] > half {
        hi += 1;
    }
    let width0 = (xs[hi] - xs[lo]).max(step);
    let p0 = [ymax.sqrt(), xs[imax], width0];
    let steps = [1e-3, step, step];

    let model = |p: &[f64], x: f64| {
        let hw = 0.5 * p[2];
        p[0] * p[0] * hw * hw / ((x - p[1]) * (x - p[1]) + hw * hw)
    };
    let lm = fit::curve_fit(model, xs, &ys, None, &p0, &steps, &LmOptions::default())?;
    // the model is even in the width, so the optimizer may land on either sign
    let kappa = lm.params[2].abs();
    let peak_amplitude = lm.params[0].abs();
    let center = lm.params[1];
    if !kappa.is_finite() || kappa == 0.0 || !peak_amplitude.is_finite() || !center.is_finite() {
        return Err(Error::FitFailed("Lorentzian fit collapsed to a degenerate line".into()));
    }
    let spanned = (xs[n - 1] - xs[0]) / kappa;
    if spanned < MIN_SPAN_LINEWIDTHS {
        return Err(Error::SpanTooNarrow { spanned, needed: MIN_SPAN_LINEWIDTHS });
    }
    Ok(LorentzianFit { center, kappa, peak_amplitude })
}

/// Steady-state intra-cavity photon number for `power` watts driving one port
/// of the cavity at `detuning` Hz from resonance: n = κ_ext·P/ħω over the
/// Lorentzian denominator, with every rate converted to angular units
/// internally. `nu` is the resonance frequency and `kappa`/`kappa_ext` are
/// κ/2π in Hz. Linear in power, maximal on resonance.
pub fn photon_number(
    power: f64,
    nu: f64,
    kappa: f64,
    kappa_ext: f64,
    detuning: f64,
) -> Result<f64> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::InvalidInput(format!("drive power must be ≥ 0, got {power}")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("resonance frequency must be positive, got {nu}")));
    }
    check_rates(kappa, kappa_ext)?;
    if !(kappa_ext > 0.0) {
        return Err(Error::InvalidInput("external coupling must be positive".into()));
    }
    if !detuning.is_finite() {
        return Err(Error::InvalidInput("detuning must be finite".into()));
    }
    // κ_ext^ang·P/(ħω) / (Δ_ang² + (κ_ang/2)²); the 2π factors collapse to a
    // single one in the denominator
    let denom = detuning * detuning + 0.25 * kappa * kappa;
    Ok(kappa_ext * power / (PLANCK * nu * std::f64::consts::TAU * denom))
}

/// Bose-Einstein occupation of a mode at `nu` Hz in contact with a bath at
/// `temperature` K: 1/(exp(hν/kT) − 1), exactly 0 at T = 0.
pub fn thermal_occupation(temperature: f64, nu: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidInput(format!(
            "temperature must be ≥ 0 K, got {temperature}"
        )));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {nu}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    // exp_m1 keeps the classical (hν ≪ kT) limit accurate
    Ok(1.0 / (PLANCK * nu / (BOLTZMANN * temperature)).exp_m1())
}
