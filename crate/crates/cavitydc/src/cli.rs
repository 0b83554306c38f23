//! Config-driven scenario runner: one TOML file in, a directory of CSV data
//! files plus a structured-text summary out.
//!
//! A scenario names its `kind` (modes, fields, losses, tuning, spectrum,
//! transmission), carries the blocks that kind needs, and is resolved into SI
//! units before anything runs. The resolved scenario — not the TOML text — is
//! hashed (SHA-256 over its canonical JSON encoding), so reformatting or
//! commenting a config leaves the recorded hash alone while any semantic
//! change moves it. Outputs are deterministic for a fixed config and seed:
//! no timestamps, shortest-roundtrip float formatting, and seeded draws only.

use crate::constants::TESLA_PER_GAUSS;
use crate::error::{Error, Result};
use crate::fieldsolve::{
    field_statistics, relative_deviation_map, solve_electrostatic, solve_magnetostatic,
    CloudSpec, FieldMap, GridSpec, Region, Solution,
};
use crate::geometry::{
    resonance_frequency, AccessHoles, CavityGeometry, Electrode, ModeIndex, RodPort,
};
use crate::lossmodel::{electrode_linewidth, trapped_flux_q_limit, FluxQLimit, LossBudget};
use crate::spectro::{
    fit_spectrum, linear_calibration_fit, synthesize_spectrum, CalibrationPoint, FieldSource,
    FrequencyGrid, LineFit, RydbergSystem, FWHM_PER_SIGMA,
};
use crate::tuning::{tuning_curve, RodMaterial};
use crate::txn::{fit_lorentzian, photon_number, synthesize_trace, thermal_occupation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as FmtWrite;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

/// The one config schema this build understands.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// raw config: the TOML shapes, unit-suffixed keys, nothing resolved yet
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    kind: String,
    seed: Option<u64>,
    geometry: Option<RawGeometry>,
    grid: Option<RawGrid>,
    modes: Option<RawModes>,
    fields: Option<RawFields>,
    losses: Option<RawLosses>,
    tuning: Option<RawTuning>,
    spectrum: Option<RawSpectrum>,
    transmission: Option<RawTransmission>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    width_mm: f64,
    height_mm: f64,
    length_mm: f64,
    access_hole_radius_mm: Option<f64>,
    #[serde(default)]
    electrode: Vec<RawElectrode>,
    rod_port: Option<RawRodPort>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElectrode {
    x_mm: f64,
    z_mm: f64,
    radius_mm: f64,
    potential_v: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRodPort {
    diameter_mm: f64,
    insertion_depth_mm: Option<f64>,
    material: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    nz: Option<usize>,
    tolerance: Option<f64>,
    max_sweeps: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModes {
    /// mode labels like "TE301"
    indices: Vec<String>,
    /// optional measured frequencies (GHz), aligned with `indices`, echoed
    /// into the report for side-by-side comparison
    measured_ghz: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFields {
    /// "electrostatic", "magnetostatic", or "both"
    solve: String,
    /// electrode potentials (V); defaults to the values carried on the
    /// geometry's electrodes
    potentials_v: Option<Vec<f64>>,
    /// exterior field for the magnetostatic solve (gauss)
    applied_gauss: Option<f64>,
    /// statistics region widths; defaults to the central 4×2×4 mm box
    region_widths_mm: Option<[f64; 3]>,
    cloud: Option<RawCloud>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCloud {
    offset_mm: [f64; 3],
    diameter_mm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLosses {
    mode: String,
    base_linewidth_khz: f64,
    conductivity_s_per_m: Option<f64>,
    trapped_field_gauss: Option<f64>,
    /// on-resonance |S21| used to split loaded from internal Q
    amplitude: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTuning {
    mode: String,
    /// "dielectric" (with eps_r) or "conductor"
    material: String,
    eps_r: Option<f64>,
    diameter_mm: f64,
    depth_start_mm: Option<f64>,
    depth_stop_mm: f64,
    depth_points: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    nu0_ghz: Option<f64>,
    offset_plus_mhz: Option<f64>,
    offset_minus_mhz: Option<f64>,
    /// |δα| in MHz/(V/cm)²
    delta_alpha_mhz_per_v_cm_sq: Option<f64>,
    g_l: Option<f64>,
    sigma_h_mhz: Option<f64>,
    /// uniform residual electric field (V/cm); exclusive with `solve_e_field`
    e_uniform_v_per_cm: Option<f64>,
    /// solve the electrostatic map from the geometry's electrodes
    solve_e_field: Option<bool>,
    /// applied magnetic fields, one synthesized line each (gauss)
    b_applied_gauss: Vec<f64>,
    /// solve a magnetostatic map per applied field instead of taking it uniform
    solve_b_field: Option<bool>,
    /// nominal coil conversion; present → currents and a calibration fit
    coil_gauss_per_ampere: Option<f64>,
    samples: Option<usize>,
    grid_span_mhz: Option<f64>,
    grid_points: Option<usize>,
    cloud: RawCloud,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransmission {
    resonance_ghz: f64,
    kappa_khz: f64,
    kappa_ext_khz: f64,
    span_linewidths: Option<f64>,
    points: Option<usize>,
    /// rms amplitude noise in units of the peak
    noise: Option<f64>,
    drive_power_w: f64,
    temperature_k: f64,
}

// ---------------------------------------------------------------------------
// resolved scenario: SI units, defaults applied, the thing that gets hashed
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScenarioKind {
    Modes,
    Fields,
    Losses,
    Tuning,
    Spectrum,
    Transmission,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Modes => "modes",
            ScenarioKind::Fields => "fields",
            ScenarioKind::Losses => "losses",
            ScenarioKind::Tuning => "tuning",
            ScenarioKind::Spectrum => "spectrum",
            ScenarioKind::Transmission => "transmission",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "modes" => ScenarioKind::Modes,
            "fields" => ScenarioKind::Fields,
            "losses" => ScenarioKind::Losses,
            "tuning" => ScenarioKind::Tuning,
            "spectrum" => ScenarioKind::Spectrum,
            "transmission" => ScenarioKind::Transmission,
            other => {
                return Err(Error::Validation(format!(
                    "unknown scenario kind {other:?} (expected modes, fields, losses, tuning, \
                     spectrum, or transmission)"
                )))
            }
        })
    }
}

#[derive(Debug, Serialize)]
enum SolveSelection {
    Electrostatic,
    Magnetostatic,
    Both,
}

/// Everything a run needs, in SI units. Serialized canonically for the config
/// hash: grid and seed appear only when the kind actually consumes them, so
/// the hash moves iff a field that matters to the outputs does.
#[derive(Debug, Serialize)]
pub struct Scenario {
    schema_version: u32,
    kind: ScenarioKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    geometry: Option<CavityGeometry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
    job: JobSpec,
}

#[derive(Debug, Serialize)]
enum JobSpec {
    Modes {
        indices: Vec<ModeIndex>,
        measured: Option<Vec<f64>>,
    },
    Fields {
        solve: SolveSelection,
        potentials: Vec<f64>,
        applied: f64,
        region_widths: [f64; 3],
        cloud: Option<CloudSpec>,
    },
    Losses {
        mode: ModeIndex,
        base_linewidth: f64,
        conductivity: Option<f64>,
        trapped_field: f64,
        amplitude: f64,
    },
    Tuning {
        mode: ModeIndex,
        material: RodMaterial,
        diameter: f64,
        depths: Vec<f64>,
    },
    Spectrum {
        system: RydbergSystem,
        e_uniform: f64,
        solve_e: bool,
        b_applied: Vec<f64>,
        solve_b: bool,
        coil_gauss_per_ampere: Option<f64>,
        samples: usize,
        grid_span: Option<f64>,
        grid_points: usize,
        cloud: CloudSpec,
    },
    Transmission {
        resonance: f64,
        kappa: f64,
        kappa_ext: f64,
        span: f64,
        points: usize,
        noise: f64,
        drive_power: f64,
        temperature: f64,
    },
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    /// SHA-256 over the canonical JSON encoding, hex plus a scheme prefix.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serialization is infallible");
        let digest = Sha256::digest(&json);
        let mut out = String::with_capacity(7 + 64);
        out.push_str("sha256:");
        for byte in digest {
            write!(out, "{byte:02x}").expect("writing to a String cannot fail");
        }
        out
    }
}

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<[usize; 3]>,
}

/// Parse a solver resolution like "64x32x48".
pub fn parse_grid_override(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split('x').collect();
    let parsed: Vec<usize> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    if parts.len() != 3 || parsed.len() != 3 {
        return Err(Error::Validation(format!(
            "grid override must look like \"64x32x48\", got {s:?}"
        )));
    }
    Ok([parsed[0], parsed[1], parsed[2]])
}

// ---------------------------------------------------------------------------
// loading and resolving
// ---------------------------------------------------------------------------

fn mm(v: f64) -> f64 {
    v * 1e-3
}

fn parse_mode_label(s: &str) -> Result<ModeIndex> {
    let digits = s
        .strip_prefix("TE")
        .or_else(|| s.strip_prefix("te"))
        .filter(|d| d.len() == 3 && d.bytes().all(|b| b.is_ascii_digit()));
    let Some(digits) = digits else {
        return Err(Error::Validation(format!("mode must look like \"TE301\", got {s:?}")));
    };
    let b = digits.as_bytes();
    ModeIndex::new((b[0] - b'0') as u32, (b[1] - b'0') as u32, (b[2] - b'0') as u32)
}

fn require<T>(block: Option<T>, kind: &str, name: &str) -> Result<T> {
    block.ok_or_else(|| {
        Error::Validation(format!("kind \"{kind}\" requires a [{name}] block"))
    })
}

fn build_geometry(raw: RawGeometry) -> Result<CavityGeometry> {
    let electrodes = raw
        .electrode
        .into_iter()
        .map(|e| Electrode {
            x: mm(e.x_mm),
            z: mm(e.z_mm),
            radius: mm(e.radius_mm),
            potential: e.potential_v,
        })
        .collect();
    let access_holes = raw.access_hole_radius_mm.map(|r| AccessHoles { radius: mm(r) });
    let rod_port = raw.rod_port.map(|p| RodPort {
        diameter: mm(p.diameter_mm),
        insertion_depth: mm(p.insertion_depth_mm.unwrap_or(0.0)),
        material: p.material.unwrap_or_default(),
    });
    CavityGeometry::new(
        mm(raw.width_mm),
        mm(raw.height_mm),
        mm(raw.length_mm),
        electrodes,
        access_holes,
        rod_port,
    )
}

fn build_grid(raw: Option<RawGrid>, over: Option<[usize; 3]>) -> Result<GridSpec> {
    let defaults = GridSpec::default();
    let raw = raw.unwrap_or(RawGrid {
        nx: None,
        ny: None,
        nz: None,
        tolerance: None,
        max_sweeps: None,
    });
    let mut grid = GridSpec {
        nx: raw.nx.unwrap_or(defaults.nx),
        ny: raw.ny.unwrap_or(defaults.ny),
        nz: raw.nz.unwrap_or(defaults.nz),
        tolerance: raw.tolerance.unwrap_or(defaults.tolerance),
        max_sweeps: raw.max_sweeps.unwrap_or(defaults.max_sweeps),
    };
    if let Some([nx, ny, nz]) = over {
        grid.nx = nx;
        grid.ny = ny;
        grid.nz = nz;
    }
    grid.validate()?;
    Ok(grid)
}

fn build_cloud(raw: RawCloud) -> CloudSpec {
    CloudSpec {
        offset: [mm(raw.offset_mm[0]), mm(raw.offset_mm[1]), mm(raw.offset_mm[2])],
        diameter: mm(raw.diameter_mm),
    }
}

/// Parse and resolve a config string. Pure: no filesystem access.
pub fn resolve_config(text: &str, overrides: &Overrides) -> Result<Scenario> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "schema_version {} is not supported (this build reads {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let kind = ScenarioKind::parse(&raw.kind)?;
    let kind_name = kind.as_str();
    let seed = overrides.seed.or(raw.seed);

    let geometry = match kind {
        ScenarioKind::Transmission => None,
        _ => Some(build_geometry(require(raw.geometry, kind_name, "geometry")?)?),
    };

    let (job, grid, seed) = match kind {
        ScenarioKind::Modes => {
            let block = require(raw.modes, kind_name, "modes")?;
            if block.indices.is_empty() {
                return Err(Error::Validation("[modes] lists no indices".into()));
            }
            let indices: Vec<ModeIndex> =
                block.indices.iter().map(|s| parse_mode_label(s)).collect::<Result<_>>()?;
            let measured = match block.measured_ghz {
                Some(m) if m.len() != indices.len() => {
                    return Err(Error::Validation(format!(
                        "measured_ghz lists {} values for {} modes",
                        m.len(),
                        indices.len()
                    )))
                }
                Some(m) => Some(m.iter().map(|g| g * 1e9).collect()),
                None => None,
            };
            (JobSpec::Modes { indices, measured }, None, None)
        }
        ScenarioKind::Fields => {
            let block = require(raw.fields, kind_name, "fields")?;
            let solve = match block.solve.as_str() {
                "electrostatic" => SolveSelection::Electrostatic,
                "magnetostatic" => SolveSelection::Magnetostatic,
                "both" => SolveSelection::Both,
                other => {
                    return Err(Error::Validation(format!(
                        "solve must be electrostatic, magnetostatic, or both; got {other:?}"
                    )))
                }
            };
            let geom = geometry.as_ref().expect("fields kind resolved a geometry");
            let potentials = match (&solve, block.potentials_v) {
                (SolveSelection::Magnetostatic, _) => Vec::new(),
                (_, Some(p)) => {
                    if p.len() != geom.electrodes.len() {
                        return Err(Error::Validation(format!(
                            "potentials_v lists {} values for {} electrodes",
                            p.len(),
                            geom.electrodes.len()
                        )));
                    }
                    p
                }
                (_, None) => geom.electrodes.iter().map(|e| e.potential).collect(),
            };
            let applied = match (&solve, block.applied_gauss) {
                (SolveSelection::Electrostatic, _) => 0.0,
                (_, Some(g)) => g * TESLA_PER_GAUSS,
                (_, None) => {
                    return Err(Error::Validation(
                        "magnetostatic solve needs applied_gauss".into(),
                    ))
                }
            };
            let region_widths = block
                .region_widths_mm
                .map(|w| [mm(w[0]), mm(w[1]), mm(w[2])])
                .unwrap_or([4e-3, 2e-3, 4e-3]);
            let cloud = block.cloud.map(build_cloud);
            let grid = build_grid(raw.grid, overrides.grid)?;
            (
                JobSpec::Fields { solve, potentials, applied, region_widths, cloud },
                Some(grid),
                None,
            )
        }
        ScenarioKind::Losses => {
            let block = require(raw.losses, kind_name, "losses")?;
            (
                JobSpec::Losses {
                    mode: parse_mode_label(&block.mode)?,
                    base_linewidth: block.base_linewidth_khz * 1e3,
                    conductivity: block.conductivity_s_per_m,
                    trapped_field: block.trapped_field_gauss.unwrap_or(0.0) * TESLA_PER_GAUSS,
                    amplitude: block.amplitude.unwrap_or(0.0),
                },
                None,
                None,
            )
        }
        ScenarioKind::Tuning => {
            let block = require(raw.tuning, kind_name, "tuning")?;
            if geometry.as_ref().is_some_and(|g| g.rod_port.is_none()) {
                return Err(Error::Validation(
                    "kind \"tuning\" requires a [geometry.rod_port] block".into(),
                ));
            }
            let material = match (block.material.as_str(), block.eps_r) {
                ("dielectric", Some(eps_r)) => RodMaterial::Dielectric { eps_r },
                ("dielectric", None) => {
                    return Err(Error::Validation("dielectric rods need eps_r".into()))
                }
                ("conductor", None) => RodMaterial::Conductor,
                ("conductor", Some(_)) => {
                    return Err(Error::Validation(
                        "eps_r applies only to dielectric rods".into(),
                    ))
                }
                (other, _) => {
                    return Err(Error::Validation(format!(
                        "rod material must be dielectric or conductor, got {other:?}"
                    )))
                }
            };
            let points = block.depth_points.unwrap_or(25);
            if points < 2 {
                return Err(Error::Validation("depth_points must be at least 2".into()));
            }
            let start = mm(block.depth_start_mm.unwrap_or(0.0));
            let stop = mm(block.depth_stop_mm);
            if !(stop > start) {
                return Err(Error::Validation(format!(
                    "depth range must run upward, got {} → {} mm",
                    start * 1e3,
                    stop * 1e3
                )));
            }
            let step = (stop - start) / (points - 1) as f64;
            let depths = (0..points).map(|i| start + i as f64 * step).collect();
            (
                JobSpec::Tuning {
                    mode: parse_mode_label(&block.mode)?,
                    material,
                    diameter: mm(block.diameter_mm),
                    depths,
                },
                None,
                None,
            )
        }
        ScenarioKind::Spectrum => {
            let block = require(raw.spectrum, kind_name, "spectrum")?;
            let defaults = RydbergSystem::default();
            let system = RydbergSystem {
                nu0: block.nu0_ghz.map(|v| v * 1e9).unwrap_or(defaults.nu0),
                offset_plus: block
                    .offset_plus_mhz
                    .map(|v| v * 1e6)
                    .unwrap_or(defaults.offset_plus),
                offset_minus: block
                    .offset_minus_mhz
                    .map(|v| v * 1e6)
                    .unwrap_or(defaults.offset_minus),
                // MHz/(V/cm)² → Hz/(V/m)²: ×1e6 for the MHz, ÷1e4 for the cm²
                delta_alpha: block
                    .delta_alpha_mhz_per_v_cm_sq
                    .map(|v| v * 1e2)
                    .unwrap_or(defaults.delta_alpha),
                g_l: block.g_l.unwrap_or(defaults.g_l),
                sigma_h: block.sigma_h_mhz.map(|v| v * 1e6).unwrap_or(defaults.sigma_h),
            };
            let solve_e = block.solve_e_field.unwrap_or(false);
            if solve_e && block.e_uniform_v_per_cm.is_some() {
                return Err(Error::Validation(
                    "choose either e_uniform_v_per_cm or solve_e_field, not both".into(),
                ));
            }
            if block.b_applied_gauss.is_empty() {
                return Err(Error::Validation(
                    "b_applied_gauss lists no applied fields".into(),
                ));
            }
            let seed = seed.ok_or_else(|| {
                Error::Validation(
                    "spectrum synthesis is Monte Carlo: set seed in the config or pass --seed"
                        .into(),
                )
            })?;
            let solve_b = block.solve_b_field.unwrap_or(false);
            let grid = if solve_e || solve_b {
                Some(build_grid(raw.grid, overrides.grid)?)
            } else {
                None
            };
            (
                JobSpec::Spectrum {
                    system,
                    e_uniform: block.e_uniform_v_per_cm.unwrap_or(0.0) * 1e2,
                    solve_e,
                    b_applied: block
                        .b_applied_gauss
                        .iter()
                        .map(|g| g * TESLA_PER_GAUSS)
                        .collect(),
                    solve_b,
                    coil_gauss_per_ampere: block.coil_gauss_per_ampere,
                    samples: block.samples.unwrap_or(10_000),
                    grid_span: block.grid_span_mhz.map(|v| v * 1e6),
                    grid_points: block.grid_points.unwrap_or(601),
                    cloud: build_cloud(block.cloud),
                },
                grid,
                Some(seed),
            )
        }
        ScenarioKind::Transmission => {
            let block = require(raw.transmission, kind_name, "transmission")?;
            let noise = block.noise.unwrap_or(0.0);
            let seed = if noise > 0.0 {
                Some(seed.ok_or_else(|| {
                    Error::Validation(
                        "noisy trace synthesis is Monte Carlo: set seed in the config or pass \
                         --seed"
                            .into(),
                    )
                })?)
            } else {
                None
            };
            (
                JobSpec::Transmission {
                    resonance: block.resonance_ghz * 1e9,
                    kappa: block.kappa_khz * 1e3,
                    kappa_ext: block.kappa_ext_khz * 1e3,
                    span: block.span_linewidths.unwrap_or(6.0) * block.kappa_khz * 1e3,
                    points: block.points.unwrap_or(201),
                    noise,
                    drive_power: block.drive_power_w,
                    temperature: block.temperature_k,
                },
                None,
                seed,
            )
        }
    };

    Ok(Scenario { schema_version: raw.schema_version, kind, seed, geometry, grid, job })
}

// ---------------------------------------------------------------------------
// runners
// ---------------------------------------------------------------------------

/// What a run produced: the hash that names it, the files it wrote (relative
/// to `out_dir`), and the summary text (also written to summary.txt).
#[derive(Debug)]
pub struct RunReport {
    pub kind: ScenarioKind,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn IoWrite) -> Result<()>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn solve_summary(label: &str, grid: &GridSpec, sol: &Solution) -> String {
    format!(
        "{label} map: {}x{}x{} grid, {} sweeps, residual {:.3e}\n",
        grid.nx, grid.ny, grid.nz, sol.report.sweeps, sol.report.residual
    )
}

fn run_modes(geom: &CavityGeometry, indices: &[ModeIndex], measured: Option<&[f64]>, out: &mut Outputs) -> Result<String> {
    let mut rows = Vec::with_capacity(indices.len());
    for (i, &mode) in indices.iter().enumerate() {
        let nu = resonance_frequency(geom, mode)?;
        rows.push((mode, nu, measured.map(|m| m[i])));
    }
    out.write("modes.csv", |w| {
        writeln!(w, "mode,frequency_hz,measured_hz,relative_difference")?;
        for (mode, nu, meas) in &rows {
            match meas {
                Some(m) => writeln!(w, "{},{},{},{}", mode.label(), nu, m, (nu - m) / m)?,
                None => writeln!(w, "{},{},,", mode.label(), nu)?,
            }
        }
        Ok(())
    })?;
    let mut text = String::from("ideal-box eigenfrequencies:\n");
    for (mode, nu, meas) in &rows {
        match meas {
            Some(m) => writeln!(
                text,
                "  {}  {:.6} GHz   (measured {:.3} GHz, {:+.3}%)",
                mode.label(),
                nu / 1e9,
                m / 1e9,
                100.0 * (nu - m) / m
            ),
            None => writeln!(text, "  {}  {:.6} GHz", mode.label(), nu / 1e9),
        }
        .expect("writing to a String cannot fail");
    }
    Ok(text)
}

fn field_stats_text(map: &FieldMap, region_widths: [f64; 3], cloud: Option<&CloudSpec>) -> Result<String> {
    let region = Region::centered(map.center(), region_widths);
    let probe = cloud.copied().unwrap_or(CloudSpec { offset: [0.0; 3], diameter: 1.0e-3 });
    let stats = field_statistics(map, &region, &probe)?;
    let (unit, scale) = match map.kind {
        crate::fieldsolve::FieldKind::Electric => ("V/m", 1.0),
        crate::fieldsolve::FieldKind::Magnetic => ("G", 1.0 / TESLA_PER_GAUSS),
    };
    let mut text = format!(
        "  center |F| = {:.6} {unit}\n  region {:.1}x{:.1}x{:.1} mm ({} nodes): mean dev {:.3}%, max dev {:.3}%\n",
        stats.center_value * scale,
        region_widths[0] * 1e3,
        region_widths[1] * 1e3,
        region_widths[2] * 1e3,
        stats.region_nodes,
        100.0 * stats.mean_rel_deviation,
        100.0 * stats.max_rel_deviation,
    );
    if cloud.is_some() {
        writeln!(
            text,
            "  cloud (d = {:.2} mm): mean {:.6} {unit}, std/mean = {:.3}%",
            probe.diameter * 1e3,
            stats.cloud_mean * scale,
            100.0 * stats.cloud_std / stats.cloud_mean
        )
        .expect("writing to a String cannot fail");
    }
    Ok(text)
}

fn write_deviation_csv(map: &FieldMap, name: &str, out: &mut Outputs) -> Result<()> {
    let dev = relative_deviation_map(map)?;
    out.write(name, |w| {
        writeln!(w, "x_m,y_m,z_m,relative_deviation")?;
        let mut idx = 0;
        for k in 0..map.nodes[2] {
            for j in 0..map.nodes[1] {
                for i in 0..map.nodes[0] {
                    let p = map.node_pos(i, j, k);
                    writeln!(w, "{},{},{},{}", p[0], p[1], p[2], dev[idx])?;
                    idx += 1;
                }
            }
        }
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
fn run_fields(
    geom: &CavityGeometry,
    grid: &GridSpec,
    solve: &SolveSelection,
    potentials: &[f64],
    applied: f64,
    region_widths: [f64; 3],
    cloud: Option<&CloudSpec>,
    out: &mut Outputs,
) -> Result<String> {
    let mut text = String::new();
    if matches!(solve, SolveSelection::Electrostatic | SolveSelection::Both) {
        let sol = solve_electrostatic(geom, grid, potentials)?;
        sol.field.write_csv(&out.dir.join("fieldmap_electric.csv"))?;
        out.files.push("fieldmap_electric.csv".into());
        write_deviation_csv(&sol.field, "deviation_electric.csv", out)?;
        text.push_str(&solve_summary("electrostatic", grid, &sol));
        text.push_str(&field_stats_text(&sol.field, region_widths, cloud)?);
    }
    if matches!(solve, SolveSelection::Magnetostatic | SolveSelection::Both) {
        let sol = solve_magnetostatic(geom, grid, applied, [0.0, 0.0, 1.0])?;
        sol.field.write_csv(&out.dir.join("fieldmap_magnetic.csv"))?;
        out.files.push("fieldmap_magnetic.csv".into());
        write_deviation_csv(&sol.field, "deviation_magnetic.csv", out)?;
        text.push_str(&solve_summary("magnetostatic", grid, &sol));
        writeln!(text, "  applied exterior field {:.4} G", applied / TESLA_PER_GAUSS)
            .expect("writing to a String cannot fail");
        text.push_str(&field_stats_text(&sol.field, region_widths, cloud)?);
    }
    Ok(text)
}

fn run_losses(
    geom: &CavityGeometry,
    mode: ModeIndex,
    base: f64,
    conductivity: Option<f64>,
    trapped_field: f64,
    amplitude: f64,
    out: &mut Outputs,
) -> Result<String> {
    let nu = resonance_frequency(geom, mode)?;
    let electrode = match conductivity {
        Some(sigma) => electrode_linewidth(sigma, mode)?,
        None => 0.0,
    };
    let flux = match trapped_flux_q_limit(geom, mode, trapped_field)? {
        FluxQLimit::Unlimited => 0.0,
        FluxQLimit::Limited(q) => nu / q,
    };
    let budget = LossBudget::assemble(mode, nu, base, electrode, flux, amplitude)?;
    out.write("losses.csv", |w| {
        writeln!(
            w,
            "mode,base_linewidth_hz,electrode_linewidth_hz,trapped_flux_linewidth_hz,total_linewidth_hz,loaded_q,internal_q"
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            budget.mode.label(),
            budget.base_linewidth,
            budget.electrode_linewidth,
            budget.trapped_flux_linewidth,
            budget.total_linewidth,
            budget.loaded_q,
            budget.internal_q
        )?;
        Ok(())
    })?;
    out.write("losses.json", |w| {
        let json = serde_json::to_string_pretty(&budget)
            .map_err(|e| Error::InvalidInput(format!("budget serialization failed: {e}")))?;
        writeln!(w, "{json}")?;
        Ok(())
    })?;
    Ok(format!(
        "loss budget for {} at ν = {:.6} GHz:\n  base          {:>12.1} Hz\n  electrode     {:>12.1} Hz\n  trapped flux  {:>12.1} Hz\n  total         {:>12.1} Hz\n  Q_loaded = {:.4e}, Q_internal = {:.4e}\n",
        budget.mode.label(),
        nu / 1e9,
        budget.base_linewidth,
        budget.electrode_linewidth,
        budget.trapped_flux_linewidth,
        budget.total_linewidth,
        budget.loaded_q,
        budget.internal_q
    ))
}

fn run_tuning(
    geom: &CavityGeometry,
    mode: ModeIndex,
    material: RodMaterial,
    diameter: f64,
    depths: &[f64],
    out: &mut Outputs,
) -> Result<String> {
    let curve = tuning_curve(geom, mode, material, diameter, depths)?;
    out.write("tuning_curve.csv", |w| {
        writeln!(w, "depth_m,delta_nu_hz,beyond_perturbative")?;
        for p in &curve {
            writeln!(w, "{},{},{}", p.depth, p.delta_nu, p.beyond_perturbative)?;
        }
        Ok(())
    })?;
    let material_text = match material {
        RodMaterial::Dielectric { eps_r } => format!("dielectric (εr = {eps_r})"),
        RodMaterial::Conductor => "conductor".to_string(),
    };
    let last = curve.last().expect("tuning curve has at least two points");
    Ok(format!(
        "tuning {} with a {material_text} rod, ∅{:.2} mm:\n  {} depths over {:.3} → {:.3} mm\n  endpoint shift {:+.4} MHz at {:.3} mm{}\n",
        mode.label(),
        diameter * 1e3,
        curve.len(),
        depths[0] * 1e3,
        last.depth * 1e3,
        last.delta_nu / 1e6,
        last.depth * 1e3,
        if last.beyond_perturbative { " (beyond the perturbative regime)" } else { "" }
    ))
}

struct SpectrumLineRow {
    b_applied: f64,
    fit: LineFit,
}

#[allow(clippy::too_many_arguments)]
fn run_spectrum(
    geom: &CavityGeometry,
    grid: Option<&GridSpec>,
    system: &RydbergSystem,
    e_uniform: f64,
    solve_e: bool,
    b_applied: &[f64],
    solve_b: bool,
    coil_gauss_per_ampere: Option<f64>,
    samples: usize,
    grid_span: Option<f64>,
    grid_points: usize,
    cloud: &CloudSpec,
    seed: u64,
    out: &mut Outputs,
) -> Result<String> {
    let mut text = String::new();
    let e_solution = if solve_e {
        let grid = grid.expect("solve_e resolved a grid");
        let potentials: Vec<f64> = geom.electrodes.iter().map(|e| e.potential).collect();
        let sol = solve_electrostatic(geom, grid, &potentials)?;
        text.push_str(&solve_summary("electrostatic", grid, &sol));
        Some(sol)
    } else {
        None
    };
    // line-center preview at the cloud-center fields, used to place the
    // frequency grid when the config does not pin a span
    let e_center = match &e_solution {
        Some(sol) => sol.field.sample_magnitude(cloud.center(&sol.field))?,
        None => e_uniform,
    };
    writeln!(
        text,
        "E source: {} ({:.4} V/m at the cloud center)",
        if solve_e { "solved map" } else { "uniform" },
        e_center
    )
    .expect("writing to a String cannot fail");

    let mut rows: Vec<SpectrumLineRow> = Vec::with_capacity(b_applied.len());
    for (k, &b) in b_applied.iter().enumerate() {
        let b_solution = if solve_b {
            let grid = grid.expect("solve_b resolved a grid");
            let sol = solve_magnetostatic(geom, grid, b, [0.0, 0.0, 1.0])?;
            text.push_str(&solve_summary("magnetostatic", grid, &sol));
            Some(sol)
        } else {
            None
        };
        let b_center = match &b_solution {
            Some(sol) => sol.field.sample_magnitude(cloud.center(&sol.field))?,
            None => b,
        };
        let pair = crate::spectro::transition_frequencies(system, e_center, b_center)?;
        let center = 0.5 * (pair.nu_plus + pair.nu_minus);
        let half_span = match grid_span {
            Some(s) => 0.5 * s,
            None => 0.5 * (pair.nu_plus - pair.nu_minus).abs() + 8.0 * system.sigma_h,
        };
        let freq_grid = FrequencyGrid {
            start: center - half_span,
            stop: center + half_span,
            points: grid_points,
        };
        let e_source = match &e_solution {
            Some(sol) => FieldSource::Map(&sol.field),
            None => FieldSource::Uniform(e_uniform),
        };
        let b_source = match &b_solution {
            Some(sol) => FieldSource::Map(&sol.field),
            None => FieldSource::Uniform(b),
        };
        let line = synthesize_spectrum(
            system,
            e_source,
            b_source,
            cloud,
            &freq_grid,
            samples,
            seed.wrapping_add(k as u64),
        )?;
        let name = format!("spectrum_{:02}.csv", k + 1);
        line.write_csv(&out.dir.join(&name))?;
        out.files.push(name);
        let fit = fit_spectrum(&line)?;
        writeln!(
            text,
            "B = {:.3} G: ν+ = {:.6} GHz, ν− = {:.6} GHz, FWHM = {:.4} MHz, {}",
            b / TESLA_PER_GAUSS,
            fit.nu_plus / 1e9,
            fit.nu_minus / 1e9,
            FWHM_PER_SIGMA * fit.sigma / 1e6,
            if fit.resolved { "resolved" } else { "unresolved" }
        )
        .expect("writing to a String cannot fail");
        rows.push(SpectrumLineRow { b_applied: b, fit });
    }

    out.write("lines.csv", |w| {
        writeln!(w, "b_applied_gauss,nu_plus_hz,nu_minus_hz,fwhm_hz,resolved")?;
        for row in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.b_applied / TESLA_PER_GAUSS,
                row.fit.nu_plus,
                row.fit.nu_minus,
                FWHM_PER_SIGMA * row.fit.sigma,
                row.fit.resolved
            )?;
        }
        Ok(())
    })?;

    if let Some(gpa) = coil_gauss_per_ampere {
        if !(gpa > 0.0) || !gpa.is_finite() {
            return Err(Error::Validation(format!(
                "coil_gauss_per_ampere must be positive, got {gpa}"
            )));
        }
        let points: Vec<CalibrationPoint> = rows
            .iter()
            .map(|row| CalibrationPoint {
                current: row.b_applied / TESLA_PER_GAUSS / gpa,
                nu_plus: row.fit.nu_plus,
                nu_minus: row.fit.nu_minus,
                weight: 1.0,
            })
            .collect();
        out.write("zeeman_calibration.csv", |w| {
            writeln!(w, "current_a,b_applied_gauss,nu_plus_hz,nu_minus_hz")?;
            for (p, row) in points.iter().zip(&rows) {
                writeln!(
                    w,
                    "{},{},{},{}",
                    p.current,
                    row.b_applied / TESLA_PER_GAUSS,
                    p.nu_plus,
                    p.nu_minus
                )?;
            }
            Ok(())
        })?;
        let cal = linear_calibration_fit(system, &points)?;
        writeln!(
            text,
            "coil calibration: {:.4} G/A fitted ({:.4} G/A configured), intercepts {:+.4} / {:+.4} MHz from ν0, residual rms {:.1} Hz",
            cal.gauss_per_ampere,
            gpa,
            (cal.intercept_plus - system.nu0) / 1e6,
            (cal.intercept_minus - system.nu0) / 1e6,
            cal.residual_rms
        )
        .expect("writing to a String cannot fail");
    }
    Ok(text)
}

#[allow(clippy::too_many_arguments)]
fn run_transmission(
    resonance: f64,
    kappa: f64,
    kappa_ext: f64,
    span: f64,
    points: usize,
    noise: f64,
    drive_power: f64,
    temperature: f64,
    seed: u64,
    out: &mut Outputs,
) -> Result<String> {
    let trace =
        synthesize_trace(kappa, kappa_ext, span, points, noise, seed, drive_power, temperature)?;
    trace.write_csv(&out.dir.join("trace.csv"))?;
    out.files.push("trace.csv".into());
    let fit = fit_lorentzian(&trace)?;
    let n_c = photon_number(drive_power, resonance, kappa, kappa_ext, 0.0)?;
    let n_th = thermal_occupation(temperature, resonance)?;
    Ok(format!(
        "transmission at ν = {:.6} GHz (κ = {:.3} kHz, κ_ext = {:.3} kHz per port):\n  fitted: center {:+.2} Hz, κ = {:.4} kHz, peak {:.4}\n  drive {:.3e} W on resonance → n_c = {:.4e}\n  thermal occupation at {:.2} K → n_th = {:.4}\n",
        resonance / 1e9,
        kappa / 1e3,
        kappa_ext / 1e3,
        fit.center,
        fit.kappa / 1e3,
        fit.peak_amplitude,
        drive_power,
        n_c,
        temperature,
        n_th
    ))
}

// ---------------------------------------------------------------------------
// entry points
// ---------------------------------------------------------------------------

/// Run the scenario in `config_path`, writing outputs into `out_dir`.
pub fn run_scenario(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<RunReport> {
    let text = std::fs::read_to_string(config_path)?;
    let scenario = resolve_config(&text, overrides)?;
    run_resolved(&scenario, out_dir)
}

/// Same as [`run_scenario`], but refuse configs whose kind does not match the
/// subcommand that invoked it.
pub fn run_scenario_expecting(
    expected: ScenarioKind,
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<RunReport> {
    let text = std::fs::read_to_string(config_path)?;
    let scenario = resolve_config(&text, overrides)?;
    if scenario.kind != expected {
        return Err(Error::Validation(format!(
            "config declares kind \"{}\" but the {} subcommand was invoked",
            scenario.kind.as_str(),
            expected.as_str()
        )));
    }
    run_resolved(&scenario, out_dir)
}

/// Execute an already-resolved scenario.
pub fn run_resolved(scenario: &Scenario, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir)?;
    let config_hash = scenario.hash();
    let mut out = Outputs { dir: out_dir, files: Vec::new() };

    let body = match &scenario.job {
        JobSpec::Modes { indices, measured } => run_modes(
            scenario.geometry.as_ref().expect("modes kind resolved a geometry"),
            indices,
            measured.as_deref(),
            &mut out,
        )?,
        JobSpec::Fields { solve, potentials, applied, region_widths, cloud } => run_fields(
            scenario.geometry.as_ref().expect("fields kind resolved a geometry"),
            scenario.grid.as_ref().expect("fields kind resolved a grid"),
            solve,
            potentials,
            *applied,
            *region_widths,
            cloud.as_ref(),
            &mut out,
        )?,
        JobSpec::Losses { mode, base_linewidth, conductivity, trapped_field, amplitude } => {
            run_losses(
                scenario.geometry.as_ref().expect("losses kind resolved a geometry"),
                *mode,
                *base_linewidth,
                *conductivity,
                *trapped_field,
                *amplitude,
                &mut out,
            )?
        }
        JobSpec::Tuning { mode, material, diameter, depths } => run_tuning(
            scenario.geometry.as_ref().expect("tuning kind resolved a geometry"),
            *mode,
            *material,
            *diameter,
            depths,
            &mut out,
        )?,
        JobSpec::Spectrum {
            system,
            e_uniform,
            solve_e,
            b_applied,
            solve_b,
            coil_gauss_per_ampere,
            samples,
            grid_span,
            grid_points,
            cloud,
        } => run_spectrum(
            scenario.geometry.as_ref().expect("spectrum kind resolved a geometry"),
            scenario.grid.as_ref(),
            system,
            *e_uniform,
            *solve_e,
            b_applied,
            *solve_b,
            *coil_gauss_per_ampere,
            *samples,
            *grid_span,
            *grid_points,
            cloud,
            scenario.seed.expect("spectrum kind resolved a seed"),
            &mut out,
        )?,
        JobSpec::Transmission {
            resonance,
            kappa,
            kappa_ext,
            span,
            points,
            noise,
            drive_power,
            temperature,
        } => run_transmission(
            *resonance,
            *kappa,
            *kappa_ext,
            *span,
            *points,
            *noise,
            *drive_power,
            *temperature,
            scenario.seed.unwrap_or(0),
            &mut out,
        )?,
    };

    let mut summary = format!(
        "cavitydc {} — {} scenario\nconfig hash: {}\nseed: {}\n",
        env!("CARGO_PKG_VERSION"),
        scenario.kind.as_str(),
        config_hash,
        scenario.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
    );
    if let Some(grid) = &scenario.grid {
        writeln!(summary, "grid: {}x{}x{}", grid.nx, grid.ny, grid.nz)
            .expect("writing to a String cannot fail");
    }
    summary.push('\n');
    summary.push_str(&body);
    summary.push_str("\nfiles:\n");
    let mut listed = out.files.clone();
    listed.push("summary.txt".into());
    for f in &listed {
        writeln!(summary, "  {f}").expect("writing to a String cannot fail");
    }

    out.write("summary.txt", |w| {
        w.write_all(summary.as_bytes())?;
        Ok(())
    })?;

    Ok(RunReport {
        kind: scenario.kind,
        config_hash,
        out_dir: out_dir.to_path_buf(),
        files: out.files,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GEOMETRY: &str = "
        [geometry]
        width_mm = 25.6
        height_mm = 7.0
        length_mm = 14.0
        access_hole_radius_mm = 1.5

        [[geometry.electrode]]
        x_mm = 8.5333
        z_mm = 7.0
        radius_mm = 0.25
        potential_v = -1.0

        [[geometry.electrode]]
        x_mm = 17.0667
        z_mm = 7.0
        radius_mm = 0.25
        potential_v = 1.0
    ";

    fn modes_config() -> String {
        format!(
            "schema_version = 1\nkind = \"modes\"\n{GEOMETRY}\n[modes]\nindices = [\"TE101\", \"TE201\", \"TE301\"]\n"
        )
    }

    #[test]
    fn grid_override_strings_parse_or_reject() {
        assert_eq!(parse_grid_override("64x32x48").unwrap(), [64, 32, 48]);
        assert_eq!(parse_grid_override("128x64x96").unwrap(), [128, 64, 96]);
        assert!(parse_grid_override("64x32").is_err());
        assert!(parse_grid_override("axbxc").is_err());
        assert!(parse_grid_override("64x32x48x2").is_err());
    }

    #[test]
    fn mode_labels_parse_into_indices() {
        let m = parse_mode_label("TE301").unwrap();
        assert_eq!((m.m, m.n, m.l), (3, 0, 1));
        assert!(parse_mode_label("TM101").is_err());
        assert!(parse_mode_label("TE1").is_err());
        assert!(parse_mode_label("TE000").is_err());
    }

    #[test]
    fn missing_blocks_are_named_in_the_error() {
        let text = "schema_version = 1\nkind = \"modes\"\n[modes]\nindices = [\"TE101\"]\n";
        let err = resolve_config(text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("[geometry]"), "got: {err}");

        let text = format!("schema_version = 1\nkind = \"tuning\"\n{GEOMETRY}");
        let err = resolve_config(&text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("[tuning]"), "got: {err}");
    }

    #[test]
    fn unknown_kinds_and_versions_are_rejected() {
        let text = "schema_version = 2\nkind = \"modes\"\n";
        assert!(matches!(
            resolve_config(text, &Overrides::default()),
            Err(Error::Validation(_))
        ));
        let text = "schema_version = 1\nkind = \"holography\"\n";
        let err = resolve_config(text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("holography"), "got: {err}");
    }

    #[test]
    fn typos_in_keys_fail_the_parse() {
        let text = "schema_version = 1\nkind = \"modes\"\nwidth_millimeters = 3\n";
        assert!(matches!(
            resolve_config(text, &Overrides::default()),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn geometry_keys_convert_to_si() {
        let scenario = resolve_config(&modes_config(), &Overrides::default()).unwrap();
        let geom = scenario.geometry.as_ref().unwrap();
        assert_eq!(geom.lx, 25.6e-3);
        assert_eq!(geom.ly, 7.0e-3);
        assert_eq!(geom.lz, 14.0e-3);
        assert_eq!(geom.electrodes.len(), 2);
        assert_eq!(geom.electrodes[0].radius, 0.25e-3);
        assert_eq!(geom.access_holes.unwrap().radius, 1.5e-3);
    }

    #[test]
    fn hash_ignores_formatting_but_tracks_semantics() {
        let base = resolve_config(&modes_config(), &Overrides::default()).unwrap().hash();
        // reformatted + commented, semantically identical
        let noisy = "
            # a comment
            schema_version = 1
            kind    = \"modes\"

            [geometry]
            width_mm  = 25.6
            height_mm = 7.0
            length_mm = 14.0
            access_hole_radius_mm = 1.5
            [[geometry.electrode]]
            x_mm = 8.5333
            z_mm = 7.0
            radius_mm = 0.25
            potential_v = -1.0
            [[geometry.electrode]]
            x_mm = 17.0667
            z_mm = 7.0
            radius_mm = 0.25
            potential_v = 1.0
            [modes]
            indices = [\"TE101\", \"TE201\", \"TE301\"]
        ";
        assert_eq!(resolve_config(noisy, &Overrides::default()).unwrap().hash(), base);
        let changed = modes_config().replace("width_mm = 25.6", "width_mm = 25.7");
        assert_ne!(resolve_config(&changed, &Overrides::default()).unwrap().hash(), base);
    }

    #[test]
    fn spectrum_kind_requires_a_seed() {
        let text = format!(
            "schema_version = 1\nkind = \"spectrum\"\n{GEOMETRY}\n[spectrum]\nb_applied_gauss = [3.1]\ne_uniform_v_per_cm = 0.1\n[spectrum.cloud]\noffset_mm = [0.0, 0.0, 0.0]\ndiameter_mm = 1.1\n"
        );
        let err = resolve_config(&text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("seed"), "got: {err}");
        // the override satisfies it
        let with_seed = Overrides { seed: Some(7), ..Default::default() };
        let scenario = resolve_config(&text, &with_seed).unwrap();
        assert_eq!(scenario.seed, Some(7));
    }

    #[test]
    fn conductor_rods_reject_a_permittivity() {
        let text = format!(
            "schema_version = 1\nkind = \"tuning\"\n{GEOMETRY}\n[geometry.rod_port]\ndiameter_mm = 2.3\n[tuning]\nmode = \"TE301\"\nmaterial = \"conductor\"\neps_r = 9.0\ndiameter_mm = 1.9\ndepth_stop_mm = 1.55\n"
        );
        let err = resolve_config(&text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("eps_r"), "got: {err}");
    }

    #[test]
    fn spectrum_units_resolve_to_si() {
        let text = format!(
            "schema_version = 1\nkind = \"spectrum\"\nseed = 3\n{GEOMETRY}\n[spectrum]\nnu0_ghz = 20.542\nsigma_h_mhz = 1.0\ndelta_alpha_mhz_per_v_cm_sq = 444.0\ne_uniform_v_per_cm = 0.1\nb_applied_gauss = [7.2]\n[spectrum.cloud]\noffset_mm = [0.0, 0.0, 0.0]\ndiameter_mm = 1.1\n"
        );
        let scenario = resolve_config(&text, &Overrides::default()).unwrap();
        match &scenario.job {
            JobSpec::Spectrum { system, e_uniform, b_applied, .. } => {
                assert_eq!(system.nu0, 20.542e9);
                assert_eq!(system.sigma_h, 1.0e6);
                assert_eq!(system.delta_alpha, 4.44e4);
                assert_eq!(*e_uniform, 10.0);
                assert_eq!(b_applied[0], 7.2e-4);
            }
            other => panic!("resolved the wrong job: {:?}", std::mem::discriminant(other)),
        }
    }
}
