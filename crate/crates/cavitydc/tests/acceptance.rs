//! Release gates: every numbered criterion the toolkit is checked against
//! before a cut, each pinned to measured bench values of the 25.6×7×14 mm
//! device. One test per criterion; each prints a single
//!
//!     criterion NN <name>: PASS|FAIL (<measured values>)
//!
//! line before asserting, so a red gate still leaves its numbers in the log.
//! Run `cargo test --test acceptance -- --test-threads=1 --nocapture` to see
//! the full scoreboard in order.

use std::sync::LazyLock;
use std::time::Instant;

use cavitydc::constants::TESLA_PER_GAUSS;
use cavitydc::fieldsolve::{
    self, solve_electrostatic, solve_magnetostatic, CloudSpec, FieldStats, GridSpec, Region,
    Solution,
};
use cavitydc::geometry::{
    geometry_factor, resonance_frequency, AccessHoles, CavityGeometry, Electrode, ModeIndex,
    RodPort,
};
use cavitydc::lossmodel;
use cavitydc::spectro::{
    self, fit_spectrum, linear_calibration_fit, synthesize_spectrum, transition_frequencies,
    CalibrationPoint, FieldSource, FrequencyGrid, RydbergSystem,
};
use cavitydc::tuning::{perturbation_shift, RodInsertion, RodMaterial};
use cavitydc::txn;

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

const LX: f64 = 25.6e-3;
const LY: f64 = 7.0e-3;
const LZ: f64 = 14.0e-3;

/// Bench measurements the gates compare against.
const MEASURED_TE101: f64 = 12.08e9;
const MEASURED_TE201: f64 = 15.86e9;
const MEASURED_TE301: f64 = 20.59e9;
const MEASURED_CENTER_E: f64 = 95.0; // V/m at ±1 V bias
const MEASURED_CENTER_B: f64 = 4.50 * TESLA_PER_GAUSS; // at 10 G applied
const COIL_SLOPE: f64 = 5.1; // gauss per ampere
const RESIDUAL_E: f64 = 10.0; // V/m, the 0.1 V/cm stray-bias operating point

fn te101() -> ModeIndex {
    ModeIndex::te_m0l(1, 1).unwrap()
}

fn te201() -> ModeIndex {
    ModeIndex::te_m0l(2, 1).unwrap()
}

fn te301() -> ModeIndex {
    ModeIndex::te_m0l(3, 1).unwrap()
}

/// The cavity with both bias electrodes on the TE301 node planes, beam holes,
/// and the tuning port, as built.
fn device_geometry() -> CavityGeometry {
    CavityGeometry::new(
        LX,
        LY,
        LZ,
        vec![
            Electrode { x: LX / 3.0, z: LZ / 2.0, radius: 0.25e-3, potential: 0.0 },
            Electrode { x: 2.0 * LX / 3.0, z: LZ / 2.0, radius: 0.25e-3, potential: 0.0 },
        ],
        Some(AccessHoles { radius: 1.5e-3 }),
        Some(RodPort { diameter: 2.3e-3, insertion_depth: 0.0, material: "sapphire".into() }),
    )
    .unwrap()
}

/// The atom cloud: 1.1 mm across, sitting 0.7 mm off-center along x.
fn atom_cloud() -> CloudSpec {
    CloudSpec { offset: [0.7e-3, 0.0, 0.0], diameter: 1.1e-3 }
}

/// Deviation statistics for the electric anchors run over the default central
/// 4×2×4 mm box; the magnetic homogeneity check uses the 2 mm cube quoted
/// with its measurement.
fn stats(sol: &Solution, region: &Region) -> FieldStats {
    fieldsolve::field_statistics(&sol.field, region, &atom_cloud()).unwrap()
}

/// ±1 V bias solve on the production grid, with its wall-clock time.
static ELECTRO_PM1V: LazyLock<(Solution, f64)> = LazyLock::new(|| {
    let start = Instant::now();
    let sol =
        solve_electrostatic(&device_geometry(), &GridSpec::default(), &[-1.0, 1.0]).unwrap();
    (sol, start.elapsed().as_secs_f64())
});

/// Single-electrode step (V1 = 0, V2 = 1 V) on a refined grid, for the
/// broadening anchors.
static ELECTRO_STEP: LazyLock<Solution> = LazyLock::new(|| {
    let grid = GridSpec { nx: 128, ny: 64, nz: 96, ..GridSpec::default() };
    solve_electrostatic(&device_geometry(), &grid, &[0.0, 1.0]).unwrap()
});

/// 10 G applied along the aperture axis, refined grid.
static MAGNETO_10G: LazyLock<Solution> = LazyLock::new(|| {
    let grid = GridSpec { nx: 128, ny: 64, nz: 96, ..GridSpec::default() };
    solve_magnetostatic(&device_geometry(), &grid, 10.0 * TESLA_PER_GAUSS, [0.0, 0.0, 1.0])
        .unwrap()
});

/// Print the scoreboard line, then enforce it.
fn gate(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:02} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} {name}: {detail}");
}

fn rel_err(value: f64, target: f64) -> f64 {
    (value - target) / target
}

// ---------------------------------------------------------------------------
// the gates
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_mode_frequencies() {
    let geom = device_geometry();
    let f101 = resonance_frequency(&geom, te101()).unwrap();
    let f201 = resonance_frequency(&geom, te201()).unwrap();
    let f301 = resonance_frequency(&geom, te301()).unwrap();

    let (e101, e201, e301) = (
        rel_err(f101, MEASURED_TE101),
        rel_err(f201, MEASURED_TE201),
        rel_err(f301, MEASURED_TE301),
    );
    // the box dimensions are approximate, so the fundamental gets more slack
    let pass = e101.abs() <= 0.015 && e201.abs() <= 0.005 && e301.abs() <= 0.005;
    gate(
        1,
        "mode frequencies",
        pass,
        &format!(
            "TE101 {:+.3}% vs 1.5%, TE201 {:+.3}% vs 0.5%, TE301 {:+.3}% vs 0.5%",
            100.0 * e101,
            100.0 * e201,
            100.0 * e301
        ),
    );
}

#[test]
fn criterion_02_electrostatic_anchor() {
    let (sol, seconds) = &*ELECTRO_PM1V;
    let s = stats(sol, &Region::default_central(&sol.field));

    let center_ok = rel_err(s.center_value, MEASURED_CENTER_E).abs() <= 0.10;
    let deviation_ok = s.mean_rel_deviation < 0.10;
    let runtime_ok = *seconds < 60.0;
    gate(
        2,
        "electrostatic anchor",
        center_ok && deviation_ok && runtime_ok,
        &format!(
            "center {:.4} V/m vs {:.0} ±10%, mean deviation {:.1}% vs <10%, solve {:.1} s vs <60 s",
            s.center_value,
            MEASURED_CENTER_E,
            100.0 * s.mean_rel_deviation,
            seconds
        ),
    );
}

#[test]
fn criterion_03_magnetostatic_anchor() {
    let sol = &*MAGNETO_10G;
    let s = stats(sol, &Region::centered(sol.field.center(), [2.0e-3; 3]));

    let center_ok = rel_err(s.center_value, MEASURED_CENTER_B).abs() <= 0.10;
    // ±4% measured homogeneity, plus 6 percentage points for discretization
    let deviation_ok = s.mean_rel_deviation <= 0.04 + 0.06;
    gate(
        3,
        "magnetostatic anchor",
        center_ok && deviation_ok,
        &format!(
            "center {:.4} G vs 4.50 ±10%, mean deviation {:.2}% vs ≤10%",
            s.center_value / TESLA_PER_GAUSS,
            100.0 * s.mean_rel_deviation
        ),
    );
}

#[test]
fn criterion_04_conductivity_inversion() {
    let steel = lossmodel::conductivity_from_linewidth(637.0e3).unwrap();
    let coated = lossmodel::conductivity_from_linewidth(46.3e3).unwrap();

    let steel_err = rel_err(steel, 2.1e6);
    let coated_err = rel_err(coated, 4.0e8);
    let pass = steel_err.abs() <= 0.05 && coated_err.abs() <= 0.05;
    gate(
        4,
        "conductivity inversion",
        pass,
        &format!(
            "637 kHz → {steel:.4e} S/m ({:+.2}% of 2.1e6), 46.3 kHz → {coated:.4e} S/m ({:+.2}% of 4.0e8)",
            100.0 * steel_err,
            100.0 * coated_err
        ),
    );
}

#[test]
fn criterion_05_trapped_flux_q_limit() {
    let geom = device_geometry();
    let q = lossmodel::trapped_flux_q_limit(&geom, te301(), 20.0e-3)
        .unwrap()
        .value()
        .expect("a 20 mT trapped field must impose a finite Q ceiling");
    let g = geometry_factor(&geom, te301()).unwrap();

    let pass = (0.5e6..=2.0e6).contains(&q);
    gate(
        5,
        "trapped-flux Q limit",
        pass,
        &format!("G = {g:.1} Ω, Q = {q:.4e} vs [5e5, 2e6]"),
    );
}

#[test]
fn criterion_06_zeeman_calibration() {
    let geom = device_geometry();
    let system = RydbergSystem::default();
    let cloud = atom_cloud();
    let grid = GridSpec::default();

    // One probe solve calibrates the aperture transmission of the boundary
    // model, so each run below injects exactly the intended field at the map
    // center and the recovered slope can be compared against the coil
    // constant itself.
    let probe =
        solve_magnetostatic(&geom, &grid, 10.0 * TESLA_PER_GAUSS, [0.0, 0.0, 1.0]).unwrap();
    let transfer =
        probe.field.sample_magnitude(probe.field.center()).unwrap() / (10.0 * TESLA_PER_GAUSS);

    let mut points = Vec::new();
    for (k, b_gauss) in [3.1, 4.6, 7.2, 9.8].into_iter().enumerate() {
        let sol = solve_magnetostatic(
            &geom,
            &grid,
            b_gauss * TESLA_PER_GAUSS / transfer,
            [0.0, 0.0, 1.0],
        )
        .unwrap();

        // window centered on the expected line pair at the cloud center
        let b_center = sol.field.sample_magnitude(cloud.center(&sol.field)).unwrap();
        let pair = transition_frequencies(&system, RESIDUAL_E, b_center).unwrap();
        let mid = 0.5 * (pair.nu_plus + pair.nu_minus);
        let half = 0.5 * (pair.nu_plus - pair.nu_minus).abs() + 8.0 * system.sigma_h;
        let window = FrequencyGrid { start: mid - half, stop: mid + half, points: 601 };

        let line = synthesize_spectrum(
            &system,
            FieldSource::Uniform(RESIDUAL_E),
            FieldSource::Map(&sol.field),
            &cloud,
            &window,
            20_000,
            4600 + k as u64,
        )
        .unwrap();
        let fit = fit_spectrum(&line).unwrap();
        assert!(fit.resolved, "line pair at {b_gauss} G must resolve");
        points.push(CalibrationPoint {
            current: b_gauss / COIL_SLOPE,
            nu_plus: fit.nu_plus,
            nu_minus: fit.nu_minus,
            weight: 1.0,
        });
    }

    let cal = linear_calibration_fit(&system, &points).unwrap();
    let err = rel_err(cal.gauss_per_ampere, COIL_SLOPE);
    gate(
        6,
        "Zeeman calibration",
        err.abs() <= 0.03,
        &format!(
            "fitted {:.4} G/A vs injected {COIL_SLOPE} ±3% ({:+.2}%), residual rms {:.1} kHz",
            cal.gauss_per_ampere,
            100.0 * err,
            cal.residual_rms / 1e3
        ),
    );
}

#[test]
fn criterion_07_stark_magnitude() {
    let system = RydbergSystem::default();
    let shift = system.stark_shift(RESIDUAL_E).unwrap();
    let quad_ratio = system.stark_shift(2.0 * RESIDUAL_E).unwrap() / shift;

    // the −2.0 MHz anchor came from a residual-field estimate, so ±20%
    let magnitude_ok = shift < 0.0 && ((shift - (-2.0e6)) / 2.0e6).abs() <= 0.20;
    let quadratic_ok = quad_ratio == 4.0;
    gate(
        7,
        "Stark magnitude",
        magnitude_ok && quadratic_ok,
        &format!(
            "0.1 V/cm → {:.3} MHz vs −2.0 ±20%, Δν(2E)/Δν(E) = {quad_ratio} vs 4 exactly",
            shift / 1e6
        ),
    );
}

#[test]
fn criterion_08_inhomogeneous_broadening() {
    let sol = &*ELECTRO_STEP;
    let s = stats(sol, &Region::default_central(&sol.field));

    // relative inhomogeneity over the cloud, and field-per-volt at the cloud
    // in 1/cm (mean E in V/cm per volt of electrode step)
    let sigma_over_e = s.cloud_std / s.cloud_mean;
    let beta = s.cloud_mean / 100.0;

    let sigma_ok = (sigma_over_e - 0.13).abs() <= 0.02;
    let beta_ok = rel_err(beta, 0.67).abs() <= 0.10;
    gate(
        8,
        "inhomogeneous broadening",
        sigma_ok && beta_ok,
        &format!(
            "σ_E/E = {sigma_over_e:.4} vs 0.13 ±0.02, β = {beta:.4} cm⁻¹ vs 0.67 ±10%"
        ),
    );
}

#[test]
fn criterion_09_thermal_occupation() {
    let n_th = txn::thermal_occupation(3.0, 20.56e9).unwrap();
    gate(
        9,
        "thermal occupation",
        (n_th - 2.6).abs() <= 0.1,
        &format!("n_th(3 K, 20.56 GHz) = {n_th:.4} vs 2.6 ±0.1"),
    );
}

#[test]
fn criterion_10_property_suites() {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    // Laplace maximum principle: the ±1 V solution stays inside the imposed
    // boundary values everywhere
    let (sol, _) = &*ELECTRO_PM1V;
    let bound = sol
        .potential
        .data
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    check("maximum principle", bound <= 1.0 + 1e-12);

    // linearity: scaling the electrode step scales the whole field map
    let geom = device_geometry();
    let small = GridSpec { nx: 32, ny: 16, nz: 24, ..GridSpec::default() };
    let unit = solve_electrostatic(&geom, &small, &[0.0, 1.0]).unwrap();
    let scaled = solve_electrostatic(&geom, &small, &[0.0, 2.5]).unwrap();
    let peak = unit
        .field
        .data
        .iter()
        .fold(0.0f64, |m, v| m.max(v[0].abs().max(v[1].abs()).max(v[2].abs())));
    let worst = unit
        .field
        .data
        .iter()
        .zip(&scaled.field.data)
        .flat_map(|(u, s)| (0..3).map(move |a| (2.5 * u[a] - s[a]).abs()))
        .fold(0.0f64, f64::max);
    check("linearity", worst <= 1e-6 * 2.5 * peak);

    // perturbation shifts: signs, monotonic growth with depth, and factor-2
    // windows on the two measured tuning endpoints
    let sapphire = RodInsertion {
        material: RodMaterial::Dielectric { eps_r: 9.0 },
        diameter: 1.9e-3,
        depth: 4.2e-3,
    };
    let dielectric_end = perturbation_shift(&geom, te301(), &sapphire).unwrap().delta_nu;
    check(
        "dielectric endpoint",
        dielectric_end < 0.0 && (115.0e6..=460.0e6).contains(&dielectric_end.abs()),
    );
    let conductor = RodInsertion {
        material: RodMaterial::Conductor,
        diameter: 1.9e-3,
        depth: 1.55e-3,
    };
    let conductor_end = perturbation_shift(&geom, te301(), &conductor).unwrap().delta_nu;
    check("conductor endpoint", (27.0e6..=108.0e6).contains(&conductor_end));
    let mut last = 0.0;
    let mut monotone = true;
    for i in 1..=6 {
        let rod = RodInsertion { depth: i as f64 * 0.7e-3, ..sapphire };
        let d = perturbation_shift(&geom, te301(), &rod).unwrap().delta_nu.abs();
        monotone &= d >= last;
        last = d;
    }
    check("dielectric pull grows with depth", monotone);

    // Lorentzian fit roundtrip on a noiseless trace
    let trace = txn::synthesize_trace(12.4e3, 3.0e3, 8.0 * 12.4e3, 241, 0.0, 0, 1e-15, 3.0)
        .unwrap();
    let fit = txn::fit_lorentzian(&trace).unwrap();
    // traces come out normalized to unit peak, so the amplitude target is 1
    check(
        "Lorentzian roundtrip",
        rel_err(fit.kappa, 12.4e3).abs() < 1e-6
            && fit.center.abs() < 1e-6 * 12.4e3
            && rel_err(fit.peak_amplitude, 1.0).abs() < 1e-6,
    );

    // Monte Carlo determinism: same seed, same spectrum, bit for bit
    let system = RydbergSystem::default();
    let cloud = atom_cloud();
    let window = FrequencyGrid { start: 20.530e9, stop: 20.554e9, points: 201 };
    let synth = || {
        synthesize_spectrum(
            &system,
            FieldSource::Uniform(RESIDUAL_E),
            FieldSource::Uniform(4.5 * TESLA_PER_GAUSS),
            &cloud,
            &window,
            2000,
            42,
        )
        .unwrap()
        .signal
    };
    check("seeded determinism", synth() == synth());

    // the fitted linewidth must not move across eight decades of drive power
    // (no power-dependent loss term exists in the model; consistency only)
    let mut kappas = Vec::new();
    let mut photons = Vec::new();
    for (i, power) in [1e-18, 1e-14, 1e-10].into_iter().enumerate() {
        let trace = txn::synthesize_trace(
            12.4e3,
            3.0e3,
            8.0 * 12.4e3,
            241,
            0.01,
            9000 + i as u64,
            power,
            0.05,
        )
        .unwrap();
        let fit = txn::fit_lorentzian(&trace).unwrap();
        kappas.push(fit.kappa);
        photons.push(txn::photon_number(power, 20.56e9, fit.kappa, 3.0e3, 0.0).unwrap());
    }
    let flat = kappas.iter().all(|k| rel_err(*k, 12.4e3).abs() <= 0.02);
    let rising = photons.windows(2).all(|w| w[1] > w[0]) && photons[2] / photons[0] > 1e7;
    check("flat linewidth over eight decades of drive", flat && rising);

    gate(
        10,
        "property suites",
        failures.is_empty(),
        &if failures.is_empty() {
            format!(
                "7 invariants hold; endpoints {:+.1} / {:+.1} MHz",
                dielectric_end / 1e6,
                conductor_end / 1e6
            )
        } else {
            format!("failed: {}", failures.join(", "))
        },
    );
}
