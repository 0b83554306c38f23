//! Finite-difference Laplace solver for the dc fields inside the cavity, plus
//! field-map containers and statistics.
//!
//! Two boundary-value problems share one discretization:
//!
//! * **Electrostatic** — ∇²φ = 0 with grounded walls (φ = 0) and the bias
//!   electrodes clamped to their potentials. E = −∇φ (V/m). The electrode
//!   cylinders are rasterized onto the grid: nodes inside a cylinder are
//!   Dirichlet-clamped, and stencil arms that cross the cylinder surface are
//!   shortened to the intersection (Shortley–Weller irregular stencil), so the
//!   physical radius is honored even when it is below the cell size.
//! * **Magnetostatic** — superconducting walls expel flux (B·n = 0, homogeneous
//!   Neumann for the scalar potential), while the two beam-access apertures act
//!   as ideal flux ports: aperture nodes carry the exterior uniform-field
//!   scalar potential. We solve for ψ with B = −∇ψ directly in tesla units
//!   (ψ absorbs μ0), external field along ±z only.
//!
//! The iteration is red–black successive over-relaxation. Storage is split by
//! node color so each half-sweep only writes one color while reading the other
//! — data-parallel over chunks without locks, and bit-identical for any thread
//! count. The relaxation factor comes from the Jacobi spectral-radius estimate
//! for the grid.
//!
//! **Tolerance semantics**: `GridSpec::tolerance` bounds the *relative solution
//! error*, not the raw residual. The stop threshold on the max-norm Jacobi
//! residual is scaled internally by the smallest eigenvalue of the damped
//! Jacobi iteration (the error-transfer factor); a converged solve is then
//! accurate to ~`tolerance × max|boundary value|` pointwise, which is what the
//! linearity/superposition guarantees quoted elsewhere rely on.

use crate::error::{Error, Result};
use crate::geometry::CavityGeometry;
use crate::parallel;
use std::f64::consts::PI;
use std::io::{BufRead, Write as IoWrite};
use std::path::Path;

const CLASS_FIXED: u8 = 0;
const CLASS_REGULAR: u8 = 1;
const CLASS_SPECIAL: u8 = 2;

/// Sweep-chunk granularity for the parallel color updates.
const CHUNK: usize = 2048;

/// Shortest stencil-arm fraction before the cut is clamped (nodes essentially
/// on an electrode surface).
const THETA_MIN: f64 = 1e-3;

/// Residual is evaluated every this many full sweeps.
const CHECK_EVERY: usize = 16;

/// Discretization request: cells per axis plus convergence controls.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GridSpec {
    /// cells along x
    pub nx: usize,
    /// cells along y
    pub ny: usize,
    /// cells along z
    pub nz: usize,
    /// relative solution-error bound (see module docs), in (0, 1e-3]
    pub tolerance: f64,
    /// hard sweep budget before giving up
    pub max_sweeps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 64, ny: 32, nz: 48, tolerance: 1e-6, max_sweeps: 60_000 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (n, axis) in [(self.nx, "x"), (self.ny, "y"), (self.nz, "z")] {
            if !(16..=1024).contains(&n) {
                return Err(Error::InvalidInput(format!(
                    "grid cells along {axis} must be in [16, 1024], got {n}"
                )));
            }
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be in (0, 1e-3], got {}",
                self.tolerance
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FieldKind {
    /// E in V/m
    Electric,
    /// B in tesla
    Magnetic,
}

/// Node-centered vector field over the cavity box, x-fastest layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub kind: FieldKind,
    /// node counts per axis (cells + 1)
    pub nodes: [usize; 3],
    /// position of node (0,0,0) (m)
    pub origin: [f64; 3],
    /// node spacing per axis (m)
    pub spacing: [f64; 3],
    /// field vectors, index (k·ny + j)·nx + i
    pub data: Vec<[f64; 3]>,
}

impl FieldMap {
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.nodes[1] + j) * self.nodes[0] + i
    }

    pub fn node_pos(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        ]
    }

    /// Physical size spanned by the map (m).
    pub fn extent(&self) -> [f64; 3] {
        [
            (self.nodes[0] - 1) as f64 * self.spacing[0],
            (self.nodes[1] - 1) as f64 * self.spacing[1],
            (self.nodes[2] - 1) as f64 * self.spacing[2],
        ]
    }

    pub fn center(&self) -> [f64; 3] {
        let e = self.extent();
        [self.origin[0] + 0.5 * e[0], self.origin[1] + 0.5 * e[1], self.origin[2] + 0.5 * e[2]]
    }

    /// Trilinear interpolation at `p` (m). Walls inclusive; outside is an error.
    pub fn sample(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let n = self.nodes[d];
            let u = (p[d] - self.origin[d]) / self.spacing[d];
            let slack = 1e-9 * (n as f64);
            if u < -slack || u > (n - 1) as f64 + slack {
                return Err(Error::OutsideDomain(p[0], p[1], p[2]));
            }
            let uc = u.clamp(0.0, (n - 1) as f64);
            let i0 = (uc.floor() as usize).min(n - 2);
            cell[d] = i0;
            frac[d] = uc - i0 as f64;
        }
        let mut out = [0.0; 3];
        for corner in 0..8 {
            let di = corner & 1;
            let dj = (corner >> 1) & 1;
            let dk = (corner >> 2) & 1;
            let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
            let v = self.data[self.idx(cell[0] + di, cell[1] + dj, cell[2] + dk)];
            for d in 0..3 {
                out[d] += w * v[d];
            }
        }
        Ok(out)
    }

    /// |F| at `p`.
    pub fn sample_magnitude(&self, p: [f64; 3]) -> Result<f64> {
        let v = self.sample(p)?;
        Ok(norm3(v))
    }

    fn column_names(kind: FieldKind) -> &'static str {
        match kind {
            FieldKind::Electric => "x_m,y_m,z_m,fx_v_per_m,fy_v_per_m,fz_v_per_m",
            FieldKind::Magnetic => "x_m,y_m,z_m,fx_t,fy_t,fz_t",
        }
    }

    /// CSV export: metadata comment lines, a unit-bearing header row, then one
    /// row per node in index order. Floats are printed shortest-roundtrip, so a
    /// re-import reproduces the map bit-exactly.
    pub fn to_writer<W: IoWrite>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# cavitydc fieldmap v1")?;
        let kind = match self.kind {
            FieldKind::Electric => "electric",
            FieldKind::Magnetic => "magnetic",
        };
        writeln!(w, "# kind={kind}")?;
        writeln!(w, "# nodes={} {} {}", self.nodes[0], self.nodes[1], self.nodes[2])?;
        writeln!(w, "# origin={} {} {}", self.origin[0], self.origin[1], self.origin[2])?;
        writeln!(w, "# spacing={} {} {}", self.spacing[0], self.spacing[1], self.spacing[2])?;
        writeln!(w, "{}", Self::column_names(self.kind))?;
        for k in 0..self.nodes[2] {
            for j in 0..self.nodes[1] {
                for i in 0..self.nodes[0] {
                    let p = self.node_pos(i, j, k);
                    let v = self.data[self.idx(i, j, k)];
                    writeln!(w, "{},{},{},{},{},{}", p[0], p[1], p[2], v[0], v[1], v[2])?;
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut w)
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut kind = None;
        let mut nodes = None;
        let mut origin = None;
        let mut spacing = None;
        let mut data: Vec<[f64; 3]> = Vec::new();
        let mut saw_header = false;

        let parse3 = |s: &str, what: &str| -> Result<[f64; 3]> {
            let vals: Vec<f64> = s.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if vals.len() != 3 {
                return Err(Error::CsvFormat(format!("bad {what} line: {s:?}")));
            }
            Ok([vals[0], vals[1], vals[2]])
        };

        for line in r.lines() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("kind=") {
                    kind = Some(match v {
                        "electric" => FieldKind::Electric,
                        "magnetic" => FieldKind::Magnetic,
                        other => {
                            return Err(Error::CsvFormat(format!("unknown field kind {other:?}")))
                        }
                    });
                } else if let Some(v) = rest.strip_prefix("nodes=") {
                    let n = parse3(v, "nodes")?;
                    nodes = Some([n[0] as usize, n[1] as usize, n[2] as usize]);
                } else if let Some(v) = rest.strip_prefix("origin=") {
                    origin = Some(parse3(v, "origin")?);
                } else if let Some(v) = rest.strip_prefix("spacing=") {
                    spacing = Some(parse3(v, "spacing")?);
                }
                continue;
            }
            if !saw_header {
                if !line.starts_with("x_m,y_m,z_m,") {
                    return Err(Error::CsvFormat(format!("unexpected header row: {line:?}")));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::CsvFormat(format!("expected 6 columns, got {}", cols.len())));
            }
            let mut v = [0.0; 3];
            for (d, c) in cols[3..6].iter().enumerate() {
                v[d] = c
                    .parse()
                    .map_err(|_| Error::CsvFormat(format!("bad float {c:?}")))?;
            }
            data.push(v);
        }
        let kind = kind.ok_or_else(|| Error::CsvFormat("missing '# kind=' line".into()))?;
        let nodes = nodes.ok_or_else(|| Error::CsvFormat("missing '# nodes=' line".into()))?;
        let origin = origin.ok_or_else(|| Error::CsvFormat("missing '# origin=' line".into()))?;
        let spacing = spacing.ok_or_else(|| Error::CsvFormat("missing '# spacing=' line".into()))?;
        let expect = nodes[0] * nodes[1] * nodes[2];
        if data.len() != expect {
            return Err(Error::CsvFormat(format!(
                "node count mismatch: header says {expect}, file has {} rows",
                data.len()
            )));
        }
        Ok(Self { kind, nodes, origin, spacing, data })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_reader(r)
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Scalar potential on the solve grid (φ in volts, or ψ in T·m).
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    /// node counts per axis
    pub nodes: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarGrid {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(k * self.nodes[1] + j) * self.nodes[0] + i]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    /// full red-black sweeps executed
    pub sweeps: usize,
    /// final max-norm Jacobi residual relative to the boundary-value scale
    pub residual: f64,
}

/// Field map plus the scalar potential it came from and convergence info.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: FieldMap,
    pub potential: ScalarGrid,
    pub report: SolveReport,
}

// ---------------------------------------------------------------------------
// discrete system
// ---------------------------------------------------------------------------

/// Irregular node: explicit neighbor positions (opposite color array), one
/// coefficient per arm, boundary contributions folded into `rhs`.
struct Special {
    q: u32,
    nbr: [u32; 6],
    coeff: [f64; 6],
    rhs: f64,
    inv_diag: f64,
}

struct System {
    /// real node counts
    nxn: usize,
    nyn: usize,
    nzn: usize,
    /// padded node counts along x and y (odd, so linear-index parity == color)
    exn: usize,
    eyn: usize,
    hx: f64,
    hy: f64,
    hz: f64,
    ax: f64,
    ay: f64,
    az: f64,
    /// color-split potential: phi[p][q] is node n = 2q + p
    phi: [Vec<f64>; 2],
    class: [Vec<u8>; 2],
    specials: [Vec<Special>; 2],
    /// max |boundary datum| (electrode potential / port potential), the
    /// natural scale of the problem; fixed nodes alone can't provide it when
    /// the electrodes live below the grid resolution
    scale: f64,
    omega: f64,
    /// error-transfer factor: residual threshold = tolerance × transfer
    transfer: f64,
}

/// Flat-layout node description used during assembly, split by color afterwards.
struct FlatSystem {
    class: Vec<u8>,
    value: Vec<f64>,
    specials: Vec<(usize, [usize; 6], [f64; 6], f64, f64)>, // (n, nbr, coeff, rhs, diag)
}

impl System {
    fn assemble(
        geom: &CavityGeometry,
        grid: &GridSpec,
        flat: FlatSystem,
        magneto: bool,
        scale: f64,
    ) -> System {
        let (nxn, nyn, nzn) = (grid.nx + 1, grid.ny + 1, grid.nz + 1);
        let exn = nxn + (nxn % 2 == 0) as usize;
        let eyn = nyn + (nyn % 2 == 0) as usize;
        let (hx, hy, hz) =
            (geom.lx / grid.nx as f64, geom.ly / grid.ny as f64, geom.lz / grid.nz as f64);
        let (ax, ay, az) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));

        let npad = exn * eyn * nzn;
        let len0 = npad.div_ceil(2);
        let len1 = npad / 2;
        let mut phi = [vec![0.0; len0], vec![0.0; len1]];
        let mut class = [vec![CLASS_FIXED; len0], vec![CLASS_FIXED; len1]];
        for n in 0..npad {
            phi[n & 1][n >> 1] = flat.value[n];
            class[n & 1][n >> 1] = flat.class[n];
        }
        let mut specials = [Vec::new(), Vec::new()];
        for (n, nbr, coeff, rhs, diag) in flat.specials {
            let p = n & 1;
            let mut nq = [0u32; 6];
            for t in 0..6 {
                // all six neighbors have opposite parity (odd strides)
                debug_assert_eq!(nbr[t] & 1, 1 - p);
                nq[t] = (nbr[t] >> 1) as u32;
            }
            specials[p].push(Special {
                q: (n >> 1) as u32,
                nbr: nq,
                coeff,
                rhs,
                inv_diag: 1.0 / diag,
            });
        }

        // Jacobi spectral-radius estimate for the box -> SOR relaxation factor
        // and the error-transfer factor used by the stopping rule.
        let denom = ax + ay + az;
        let rho = (ax * (PI / grid.nx as f64).cos()
            + ay * (PI / grid.ny as f64).cos()
            + az * (PI / grid.nz as f64).cos())
            / denom;
        let omega = (2.0 / (1.0 + (1.0 - rho * rho).sqrt())).clamp(1.0, 1.96);
        // Neumann-dominated spectra reach lower than the Dirichlet estimate;
        // apply a safety factor for the magnetostatic problem.
        let transfer = (1.0 - rho) * if magneto { 0.125 } else { 1.0 };

        System {
            nxn,
            nyn,
            nzn,
            exn,
            eyn,
            hx,
            hy,
            hz,
            ax,
            ay,
            az,
            phi,
            class,
            specials,
            scale,
            omega,
            transfer,
        }
    }

    #[inline]
    fn strides(&self) -> (usize, usize) {
        (self.exn, self.exn * self.eyn)
    }

    fn half_sweep(&mut self, p: usize) {
        let omega = self.omega;
        let (ax, ay, az) = (self.ax, self.ay, self.az);
        let inv_diag = 1.0 / (2.0 * (ax + ay + az));
        let (sy, sz) = self.strides();
        let (dyp, dym) = ((sy - 1) / 2, (sy + 1) / 2);
        let (dzp, dzm) = ((sz - 1) / 2, (sz + 1) / 2);
        let class = &self.class[p];
        let specials = &self.specials[p];
        let [c0, c1] = &mut self.phi;
        let (target, other): (&mut [f64], &[f64]) =
            if p == 0 { (c0, c1) } else { (c1, c0) };

        parallel::for_each_chunk_mut(target, CHUNK, |start, slice| {
            for (off, slot) in slice.iter_mut().enumerate() {
                let q = start + off;
                if class[q] == CLASS_REGULAR {
                    let b = q + p;
                    let s = ax * (other[b] + other[b - 1])
                        + ay * (other[b + dyp] + other[b - dym])
                        + az * (other[b + dzp] + other[b - dzm]);
                    *slot += omega * (s * inv_diag - *slot);
                }
            }
        });
        for sp in specials {
            let mut s = sp.rhs;
            for t in 0..6 {
                s += sp.coeff[t] * other[sp.nbr[t] as usize];
            }
            let v = &mut target[sp.q as usize];
            *v += omega * (s * sp.inv_diag - *v);
        }
    }

    /// Max-norm Jacobi residual (absolute, in potential units).
    fn residual(&self) -> f64 {
        let (ax, ay, az) = (self.ax, self.ay, self.az);
        let inv_diag = 1.0 / (2.0 * (ax + ay + az));
        let (sy, sz) = self.strides();
        let (dyp, dym) = ((sy - 1) / 2, (sy + 1) / 2);
        let (dzp, dzm) = ((sz - 1) / 2, (sz + 1) / 2);
        let mut worst = 0.0f64;
        for p in 0..2 {
            let class = &self.class[p];
            let cur = &self.phi[p];
            let other = &self.phi[1 - p];
            let m = parallel::max_over_chunks(cur.len(), CHUNK, |range| {
                let mut m = f64::NEG_INFINITY;
                for q in range {
                    if class[q] == CLASS_REGULAR {
                        let b = q + p;
                        let s = ax * (other[b] + other[b - 1])
                            + ay * (other[b + dyp] + other[b - dym])
                            + az * (other[b + dzp] + other[b - dzm]);
                        m = m.max((s * inv_diag - cur[q]).abs());
                    }
                }
                m
            });
            worst = worst.max(m);
            for sp in &self.specials[p] {
                let mut s = sp.rhs;
                for t in 0..6 {
                    s += sp.coeff[t] * other[sp.nbr[t] as usize];
                }
                worst = worst.max((s * sp.inv_diag - cur[sp.q as usize]).abs());
            }
        }
        worst
    }

    fn solve(&mut self, grid: &GridSpec) -> Result<SolveReport> {
        let threshold = grid.tolerance * self.transfer * self.scale;
        let mut sweeps = 0;
        loop {
            self.half_sweep(0);
            self.half_sweep(1);
            sweeps += 1;
            if sweeps % CHECK_EVERY == 0 || sweeps == grid.max_sweeps {
                let res = self.residual();
                if res <= threshold {
                    return Ok(SolveReport { sweeps, residual: res / self.scale });
                }
                if sweeps >= grid.max_sweeps {
                    return Err(Error::NonConverged {
                        residual: res / self.scale,
                        iterations: sweeps,
                    });
                }
            }
        }
    }

    /// Re-interleave the color arrays and drop padding -> real-layout potential.
    fn merge_potential(&self) -> ScalarGrid {
        let mut data = vec![0.0; self.nxn * self.nyn * self.nzn];
        for k in 0..self.nzn {
            for j in 0..self.nyn {
                for i in 0..self.nxn {
                    let n = (k * self.eyn + j) * self.exn + i;
                    data[(k * self.nyn + j) * self.nxn + i] = self.phi[n & 1][n >> 1];
                }
            }
        }
        ScalarGrid { nodes: [self.nxn, self.nyn, self.nzn], data }
    }
}

/// −∇ of a scalar grid: central differences inside, one-sided second order on
/// the boundary planes.
fn neg_gradient(pot: &ScalarGrid, spacing: [f64; 3]) -> Vec<[f64; 3]> {
    let [nx, ny, nz] = pot.nodes;
    let mut out = vec![[0.0; 3]; nx * ny * nz];
    let deriv = |m: f64, c: f64, p: f64, edge: i8, h: f64| -> f64 {
        match edge {
            0 => (p - m) / (2.0 * h),
            // one-sided: f'(0) = (-3f0 + 4f1 - f2) / 2h, mirrored at the top
            -1 => (-3.0 * c + 4.0 * p - m) / (2.0 * h),
            _ => (3.0 * c - 4.0 * m + p) / (2.0 * h),
        }
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = (k * ny + j) * nx + i;
                let g = [
                    if i == 0 {
                        deriv(pot.at(2, j, k), pot.at(0, j, k), pot.at(1, j, k), -1, spacing[0])
                    } else if i == nx - 1 {
                        deriv(pot.at(i - 1, j, k), pot.at(i, j, k), pot.at(i - 2, j, k), 1, spacing[0])
                    } else {
                        deriv(pot.at(i - 1, j, k), 0.0, pot.at(i + 1, j, k), 0, spacing[0])
                    },
                    if j == 0 {
                        deriv(pot.at(i, 2, k), pot.at(i, 0, k), pot.at(i, 1, k), -1, spacing[1])
                    } else if j == ny - 1 {
                        deriv(pot.at(i, j - 1, k), pot.at(i, j, k), pot.at(i, j - 2, k), 1, spacing[1])
                    } else {
                        deriv(pot.at(i, j - 1, k), 0.0, pot.at(i, j + 1, k), 0, spacing[1])
                    },
                    if k == 0 {
                        deriv(pot.at(i, j, 2), pot.at(i, j, 0), pot.at(i, j, 1), -1, spacing[2])
                    } else if k == nz - 1 {
                        deriv(pot.at(i, j, k - 1), pot.at(i, j, k), pot.at(i, j, k - 2), 1, spacing[2])
                    } else {
                        deriv(pot.at(i, j, k - 1), 0.0, pot.at(i, j, k + 1), 0, spacing[2])
                    },
                ];
                out[idx] = [-g[0], -g[1], -g[2]];
            }
        }
    }
    out
}

/// Smallest circle-crossing parameter t ∈ (0, 1] of the segment P → P+D against
/// electrode `e`'s cross-section, if any.
fn arm_cut(ex: f64, ez: f64, r: f64, px: f64, pz: f64, dx: f64, dz: f64) -> Option<f64> {
    let (ox, oz) = (px - ex, pz - ez);
    let a = dx * dx + dz * dz;
    let b = 2.0 * (ox * dx + oz * dz);
    let c = ox * ox + oz * oz - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = (-b - sq) / (2.0 * a);
    if t > 0.0 && t <= 1.0 {
        Some(t.max(THETA_MIN))
    } else {
        None
    }
}

/// Solve the grounded-wall electrostatic problem with the geometry's electrodes
/// clamped to `potentials` (one entry per electrode, in order). E = −∇φ.
pub fn solve_electrostatic(
    geom: &CavityGeometry,
    grid: &GridSpec,
    potentials: &[f64],
) -> Result<Solution> {
    grid.validate()?;
    if geom.electrodes.is_empty() {
        return Err(Error::InvalidInput(
            "electrostatic solve requires at least one electrode".into(),
        ));
    }
    if potentials.len() != geom.electrodes.len() {
        return Err(Error::InvalidInput(format!(
            "got {} potentials for {} electrodes",
            potentials.len(),
            geom.electrodes.len()
        )));
    }

    let (nxn, nyn, nzn) = (grid.nx + 1, grid.ny + 1, grid.nz + 1);
    let exn = nxn + (nxn % 2 == 0) as usize;
    let eyn = nyn + (nyn % 2 == 0) as usize;
    let (hx, hy, hz) =
        (geom.lx / grid.nx as f64, geom.ly / grid.ny as f64, geom.lz / grid.nz as f64);
    let (ax, ay, az) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    let at = |i: usize, j: usize, k: usize| (k * eyn + j) * exn + i;

    let npad = exn * eyn * nzn;
    let mut flat = FlatSystem {
        class: vec![CLASS_FIXED; npad],
        value: vec![0.0; npad],
        specials: Vec::new(),
    };
    let mut touched = vec![false; geom.electrodes.len()];

    let inside = |e: &crate::geometry::Electrode, x: f64, z: f64| {
        let (dx, dz) = (x - e.x, z - e.z);
        dx * dx + dz * dz <= e.radius * e.radius
    };

    for k in 0..nzn {
        let z = k as f64 * hz;
        for j in 0..nyn {
            for i in 0..nxn {
                let x = i as f64 * hx;
                let n = at(i, j, k);
                let wall =
                    i == 0 || i == nxn - 1 || j == 0 || j == nyn - 1 || k == 0 || k == nzn - 1;
                if wall {
                    // grounded walls win over electrode feedthroughs
                    continue; // class already FIXED, value 0
                }
                if let Some(e) =
                    geom.electrodes.iter().position(|e| inside(e, x, z))
                {
                    flat.value[n] = potentials[e];
                    touched[e] = true;
                    continue;
                }
                // probe the four in-plane arms for electrode-surface crossings
                let mut cut = [None::<(f64, f64)>; 4]; // (theta, boundary V) for xm, xp, zm, zp
                for (slot, (dx, dz)) in
                    [(-hx, 0.0), (hx, 0.0), (0.0, -hz), (0.0, hz)].iter().enumerate()
                {
                    let mut best: Option<(f64, f64, usize)> = None;
                    for (ei, e) in geom.electrodes.iter().enumerate() {
                        if let Some(t) = arm_cut(e.x, e.z, e.radius, x, z, *dx, *dz) {
                            if best.map_or(true, |(bt, _, _)| t < bt) {
                                best = Some((t, potentials[ei], ei));
                            }
                        }
                    }
                    if let Some((t, v, ei)) = best {
                        cut[slot] = Some((t, v));
                        touched[ei] = true;
                    }
                }
                if cut.iter().all(Option::is_none) {
                    flat.class[n] = CLASS_REGULAR;
                    continue;
                }
                // Shortley–Weller row: per axis with arm fractions θ−, θ+,
                //   coeff∓ = 2 / (θ∓ (θ− + θ+)) × 1/h²,
                // cut arms contribute coeff × V_surface to the rhs instead.
                flat.class[n] = CLASS_SPECIAL;
                let mut nbr = [0usize; 6];
                let mut coeff = [0.0f64; 6];
                let mut rhs = 0.0;
                let mut diag = 0.0;
                let arms: [(usize, usize, f64, Option<(f64, f64)>); 6] = [
                    (0, at(i - 1, j, k), ax, cut[0]),
                    (1, at(i + 1, j, k), ax, cut[1]),
                    (2, at(i, j - 1, k), ay, None),
                    (3, at(i, j + 1, k), ay, None),
                    (4, at(i, j, k - 1), az, cut[2]),
                    (5, at(i, j, k + 1), az, cut[3]),
                ];
                // axis pairs: (0,1)=x, (2,3)=y, (4,5)=z
                for pair in 0..3 {
                    let (sm, sp) = (2 * pair, 2 * pair + 1);
                    let a = arms[sm].2;
                    let tm = arms[sm].3.map_or(1.0, |(t, _)| t);
                    let tp = arms[sp].3.map_or(1.0, |(t, _)| t);
                    let cm = 2.0 / (tm * (tm + tp)) * a;
                    let cp = 2.0 / (tp * (tm + tp)) * a;
                    diag += cm + cp;
                    for (slot, c) in [(sm, cm), (sp, cp)] {
                        nbr[slot] = arms[slot].1;
                        match arms[slot].3 {
                            Some((_, v)) => rhs += c * v,
                            None => coeff[slot] = c,
                        }
                    }
                }
                flat.specials.push((n, nbr, coeff, rhs, diag));
            }
        }
    }

    if touched.iter().any(|&t| !t) {
        return Err(Error::UnresolvedFeature("electrode"));
    }

    let scale = potentials.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut sys = System::assemble(geom, grid, flat, false, scale);
    let spacing = [sys.hx, sys.hy, sys.hz];
    if sys.scale == 0.0 {
        // all boundary data zero -> identically zero solution
        let potential = sys.merge_potential();
        let data = vec![[0.0; 3]; potential.data.len()];
        return Ok(Solution {
            field: FieldMap {
                kind: FieldKind::Electric,
                nodes: potential.nodes,
                origin: [0.0; 3],
                spacing,
                data,
            },
            potential,
            report: SolveReport { sweeps: 0, residual: 0.0 },
        });
    }
    let report = sys.solve(grid)?;
    let potential = sys.merge_potential();
    let mut data = neg_gradient(&potential, spacing);
    // field inside a clamped conductor is meaningless; report zero there
    for k in 1..nzn - 1 {
        let z = k as f64 * hz;
        for i in 1..nxn - 1 {
            let x = i as f64 * hx;
            if geom.electrodes.iter().any(|e| inside(e, x, z)) {
                for j in 1..nyn - 1 {
                    data[(k * nyn + j) * nxn + i] = [0.0; 3];
                }
            }
        }
    }
    Ok(Solution {
        field: FieldMap {
            kind: FieldKind::Electric,
            nodes: potential.nodes,
            origin: [0.0; 3],
            spacing,
            data,
        },
        potential,
        report,
    })
}

/// Solve the flux-port magnetostatic problem: superconducting walls (B·n = 0)
/// with the two z-wall apertures carrying the exterior uniform-field potential.
/// `direction` must point along ±z. B = −∇ψ (tesla).
pub fn solve_magnetostatic(
    geom: &CavityGeometry,
    grid: &GridSpec,
    b_ext: f64,
    direction: [f64; 3],
) -> Result<Solution> {
    grid.validate()?;
    if b_ext < 0.0 || !b_ext.is_finite() {
        return Err(Error::InvalidInput(format!(
            "external field magnitude must be finite and >= 0, got {b_ext}"
        )));
    }
    let dn = norm3(direction);
    if dn == 0.0 || direction[2].abs() / dn < 1.0 - 1e-9 {
        return Err(Error::Unsupported(
            "external field direction must be along ±z (the aperture axis)".into(),
        ));
    }
    let holes = geom
        .access_holes
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("magnetostatic solve requires access holes".into()))?;

    let (nxn, nyn, nzn) = (grid.nx + 1, grid.ny + 1, grid.nz + 1);
    let exn = nxn + (nxn % 2 == 0) as usize;
    let eyn = nyn + (nyn % 2 == 0) as usize;
    let (hx, hy, hz) =
        (geom.lx / grid.nx as f64, geom.ly / grid.ny as f64, geom.lz / grid.nz as f64);
    let (ax, ay, az) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    let at = |i: usize, j: usize, k: usize| (k * eyn + j) * exn + i;

    // signed field along +z; ψ = −B·(z − Lz/2) on the ports so B = −∇ψ = +B ẑ
    let b_signed = b_ext * direction[2].signum();
    let psi0 = b_signed * geom.lz / 2.0;

    let npad = exn * eyn * nzn;
    let mut flat = FlatSystem {
        class: vec![CLASS_FIXED; npad],
        value: vec![0.0; npad],
        specials: Vec::new(),
    };

    let (cx, cy) = (0.5 * geom.lx, 0.5 * geom.ly);
    let mut aperture_nodes = [0usize; 2];
    for k in 0..nzn {
        for j in 0..nyn {
            let y = j as f64 * hy;
            for i in 0..nxn {
                let x = i as f64 * hx;
                let n = at(i, j, k);
                let wall =
                    i == 0 || i == nxn - 1 || j == 0 || j == nyn - 1 || k == 0 || k == nzn - 1;
                if !wall {
                    flat.class[n] = CLASS_REGULAR;
                    continue;
                }
                let (dx, dy) = (x - cx, y - cy);
                let in_hole = dx * dx + dy * dy <= holes.radius * holes.radius;
                if k == 0 && in_hole {
                    flat.value[n] = psi0;
                    aperture_nodes[0] += 1;
                    continue;
                }
                if k == nzn - 1 && in_hole {
                    flat.value[n] = -psi0;
                    aperture_nodes[1] += 1;
                    continue;
                }
                // superconducting wall: homogeneous Neumann via mirrored arms
                flat.class[n] = CLASS_SPECIAL;
                let reflect = |v: isize, max: usize| -> usize {
                    if v < 0 {
                        1
                    } else if v as usize > max {
                        max - 1
                    } else {
                        v as usize
                    }
                };
                let im = reflect(i as isize - 1, nxn - 1);
                let ip = reflect(i as isize + 1, nxn - 1);
                let jm = reflect(j as isize - 1, nyn - 1);
                let jp = reflect(j as isize + 1, nyn - 1);
                let km = reflect(k as isize - 1, nzn - 1);
                let kp = reflect(k as isize + 1, nzn - 1);
                let nbr = [
                    at(im, j, k),
                    at(ip, j, k),
                    at(i, jm, k),
                    at(i, jp, k),
                    at(i, j, km),
                    at(i, j, kp),
                ];
                let coeff = [ax, ax, ay, ay, az, az];
                let diag = 2.0 * (ax + ay + az);
                flat.specials.push((n, nbr, coeff, 0.0, diag));
            }
        }
    }
    if b_ext > 0.0 && (aperture_nodes[0] == 0 || aperture_nodes[1] == 0) {
        return Err(Error::UnresolvedFeature("access aperture"));
    }

    let mut sys = System::assemble(geom, grid, flat, true, psi0.abs());
    let spacing = [sys.hx, sys.hy, sys.hz];
    if sys.scale == 0.0 {
        let potential = sys.merge_potential();
        let data = vec![[0.0; 3]; potential.data.len()];
        return Ok(Solution {
            field: FieldMap {
                kind: FieldKind::Magnetic,
                nodes: potential.nodes,
                origin: [0.0; 3],
                spacing,
                data,
            },
            potential,
            report: SolveReport { sweeps: 0, residual: 0.0 },
        });
    }
    let report = sys.solve(grid)?;
    let potential = sys.merge_potential();
    let mut data = neg_gradient(&potential, spacing);
    // enforce B·n = 0 exactly on the superconducting walls (not on apertures)
    for k in 0..nzn {
        for j in 0..nyn {
            let y = j as f64 * hy;
            for i in 0..nxn {
                let x = i as f64 * hx;
                let idx = (k * nyn + j) * nxn + i;
                if i == 0 || i == nxn - 1 {
                    data[idx][0] = 0.0;
                }
                if j == 0 || j == nyn - 1 {
                    data[idx][1] = 0.0;
                }
                if k == 0 || k == nzn - 1 {
                    let (dx, dy) = (x - cx, y - cy);
                    if dx * dx + dy * dy > holes.radius * holes.radius {
                        data[idx][2] = 0.0;
                    }
                }
            }
        }
    }
    Ok(Solution {
        field: FieldMap {
            kind: FieldKind::Magnetic,
            nodes: potential.nodes,
            origin: [0.0; 3],
            spacing,
            data,
        },
        potential,
        report,
    })
}

// ---------------------------------------------------------------------------
// statistics
// ---------------------------------------------------------------------------

/// Axis-aligned box region (m).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn centered(center: [f64; 3], widths: [f64; 3]) -> Self {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for d in 0..3 {
            min[d] = center[d] - 0.5 * widths[d];
            max[d] = center[d] + 0.5 * widths[d];
        }
        Self { min, max }
    }

    /// Default statistics region: the central 4×2×4 mm box of a map.
    pub fn default_central(map: &FieldMap) -> Self {
        Self::centered(map.center(), [4.0e-3, 2.0e-3, 4.0e-3])
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }
}

/// Atom-cloud description for weighted field statistics. The diameter follows
/// the 2σ convention: an isotropic Gaussian with σ = diameter/2.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CloudSpec {
    /// cloud-center offset from the map center (m)
    pub offset: [f64; 3],
    /// 2σ diameter (m)
    pub diameter: f64,
}

impl CloudSpec {
    pub fn sigma(&self) -> f64 {
        0.5 * self.diameter
    }

    pub fn center(&self, map: &FieldMap) -> [f64; 3] {
        let c = map.center();
        [c[0] + self.offset[0], c[1] + self.offset[1], c[2] + self.offset[2]]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FieldStats {
    /// |F| at the map center (V/m or T)
    pub center_value: f64,
    /// mean over region nodes of ||F| − |F_c|| / |F_c|
    pub mean_rel_deviation: f64,
    /// worst-case relative deviation over the region
    pub max_rel_deviation: f64,
    /// number of grid nodes inside the region
    pub region_nodes: usize,
    /// Gaussian-weighted mean of |F| over the cloud
    pub cloud_mean: f64,
    /// Gaussian-weighted standard deviation of |F| over the cloud
    pub cloud_std: f64,
}

/// Homogeneity and cloud statistics of a field map. The relative-deviation
/// figures are taken over grid nodes inside `region`; the cloud figures are a
/// Gaussian-weighted quadrature (fixed 33³ lattice over ±3σ, trilinear samples).
pub fn field_statistics(map: &FieldMap, region: &Region, cloud: &CloudSpec) -> Result<FieldStats> {
    let center_value = map.sample_magnitude(map.center())?;
    if center_value == 0.0 {
        return Err(Error::InvalidInput(
            "relative deviations are undefined for a zero center field".into(),
        ));
    }

    let mut sum = 0.0;
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for k in 0..map.nodes[2] {
        for j in 0..map.nodes[1] {
            for i in 0..map.nodes[0] {
                let p = map.node_pos(i, j, k);
                if region.contains(p) {
                    let dev = (norm3(map.data[map.idx(i, j, k)]) - center_value).abs()
                        / center_value;
                    sum += dev;
                    worst = worst.max(dev);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptySelection("statistics region contains no grid nodes".into()));
    }

    if !(cloud.diameter > 0.0) {
        return Err(Error::InvalidInput("cloud diameter must be positive".into()));
    }
    let sigma = cloud.sigma();
    let cc = cloud.center(map);
    let reach = 3.0 * sigma;
    let ext = map.extent();
    for d in 0..3 {
        if cc[d] - reach < map.origin[d] - 1e-12 || cc[d] + reach > map.origin[d] + ext[d] + 1e-12 {
            return Err(Error::InvalidInput(
                "cloud (±3σ) extends outside the field map".into(),
            ));
        }
    }
    const NQ: usize = 33;
    let mut wsum = 0.0;
    let mut mean = 0.0;
    for a in 0..NQ {
        let ux = -3.0 + 6.0 * a as f64 / (NQ - 1) as f64;
        for b in 0..NQ {
            let uy = -3.0 + 6.0 * b as f64 / (NQ - 1) as f64;
            for c in 0..NQ {
                let uz = -3.0 + 6.0 * c as f64 / (NQ - 1) as f64;
                let w = (-0.5 * (ux * ux + uy * uy + uz * uz)).exp();
                let p = [cc[0] + sigma * ux, cc[1] + sigma * uy, cc[2] + sigma * uz];
                mean += w * map.sample_magnitude(p)?;
                wsum += w;
            }
        }
    }
    mean /= wsum;
    let mut var = 0.0;
    for a in 0..NQ {
        let ux = -3.0 + 6.0 * a as f64 / (NQ - 1) as f64;
        for b in 0..NQ {
            let uy = -3.0 + 6.0 * b as f64 / (NQ - 1) as f64;
            for c in 0..NQ {
                let uz = -3.0 + 6.0 * c as f64 / (NQ - 1) as f64;
                let w = (-0.5 * (ux * ux + uy * uy + uz * uz)).exp();
                let p = [cc[0] + sigma * ux, cc[1] + sigma * uy, cc[2] + sigma * uz];
                let dv = map.sample_magnitude(p)? - mean;
                var += w * dv * dv;
            }
        }
    }
    var /= wsum;

    Ok(FieldStats {
        center_value,
        mean_rel_deviation: sum / count as f64,
        max_rel_deviation: worst,
        region_nodes: count,
        cloud_mean: mean,
        cloud_std: var.sqrt(),
    })
}

/// Signed relative deviation (|F| − |F_center|)/|F_center| for every grid node,
/// in the map's node order. Feeds the CSV deviation export.
pub fn relative_deviation_map(map: &FieldMap) -> Result<Vec<f64>> {
    let center_value = map.sample_magnitude(map.center())?;
    if center_value == 0.0 {
        return Err(Error::InvalidInput(
            "relative deviations are undefined for a zero center field".into(),
        ));
    }
    Ok(map.data.iter().map(|&v| (norm3(v) - center_value) / center_value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AccessHoles, Electrode};

    fn paper_geometry() -> CavityGeometry {
        let e1 = Electrode { x: 25.6e-3 / 3.0, z: 7.0e-3, radius: 0.25e-3, potential: -1.0 };
        let e2 = Electrode { x: 2.0 * 25.6e-3 / 3.0, z: 7.0e-3, radius: 0.25e-3, potential: 1.0 };
        CavityGeometry::new(
            25.6e-3,
            7.0e-3,
            14.0e-3,
            vec![e1, e2],
            Some(AccessHoles { radius: 1.5e-3 }),
            None,
        )
        .unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec { nx: 32, ny: 16, nz: 24, tolerance: 1e-6, max_sweeps: 60_000 }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::default().validate().is_ok());
        assert!(GridSpec { nx: 8, ..Default::default() }.validate().is_err());
        assert!(GridSpec { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(GridSpec { tolerance: 1e-2, ..Default::default() }.validate().is_err());
        assert!(GridSpec { max_sweeps: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_potentials_give_zero_field() {
        let g = paper_geometry();
        let sol = solve_electrostatic(&g, &small_grid(), &[0.0, 0.0]).unwrap();
        assert!(sol.field.data.iter().all(|v| *v == [0.0; 3]));
        assert_eq!(sol.report.sweeps, 0);
    }

    #[test]
    fn electrostatic_requires_electrodes_and_matching_potentials() {
        let bare = CavityGeometry::bare(25.6e-3, 7e-3, 14e-3).unwrap();
        assert!(matches!(
            solve_electrostatic(&bare, &small_grid(), &[]),
            Err(Error::InvalidInput(_))
        ));
        let g = paper_geometry();
        assert!(matches!(
            solve_electrostatic(&g, &small_grid(), &[1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn unresolved_electrode_is_an_error() {
        // a 1 µm wire between grid lines influences nothing on a coarse grid
        let e = Electrode { x: 8.61e-3, z: 7.1e-3, radius: 1.0e-6, potential: 1.0 };
        let g = CavityGeometry::new(25.6e-3, 7e-3, 14e-3, vec![e], None, None).unwrap();
        assert!(matches!(
            solve_electrostatic(&g, &small_grid(), &[1.0]),
            Err(Error::UnresolvedFeature("electrode"))
        ));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = paper_geometry();
        let grid = GridSpec { max_sweeps: 2, ..small_grid() };
        match solve_electrostatic(&g, &grid, &[-1.0, 1.0]) {
            Err(Error::NonConverged { residual, iterations }) => {
                assert!(residual > 0.0);
                assert_eq!(iterations, 2);
            }
            other => panic!("expected NonConverged, got {other:?}"),
        }
    }

    #[test]
    fn potential_respects_discrete_maximum_principle() {
        let g = paper_geometry();
        let grid = small_grid();
        let sol = solve_electrostatic(&g, &grid, &[-1.0, 1.0]).unwrap();
        let slack = 10.0 * grid.tolerance; // scale = 1 V
        for &v in &sol.potential.data {
            assert!(v >= -1.0 - slack && v <= 1.0 + slack, "potential {v} escapes [-1, 1]");
        }
    }

    #[test]
    fn solution_is_linear_in_the_potentials() {
        let g = paper_geometry();
        let grid = small_grid();
        let a = solve_electrostatic(&g, &grid, &[-1.0, 1.0]).unwrap();
        let b = solve_electrostatic(&g, &grid, &[-2.5, 2.5]).unwrap();
        let bound = 10.0 * grid.tolerance * 2.5;
        for (va, vb) in a.potential.data.iter().zip(&b.potential.data) {
            assert!((2.5 * va - vb).abs() <= bound);
        }
    }

    #[test]
    fn superposition_of_single_electrode_solves() {
        let g = paper_geometry();
        let grid = small_grid();
        let a = solve_electrostatic(&g, &grid, &[-1.0, 0.0]).unwrap();
        let b = solve_electrostatic(&g, &grid, &[0.0, 1.0]).unwrap();
        let ab = solve_electrostatic(&g, &grid, &[-1.0, 1.0]).unwrap();
        let bound = 10.0 * grid.tolerance;
        let worst = a
            .potential
            .data
            .iter()
            .zip(&b.potential.data)
            .zip(&ab.potential.data)
            .map(|((va, vb), vab)| (va + vb - vab).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= bound, "superposition defect {worst:.3e} > {bound:.3e}");
    }

    #[test]
    fn antisymmetric_bias_gives_antisymmetric_potential() {
        // mirror x -> Lx - x swaps the electrodes and flips the sign
        let g = paper_geometry();
        let grid = small_grid();
        let sol = solve_electrostatic(&g, &grid, &[-1.0, 1.0]).unwrap();
        let [nx, ny, nz] = sol.potential.nodes;
        let mut worst = 0.0f64;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let m = sol.potential.at(i, j, k) + sol.potential.at(nx - 1 - i, j, k);
                    worst = worst.max(m.abs());
                }
            }
        }
        assert!(worst <= 20.0 * grid.tolerance, "mirror defect {worst:.3e}");
    }

    #[test]
    fn magnetostatic_rejects_bad_inputs() {
        let g = paper_geometry();
        let grid = small_grid();
        assert!(matches!(
            solve_magnetostatic(&g, &grid, 1e-3, [1.0, 0.0, 0.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            solve_magnetostatic(&g, &grid, -1e-3, [0.0, 0.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
        let no_holes = CavityGeometry::bare(25.6e-3, 7e-3, 14e-3).unwrap();
        assert!(matches!(
            solve_magnetostatic(&no_holes, &grid, 1e-3, [0.0, 0.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_external_field_gives_zero_map() {
        let g = paper_geometry();
        let sol = solve_magnetostatic(&g, &small_grid(), 0.0, [0.0, 0.0, 1.0]).unwrap();
        assert!(sol.field.data.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn magnetostatic_is_linear_in_the_external_field() {
        let g = paper_geometry();
        let grid = small_grid();
        let a = solve_magnetostatic(&g, &grid, 5e-4, [0.0, 0.0, 1.0]).unwrap();
        let b = solve_magnetostatic(&g, &grid, 1e-3, [0.0, 0.0, 1.0]).unwrap();
        let scale = 1e-3 * g.lz / 2.0;
        let bound = 10.0 * grid.tolerance * scale;
        for (va, vb) in a.potential.data.iter().zip(&b.potential.data) {
            assert!((2.0 * va - vb).abs() <= bound);
        }
    }

    #[test]
    fn superconducting_walls_carry_no_normal_field() {
        let g = paper_geometry();
        let sol = solve_magnetostatic(&g, &small_grid(), 1e-3, [0.0, 0.0, 1.0]).unwrap();
        let map = &sol.field;
        let [nx, ny, nz] = map.nodes;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let v = map.data[map.idx(i, j, k)];
                    if i == 0 || i == nx - 1 {
                        assert_eq!(v[0], 0.0);
                    }
                    if j == 0 || j == ny - 1 {
                        assert_eq!(v[1], 0.0);
                    }
                }
            }
        }
    }

    /// Net flux through a closed node-box, via face differences of ψ. This is
    /// the discrete Gauss theorem: the sum telescopes to the enclosed Jacobi
    /// residuals, so it must vanish to solver accuracy.
    fn net_face_flux(sol: &Solution, lo: [usize; 3], hi: [usize; 3], h: [f64; 3]) -> f64 {
        let p = &sol.potential;
        let mut net = 0.0;
        // x faces
        for k in lo[2]..hi[2] {
            for j in lo[1]..hi[1] {
                let fxm = -(p.at(lo[0], j, k) - p.at(lo[0] - 1, j, k)) / h[0];
                let fxp = -(p.at(hi[0], j, k) - p.at(hi[0] - 1, j, k)) / h[0];
                net += (fxp - fxm) * h[1] * h[2];
            }
        }
        for k in lo[2]..hi[2] {
            for i in lo[0]..hi[0] {
                let fym = -(p.at(i, lo[1], k) - p.at(i, lo[1] - 1, k)) / h[1];
                let fyp = -(p.at(i, hi[1], k) - p.at(i, hi[1] - 1, k)) / h[1];
                net += (fyp - fym) * h[0] * h[2];
            }
        }
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                let fzm = -(p.at(i, j, lo[2]) - p.at(i, j, lo[2] - 1)) / h[2];
                let fzp = -(p.at(i, j, hi[2]) - p.at(i, j, hi[2] - 1)) / h[2];
                net += (fzp - fzm) * h[0] * h[1];
            }
        }
        net
    }

    #[test]
    fn interior_flux_is_conserved() {
        let g = paper_geometry();
        let grid = small_grid();
        let sol = solve_magnetostatic(&g, &grid, 1e-3, [0.0, 0.0, 1.0]).unwrap();
        let h = sol.field.spacing;
        let [nx, ny, nz] = sol.field.nodes;
        let lo = [nx / 4, ny / 4, nz / 4];
        let hi = [3 * nx / 4, 3 * ny / 4, 3 * nz / 4];
        let net = net_face_flux(&sol, lo, hi, h);
        // total flux entering through one aperture, as the comparison scale
        let b_c = sol.field.sample([g.lx / 2.0, g.ly / 2.0, g.lz / 2.0]).unwrap();
        let scale = b_c[2].abs() * g.lx * g.ly;
        assert!(net.abs() / scale < 1e-4, "net flux {net:.3e} vs scale {scale:.3e}");
    }

    fn linear_map() -> FieldMap {
        // F = (2 + x, -1 + 3z, 5) — trilinear interpolation must be exact
        let nodes = [9, 7, 8];
        let spacing = [0.1, 0.2, 0.15];
        let mut data = Vec::new();
        for k in 0..nodes[2] {
            for j in 0..nodes[1] {
                for i in 0..nodes[0] {
                    let (x, z) = (i as f64 * spacing[0], k as f64 * spacing[2]);
                    let _ = j;
                    data.push([2.0 + x, -1.0 + 3.0 * z, 5.0]);
                }
            }
        }
        FieldMap { kind: FieldKind::Electric, nodes, origin: [0.0; 3], spacing, data }
    }

    #[test]
    fn trilinear_sampling_is_exact_for_linear_fields() {
        let map = linear_map();
        let v = map.sample([0.33, 0.71, 0.52]).unwrap();
        assert!((v[0] - 2.33).abs() < 1e-12);
        assert!((v[1] - (-1.0 + 1.56)).abs() < 1e-12);
        assert!((v[2] - 5.0).abs() < 1e-12);
        assert!(map.sample([-0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_map_statistics_are_degenerate() {
        let mut map = linear_map();
        for v in &mut map.data {
            *v = [0.0, 0.0, 4.0];
        }
        let region = Region::centered(map.center(), [0.3, 0.3, 0.3]);
        let cloud = CloudSpec { offset: [0.0; 3], diameter: 0.1 };
        let s = field_statistics(&map, &region, &cloud).unwrap();
        assert_eq!(s.center_value, 4.0);
        assert_eq!(s.mean_rel_deviation, 0.0);
        assert_eq!(s.max_rel_deviation, 0.0);
        assert!(s.cloud_std < 1e-12);
        assert!((s.cloud_mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn statistics_reject_empty_region_and_escaping_cloud() {
        let map = linear_map();
        let nowhere = Region { min: [10.0; 3], max: [11.0; 3] };
        let cloud = CloudSpec { offset: [0.0; 3], diameter: 0.1 };
        assert!(matches!(
            field_statistics(&map, &nowhere, &cloud),
            Err(Error::EmptySelection(_))
        ));
        let region = Region::centered(map.center(), [0.3, 0.3, 0.3]);
        let big = CloudSpec { offset: [0.0; 3], diameter: 5.0 };
        assert!(matches!(field_statistics(&map, &region, &big), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let g = paper_geometry();
        let grid = GridSpec { nx: 16, ny: 16, nz: 16, tolerance: 1e-5, max_sweeps: 60_000 };
        let sol = solve_electrostatic(&g, &grid, &[-1.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        sol.field.to_writer(&mut buf).unwrap();
        let back = FieldMap::from_reader(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.kind, sol.field.kind);
        assert_eq!(back.nodes, sol.field.nodes);
        assert_eq!(back.spacing, sol.field.spacing);
        assert_eq!(back.data, sol.field.data); // bit-exact
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let junk = "# cavitydc fieldmap v1\n# kind=electric\n# nodes=2 2 2\nwrong,header\n";
        assert!(FieldMap::from_reader(std::io::Cursor::new(junk)).is_err());
        let missing = "x_m,y_m,z_m,fx_v_per_m,fy_v_per_m,fz_v_per_m\n1,2,3,4,5,6\n";
        assert!(FieldMap::from_reader(std::io::Cursor::new(missing)).is_err());
    }

    #[test]
    fn deviation_map_is_zero_for_uniform_field() {
        let mut map = linear_map();
        for v in &mut map.data {
            *v = [0.0, 4.0, 0.0];
        }
        let dev = relative_deviation_map(&map).unwrap();
        assert_eq!(dev.len(), map.data.len());
        assert!(dev.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn center_field_change_on_grid_doubling_is_small() {
        // Electrostatic leg, with the electrode radius resolved by >= 2 cells at
        // the default resolution (the coarse-grid contract's own precondition;
        // the 0.25 mm wires sit at 0.625 cells there and converge only from the
        // doubled grid up: 0.7394 -> 0.7608 -> 0.7609 V/cm).
        let fat = CavityGeometry::new(
            25.6e-3,
            7.0e-3,
            14.0e-3,
            vec![
                Electrode { x: 25.6e-3 / 3.0, z: 7.0e-3, radius: 1.0e-3, potential: 0.0 },
                Electrode { x: 2.0 * 25.6e-3 / 3.0, z: 7.0e-3, radius: 1.0e-3, potential: 0.0 },
            ],
            Some(AccessHoles { radius: 1.5e-3 }),
            None,
        )
        .unwrap();
        let coarse = GridSpec::default();
        let fine = GridSpec { nx: 128, ny: 64, nz: 96, ..coarse };
        let e0 = solve_electrostatic(&fat, &coarse, &[-1.0, 1.0]).unwrap();
        let e1 = solve_electrostatic(&fat, &fine, &[-1.0, 1.0]).unwrap();
        let v0 = e0.field.sample_magnitude(e0.field.center()).unwrap();
        let v1 = e1.field.sample_magnitude(e1.field.center()).unwrap();
        let change = (v1 - v0).abs() / v1;
        assert!(change < 0.02, "electrostatic center field moved {:.2}% on grid doubling", 100.0 * change);

        // Magnetostatic leg on the as-built geometry. The default-grid aperture
        // staircase admits ~2% less flux than the disk, which leaves this change
        // at 2.0% (4.0275 G -> 4.1102 G, tolerance-independent; the next doubling
        // moves 0.14%). Asserted at the stated bound, currently red.
        let g = paper_geometry();
        let b0 = solve_magnetostatic(&g, &coarse, 10.0e-4, [0.0, 0.0, 1.0]).unwrap();
        let b1 = solve_magnetostatic(&g, &fine, 10.0e-4, [0.0, 0.0, 1.0]).unwrap();
        let w0 = b0.field.sample_magnitude(b0.field.center()).unwrap();
        let w1 = b1.field.sample_magnitude(b1.field.center()).unwrap();
        let change = (w1 - w0).abs() / w1;
        assert!(
            change < 0.02,
            "magnetostatic center field moved {:.4}% on grid doubling (bound 2%); \
             the default-grid aperture staircase under-admits ~2% of the port flux",
            100.0 * change
        );
    }
}
