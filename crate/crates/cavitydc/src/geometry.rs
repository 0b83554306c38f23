//! Rectangular-box cavity geometry, dc hardware layout, and TE_m0l mode structure.
//!
//! Axis conventions (fixed throughout the crate): x spans the long side `Lx`,
//! y spans the short side `Ly` (the bias electrodes run along y), z spans `Lz`
//! (the atomic-beam axis; the access holes sit on the two z-facing walls). The
//! cavity interior is the box [0,Lx]×[0,Ly]×[0,Lz].
//!
//! The mode family of interest is TE_m0l (n = 0): the electric field has a
//! single component along y,
//!
//!   E_y(x,z) = sin(mπx/Lx)·sin(lπz/Lz),
//!
//! peak-normalized to |E| = 1 at the antinodes. The magnetic field returned by
//! [`ModeField::field`] is c·B in the same normalization (so |E|² and |B|²
//! integrate to equal energies and c²|B|²/|E|² ratios come out directly).
//!
//! The eigenfrequency of the ideal box is
//!
//!   ν = (c/2)·√((m/Lx)² + (n/Ly)² + (l/Lz)²),
//!
//! and the geometry factor G = ω·μ0·∫|H|²dV / ∮|H_t|²dS relates wall surface
//! resistance to quality factor via Q = G/R_s. G is evaluated here by midpoint
//! quadrature of the analytic mode fields over the ideal box — electrodes,
//! holes and ports are deliberately ignored at this level.

use crate::constants::{MU_0, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Bias electrode: a cylinder spanning the full cavity height along y,
/// centered at (x, z) in the cross-sectional plane.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Electrode {
    /// axis position along x (m)
    pub x: f64,
    /// axis position along z (m)
    pub z: f64,
    /// cylinder radius (m)
    pub radius: f64,
    /// dc potential applied to this electrode (V)
    pub potential: f64,
}

/// Circular beam-access apertures, one on each z-facing wall, centered at
/// (Lx/2, Ly/2).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AccessHoles {
    /// aperture radius (m)
    pub radius: f64,
}

/// Side port on the x = 0 wall (at y = Ly/2, z = Lz/2) through which a tuning
/// rod enters along +x.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RodPort {
    /// bore diameter (m); an inserted rod must fit through
    pub diameter: f64,
    /// current insertion depth of whatever rod is mounted (m), 0 = retracted
    pub insertion_depth: f64,
    /// informal material tag carried through to reports ("sapphire", "niobium", ...)
    pub material: String,
}

/// Inner dimensions plus the dc hardware that perturbs the ideal box.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CavityGeometry {
    /// inner width along x (m)
    pub lx: f64,
    /// inner height along y (m)
    pub ly: f64,
    /// inner length along z (m)
    pub lz: f64,
    pub electrodes: Vec<Electrode>,
    pub access_holes: Option<AccessHoles>,
    pub rod_port: Option<RodPort>,
}

impl CavityGeometry {
    /// Validating constructor. Electrodes must sit strictly inside the cross
    /// section with clearance for their radius, must not collide with the
    /// beam-access flight path, and holes must fit on their wall.
    pub fn new(
        lx: f64,
        ly: f64,
        lz: f64,
        electrodes: Vec<Electrode>,
        access_holes: Option<AccessHoles>,
        rod_port: Option<RodPort>,
    ) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lz > 0.0) || !(lx + ly + lz).is_finite() {
            return Err(Error::InvalidInput(format!(
                "cavity dimensions must be positive and finite, got {lx} x {ly} x {lz} m"
            )));
        }
        for (idx, e) in electrodes.iter().enumerate() {
            if !(e.radius > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "electrode {idx}: radius must be positive"
                )));
            }
            // strictly inside, with room for the cylinder itself
            if e.x - e.radius <= 0.0 || e.x + e.radius >= lx || e.z - e.radius <= 0.0
                || e.z + e.radius >= lz
            {
                return Err(Error::InvalidInput(format!(
                    "electrode {idx}: cylinder (x={}, z={}, r={}) m must lie strictly inside the cross section",
                    e.x, e.z, e.radius
                )));
            }
            if let Some(h) = &access_holes {
                // electrode axis (along y) vs. beam flight cylinder (along z
                // through (Lx/2, Ly/2)): perpendicular skew lines, minimal
                // distance is |x_e - Lx/2|
                if (e.x - 0.5 * lx).abs() <= e.radius + h.radius {
                    return Err(Error::InvalidInput(format!(
                        "electrode {idx} intersects the beam access path"
                    )));
                }
            }
        }
        if let Some(h) = &access_holes {
            if !(h.radius > 0.0) {
                return Err(Error::InvalidInput("hole radius must be positive".into()));
            }
            if 2.0 * h.radius >= lx.min(ly) {
                return Err(Error::InvalidInput(
                    "access holes do not fit on the z-facing walls".into(),
                ));
            }
        }
        if let Some(p) = &rod_port {
            if !(p.diameter > 0.0) || p.insertion_depth < 0.0 || p.insertion_depth > lx {
                return Err(Error::InvalidInput(
                    "rod port: diameter must be positive, insertion depth within [0, Lx]".into(),
                ));
            }
        }
        Ok(Self { lx, ly, lz, electrodes, access_holes, rod_port })
    }

    /// Box without any dc hardware (mode-structure work only).
    pub fn bare(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        Self::new(lx, ly, lz, Vec::new(), None, None)
    }

    /// Geometric center of the box (m).
    pub fn center(&self) -> [f64; 3] {
        [0.5 * self.lx, 0.5 * self.ly, 0.5 * self.lz]
    }

    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.lz
    }

    /// Is `p` inside the box (walls inclusive)?
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0.0..=self.lx).contains(&p[0])
            && (0.0..=self.ly).contains(&p[1])
            && (0.0..=self.lz).contains(&p[2])
    }
}

/// TE mode index (m, n, l) along (x, y, z). At most one index may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
    pub l: u32,
}

impl ModeIndex {
    pub fn new(m: u32, n: u32, l: u32) -> Result<Self> {
        let zeros = [m, n, l].iter().filter(|&&v| v == 0).count();
        if zeros > 1 {
            return Err(Error::InvalidMode(format!(
                "TE{m}{n}{l}: at most one index may be zero"
            )));
        }
        Ok(Self { m, n, l })
    }

    /// Convenience constructor for the TE_m0l family this crate works with.
    pub fn te_m0l(m: u32, l: u32) -> Result<Self> {
        if m == 0 || l == 0 {
            return Err(Error::InvalidMode(format!(
                "TE{m}0{l}: m and l must both be nonzero"
            )));
        }
        Ok(Self { m, n: 0, l })
    }

    pub fn is_te_m0l(&self) -> bool {
        self.n == 0 && self.m >= 1 && self.l >= 1
    }

    pub fn label(&self) -> String {
        format!("TE{}{}{}", self.m, self.n, self.l)
    }

    fn require_te_m0l(&self) -> Result<()> {
        if self.is_te_m0l() {
            Ok(())
        } else {
            Err(Error::InvalidMode(format!(
                "{} is outside the supported TE_m0l family",
                self.label()
            )))
        }
    }
}

/// Ideal-box eigenfrequency (Hz) of a TE_m0l mode.
pub fn resonance_frequency(geom: &CavityGeometry, mode: ModeIndex) -> Result<f64> {
    mode.require_te_m0l()?;
    let fx = mode.m as f64 / geom.lx;
    let fy = mode.n as f64 / geom.ly;
    let fz = mode.l as f64 / geom.lz;
    Ok(0.5 * SPEED_OF_LIGHT * (fx * fx + fy * fy + fz * fz).sqrt())
}

/// x-positions (m) of the E-field node planes of a TE_m0l mode: {k·Lx/m}.
pub fn node_planes(geom: &CavityGeometry, mode: ModeIndex) -> Result<Vec<f64>> {
    mode.require_te_m0l()?;
    Ok((1..mode.m).map(|k| k as f64 * geom.lx / mode.m as f64).collect())
}

/// E and c·B of a mode at one point, dimensionless, peak-|E| = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFieldSample {
    /// electric field direction ŷ: (0, E_y, 0)
    pub e: [f64; 3],
    /// c·B in the peak-E normalization: (B_x, 0, B_z)
    pub b: [f64; 3],
}

/// Analytic standing-wave field of one TE_m0l mode over a given box.
#[derive(Debug, Clone)]
pub struct ModeField<'a> {
    geom: &'a CavityGeometry,
    mode: ModeIndex,
    kx: f64,
    kz: f64,
    /// kx/k and kz/k, the c·B component amplitudes
    bx_amp: f64,
    bz_amp: f64,
}

impl<'a> ModeField<'a> {
    pub fn new(geom: &'a CavityGeometry, mode: ModeIndex) -> Result<Self> {
        mode.require_te_m0l()?;
        let kx = mode.m as f64 * PI / geom.lx;
        let kz = mode.l as f64 * PI / geom.lz;
        let k = kx.hypot(kz);
        Ok(Self { geom, mode, kx, kz, bx_amp: kz / k, bz_amp: kx / k })
    }

    pub fn mode(&self) -> ModeIndex {
        self.mode
    }

    /// Fields at `position` (m). Walls are part of the domain; outside is an error.
    pub fn field(&self, position: [f64; 3]) -> Result<ModeFieldSample> {
        if !self.geom.contains(position) {
            return Err(Error::OutsideDomain(position[0], position[1], position[2]));
        }
        Ok(self.field_unchecked(position))
    }

    /// Same as [`Self::field`] without the domain check — quadrature hot path.
    pub(crate) fn field_unchecked(&self, position: [f64; 3]) -> ModeFieldSample {
        let (sx, cx) = (self.kx * position[0]).sin_cos();
        let (sz, cz) = (self.kz * position[2]).sin_cos();
        ModeFieldSample {
            e: [0.0, sx * sz, 0.0],
            b: [self.bx_amp * sx * cz, 0.0, -self.bz_amp * cx * sz],
        }
    }
}

fn norm_sq(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Geometry factor G = ω·μ0·∫|H|²dV / ∮|H_t|²dS (Ω) of a TE_m0l mode of the
/// ideal box, by midpoint quadrature of the analytic fields. Q = G/R_s for a
/// uniform wall surface resistance R_s; G itself is conductivity-independent.
pub fn geometry_factor(geom: &CavityGeometry, mode: ModeIndex) -> Result<f64> {
    let field = ModeField::new(geom, mode)?;
    let omega = 2.0 * PI * resonance_frequency(geom, mode)?;

    // volume integral of |cB|²; resolution comfortably beyond the highest
    // spatial harmonic of the mode
    let (nx, ny, nz) = (
        (48 * mode.m.max(1) as usize).min(256),
        16,
        (48 * mode.l.max(1) as usize).min(256),
    );
    let (hx, hy, hz) = (geom.lx / nx as f64, geom.ly / ny as f64, geom.lz / nz as f64);
    let mut vol = 0.0;
    for i in 0..nx {
        let x = (i as f64 + 0.5) * hx;
        for j in 0..ny {
            let y = (j as f64 + 0.5) * hy;
            for k in 0..nz {
                let z = (k as f64 + 0.5) * hz;
                vol += norm_sq(field.field_unchecked([x, y, z]).b);
            }
        }
    }
    vol *= hx * hy * hz;

    // surface integral of the tangential |cB|² over all six walls
    let mut surf = 0.0;
    let nu = 192usize;
    let nv = 192usize;
    let mut add_face = |point: &dyn Fn(f64, f64) -> [f64; 3], normal: [f64; 3], lu: f64, lv: f64| {
        let (du, dv) = (lu / nu as f64, lv / nv as f64);
        let mut acc = 0.0;
        for a in 0..nu {
            let u = (a as f64 + 0.5) * du;
            for b in 0..nv {
                let v = (b as f64 + 0.5) * dv;
                let s = field.field_unchecked(point(u, v));
                let bn = s.b[0] * normal[0] + s.b[1] * normal[1] + s.b[2] * normal[2];
                acc += norm_sq(s.b) - bn * bn;
            }
        }
        surf += acc * du * dv;
    };
    let (lx, ly, lz) = (geom.lx, geom.ly, geom.lz);
    add_face(&|u, v| [0.0, u, v], [1.0, 0.0, 0.0], ly, lz);
    add_face(&|u, v| [lx, u, v], [1.0, 0.0, 0.0], ly, lz);
    add_face(&|u, v| [u, 0.0, v], [0.0, 1.0, 0.0], lx, lz);
    add_face(&|u, v| [u, ly, v], [0.0, 1.0, 0.0], lx, lz);
    add_face(&|u, v| [u, v, 0.0], [0.0, 0.0, 1.0], lx, ly);
    add_face(&|u, v| [u, v, lz], [0.0, 0.0, 1.0], lx, ly);

    // constant prefactors of H = B/μ0 cancel in the ratio
    Ok(omega * MU_0 * vol / surf)
}
