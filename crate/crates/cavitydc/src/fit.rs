//! Damped least-squares (Levenberg–Marquardt) curve fitting, shared by the
//! spectrum and transmission fitters.
//!
//! The model is a closure `f(params, x) -> f64`; derivatives come from forward
//! differences with caller-provided step hints, and the damped normal equations
//! are solved by Gaussian elimination with partial pivoting — every fit in this
//! crate has at most six parameters, so a dense solve is the simplest correct
//! tool.

use crate::error::{Error, Result};

pub(crate) struct LmOptions {
    pub max_iters: usize,
    /// accepted step counts as converged when every parameter moves by less
    /// than `tol_step * (|p| + tol_step)`
    pub tol_step: f64,
    /// ... or when it reduces chi² by less than this relative amount
    pub tol_reduction: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iters: 200, tol_step: 1e-10, tol_reduction: 1e-12, lambda0: 1e-3 }
    }
}

#[derive(Debug)]
pub(crate) struct LmFit {
    pub params: Vec<f64>,
    // fit diagnostics; asserted on in tests, available to future callers
    #[allow(dead_code)]
    pub chi2: f64,
    #[allow(dead_code)]
    pub iterations: usize,
    /// diagonal of (JᵀWJ)⁻¹ · chi²/dof at the solution; None if the normal
    /// matrix is singular there (a flat parameter direction)
    pub variance: Option<Vec<f64>>,
}

/// Solve `a · x = b` in place (row-major `n×n`); `b` becomes the solution.
/// Returns false when a pivot collapses (singular system).
pub(crate) fn solve_linear(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        b[col] /= a[col * n + col];
        for row in 0..col {
            b[row] -= a[row * n + col] * b[col];
        }
    }
    true
}

/// Weighted nonlinear least squares: minimize Σ wᵢ (yᵢ − f(p, xᵢ))².
///
/// `steps` are absolute forward-difference steps per parameter (must be > 0 at
/// the scale the parameter actually varies on). `weights = None` means unit
/// weights. Fails when no downhill step exists from the initial guess or the
/// iteration budget runs out before the step/χ² tolerances are met.
pub(crate) fn curve_fit(
    model: impl Fn(&[f64], f64) -> f64,
    xs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    p0: &[f64],
    steps: &[f64],
    opts: &LmOptions,
) -> Result<LmFit> {
    let n = xs.len();
    let np = p0.len();
    if ys.len() != n || weights.map(|w| w.len()).unwrap_or(n) != n {
        return Err(Error::InvalidInput("x, y, and weight lengths differ".into()));
    }
    if steps.len() != np {
        return Err(Error::InvalidInput("one difference step per parameter required".into()));
    }
    if np == 0 || steps.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidInput("difference steps must be positive and finite".into()));
    }
    if n < np {
        return Err(Error::TooFewSamples { needed: np, got: n });
    }
    let w = |i: usize| weights.map(|w| w[i]).unwrap_or(1.0);

    let cost = |p: &[f64]| -> f64 {
        let mut c = 0.0;
        for i in 0..n {
            let r = ys[i] - model(p, xs[i]);
            c += w(i) * r * r;
        }
        c
    };

    let mut p = p0.to_vec();
    let mut chi2 = cost(&p);
    if !chi2.is_finite() {
        return Err(Error::FitFailed("model is non-finite at the initial guess".into()));
    }

    let mut lambda = opts.lambda0;
    let mut jtj = vec![0.0; np * np];
    let mut jtr = vec![0.0; np];
    let mut jrow = vec![0.0; np];
    let mut mat = vec![0.0; np * np];
    let mut rhs = vec![0.0; np];

    for iter in 1..=opts.max_iters {
        jtj.fill(0.0);
        jtr.fill(0.0);
        let mut ptrial = p.clone();
        for i in 0..n {
            let f0 = model(&p, xs[i]);
            for j in 0..np {
                ptrial[j] = p[j] + steps[j];
                jrow[j] = (model(&ptrial, xs[i]) - f0) / steps[j];
                ptrial[j] = p[j];
            }
            let wi = w(i);
            let r = ys[i] - f0;
            if !r.is_finite() || jrow.iter().any(|v| !v.is_finite()) {
                return Err(Error::FitFailed(format!(
                    "model or derivative non-finite at x = {}",
                    xs[i]
                )));
            }
            for j in 0..np {
                jtr[j] += wi * jrow[j] * r;
                for k in j..np {
                    jtj[j * np + k] += wi * jrow[j] * jrow[k];
                }
            }
        }
        for j in 0..np {
            for k in 0..j {
                jtj[j * np + k] = jtj[k * np + j];
            }
        }

        // retry with stronger damping until a step lowers chi2
        loop {
            mat.copy_from_slice(&jtj);
            for j in 0..np {
                mat[j * np + j] += lambda * jtj[j * np + j];
            }
            rhs.copy_from_slice(&jtr);
            let solvable = solve_linear(&mut mat, &mut rhs, np);
            if solvable {
                let trial: Vec<f64> = p.iter().zip(&rhs).map(|(pi, d)| pi + d).collect();
                let trial_chi2 = cost(&trial);
                if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                    let step_small = rhs
                        .iter()
                        .zip(&p)
                        .all(|(d, pi)| d.abs() < opts.tol_step * (pi.abs() + opts.tol_step));
                    let reduction_small = chi2 - trial_chi2 <= opts.tol_reduction * chi2;
                    p = trial;
                    chi2 = trial_chi2;
                    lambda = (lambda * 0.1).max(1e-12);
                    if step_small || reduction_small {
                        return finish(model, xs, weights, p, chi2, iter, steps);
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                // damping saturated: accept the current point if any step ever
                // improved on the guess, otherwise the problem is degenerate
                if iter > 1 || chi2 < cost(p0) {
                    return finish(model, xs, weights, p, chi2, iter, steps);
                }
                return Err(Error::FitFailed(
                    "no downhill step from the initial guess (degenerate or singular model)".into(),
                ));
            }
        }
    }
    Err(Error::FitFailed(format!("no convergence in {} iterations", opts.max_iters)))
}

/// Covariance diagonal at the solution, then package the result.
fn finish(
    model: impl Fn(&[f64], f64) -> f64,
    xs: &[f64],
    weights: Option<&[f64]>,
    p: Vec<f64>,
    chi2: f64,
    iterations: usize,
    steps: &[f64],
) -> Result<LmFit> {
    let n = xs.len();
    let np = p.len();
    let mut jtj = vec![0.0; np * np];
    let mut jrow = vec![0.0; np];
    let mut ptrial = p.clone();
    for i in 0..n {
        let f0 = model(&p, xs[i]);
        for j in 0..np {
            ptrial[j] = p[j] + steps[j];
            jrow[j] = (model(&ptrial, xs[i]) - f0) / steps[j];
            ptrial[j] = p[j];
        }
        let wi = weights.map(|w| w[i]).unwrap_or(1.0);
        for j in 0..np {
            for k in 0..np {
                jtj[j * np + k] += wi * jrow[j] * jrow[k];
            }
        }
    }
    // invert by solving against unit columns
    let mut variance = Some(vec![0.0; np]);
    let scale = if n > np { chi2 / (n - np) as f64 } else { 0.0 };
    for j in 0..np {
        let mut a = jtj.clone();
        let mut e = vec![0.0; np];
        e[j] = 1.0;
        if !solve_linear(&mut a, &mut e, np) {
            variance = None;
            break;
        }
        if let Some(v) = variance.as_mut() {
            v[j] = e[j] * scale;
        }
    }
    Ok(LmFit { params: p, chi2, iterations, variance })
}
