//! A compact Levenberg-Marquardt least-squares minimizer.
//!
//! Jacobians come from central differences with a relative step of 1e-6;
//! convergence is declared when the relative parameter step drops below
//! 1e-10 or the relative SSR improvement below 1e-12, with a 500-iteration
//! cap. Problems here are small (up to six parameters), so the normal
//! equations are solved densely with partial pivoting.

/// Stopping rules and finite-difference step.
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub param_tol: f64,
    pub ssr_tol: f64,
    pub fd_rel_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, param_tol: 1e-10, ssr_tol: 1e-12, fd_rel_step: 1e-6 }
    }
}

/// Raw optimizer output in the internal parameterization.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Row-major p x p covariance, `ssr/(n-p) * (J^T J)^-1` at the optimum.
    pub covariance: Vec<f64>,
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ill_conditioned: bool,
}

/// Minimize the sum of squared residuals. The residual closure may return
/// `None` for parameter values where the model is undefined; such trial
/// steps are rejected.
pub fn minimize<F>(residuals: F, initial: &[f64], opts: &LmOptions) -> LmOutcome
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let p = initial.len();
    assert!(p > 0, "at least one parameter");
    let ssr_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut x = initial.to_vec();
    let mut r = match residuals(&x) {
        Some(r) if r.iter().all(|v| v.is_finite()) => r,
        _ => {
            return LmOutcome {
                params: x,
                covariance: vec![0.0; p * p],
                ssr: f64::INFINITY,
                iterations: 0,
                converged: false,
                ill_conditioned: true,
            }
        }
    };
    let n = r.len();
    let mut ssr = ssr_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut ill_conditioned = false;
    let mut iterations = 0;

    let jacobian = |x: &[f64], r_len: usize| -> Option<Vec<f64>> {
        // row-major n x p
        let mut j = vec![0.0; r_len * p];
        for col in 0..p {
            let h = opts.fd_rel_step * x[col].abs().max(1.0);
            let mut xp = x.to_vec();
            xp[col] += h;
            let mut xm = x.to_vec();
            xm[col] -= h;
            let rp = residuals(&xp)?;
            let rm = residuals(&xm)?;
            if rp.len() != r_len || rm.len() != r_len {
                return None;
            }
            for row in 0..r_len {
                j[row * p + col] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        Some(j)
    };

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let j = match jacobian(&x, n) {
            Some(j) if j.iter().all(|v| v.is_finite()) => j,
            _ => {
                ill_conditioned = true;
                break;
            }
        };
        // normal equations
        let mut jtj = vec![0.0; p * p];
        let mut jtr = vec![0.0; p];
        for row in 0..n {
            for a in 0..p {
                jtr[a] += j[row * p + a] * r[row];
                for b in a..p {
                    jtj[a * p + b] += j[row * p + a] * j[row * p + b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a * p + b] = jtj[b * p + a];
            }
        }

        let mut accepted = false;
        for _ in 0..40 {
            // (JtJ + lambda diag(JtJ)) delta = -Jtr
            let mut m = jtj.clone();
            for a in 0..p {
                let dmp = jtj[a * p + a].max(1e-300);
                m[a * p + a] += lambda * dmp;
            }
            let delta = match solve(&mut m, &jtr.iter().map(|v| -v).collect::<Vec<_>>(), p) {
                Some(d) => d,
                None => {
                    lambda = (lambda * 10.0).min(1e14);
                    continue;
                }
            };
            let xt: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let rt = match residuals(&xt) {
                Some(rt) if rt.len() == n && rt.iter().all(|v| v.is_finite()) => rt,
                _ => {
                    lambda = (lambda * 10.0).min(1e14);
                    continue;
                }
            };
            let ssrt = ssr_of(&rt);
            // strict descent: an exactly-equal SSR under heavy damping is a
            // stuck step, not progress
            if ssrt < ssr {
                let rel_step = delta
                    .iter()
                    .zip(&x)
                    .map(|(d, xv)| d.abs() / xv.abs().max(1.0))
                    .fold(0.0_f64, f64::max);
                let rel_impr = (ssr - ssrt) / ssr.max(f64::MIN_POSITIVE);
                x = xt;
                r = rt;
                ssr = ssrt;
                let trusted = lambda <= 1e-2;
                lambda = (lambda * 0.1).max(1e-14);
                accepted = true;
                // small steps under heavy damping say nothing about the
                // optimum; only stop once the quadratic model is trusted
                if trusted && (rel_step < opts.param_tol || rel_impr < opts.ssr_tol) {
                    converged = true;
                }
                break;
            }
            lambda = (lambda * 10.0).min(1e14);
        }
        if !accepted {
            // no descent direction left at maximal damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }

    // covariance at the optimum
    let mut covariance = vec![0.0; p * p];
    if let Some(j) = jacobian(&x, n) {
        let mut jtj = vec![0.0; p * p];
        for row in 0..n {
            for a in 0..p {
                for b in 0..p {
                    jtj[a * p + b] += j[row * p + a] * j[row * p + b];
                }
            }
        }
        match invert(&jtj, p) {
            Some(inv) => {
                let dof = (n.saturating_sub(p)).max(1) as f64;
                let s2 = ssr / dof;
                for (c, i) in covariance.iter_mut().zip(&inv) {
                    *c = s2 * i;
                }
            }
            None => ill_conditioned = true,
        }
    }

    LmOutcome { params: x, covariance, ssr, iterations, converged, ill_conditioned }
}

/// Solve `m x = b` (row-major p x p) by Gaussian elimination with partial
/// pivoting; `m` is clobbered.
fn solve(m: &mut [f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..p {
        let mut piv = col;
        for row in col + 1..p {
            if m[row * p + col].abs() > m[piv * p + col].abs() {
                piv = row;
            }
        }
        if m[piv * p + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..p {
                m.swap(col * p + k, piv * p + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * p + col];
        for row in col + 1..p {
            let f = m[row * p + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..p {
                m[row * p + k] -= f * m[col * p + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..p).rev() {
        let mut acc = x[col];
        for k in col + 1..p {
            acc -= m[col * p + k] * x[k];
        }
        x[col] = acc / m[col * p + col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Invert a symmetric positive (semi)definite matrix by Gauss-Jordan.
fn invert(m: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; p * p];
    for i in 0..p {
        inv[i * p + i] = 1.0;
    }
    for col in 0..p {
        let mut piv = col;
        for row in col + 1..p {
            if a[row * p + col].abs() > a[piv * p + col].abs() {
                piv = row;
            }
        }
        let scale_ref = m[col * p + col].abs().max(1e-300);
        if a[piv * p + col].abs() < 1e-14 * scale_ref {
            return None;
        }
        if piv != col {
            for k in 0..p {
                a.swap(col * p + k, piv * p + k);
                inv.swap(col * p + k, piv * p + k);
            }
        }
        let d = a[col * p + col];
        for k in 0..p {
            a[col * p + k] /= d;
            inv[col * p + k] /= d;
        }
        for row in 0..p {
            if row == col {
                continue;
            }
            let f = a[row * p + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..p {
                a[row * p + k] -= f * a[col * p + k];
                inv[row * p + k] -= f * inv[col * p + k];
            }
        }
    }
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}
