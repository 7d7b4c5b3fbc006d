//! Slow, trusted oracles for validation at small `n`.
//!
//! Everything here is written against plain `nalgebra` factorizations so it
//! shares no numerical code with the block solver it is used to check.

use nalgebra::{DMatrix, DVector};

use crate::barrier::Problem;
use crate::error::{Error, Result};
use crate::predictor::PredictorSystem;
use crate::symmat::{PdFactor, SymMatrix};

#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 200,
        }
    }
}

/// Upper-triangle index pairs `(a, b)` with `a <= b`, in column order.
fn free_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|b| (0..=b).map(move |a| (a, b))).collect()
}

struct Eval {
    value: f64,
    w: DMatrix<f64>,
    /// `(L² + M²)/t` and `L - M` elementwise.
    d: DMatrix<f64>,
    lm: DMatrix<f64>,
}

fn evaluate(p: &Problem, u: &DMatrix<f64>, t: f64) -> Option<Eval> {
    let n = u.nrows();
    let chol = u.clone().cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let rho = p.rho();
    let sigma = p.sigma().as_matrix();
    let mut d = DMatrix::zeros(n, n);
    let mut lm = DMatrix::zeros(n, n);
    let mut barrier = 0.0;
    for j in 0..n {
        for i in 0..n {
            let s1 = rho + sigma[(i, j)] - u[(i, j)];
            let s2 = rho - sigma[(i, j)] + u[(i, j)];
            if !(s1 > 0.0 && s2 > 0.0) {
                return None;
            }
            barrier += s1.ln() + s2.ln();
            let (l, m) = (t / s1, t / s2);
            d[(i, j)] = (l * l + m * m) / t;
            lm[(i, j)] = l - m;
        }
    }
    let value = -logdet - t * barrier;
    if !value.is_finite() {
        return None;
    }
    Some(Eval {
        value,
        w: chol.inverse(),
        d,
        lm,
    })
}

/// Minimizes the barrier objective by damped Newton on the `n(n+1)/2`
/// upper-triangle variables, with backtracking that keeps every iterate
/// strictly inside the box and positive definite.
///
/// Returns once `‖H‖_F <= tol`, or once the Newton decrement falls below
/// what double precision can resolve at the current objective scale.
pub fn newton_solve(p: &Problem, u0: &SymMatrix, t: f64, cfg: &OracleConfig) -> Result<PdFactor> {
    let n = p.dim();
    if u0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u0.dim(),
        });
    }
    let pairs = free_pairs(n);
    let nv = pairs.len();
    let mut u = u0.as_matrix().clone();
    let mut cur = evaluate(p, &u, t).ok_or_else(|| Error::Infeasible("newton start outside the domain".into()))?;
    let mut h_norm = f64::INFINITY;
    for iteration in 0..cfg.max_iters {
        let h = &cur.lm - &cur.w;
        h_norm = h.norm();
        if h_norm <= cfg.tol {
            return PdFactor::new(SymMatrix::symmetrize(&u));
        }
        let mut grad = DVector::zeros(nv);
        let mut hess = DMatrix::zeros(nv, nv);
        for (k, &(a, b)) in pairs.iter().enumerate() {
            grad[k] = if a == b { h[(a, a)] } else { 2.0 * h[(a, b)] };
            for (m, &(c, d)) in pairs.iter().enumerate().skip(k) {
                let v = basis_trace(&cur.w, (a, b), (c, d));
                hess[(k, m)] = v;
                hess[(m, k)] = v;
            }
            hess[(k, k)] += if a == b { cur.d[(a, a)] } else { 2.0 * cur.d[(a, b)] };
        }
        let chol = hess.cholesky().ok_or(Error::LineSearchFailure { iteration })?;
        let step = chol.solve(&(-&grad));
        let decrement = -grad.dot(&step);
        if decrement <= 1e-15 * cur.value.abs().max(1.0) {
            return PdFactor::new(SymMatrix::symmetrize(&u));
        }
        let mut dir = DMatrix::zeros(n, n);
        for (k, &(a, b)) in pairs.iter().enumerate() {
            dir[(a, b)] = step[k];
            dir[(b, a)] = step[k];
        }
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &u + &dir * s;
            if let Some(ev) = evaluate(p, &cand, t) {
                if ev.value <= cur.value - 0.25 * s * decrement {
                    accepted = Some((cand, ev));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((cand, ev)) => {
                u = cand;
                cur = ev;
            }
            // No measurable decrease left: converged to working precision.
            None if decrement <= 1e-10 * cur.value.abs().max(1.0) => {
                return PdFactor::new(SymMatrix::symmetrize(&u));
            }
            None => return Err(Error::LineSearchFailure { iteration }),
        }
    }
    Err(Error::MaxItersExceeded {
        iterations: cfg.max_iters,
        residual: h_norm,
    })
}

/// `tr(W E_p W E_q)` for symmetric basis matrices `E_(a,b) = e_a e_bᵀ + e_b e_aᵀ`
/// (`e_a e_aᵀ` on the diagonal).
fn basis_trace(w: &DMatrix<f64>, (a, b): (usize, usize), (c, d): (usize, usize)) -> f64 {
    let parts = |x: usize, y: usize| -> Vec<(usize, usize)> {
        if x == y {
            vec![(x, x)]
        } else {
            vec![(x, y), (y, x)]
        }
    };
    let mut acc = 0.0;
    for &(i, j) in &parts(a, b) {
        for &(k, l) in &parts(c, d) {
            // tr(W e_i e_jᵀ W e_k e_lᵀ) = W_li W_jk
            acc += w[(l, i)] * w[(j, k)];
        }
    }
    acc
}

/// Newton continuation in `t`: solves at a geometric sequence of barrier
/// weights from `t_start` down to `t_final`, warm-starting each stage.
pub fn newton_continuation(p: &Problem, u0: &SymMatrix, t_start: f64, t_final: f64, cfg: &OracleConfig) -> Result<PdFactor> {
    let mut u = u0.clone();
    let mut t = t_start.max(t_final);
    loop {
        let f = newton_solve(p, &u, t, cfg)?;
        if t <= t_final {
            return Ok(f);
        }
        u = f.into_matrix();
        t = (t * 0.1).max(t_final);
    }
}

/// Golden-section search for the minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Dense `n² × n²` operator `U⁻¹ ⊗ U⁻¹ + diag(vec D)` in column-major
/// `vec` order (entry `(i, j)` at index `i + n·j`).
pub fn explicit_system(p: &Problem, u: &PdFactor, t: f64) -> Result<DMatrix<f64>> {
    let state = crate::barrier::multipliers(p, u.matrix(), t)?;
    let d = PredictorSystem::barrier_diagonal(&state);
    Ok(kronecker_operator(u.inverse(), &d))
}

pub(crate) fn kronecker_operator(w: &SymMatrix, d: &SymMatrix) -> DMatrix<f64> {
    let n = w.dim();
    let mut a = DMatrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                for k in 0..n {
                    // vec(W P W)_(i,j) = Σ W_ik P_kl W_lj
                    a[(row, k + n * l)] = w.get(i, k) * w.get(l, j);
                }
            }
            a[(row, row)] += d.get(i, j);
        }
    }
    a
}
