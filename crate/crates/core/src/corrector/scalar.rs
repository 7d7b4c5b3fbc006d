//! Closed-form single-coordinate minimizers of the row/column block problem.
//!
//! For an off-diagonal coordinate `x = u_j` the Schur complement is the
//! concave quadratic `q(x) = αx² + βx + γ` and the objective is
//!
//! ```text
//! φ(x) = -log q(x) - 2t [log(ρ + b - x) + log(ρ - b + x)]
//! ```
//!
//! whose stationary points are the roots of a cubic. The diagonal entry
//! `w` minimizes `-log(w - s) - t log(ρ + c - w) - t log(ρ - c + w)`,
//! whose stationary points are the roots of a quadratic.

use crate::error::{Error, Result};

/// Box slack kept between an update and the box edge, relative to `ρ`.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// `q(x) = αx² + βx + γ` for one off-diagonal coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CoordCoefficients {
    #[inline]
    pub fn schur_at(&self, x: f64) -> f64 {
        (self.alpha * x + self.beta) * x + self.gamma
    }

    /// Open interval on which `q > 0`.
    fn positive_interval(&self) -> (f64, f64) {
        let CoordCoefficients { alpha, beta, gamma } = *self;
        let disc = beta * beta - 4.0 * alpha * gamma;
        if !(disc > 0.0) {
            return (f64::NAN, f64::NAN);
        }
        let sq = disc.sqrt();
        let qq = -0.5 * (beta + beta.signum() * sq);
        let (r1, r2) = if qq != 0.0 { (qq / alpha, gamma / qq) } else { (-sq / (2.0 * alpha), sq / (2.0 * alpha)) };
        (r1.min(r2), r1.max(r2))
    }
}

/// Coefficients of `p1 x³ + p2 x² + p3 x + p4 = 0`, the stationarity
/// condition of the coordinate objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicCoefficients {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl CubicCoefficients {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        ((self.p1 * x + self.p2) * x + self.p3) * x + self.p4
    }

    #[inline]
    fn deriv(&self, x: f64) -> f64 {
        (3.0 * self.p1 * x + 2.0 * self.p2) * x + self.p3
    }
}

/// Clearing denominators in `φ'(x) = 0` gives
///
/// ```text
/// p1 = 2(1+2t)α
/// p2 = (1+4t)β - 4(1+t)α b
/// p3 = 4tγ - 2(1+2t)β b + 2α(b² - ρ²)
/// p4 = β(b² - ρ²) - 4tγ b
/// ```
pub fn cubic_coefficients(cc: &CoordCoefficients, b: f64, rho: f64, t: f64) -> CubicCoefficients {
    let CoordCoefficients { alpha, beta, gamma } = *cc;
    let b2r2 = b * b - rho * rho;
    CubicCoefficients {
        p1: 2.0 * (1.0 + 2.0 * t) * alpha,
        p2: (1.0 + 4.0 * t) * beta - 4.0 * (1.0 + t) * alpha * b,
        p3: 4.0 * t * gamma - 2.0 * (1.0 + 2.0 * t) * beta * b + 2.0 * alpha * b2r2,
        p4: beta * b2r2 - 4.0 * t * gamma * b,
    }
}

/// Real roots of the cubic (trigonometric form when three are real,
/// Cardano otherwise), each refined by Newton on the polynomial.
pub fn real_cubic_roots(c: &CubicCoefficients) -> Vec<f64> {
    let a = c.p2 / c.p1;
    let b = c.p3 / c.p1;
    let d = c.p4 / c.p1;
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * d) / 54.0;
    let shift = a / 3.0;
    let q3 = q * q * q;
    let mut roots = Vec::with_capacity(3);
    if r * r < q3 {
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tau = 2.0 * std::f64::consts::PI;
        for k in 0..3 {
            roots.push(m * ((theta + tau * k as f64) / 3.0).cos() - shift);
        }
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q3).max(0.0).sqrt()).cbrt();
        let small = if big != 0.0 { q / big } else { 0.0 };
        roots.push(big + small - shift);
        // Double root when the two complex roots collapse onto the real axis.
        if (big - small).abs() <= 1e-12 * (big.abs() + small.abs()) {
            roots.push(-0.5 * (big + small) - shift);
        }
    }
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let fx = c.eval(*x);
            let dfx = c.deriv(*x);
            if dfx == 0.0 || fx == 0.0 {
                break;
            }
            let next = *x - fx / dfx;
            if next.is_finite() && c.eval(next).abs() < fx.abs() {
                *x = next;
            } else {
                break;
            }
        }
    }
    roots
}

/// Value of the coordinate objective `φ`; `+∞` outside its domain.
pub fn coordinate_objective(cc: &CoordCoefficients, b: f64, rho: f64, t: f64, x: f64) -> f64 {
    let q = cc.schur_at(x);
    let up = rho + b - x;
    let lo = rho - b + x;
    if !(q > 0.0 && up > 0.0 && lo > 0.0) {
        return f64::INFINITY;
    }
    -q.ln() - 2.0 * t * (up.ln() + lo.ln())
}

fn coordinate_derivatives(cc: &CoordCoefficients, b: f64, rho: f64, t: f64, x: f64) -> (f64, f64) {
    let q = cc.schur_at(x);
    let dq = 2.0 * cc.alpha * x + cc.beta;
    let up = rho + b - x;
    let lo = rho - b + x;
    let d1 = -dq / q + 2.0 * t / up - 2.0 * t / lo;
    let d2 = -2.0 * cc.alpha / q + (dq / q) * (dq / q) + 2.0 * t / (up * up) + 2.0 * t / (lo * lo);
    (d1, d2)
}

/// Minimizes `φ` over its domain by selecting among the real cubic roots.
///
/// `φ` is strictly convex on its domain, so the in-domain stationary root is
/// the minimizer. Near the box edge the decrease it buys can be below the
/// rounding level of `φ` itself, so a root whose value ties with the current
/// point (to rounding) is still taken when it has the smaller `|φ'|`.
/// Returns `x_current` when no root lands strictly inside the domain.
pub fn solve_coordinate(cc: &CoordCoefficients, b: f64, rho: f64, t: f64, x_current: f64) -> Result<f64> {
    let cubic = cubic_coefficients(cc, b, rho, t);
    let roots = real_cubic_roots(&cubic);
    if roots.is_empty() || roots.iter().any(|r| !r.is_finite()) {
        return Err(Error::NumericalBreakdown);
    }
    let (qlo, qhi) = cc.positive_interval();
    let guard = BOUNDARY_GUARD * rho;
    let lo = (b - rho + guard).max(qlo);
    let hi = (b + rho - guard).min(qhi);

    let mut best: Option<(f64, f64)> = None;
    for mut x in roots {
        if !(x > lo && x < hi) {
            continue;
        }
        // One Newton step on φ' cleans up cancellation in the closed form.
        let (d1, d2) = coordinate_derivatives(cc, b, rho, t, x);
        if d2 > 0.0 {
            let polished = x - d1 / d2;
            if polished > lo && polished < hi {
                let (p1, _) = coordinate_derivatives(cc, b, rho, t, polished);
                if p1.abs() < d1.abs() {
                    x = polished;
                }
            }
        }
        let v = coordinate_objective(cc, b, rho, t, x);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((x, v));
        }
    }
    let Some((x, v)) = best else {
        return Ok(x_current);
    };
    let cur = coordinate_objective(cc, b, rho, t, x_current);
    let slack = 16.0 * f64::EPSILON * cur.abs().max(1.0);
    let accept = v < cur
        || (v <= cur + slack
            && coordinate_derivatives(cc, b, rho, t, x).0.abs()
                < coordinate_derivatives(cc, b, rho, t, x_current).0.abs());
    Ok(if accept { x } else { x_current })
}

/// Objective of the diagonal update `w` given `s = uᵀV⁻¹u`.
pub fn diagonal_objective(s: f64, c: f64, rho: f64, t: f64, w: f64) -> f64 {
    let q = w - s;
    let up = rho + c - w;
    let lo = rho - c + w;
    if !(q > 0.0 && up > 0.0 && lo > 0.0) {
        return f64::INFINITY;
    }
    -q.ln() - t * (up.ln() + lo.ln())
}

/// Root of `(1+2t)w² - 2(ts + c(1+t))w + c² - ρ² + 2tcs = 0` with
/// `w > s` and `|w - c| < ρ`.
pub fn solve_diagonal(s: f64, c: f64, rho: f64, t: f64) -> Result<f64> {
    let fail = || Error::NoFeasibleRoot { s, c, rho, t };
    let qa = 1.0 + 2.0 * t;
    let qb = -2.0 * (t * s + c * (1.0 + t));
    let qc = c * c - rho * rho + 2.0 * t * c * s;
    let disc = qb * qb - 4.0 * qa * qc;
    if !(disc >= 0.0) {
        return Err(fail());
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (qb + if qb >= 0.0 { sq } else { -sq });
    let mut roots = vec![qq / qa];
    if qq != 0.0 {
        roots.push(qc / qq);
    }

    let guard = BOUNDARY_GUARD * rho;
    let lo = (c - rho + guard).max(s);
    let hi = c + rho - guard;
    let mut best: Option<(f64, f64)> = None;
    for mut w in roots {
        if !(w > lo && w < hi) {
            continue;
        }
        // Newton polish on the stationarity condition.
        let q = w - s;
        let up = rho + c - w;
        let dn = rho - c + w;
        let d1 = -1.0 / q + t / up - t / dn;
        let d2 = 1.0 / (q * q) + t / (up * up) + t / (dn * dn);
        let polished = w - d1 / d2;
        if polished > lo && polished < hi {
            w = polished;
        }
        let v = diagonal_objective(s, c, rho, t, w);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((w, v));
        }
    }
    best.map(|(w, _)| w).ok_or_else(fail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cubic_symmetric_case() {
        let cc = CoordCoefficients { alpha: -1.0, beta: 0.0, gamma: 1.0 };
        let c = cubic_coefficients(&cc, 0.0, 1.0, 0.5);
        assert_eq!(c.p1, -4.0);
        assert_eq!(c.p2, 0.0);
        assert_eq!(c.p4, 0.0);
        // 4tγ + 2α(b² - ρ²) = 2 + 2 = 4: roots 0 and ±1, the latter on the box edge.
        assert_eq!(c.p3, 4.0);
        let mut roots = real_cubic_roots(&c);
        roots.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(roots[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roots[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(roots[2], 1.0, epsilon = 1e-12);
        assert_eq!(solve_coordinate(&cc, 0.0, 1.0, 0.5, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn odd_cubic_has_zero_root() {
        let cc = CoordCoefficients { alpha: -0.7, beta: 0.0, gamma: 2.0 };
        let c = cubic_coefficients(&cc, 0.0, 0.9, 0.1);
        assert_eq!(c.p2, 0.0);
        assert_eq!(c.p4, 0.0);
        assert!(real_cubic_roots(&c).iter().any(|r| r.abs() < 1e-14));
    }

    #[test]
    fn cubic_root_finder_recovers_known_roots() {
        for roots in [[1.0, 2.0, 3.0], [-0.5, -0.5, 4.0], [1e-3, 7.0, -2.0]] {
            let [a, b, c] = roots;
            let p = CubicCoefficients {
                p1: 2.0,
                p2: -2.0 * (a + b + c),
                p3: 2.0 * (a * b + b * c + a * c),
                p4: -2.0 * a * b * c,
            };
            let found = real_cubic_roots(&p);
            for r in roots {
                assert!(found.iter().any(|f| (f - r).abs() < 1e-6), "{r} not in {found:?}");
            }
        }
        // One real root.
        let p = CubicCoefficients { p1: 1.0, p2: 0.0, p3: 1.0, p4: -2.0 };
        let found = real_cubic_roots(&p);
        assert_eq!(found.len(), 1);
        assert_abs_diff_eq!(found[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn coordinate_never_increases_objective() {
        let cc = CoordCoefficients { alpha: -1.0, beta: 0.2, gamma: 1.21 };
        for &x0 in &[-0.6, -0.2, 0.0, 0.3, 0.9, 1.25] {
            let x = solve_coordinate(&cc, 0.3, 1.0, 0.1, x0).unwrap();
            assert!(coordinate_objective(&cc, 0.3, 1.0, 0.1, x) <= coordinate_objective(&cc, 0.3, 1.0, 0.1, x0));
        }
    }

    #[test]
    fn diagonal_symmetric_case() {
        let w = solve_diagonal(0.0, 0.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(w, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn diagonal_large_t_centers() {
        let w = solve_diagonal(0.2, 1.5, 0.8, 1e6).unwrap();
        assert_abs_diff_eq!(w, 1.5, epsilon = 1e-3);
    }

    #[test]
    fn diagonal_small_t_hits_upper_edge() {
        let w = solve_diagonal(0.0, 2.0, 1.0, 1e-10).unwrap();
        assert!(w < 3.0 && 3.0 - w < 1e-8);
    }

    #[test]
    fn diagonal_infeasible_data() {
        // s beyond the upper box edge leaves an empty domain.
        assert!(matches!(
            solve_diagonal(5.0, 1.0, 1.0, 0.1),
            Err(Error::NoFeasibleRoot { .. })
        ));
    }
}
