//! Independent numerical evaluations of the focusing operators.
//!
//! Neither route touches the closed forms in the parent module:
//!
//! * [`fd_oracle`] differentiates the Weyl kernel `g(R_z) = exp(+jkR)/R`
//!   numerically, `F_n = 2 pi / (-j)^n * g^{(n+1)}(R_z)`.
//! * [`spectral_oracle`] integrates `H_n = k_z^n` against the plane-wave
//!   kernel over the transverse wave-vector plane, visible and evanescent
//!   parts included.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Displacement, FilterOrder};
use crate::geometry::{kz, TransverseK, WaveNumber};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result, C64};

/// Accuracy order of the central stencils before extrapolation.
const STENCIL_ORDER: i32 = 6;

/// Central finite-difference weights for the `m`-th derivative on the
/// integer offsets `-p..=p` (Fornberg's recursion).
pub fn central_weights(m: usize, p: usize) -> Vec<f64> {
    let offsets: Vec<f64> = (-(p as i64)..=p as i64).map(|i| i as f64).collect();
    let n = offsets.len();
    assert!(m < n, "stencil of {n} points cannot resolve derivative order {m}");
    // c[i][d]: weight of point i for derivative d
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for d in (1..=mn).rev() {
                    c[i][d] = c1 * (d as f64 * c[i - 1][d - 1] - c5 * c[i - 1][d]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for d in (1..=mn).rev() {
                c[j][d] = (c4 * c[j][d] - d as f64 * c[j][d - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Half-width `p` of the sixth-order central stencil for derivative `m`.
pub fn stencil_half_width(m: usize) -> usize {
    (4 + m).div_ceil(2)
}

fn stencil_derivative(f: &impl Fn(f64) -> C64, weights: &[f64], p: usize, h: f64, m: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (i, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            acc += *w * f((i as f64 - p as f64) * h);
        }
    }
    acc / h.powi(m as i32)
}

/// `m`-th derivative at offset zero of `f(delta)`, from sixth-order central
/// stencils at steps `h` and `h/2` combined by one Richardson step.
pub fn central_derivative_at_offset(f: impl Fn(f64) -> C64, m: usize, h: f64) -> C64 {
    let p = stencil_half_width(m);
    let weights = central_weights(m, p);
    let coarse = stencil_derivative(&f, &weights, p, h, m);
    let fine = stencil_derivative(&f, &weights, p, 0.5 * h, m);
    let factor = 2f64.powi(STENCIL_ORDER);
    fine + (fine - coarse) / (factor - 1.0)
}

/// `m`-th derivative of `f` at `x`; see [`central_derivative_at_offset`].
pub fn central_derivative(f: impl Fn(f64) -> C64, x: f64, m: usize, h: f64) -> C64 {
    central_derivative_at_offset(|delta| f(x + delta), m, h)
}

/// Finite-difference step: a tenth of a radian of phase, `h = 0.1 / k`,
/// with a 10 um fallback at `k = 0`.
pub fn fd_step(k: WaveNumber) -> f64 {
    if k.value() > 0.0 {
        0.1 / k.value()
    } else {
        1e-5
    }
}

/// `(-j)^n`.
fn minus_j_pow(n: u32) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Finite-difference evaluation of `F_n` from the Weyl kernel.
pub fn fd_oracle(d: Displacement, k: WaveNumber, n: FilterOrder) -> Result<C64> {
    let m = n.get() as usize + 1;
    let h = fd_step(k);
    let reach = stencil_half_width(m) as f64 * h;
    if !(d.rz + reach < 0.0) {
        return Err(Error::StencilCrossesPlane { rz: d.rz, reach });
    }
    // g(R_z0 + delta) = exp(jk R0) * exp(jk (R - R0)) / R. The common phase
    // is pulled out and R - R0 is formed without cancellation, otherwise the
    // rounding of R is amplified by kR in the stencil differences.
    let r0 = d.norm();
    let two_rz = 2.0 * d.rz;
    let kv = k.value();
    let g = move |delta: f64| {
        let shift = delta * (two_rz + delta);
        let r = (r0 * r0 + shift).sqrt();
        let dr = shift / (r + r0);
        let (s, c) = (kv * dr).sin_cos();
        C64::new(c, s) / r
    };
    let (s0, c0) = (kv * r0).sin_cos();
    let deriv = central_derivative_at_offset(g, m, h) * C64::new(c0, s0);
    Ok(2.0 * PI * deriv / minus_j_pow(n.get()))
}

/// Result of a truncated spectral integration.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    /// One value per filter order `0..=n_max`.
    pub values: Vec<C64>,
    /// Upper bound on the neglected evanescent tail, per order.
    pub tail_bounds: Vec<f64>,
    /// `2 pi k^{n+2} / (n+2)`, the magnitude scale of the visible region.
    pub visible_scales: Vec<f64>,
    pub kt_max: f64,
}

/// Relative tail tolerance accepted by [`spectral_oracle`].
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Relative tail target used when choosing `kt_max` automatically.
const AUTO_TAIL_TARGET: f64 = 1e-14;

/// Gauss-Legendre order per panel.
const PANEL_ORDER: usize = 16;

/// Largest phase excursion allowed inside one panel, radians.
const PANEL_PHASE: f64 = 8.0;

/// `2 pi int_{A}^{inf} alpha^{n+1} exp(-a alpha) d alpha`, the evanescent
/// integrand bound with `|angular factor| <= 2 pi` folded in.
fn evanescent_tail(n: u32, a: f64, alpha_max: f64) -> f64 {
    let m = n as i32 + 1;
    let mut sum = 0.0;
    // m! / i! * A^i / a^{m - i + 1}
    let mut ratio = 1.0; // m! / i!, built downward from i = m
    for i in (0..=m).rev() {
        sum += ratio * alpha_max.powi(i) / a.powi(m - i + 1);
        ratio *= i as f64;
    }
    2.0 * PI * (-a * alpha_max).exp() * sum
}

fn visible_scale(n: u32, k: f64) -> f64 {
    2.0 * PI * k.powi(n as i32 + 2) / (n as f64 + 2.0)
}

/// Smallest `kt_max` whose evanescent tail is below `1e-14` of the visible
/// scale for every order up to `n_max`.
pub fn auto_kt_max(d: Displacement, k: WaveNumber, n_max: FilterOrder) -> f64 {
    let a = d.rz.abs();
    let kv = k.value();
    let ok = |alpha: f64| {
        (0..=n_max.get()).all(|n| evanescent_tail(n, a, alpha) <= AUTO_TAIL_TARGET * visible_scale(n, kv))
    };
    let mut hi = 1.0 / a;
    while !ok(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (kv * kv + hi * hi).sqrt()
}

/// Trapezoidal rule in angle for `int_0^{2 pi} exp(j x cos phi) d phi`.
///
/// The node count grows with `x` so the rule stays exact to rounding. For
/// `N` divisible by four the sine parts cancel and the sum folds onto the
/// first quadrant.
struct AngularRule {
    tables: HashMap<usize, Vec<f64>>,
}

impl AngularRule {
    const MIN_NODES: usize = 256;

    fn new() -> Self {
        Self { tables: HashMap::new() }
    }

    fn node_count(x: f64) -> usize {
        let want = x + 10.0 * x.cbrt() + 48.0;
        let n = (want / 32.0).ceil() as usize * 32;
        n.max(Self::MIN_NODES)
    }

    fn eval(&mut self, x: f64) -> f64 {
        let n = Self::node_count(x.abs());
        let cosines = self.tables.entry(n).or_insert_with(|| {
            (0..=n / 4).map(|m| (2.0 * PI * m as f64 / n as f64).cos()).collect()
        });
        let q = n / 4;
        // phi = 0 and phi = pi give cos(x); phi = pi/2 and 3pi/2 give 1
        let mut sum = 2.0 * x.cos() + 2.0;
        for c in &cosines[1..q] {
            sum += 4.0 * (x * c).cos();
        }
        2.0 * PI * sum / n as f64
    }
}

/// Spectral integration of `F_n` for `n = 0..=n_max`, truncated at
/// `|k_t| = kt_max`, without the truncation check.
pub fn spectral_integral(d: Displacement, k: WaveNumber, n_max: FilterOrder, kt_max: f64) -> Result<SpectralEstimate> {
    if !(d.rz < 0.0) {
        return Err(Error::WrongBranch { rz: d.rz });
    }
    let kv = k.value();
    if !(kv > 0.0) {
        return Err(Error::InvalidArgument("spectral oracle needs k > 0".into()));
    }
    if !(kt_max >= kv) {
        return Err(Error::InvalidArgument(format!("kt_max = {kt_max} must be >= k = {kv}")));
    }
    let orders = n_max.get() as usize + 1;
    let rho = d.transverse_sqr().sqrt();
    let a = -d.rz;
    let gl = GaussLegendre::new(PANEL_ORDER);
    let mut angular = AngularRule::new();
    let mut values = vec![C64::new(0.0, 0.0); orders];

    // Visible disc, parametrized by the polar angle theta of the wave vector:
    // k_t = k sin(theta), k_z = k cos(theta), k_t dk_t = k^2 sin cos d theta.
    // Integrand: k_z^n exp(-j k_z R_z) times the angular factor.
    let phase_span = (kv * rho + kv * a) * PI / 2.0;
    let panels = (phase_span / PANEL_PHASE).ceil() as usize + 2;
    let mut powers = vec![0.0; orders];
    gl.for_each_panel_node(0.0, PI / 2.0, panels, |theta, w| {
        let (st, ct) = theta.sin_cos();
        let kzv = kv * ct;
        // the visible branch of the dispersion relation, taken from geometry
        let branch = kz(k, TransverseK::new(kv * st, 0.0)).value.re;
        debug_assert!((branch - kzv).abs() <= 1e-9 * kv);
        let jac = kv * kv * st * ct;
        let ang = angular.eval(kv * st * rho);
        let (s, c) = (kzv * a).sin_cos(); // exp(-j k_z R_z) = exp(+j k_z a)
        let base = C64::new(c, s) * (w * jac * ang);
        powers[0] = 1.0;
        for n in 1..orders {
            powers[n] = powers[n - 1] * kzv;
        }
        for n in 0..orders {
            values[n] += base * powers[n];
        }
    });

    // Evanescent ring, parametrized by alpha = |k_z| = sqrt(k_t^2 - k^2):
    // k_t dk_t = alpha d alpha, integrand conj(k_z)^n exp(-alpha a) with
    // k_z = -j alpha.
    let alpha_max = (kt_max * kt_max - kv * kv).max(0.0).sqrt();
    if alpha_max > 0.0 {
        let span = alpha_max * (rho + a);
        let panels = (span / PANEL_PHASE).ceil() as usize + 2;
        let mut terms = vec![C64::new(0.0, 0.0); orders];
        gl.for_each_panel_node(0.0, alpha_max, panels, |alpha, w| {
            let kt = (kv * kv + alpha * alpha).sqrt();
            let branch = kz(k, TransverseK::new(kt, 0.0)).value;
            let kz_conj = branch.conj();
            let ang = angular.eval(kt * rho);
            let base = w * alpha * (-alpha * a).exp() * ang;
            terms[0] = C64::new(base, 0.0);
            for n in 1..orders {
                terms[n] = terms[n - 1] * kz_conj;
            }
            for n in 0..orders {
                values[n] += terms[n];
            }
        });
    }

    let tail_bounds = (0..orders as u32).map(|n| evanescent_tail(n, a, alpha_max)).collect();
    let visible_scales = (0..orders as u32).map(|n| visible_scale(n, kv)).collect();
    Ok(SpectralEstimate {
        values,
        tail_bounds,
        visible_scales,
        kt_max,
    })
}

/// Spectral-quadrature evaluation of `F_n` with the truncation check.
pub fn spectral_oracle(d: Displacement, k: WaveNumber, n: FilterOrder, kt_max: f64) -> Result<C64> {
    let est = spectral_integral(d, k, n, kt_max)?;
    let i = n.get() as usize;
    check_tail(&est, i)?;
    Ok(est.values[i])
}

/// All orders `0..=n_max` at once, `kt_max` chosen by [`auto_kt_max`].
pub fn spectral_oracle_all(d: Displacement, k: WaveNumber, n_max: FilterOrder) -> Result<Vec<C64>> {
    if !(d.rz < 0.0) {
        return Err(Error::WrongBranch { rz: d.rz });
    }
    let kt_max = auto_kt_max(d, k, n_max);
    let est = spectral_integral(d, k, n_max, kt_max)?;
    for i in 0..est.values.len() {
        check_tail(&est, i)?;
    }
    Ok(est.values)
}

fn check_tail(est: &SpectralEstimate, i: usize) -> Result<()> {
    let limit = TAIL_TOLERANCE * est.visible_scales[i];
    if est.tail_bounds[i] > limit {
        return Err(Error::TruncationInsufficient {
            tail: est.tail_bounds[i],
            limit,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(n: u32) -> FilterOrder {
        FilterOrder::new(n).unwrap()
    }

    #[test]
    fn fornberg_weights_match_tables() {
        let w = central_weights(1, 3);
        let want = [-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = central_weights(2, 3);
        let want = [1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(stencil_half_width(1), 3);
        assert_eq!(stencil_half_width(2), 3);
        assert_eq!(stencil_half_width(3), 4);
        assert_eq!(stencil_half_width(5), 5);
    }

    #[test]
    fn central_derivative_of_exponential() {
        // d^m/dx^m exp(j w x) = (j w)^m exp(j w x)
        let w = 3.0;
        let f = |x: f64| C64::new(0.0, w * x).exp();
        for m in 1..=5 {
            let got = central_derivative(f, 0.4, m, 0.05);
            let want = C64::new(0.0, w).powu(m as u32) * f(0.4);
            assert!((got - want).norm() < 1e-8 * want.norm(), "m = {m}");
        }
    }

    #[test]
    fn angular_rule_matches_bessel_series() {
        // 2 pi J0(x) = 2 int_0^pi cos(x sin t) dt, by composite Gauss-Legendre
        let gl = crate::quadrature::GaussLegendre::new(32);
        let j0 = |x: f64| {
            let mut acc = 0.0;
            gl.for_each_panel_node(0.0, PI, 16, |t, w| acc += w * (x * t.sin()).cos());
            acc / PI
        };
        let mut rule = AngularRule::new();
        for x in [0.0, 0.5, 3.0, 10.0, 25.0] {
            assert!((rule.eval(x) - 2.0 * PI * j0(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn stencil_must_stay_in_front() {
        let k = WaveNumber::new(1000.0).unwrap();
        let err = fd_oracle(Displacement::new(0.1, 0.0, -2e-5), k, order(0));
        assert!(matches!(err, Err(Error::StencilCrossesPlane { .. })));
    }

    #[test]
    fn broadside_evanescent_part_is_analytic() {
        // At rho = 0 the evanescent ring integrates to 2 pi j^n (n+1)! / a^{n+2}.
        let k = WaveNumber::new(1000.0).unwrap();
        let a = 0.05;
        let d = Displacement::new(0.0, 0.0, -a);
        let full_kt = auto_kt_max(d, k, order(2));
        let full = spectral_integral(d, k, order(2), full_kt).unwrap();
        let visible = spectral_integral(d, k, order(2), k.value()).unwrap();
        let fact = [1.0, 2.0, 6.0];
        let jn = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        for n in 0..3 {
            let diff = full.values[n] - visible.values[n];
            let want = 2.0 * PI * jn[n] * fact[n] / a.powi(n as i32 + 2);
            assert!((diff - want).norm() < 1e-8 * want.norm(), "n = {n}");
        }
        assert!(matches!(
            spectral_oracle(d, k, order(0), k.value()),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn tail_bound_closed_form() {
        // n = 0: 2 pi exp(-aA)(A/a + 1/a^2)
        let (a, big_a): (f64, f64) = (0.1, 300.0);
        let want = 2.0 * PI * (-a * big_a).exp() * (big_a / a + 1.0 / (a * a));
        assert!((evanescent_tail(0, a, big_a) - want).abs() < 1e-12 * want);
    }
}
