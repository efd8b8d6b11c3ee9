//! Physical constants, wave numbers, the `k_z` dispersion branch and planar
//! array layouts.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use crate::{Error, Result, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance for "all elements share one aperture plane", meters.
pub const PLANE_TOLERANCE: f64 = 1e-12;

/// Free-space wave number `k = 2 pi f / c0` in rad/m.
///
/// Zero is accepted as the zero-frequency limit; negative or non-finite
/// values are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WaveNumber(f64);

impl WaveNumber {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k >= 0.0 {
            Ok(Self(k))
        } else {
            Err(Error::InvalidArgument(format!("wave number must be finite and >= 0, got {k}")))
        }
    }

    pub fn from_frequency(f_hz: f64) -> Result<Self> {
        Self::new(2.0 * PI * f_hz / SPEED_OF_LIGHT)
    }

    pub fn from_wavelength(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("wavelength must be > 0, got {lambda}")));
        }
        Self::new(2.0 * PI / lambda)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Wavelength in meters; infinite at `k = 0`.
    pub fn wavelength(self) -> f64 {
        2.0 * PI / self.0
    }
}

/// Transverse wave-vector components `(k_x, k_y)` in rad/m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransverseK {
    pub kx: f64,
    pub ky: f64,
}

impl TransverseK {
    pub fn new(kx: f64, ky: f64) -> Self {
        Self { kx, ky }
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralRegion {
    Visible,
    Evanescent,
}

/// Longitudinal wave number together with the spectral region it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KzBranch {
    pub value: C64,
    pub region: SpectralRegion,
}

/// Dispersion relation `k_z(k_x, k_y)`.
///
/// Visible region (`k^2 >= k_x^2 + k_y^2`): `+sqrt(k^2 - k_t^2)`, real and
/// non-negative. Evanescent region: `-j sqrt(k_t^2 - k^2)`. The boundary
/// circle itself is tagged visible with `k_z = 0`.
pub fn kz(k: WaveNumber, kt: TransverseK) -> KzBranch {
    let k2 = k.value() * k.value();
    let kt2 = kt.norm_sqr();
    if k2 >= kt2 {
        KzBranch {
            value: C64::new((k2 - kt2).sqrt(), 0.0),
            region: SpectralRegion::Visible,
        }
    } else {
        KzBranch {
            value: C64::new(0.0, -(kt2 - k2).sqrt()),
            region: SpectralRegion::Evanescent,
        }
    }
}

/// A point in space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        (*self - *other).norm()
    }
}

impl Add for Position3 {
    type Output = Position3;

    fn add(self, rhs: Position3) -> Position3 {
        Position3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Position3 {
    type Output = Position3;

    fn sub(self, rhs: Position3) -> Position3 {
        Position3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Transmit and receive element positions on one aperture plane, with the
/// quadrature weights (m^2) that turn the aperture integrals into sums.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrayLayout {
    pub tx_positions: Vec<Position3>,
    pub rx_positions: Vec<Position3>,
    pub tx_weights: Vec<f64>,
    pub rx_weights: Vec<f64>,
}

impl ArrayLayout {
    /// Builds a layout and checks its invariants.
    pub fn new(
        tx_positions: Vec<Position3>,
        tx_weights: Vec<f64>,
        rx_positions: Vec<Position3>,
        rx_weights: Vec<f64>,
    ) -> Result<Self> {
        let layout = Self {
            tx_positions,
            rx_positions,
            tx_weights,
            rx_weights,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Same elements used for transmission and reception.
    pub fn monostatic(positions: Vec<Position3>, weights: Vec<f64>) -> Result<Self> {
        Self::new(positions.clone(), weights.clone(), positions, weights)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_positions.is_empty() && self.rx_positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_positions.len() != self.tx_weights.len()
            || self.rx_positions.len() != self.rx_weights.len()
        {
            return Err(Error::DimMismatch(format!(
                "layout has {} tx / {} tx weights, {} rx / {} rx weights",
                self.tx_positions.len(),
                self.tx_weights.len(),
                self.rx_positions.len(),
                self.rx_weights.len()
            )));
        }
        let positions = self.tx_positions.iter().chain(&self.rx_positions);
        if let Some(p) = positions.clone().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite element position {p:?}")));
        }
        if let Some(w) = self.tx_weights.iter().chain(&self.rx_weights).find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("quadrature weight must be > 0, got {w}")));
        }
        if let Some(first) = positions.clone().next() {
            let z0 = first.z;
            if let Some(p) = positions.into_iter().find(|p| (p.z - z0).abs() > PLANE_TOLERANCE) {
                return Err(Error::InvalidArgument(format!(
                    "element at z = {} is off the aperture plane z = {z0}",
                    p.z
                )));
            }
        }
        Ok(())
    }

    /// The common aperture-plane height, `None` for an empty layout.
    pub fn aperture_z(&self) -> Option<f64> {
        self.tx_positions.iter().chain(&self.rx_positions).map(|p| p.z).next()
    }

    /// Lowest element height. Identical to [`Self::aperture_z`] up to the
    /// plane tolerance, and the right bound for "in front of the aperture".
    pub fn min_z(&self) -> Option<f64> {
        self.tx_positions
            .iter()
            .chain(&self.rx_positions)
            .map(|p| p.z)
            .reduce(f64::min)
    }

    /// Appends the elements of `other` after the elements of `self`.
    pub fn concat(&self, other: &ArrayLayout) -> ArrayLayout {
        let mut out = self.clone();
        out.tx_positions.extend_from_slice(&other.tx_positions);
        out.tx_weights.extend_from_slice(&other.tx_weights);
        out.rx_positions.extend_from_slice(&other.rx_positions);
        out.rx_weights.extend_from_slice(&other.rx_weights);
        out
    }

    /// Rotates every element about the z axis by `angle` radians.
    pub fn rotated(&self, angle: f64) -> ArrayLayout {
        let (s, c) = angle.sin_cos();
        let rot = |p: &Position3| Position3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z);
        ArrayLayout {
            tx_positions: self.tx_positions.iter().map(rot).collect(),
            rx_positions: self.rx_positions.iter().map(rot).collect(),
            tx_weights: self.tx_weights.clone(),
            rx_weights: self.rx_weights.clone(),
        }
    }
}

/// Golden angle `pi (3 - sqrt 5)`.
pub const GOLDEN_ANGLE: f64 = PI * (3.0 - 2.236_067_977_499_79);

/// Fermat-spiral point set of `n` elements on a disc of radius `r_max`.
///
/// Element `m` sits at `rho = r_max sqrt((m + 0.5)/n)`, `phi = m * golden angle`.
/// Every element carries the equal-area weight `pi r_max^2 / n`.
pub fn spiral_points(n: usize, r_max: f64, z_m: f64) -> Result<(Vec<Position3>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("spiral needs at least one element".into()));
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidArgument(format!("spiral radius must be > 0, got {r_max}")));
    }
    let nf = n as f64;
    let points = (0..n)
        .map(|m| {
            let rho = r_max * ((m as f64 + 0.5) / nf).sqrt();
            let phi = m as f64 * GOLDEN_ANGLE;
            Position3::new(rho * phi.cos(), rho * phi.sin(), z_m)
        })
        .collect();
    let weights = vec![PI * r_max * r_max / nf; n];
    Ok((points, weights))
}

/// Spiral aperture with the same elements for transmission and reception.
pub fn spiral_layout(n: usize, r_max: f64, z_m: f64) -> Result<ArrayLayout> {
    let (points, weights) = spiral_points(n, r_max, z_m)?;
    ArrayLayout::monostatic(points, weights)
}

/// Centered uniform `nx x ny` grid spanning `lx x ly`, point weight
/// `(lx/nx)(ly/ny)`.
pub fn rect_points(nx: usize, ny: usize, lx: f64, ly: f64, z_m: f64) -> Result<(Vec<Position3>, Vec<f64>)> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("rectangular grid needs nx, ny >= 1".into()));
    }
    if !(lx > 0.0 && ly > 0.0) {
        return Err(Error::InvalidArgument(format!("aperture size must be > 0, got {lx} x {ly}")));
    }
    let dx = lx / nx as f64;
    let dy = ly / ny as f64;
    let mut points = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let x = (ix as f64 + 0.5) * dx - 0.5 * lx;
            let y = (iy as f64 + 0.5) * dy - 0.5 * ly;
            points.push(Position3::new(x, y, z_m));
        }
    }
    Ok((points, vec![dx * dy; nx * ny]))
}

pub fn rect_layout(nx: usize, ny: usize, lx: f64, ly: f64, z_m: f64) -> Result<ArrayLayout> {
    let (points, weights) = rect_points(nx, ny, lx, ly, z_m)?;
    ArrayLayout::monostatic(points, weights)
}

/// Translates every element by an in-plane offset.
pub fn shift_layout(layout: &ArrayLayout, offset: Position3) -> Result<ArrayLayout> {
    if offset.z != 0.0 {
        return Err(Error::NonPlanarShift(offset.z));
    }
    let shift = |p: &Position3| *p + offset;
    Ok(ArrayLayout {
        tx_positions: layout.tx_positions.iter().map(shift).collect(),
        rx_positions: layout.rx_positions.iter().map(shift).collect(),
        tx_weights: layout.tx_weights.clone(),
        rx_weights: layout.rx_weights.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wn(k: f64) -> WaveNumber {
        WaveNumber::new(k).unwrap()
    }

    #[test]
    fn kz_examples() {
        let b = kz(wn(10.0), TransverseK::new(3.0, 4.0));
        assert_eq!(b.region, SpectralRegion::Visible);
        assert!((b.value.re - 75f64.sqrt()).abs() < 1e-15 && b.value.im == 0.0);

        let b = kz(wn(5.0), TransverseK::new(4.0, 4.0));
        assert_eq!(b.region, SpectralRegion::Evanescent);
        assert!(b.value.re == 0.0 && (b.value.im + 7f64.sqrt()).abs() < 1e-15);

        let b = kz(wn(10.0), TransverseK::new(6.0, 8.0));
        assert_eq!(b.region, SpectralRegion::Visible);
        assert_eq!(b.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn kz_continuous_across_boundary() {
        let k = wn(100.0);
        for eps in [1e-2, 1e-4, 1e-6] {
            let inside = kz(k, TransverseK::new(100.0 - eps, 0.0));
            let outside = kz(k, TransverseK::new(100.0 + eps, 0.0));
            assert_eq!(inside.region, SpectralRegion::Visible);
            assert_eq!(outside.region, SpectralRegion::Evanescent);
            let bound = 2.0 * (200.0 * eps).sqrt();
            assert!(inside.value.norm() <= bound && outside.value.norm() <= bound);
        }
    }

    #[test]
    fn wave_number_rejects_bad_input() {
        assert!(WaveNumber::new(-1.0).is_err());
        assert!(WaveNumber::new(f64::NAN).is_err());
        assert!(WaveNumber::from_wavelength(0.0).is_err());
        let k = WaveNumber::from_frequency(40e9).unwrap();
        assert!((k.wavelength() - SPEED_OF_LIGHT / 40e9).abs() < 1e-15);
    }

    #[test]
    fn spiral_single_point() {
        let l = spiral_layout(1, 0.1, 0.1).unwrap();
        let p = l.tx_positions[0];
        assert!((p.x - 0.1 * 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 0.1);
        assert!((l.tx_weights[0] - PI * 0.01).abs() < 1e-15);
    }

    #[test]
    fn spiral_hundred_points() {
        let l = spiral_layout(100, 0.1, 0.1).unwrap();
        let pts = &l.tx_positions;
        assert!(pts.iter().all(|p| (p.x * p.x + p.y * p.y).sqrt() <= 0.1));
        let mut min_d = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                min_d = min_d.min(a.distance(b));
            }
        }
        assert!(min_d > 0.0);
        let total: f64 = l.tx_weights.iter().sum();
        assert!((total - PI * 0.01).abs() < 1e-12);
    }

    #[test]
    fn rect_examples() {
        let l = rect_layout(2, 2, 0.22, 0.22, 0.05).unwrap();
        let mut xy: Vec<(f64, f64)> = l.tx_positions.iter().map(|p| (p.x, p.y)).collect();
        xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e = 0.055;
        let want = [(-e, -e), (-e, e), (e, -e), (e, e)];
        for (got, want) in xy.iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-15 && (got.1 - want.1).abs() < 1e-15);
        }

        let l = rect_layout(80, 80, 0.22, 0.22, 0.11).unwrap();
        assert_eq!(l.tx_positions.len(), 6400);
        let pitch = l.tx_positions[1].x - l.tx_positions[0].x;
        assert!((pitch - 2.75e-3).abs() < 1e-15);
    }

    #[test]
    fn shift_examples() {
        let base = spiral_layout(240, 0.1, 0.1).unwrap();
        assert_eq!(shift_layout(&base, Position3::default()).unwrap(), base);

        let moved = shift_layout(&base, Position3::new(0.01, 0.0, 0.0)).unwrap();
        for (a, b) in moved.tx_positions.iter().zip(&base.tx_positions) {
            assert_eq!(a.x, b.x + 0.01);
            assert_eq!(a.y, b.y);
        }
        assert_eq!(moved.tx_weights, base.tx_weights);

        let merged = base.concat(&moved);
        assert_eq!(merged.tx_positions.len(), 480);
        assert_eq!(merged.rx_positions.len(), 480);

        assert!(matches!(
            shift_layout(&base, Position3::new(0.0, 0.0, 1e-3)),
            Err(Error::NonPlanarShift(_))
        ));
    }

    #[test]
    fn layout_invariants_enforced() {
        let p = vec![Position3::new(0.0, 0.0, 0.1), Position3::new(0.0, 0.01, 0.1 + 1e-9)];
        assert!(ArrayLayout::monostatic(p, vec![1.0, 1.0]).is_err());
        let p = vec![Position3::new(0.0, 0.0, 0.1)];
        assert!(ArrayLayout::monostatic(p.clone(), vec![0.0]).is_err());
        assert!(ArrayLayout::monostatic(p, vec![1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn kz_satisfies_dispersion(k in 1e-3f64..1e4, kx in -2e4f64..2e4, ky in -2e4f64..2e4) {
            let b = kz(wn(k), TransverseK::new(kx, ky));
            let lhs = b.value * b.value + kx * kx + ky * ky;
            let scale = k * k + kx * kx + ky * ky;
            prop_assert!((lhs - k * k).norm() <= 1e-13 * scale);
            match b.region {
                SpectralRegion::Visible => prop_assert!(b.value.im == 0.0 && b.value.re >= 0.0),
                SpectralRegion::Evanescent => prop_assert!(b.value.re == 0.0 && b.value.im < 0.0),
            }
        }

        #[test]
        fn weights_sum_to_area(n in 1usize..500, r in 1e-3f64..1.0, nx in 1usize..60, ny in 1usize..60, lx in 1e-3f64..1.0, ly in 1e-3f64..1.0) {
            let s = spiral_layout(n, r, 0.1).unwrap();
            let area = PI * r * r;
            prop_assert!((s.tx_weights.iter().sum::<f64>() - area).abs() <= 1e-10 * area);
            let g = rect_layout(nx, ny, lx, ly, 0.1).unwrap();
            prop_assert!((g.tx_weights.iter().sum::<f64>() - lx * ly).abs() <= 1e-10 * lx * ly);
        }

        #[test]
        fn opposite_shifts_cancel(dx in -0.5f64..0.5, dy in -0.5f64..0.5) {
            let base = spiral_layout(50, 0.1, 0.1).unwrap();
            let there = shift_layout(&base, Position3::new(dx, dy, 0.0)).unwrap();
            let back = shift_layout(&there, Position3::new(-dx, -dy, 0.0)).unwrap();
            for (a, b) in back.tx_positions.iter().zip(&base.tx_positions) {
                prop_assert!(a.distance(b) <= 1e-15);
            }
        }
    }
}
