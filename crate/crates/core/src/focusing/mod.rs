//! Near-field focusing operators.
//!
//! `F_n(R, k)` is the spatial kernel of the spectral filter `H_n = k_z^n`.
//! For `R_z < 0` (voxel in front of the aperture) it equals
//! `2 pi / (-j)^n * d^{n+1}/dR_z^{n+1} [exp(+jkR) / R]`, which gives the
//! closed forms implemented here for `n = 0, 1, 2`. The phase-only kernel
//! `exp(+jkR)` is the classic back-projection baseline.
//!
//! [`oracle`] holds two independent numerical evaluations of the same
//! objects: a finite-difference derivative of the Weyl kernel and a direct
//! quadrature of the plane-wave spectrum.

pub mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::geometry::{Position3, WaveNumber};
use crate::{Error, Result, C64};

/// `R = r' - r`, pointing from an antenna at `r` to a voxel at `r'`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl Displacement {
    pub const fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    /// Displacement from `antenna` to `voxel`.
    #[inline]
    pub fn between(antenna: &Position3, voxel: &Position3) -> Self {
        Self::new(voxel.x - antenna.x, voxel.y - antenna.y, voxel.z - antenna.z)
    }

    /// `R_x^2 + R_y^2`.
    #[inline]
    pub fn transverse_sqr(&self) -> f64 {
        self.rx * self.rx + self.ry * self.ry
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        (self.transverse_sqr() + self.rz * self.rz).sqrt()
    }
}

/// Order `n` of the spectral filter `H_n = k_z^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FilterOrder(u32);

impl FilterOrder {
    /// Highest order the numerical oracles accept.
    pub const MAX_ORACLE: u32 = 4;

    pub fn new(n: u32) -> Result<Self> {
        if n > Self::MAX_ORACLE {
            return Err(Error::InvalidArgument(format!(
                "filter order {n} exceeds the supported maximum {}",
                Self::MAX_ORACLE
            )));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FocusingOperatorKind {
    PhaseOnly,
    F0,
    F1,
    F2,
}

impl FocusingOperatorKind {
    pub const ALL: [FocusingOperatorKind; 4] = [Self::PhaseOnly, Self::F0, Self::F1, Self::F2];

    /// Filter order of the closed-form operators; `None` for phase-only.
    pub fn filter_order(self) -> Option<FilterOrder> {
        match self {
            Self::PhaseOnly => None,
            Self::F0 => Some(FilterOrder(0)),
            Self::F1 => Some(FilterOrder(1)),
            Self::F2 => Some(FilterOrder(2)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PhaseOnly => "PhaseOnly",
            Self::F0 => "F0",
            Self::F1 => "F1",
            Self::F2 => "F2",
        }
    }
}

impl fmt::Display for FocusingOperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FocusingOperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phaseonly" | "phase_only" | "phase-only" | "phase" => Ok(Self::PhaseOnly),
            "f0" => Ok(Self::F0),
            "f1" => Ok(Self::F1),
            "f2" => Ok(Self::F2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown focusing operator '{s}' (expected PhaseOnly, F0, F1 or F2)"
            ))),
        }
    }
}

/// Singularity guard: `max(1 um, lambda / 100)`. At `k = 0` only the 1 um
/// floor applies.
pub fn r_min(k: WaveNumber) -> f64 {
    if k.value() > 0.0 {
        (k.wavelength() / 100.0).max(1e-6)
    } else {
        1e-6
    }
}

fn check_distance(r: f64, k: WaveNumber) -> Result<()> {
    let guard = r_min(k);
    if r < guard {
        Err(Error::ZeroDistance { distance: r, r_min: guard })
    } else {
        Ok(())
    }
}

fn check_operator_args(d: &Displacement, k: WaveNumber) -> Result<f64> {
    let r = d.norm();
    check_distance(r, k)?;
    if !(d.rz < 0.0) {
        return Err(Error::WrongBranch { rz: d.rz });
    }
    Ok(r)
}

#[inline]
fn phase(k: f64, r: f64) -> C64 {
    let (s, c) = (k * r).sin_cos();
    C64::new(c, s)
}

/// Closed-form kernel without argument checks. `rho2 = R_x^2 + R_y^2`.
#[inline]
pub(crate) fn closed_form(kind: FocusingOperatorKind, rho2: f64, rz: f64, r: f64, k: f64) -> C64 {
    let j = C64::i();
    let e = phase(k, r);
    match kind {
        FocusingOperatorKind::PhaseOnly => e,
        FocusingOperatorKind::F0 => {
            let r2 = r * r;
            let bracket = C64::new(-rz / (r2 * r), k * rz / r2);
            2.0 * PI * bracket * e
        }
        FocusingOperatorKind::F1 => {
            let r2 = r * r;
            let r3 = r2 * r;
            let r4 = r2 * r2;
            let r5 = r4 * r;
            // j^2 k^2 Rz^2 / R^3 + (rho^2 - 2 Rz^2)(jk / R^4 - 1 / R^5)
            let a = rho2 - 2.0 * rz * rz;
            let bracket = C64::new(-k * k * rz * rz / r3 - a / r5, a * k / r4);
            2.0 * PI * j * bracket * e
        }
        FocusingOperatorKind::F2 => {
            let r2 = r * r;
            let r4 = r2 * r2;
            let r5 = r4 * r;
            let r6 = r4 * r2;
            let r7 = r6 * r;
            let k2 = k * k;
            // j^3 k^3 Rz^3 / R^4
            let lead = C64::new(0.0, -k2 * k * rz * rz * rz / r4);
            // 3 j^2 k^2 (rho^2 - Rz^2) / R^5 + (3 rho^2 - 2 Rz^2)(-3jk / R^6 + 3 / R^7)
            let b = 3.0 * rho2 - 2.0 * rz * rz;
            let inner = C64::new(-3.0 * k2 * (rho2 - rz * rz) / r5 + 3.0 * b / r7, -3.0 * k * b / r6);
            -2.0 * PI * (lead + rz * inner) * e
        }
    }
}

/// `F0(R,k) = 2 pi (jk R_z / R^2 - R_z / R^3) exp(jkR)`.
pub fn f0(d: Displacement, k: WaveNumber) -> Result<C64> {
    let r = check_operator_args(&d, k)?;
    Ok(closed_form(FocusingOperatorKind::F0, d.transverse_sqr(), d.rz, r, k.value()))
}

/// First-order operator, filter `H = k_z`.
pub fn f1(d: Displacement, k: WaveNumber) -> Result<C64> {
    let r = check_operator_args(&d, k)?;
    Ok(closed_form(FocusingOperatorKind::F1, d.transverse_sqr(), d.rz, r, k.value()))
}

/// Second-order operator, filter `H = k_z^2`.
pub fn f2(d: Displacement, k: WaveNumber) -> Result<C64> {
    let r = check_operator_args(&d, k)?;
    Ok(closed_form(FocusingOperatorKind::F2, d.transverse_sqr(), d.rz, r, k.value()))
}

/// Phase-only kernel `exp(+jkR)`. Accepts either side of the aperture.
pub fn phase_only(d: Displacement, k: WaveNumber) -> Result<C64> {
    let r = d.norm();
    check_distance(r, k)?;
    Ok(phase(k.value(), r))
}

pub fn evaluate(kind: FocusingOperatorKind, d: Displacement, k: WaveNumber) -> Result<C64> {
    match kind {
        FocusingOperatorKind::PhaseOnly => phase_only(d, k),
        FocusingOperatorKind::F0 => f0(d, k),
        FocusingOperatorKind::F1 => f1(d, k),
        FocusingOperatorKind::F2 => f2(d, k),
    }
}

/// An operator bound to one wave number, for tight loops over many
/// displacements. Singular pairs evaluate to `None`.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    kind: FocusingOperatorKind,
    k: f64,
    r_min: f64,
}

impl Kernel {
    pub fn new(kind: FocusingOperatorKind, k: WaveNumber) -> Self {
        Self {
            kind,
            k: k.value(),
            r_min: r_min(k),
        }
    }

    /// Evaluates the kernel from `antenna` to `voxel`. The caller guarantees
    /// `R_z < 0`; distances below the guard return `None`.
    #[inline]
    pub fn at(&self, antenna: &Position3, voxel: &Position3) -> Option<C64> {
        let d = Displacement::between(antenna, voxel);
        let rho2 = d.transverse_sqr();
        let r = (rho2 + d.rz * d.rz).sqrt();
        if r < self.r_min {
            return None;
        }
        Some(closed_form(self.kind, rho2, d.rz, r, self.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wn(k: f64) -> WaveNumber {
        WaveNumber::new(k).unwrap()
    }

    fn close(a: C64, b: C64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm()
    }

    // Reference values at k = 1, R = (0, 0, -1), evaluated symbolically from
    // the derivative definition.
    #[test]
    fn unit_broadside_values() {
        let d = Displacement::new(0.0, 0.0, -1.0);
        let k = wn(1.0);
        assert!(close(f0(d, k).unwrap(), C64::new(8.68193763782886, 1.8922986184969661), 1e-14));
        assert!(close(f1(d, k).unwrap(), C64::new(1.5025208911689802, 13.96905576599177), 1e-14));
        assert!(close(f2(d, k).unwrap(), C64::new(-36.620049169812404, 1.1127431638409946), 1e-14));
        let e1 = C64::new(1f64.cos(), 1f64.sin());
        assert!(close(phase_only(d, k).unwrap(), e1, 1e-15));
        assert!(close(f0(d, k).unwrap(), 2.0 * PI * C64::new(1.0, -1.0) * e1, 1e-14));
        assert!(close(f1(d, k).unwrap(), 2.0 * PI * C64::new(2.0, 1.0) * e1, 1e-14));
    }

    #[test]
    fn broadside_f1_reduction() {
        let k = 837.758;
        let j = C64::i();
        for d in [0.004, 0.05, 0.3] {
            let got = f1(Displacement::new(0.0, 0.0, -d), wn(k)).unwrap();
            let want = 2.0 * PI * j * (-k * k / d - 2.0 * j * k / (d * d) + 2.0 / (d * d * d)) * phase(k, d);
            assert!(close(got, want, 1e-13));
        }
    }

    #[test]
    fn f0_far_field_leading_term() {
        let k = 1.0;
        for d in [1e3, 1e4, 1e5] {
            let got = f0(Displacement::new(0.0, 0.0, -d), wn(k)).unwrap().norm();
            assert!((got / (2.0 * PI * k / d) - 1.0).abs() < 1.0 / (d * d));
        }
    }

    #[test]
    fn phase_only_properties() {
        for (rx, ry, rz) in [(0.1, 0.2, -0.3), (0.0, 0.0, 0.5), (-1.0, 3.0, -0.01)] {
            let v = phase_only(Displacement::new(rx, ry, rz), wn(1234.5)).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(phase_only(Displacement::new(0.0, 0.0, -1.0), wn(0.0)).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn singular_and_branch_errors() {
        let k = WaveNumber::from_wavelength(7.5e-3).unwrap();
        let tiny = Displacement::new(0.0, 0.0, -5e-5);
        assert!(matches!(f0(tiny, k), Err(Error::ZeroDistance { .. })));
        assert!(matches!(phase_only(tiny, k), Err(Error::ZeroDistance { .. })));
        assert!((r_min(k) - 7.5e-5).abs() < 1e-18);
        assert_eq!(r_min(WaveNumber::from_wavelength(1e-5).unwrap()), 1e-6);
        for op in [f0, f1, f2] {
            assert!(matches!(op(Displacement::new(0.1, 0.0, 0.0), k), Err(Error::WrongBranch { .. })));
            assert!(matches!(op(Displacement::new(0.1, 0.0, 0.2), k), Err(Error::WrongBranch { .. })));
        }
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let d = Displacement::new(0.01, -0.02, -0.1);
        let k = wn(900.0);
        assert_eq!(evaluate(FocusingOperatorKind::F0, d, k).unwrap(), f0(d, k).unwrap());
        assert_eq!(evaluate(FocusingOperatorKind::F1, d, k).unwrap(), f1(d, k).unwrap());
        assert_eq!(evaluate(FocusingOperatorKind::F2, d, k).unwrap(), f2(d, k).unwrap());
        assert_eq!(evaluate(FocusingOperatorKind::PhaseOnly, d, k).unwrap(), phase_only(d, k).unwrap());
        let antenna = Position3::new(0.0, 0.0, 0.1);
        let voxel = Position3::new(0.01, -0.02, 0.0);
        let kern = Kernel::new(FocusingOperatorKind::F2, k);
        let via_kernel = kern.at(&antenna, &voxel).unwrap();
        assert!(close(via_kernel, f2(Displacement::between(&antenna, &voxel), k).unwrap(), 1e-15));
        assert!(kern.at(&antenna, &antenna).is_none());
    }

    #[test]
    fn operator_names_round_trip() {
        for kind in FocusingOperatorKind::ALL {
            assert_eq!(kind.name().parse::<FocusingOperatorKind>().unwrap(), kind);
        }
        assert!("F3".parse::<FocusingOperatorKind>().is_err());
        assert!(FilterOrder::new(5).is_err());
    }

    #[test]
    fn directivity_broadside_exceeds_edge_fire() {
        let k = WaveNumber::from_wavelength(5e-3).unwrap();
        for r in [10.0 / k.value(), 0.05, 0.4] {
            let broadside = Displacement::new(0.0, 0.0, -r);
            let edge = Displacement::new(r * (1.0 - 1e-12f64).sqrt(), 0.0, -r * 1e-6);
            for op in [f0, f1, f2] {
                assert!(op(broadside, k).unwrap().norm() > op(edge, k).unwrap().norm());
            }
        }
    }
}
