//! Image evaluation: maximum intensity projections, difference images,
//! entropy and artifact level.

use std::fmt;
use std::str::FromStr;

use crate::geometry::Position3;
use crate::reconstruct::{ImageGrid, ImageVolume};
use crate::{Error, Result};

/// Floor reported by [`artifact_level`] when nothing lies outside the mask.
pub const ARTIFACT_FLOOR_DB: f64 = -300.0;

/// Lower end of the display range used by [`to_display_db`].
pub const DISPLAY_RANGE_DB: f64 = -40.0;

/// Axis collapsed by a maximum intensity projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjectionAxis {
    X,
    Y,
    Z,
}

impl ProjectionAxis {
    pub const ALL: [ProjectionAxis; 3] = [ProjectionAxis::X, ProjectionAxis::Y, ProjectionAxis::Z];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionAxis::X => "x",
            ProjectionAxis::Y => "y",
            ProjectionAxis::Z => "z",
        }
    }

    /// Volume axes `(row, col)` that remain after the projection.
    pub fn remaining(self) -> (usize, usize) {
        match self {
            ProjectionAxis::X => (2, 1),
            ProjectionAxis::Y => (2, 0),
            ProjectionAxis::Z => (1, 0),
        }
    }
}

impl fmt::Display for ProjectionAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(ProjectionAxis::X),
            "y" => Ok(ProjectionAxis::Y),
            "z" => Ok(ProjectionAxis::Z),
            _ => Err(Error::InvalidArgument(format!("unknown projection axis '{s}'"))),
        }
    }
}

/// Extent of one image axis: name and the coordinates of the first and last
/// pixel centers, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisExtent {
    pub name: &'static str,
    pub first: f64,
    pub last: f64,
}

/// Dense 2-D real image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub row_extent: AxisExtent,
    pub col_extent: AxisExtent,
}

impl Image2D {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn same_shape(&self, other: &Image2D) -> Result<()> {
        if (self.rows, self.cols) == (other.rows, other.cols) {
            Ok(())
        } else {
            Err(Error::DimMismatch(format!(
                "{}x{} image vs {}x{} image",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    /// Keeps values above zero and zeroes the rest.
    pub fn positive_part(&self) -> Image2D {
        self.map(|v| v.max(0.0))
    }

    /// Magnitudes of the values below zero.
    pub fn negative_part(&self) -> Image2D {
        self.map(|v| (-v).max(0.0))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image2D {
        Image2D {
            values: self.values.iter().map(|v| f(*v)).collect(),
            ..self.clone()
        }
    }
}

/// Maximum of `|voxel|` along `axis`.
pub fn mip(v: &ImageVolume, axis: ProjectionAxis) -> Image2D {
    let g = &v.grid;
    let [nx, ny, nz] = g.dims;
    let (rows, cols) = match axis {
        ProjectionAxis::X => (nz, ny),
        ProjectionAxis::Y => (nz, nx),
        ProjectionAxis::Z => (ny, nx),
    };
    let mut values = vec![0.0f64; rows * cols];
    for (i, s) in v.voxels.iter().enumerate() {
        let [ix, iy, iz] = g.coords(i);
        let (r, c) = match axis {
            ProjectionAxis::X => (iz, iy),
            ProjectionAxis::Y => (iz, ix),
            ProjectionAxis::Z => (iy, ix),
        };
        let slot = &mut values[r * cols + c];
        *slot = slot.max(s.norm());
    }
    let extent = g.extent();
    let (ra, ca) = axis.remaining();
    let names = ["x", "y", "z"];
    let axis_extent = |a: usize| AxisExtent {
        name: names[a],
        first: extent[a][0],
        last: extent[a][1],
    };
    Image2D {
        rows,
        cols,
        values,
        row_extent: axis_extent(ra),
        col_extent: axis_extent(ca),
    }
}

/// Signed elementwise difference `a - b`.
pub fn diff_image(a: &Image2D, b: &Image2D) -> Result<Image2D> {
    a.same_shape(b)?;
    Ok(Image2D {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        ..a.clone()
    })
}

/// Shannon entropy (nats) of `p_i = |s_i|^2 / sum |s_j|^2`.
pub fn entropy(v: &ImageVolume) -> Result<f64> {
    let max = v.max_abs();
    if !(max > 0.0) {
        return Err(Error::EmptyImage);
    }
    // Scaling by the maximum first keeps |s|^2 away from under- and overflow.
    let w: Vec<f64> = v.voxels.iter().map(|s| (s / max).norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    let e = -w
        .iter()
        .filter(|x| **x > 0.0)
        .map(|x| {
            let p = x / total;
            p * p.ln()
        })
        .sum::<f64>();
    Ok(e.max(0.0))
}

/// `20 log10(max |s| outside the mask / max |s| inside the mask)`.
pub fn artifact_level(v: &ImageVolume, mask: &[bool]) -> Result<f64> {
    if mask.len() != v.voxels.len() {
        return Err(Error::DimMismatch(format!(
            "mask of {} voxels for a volume of {}",
            mask.len(),
            v.voxels.len()
        )));
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::EmptyMask);
    }
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for (s, m) in v.voxels.iter().zip(mask) {
        let a = s.norm();
        if *m {
            inside = inside.max(a);
        } else {
            outside = outside.max(a);
        }
    }
    if !(inside > 0.0) {
        return Err(Error::EmptyImage);
    }
    let db = 20.0 * (outside / inside).log10();
    Ok(if db.is_finite() { db.max(ARTIFACT_FLOOR_DB) } else { ARTIFACT_FLOOR_DB })
}

/// Marks voxels within `radius` of any of `targets`.
pub fn target_mask(grid: &ImageGrid, targets: &[Position3], radius: f64) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            let p = grid.position(i);
            targets.iter().any(|t| p.distance(t) <= radius)
        })
        .collect()
}

/// First zero of the Bessel function `J1`.
const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

/// Resolution cell of a single-frequency multi-static disc aperture of
/// radius `a` at range `d`: the null-to-null width of its ideal point spread
/// function.
///
/// Tx and Rx each contribute transverse wave numbers up to `k sin theta`
/// (`tan theta = a / d`), so the image spectrum fills a disc of radius
/// `2 k sin theta` and the point spread function is an Airy pattern whose
/// first null sits at `j1 / (2 k sin theta)`.
pub fn resolution_cell(wavelength: f64, aperture_radius: f64, range: f64) -> f64 {
    let sin = aperture_radius / aperture_radius.hypot(range);
    let k = 2.0 * std::f64::consts::PI / wavelength;
    2.0 * J1_FIRST_ZERO / (2.0 * k * sin)
}

/// `20 log10(x)` clipped to `[DISPLAY_RANGE_DB, 0]`; `x` is a normalized magnitude.
pub fn to_display_db(x: f64) -> f64 {
    if x > 0.0 {
        (20.0 * x.log10()).clamp(DISPLAY_RANGE_DB, 0.0)
    } else {
        DISPLAY_RANGE_DB
    }
}

/// Indices of voxels whose magnitude is at least that of every neighbor in
/// the surrounding 3x3x3 block and strictly positive.
pub fn local_maxima(v: &ImageVolume) -> Vec<usize> {
    let g = &v.grid;
    let mag = v.magnitudes();
    let [nx, ny, nz] = g.dims;
    let near = |c: usize, n: usize| c.saturating_sub(1)..=(c + 1).min(n - 1);
    (0..g.len())
        .filter(|&i| {
            let m = mag[i];
            let [x, y, z] = g.coords(i);
            m > 0.0
                && near(z, nz).all(|zz| {
                    near(y, ny).all(|yy| near(x, nx).all(|xx| mag[g.index(xx, yy, zz)] <= m))
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use proptest::prelude::*;

    fn volume(dims: [usize; 3], voxels: Vec<C64>) -> ImageVolume {
        let grid = ImageGrid::new(Position3::new(-0.01, -0.02, -0.1), [1e-3, 2e-3, 3e-3], dims).unwrap();
        ImageVolume::from_voxels(grid, voxels).unwrap()
    }

    fn ramp(dims: [usize; 3]) -> ImageVolume {
        let n = dims.iter().product::<usize>();
        volume(dims, (0..n).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect())
    }

    #[test]
    fn mip_of_single_slice_is_the_slice() {
        let v = ramp([4, 3, 1]);
        let p = mip(&v, ProjectionAxis::Z);
        assert_eq!((p.rows, p.cols), (3, 4));
        for (a, b) in p.values.iter().zip(&v.voxels) {
            assert_eq!(*a, b.norm());
        }
        assert_eq!(p.col_extent.name, "x");
        assert_eq!(p.row_extent.first, -0.02);
    }

    #[test]
    fn mip_of_single_voxel() {
        let mut voxels = vec![C64::new(0.0, 0.0); 24];
        voxels[17] = C64::new(0.0, -2.0);
        let v = volume([2, 3, 4], voxels);
        for axis in ProjectionAxis::ALL {
            let p = mip(&v, axis);
            assert_eq!(p.values.iter().filter(|x| **x != 0.0).count(), 1);
            assert_eq!(p.max(), 2.0);
        }
        let [x, y, z] = v.grid.coords(17);
        assert_eq!(mip(&v, ProjectionAxis::X).get(z, y), 2.0);
        assert_eq!(mip(&v, ProjectionAxis::Y).get(z, x), 2.0);
    }

    #[test]
    fn entropy_examples() {
        let uniform = volume([5, 4, 3], vec![C64::new(0.0, 3.0); 60]);
        assert!((entropy(&uniform).unwrap() - 60f64.ln()).abs() < 1e-12);
        let mut voxels = vec![C64::new(0.0, 0.0); 60];
        voxels[7] = C64::new(1e-200, 0.0);
        assert_eq!(entropy(&volume([5, 4, 3], voxels)).unwrap(), 0.0);
        let zero = volume([2, 1, 1], vec![C64::new(0.0, 0.0); 2]);
        assert!(matches!(entropy(&zero), Err(Error::EmptyImage)));
    }

    #[test]
    fn entropy_of_two_level_image() {
        // p = (4/5, 1/5)
        let v = volume([2, 1, 1], vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0)]);
        let want = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
        assert!((entropy(&v).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn artifact_level_examples() {
        let v = ramp([3, 3, 1]);
        let mut mask = vec![false; 9];
        mask[4] = true;
        let uniform = volume([3, 3, 1], vec![C64::new(0.5, 0.5); 9]);
        assert_eq!(artifact_level(&uniform, &mask).unwrap(), 0.0);

        let mut spike = vec![C64::new(0.0, 0.0); 9];
        spike[4] = C64::new(1.0, 0.0);
        let spike = volume([3, 3, 1], spike);
        assert_eq!(artifact_level(&spike, &mask).unwrap(), ARTIFACT_FLOOR_DB);

        let mut halves = vec![C64::new(0.1, 0.0); 9];
        halves[4] = C64::new(1.0, 0.0);
        let got = artifact_level(&volume([3, 3, 1], halves), &mask).unwrap();
        assert!((got + 20.0).abs() < 1e-12);

        assert!(matches!(artifact_level(&v, &[false; 9]), Err(Error::EmptyMask)));
        assert!(matches!(artifact_level(&v, &[true; 4]), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn diff_image_examples() {
        let a = mip(&ramp([4, 3, 2]), ProjectionAxis::Z);
        assert!(diff_image(&a, &a).unwrap().values.iter().all(|v| *v == 0.0));
        let b = a.map(|x| 2.0 * x);
        let d = diff_image(&b, &a).unwrap();
        assert_eq!(d.values, a.values);
        let other = mip(&ramp([4, 3, 2]), ProjectionAxis::X);
        assert!(matches!(diff_image(&a, &other), Err(Error::DimMismatch(_))));
        let split = diff_image(&a, &b).unwrap();
        assert_eq!(split.negative_part().values, a.values);
        assert!(split.positive_part().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn local_maxima_and_mask() {
        let grid = ImageGrid::new(Position3::new(0.0, 0.0, -1.0), [1.0; 3], [5, 5, 1]).unwrap();
        let target = Position3::new(3.0, 1.0, -1.0);
        let voxels = (0..25)
            .map(|i| C64::new(1.0 / (1.0 + grid.position(i).distance(&target)), 0.0))
            .collect();
        let v = ImageVolume::from_voxels(grid, voxels).unwrap();
        assert_eq!(local_maxima(&v), vec![grid.index(3, 1, 0)]);
        let mask = target_mask(&grid, &[target], 1.0);
        assert_eq!(mask.iter().filter(|m| **m).count(), 5);
    }

    #[test]
    fn resolution_and_display_mapping() {
        // 45 degree half-angle, lambda = 2 pi: null at j1 / sqrt 2 from the center
        let cell = resolution_cell(2.0 * std::f64::consts::PI, 1.0, 1.0);
        assert!((cell - 2.0 * 3.831_705_970_207_512 / 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(to_display_db(1.0), 0.0);
        assert_eq!(to_display_db(0.1), -20.0);
        assert_eq!(to_display_db(1e-9), DISPLAY_RANGE_DB);
        assert_eq!(to_display_db(0.0), DISPLAY_RANGE_DB);
    }

    fn arb_volume() -> impl Strategy<Value = ImageVolume> {
        (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(nx, ny, nz)| {
            prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), nx * ny * nz).prop_map(move |v| {
                volume([nx, ny, nz], v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
            })
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_and_scale_invariant(v in arb_volume(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
            prop_assume!(v.max_abs() > 0.0);
            let c = C64::new(re, im);
            prop_assume!(c.norm() > 1e-3);
            let e = entropy(&v).unwrap();
            prop_assert!(e >= 0.0 && e <= (v.voxels.len() as f64).ln() + 1e-12);
            prop_assert!((entropy(&v.scaled(c)).unwrap() - e).abs() < 1e-12);
        }

        #[test]
        fn mip_commutes_with_scaling(v in arb_volume(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let c = C64::new(re, im);
            for axis in ProjectionAxis::ALL {
                let scaled = mip(&v.scaled(c), axis);
                let plain = mip(&v, axis);
                for (a, b) in scaled.values.iter().zip(&plain.values) {
                    prop_assert!((a - c.norm() * b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
                prop_assert_eq!(plain.max(), v.max_abs());
            }
        }

        #[test]
        fn diff_is_antisymmetric(v in arb_volume(), w in 0.0f64..3.0) {
            let a = mip(&v, ProjectionAxis::Z);
            let b = a.map(|x| (x * w).sin().abs());
            let ab = diff_image(&a, &b).unwrap();
            let ba = diff_image(&b, &a).unwrap();
            for (x, y) in ab.values.iter().zip(&ba.values) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }
}
