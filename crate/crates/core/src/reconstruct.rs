//! Multi-static back-projection.
//!
//! For every voxel `r'` and frequency:
//!
//! ```text
//! s(r') = sum_pairs w_R w_T T(r_R, r_T) F(r' - r_R, k) F(r' - r_T, k)
//! ```
//!
//! The kernel values `F(r' - r_t)` and `F(r' - r_r)` are evaluated once per
//! element and voxel. For full-matrix data the double sum is factored as
//! `sum_r g_R[r] sum_t D[r][t] g_T[t]` with `D = W_R T W_T`, which needs
//! `N_tx + N_rx` kernel evaluations per voxel instead of `N_tx N_rx`. Pair
//! lists are grouped by receiver once and summed the same way.
//!
//! Work is split over voxels only. Each voxel sums its pairs in a fixed order
//! and its frequencies in ascending order, so the result does not depend on
//! the number of workers.

use rayon::prelude::*;

use crate::focusing::{FocusingOperatorKind, Kernel};
use crate::forward::{MeasurementSet, Pairing};
use crate::geometry::{Position3, WaveNumber};
use crate::{Error, Result, C64};

/// Regular voxel grid; `origin` is the center of voxel `(0, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub origin: Position3,
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl ImageGrid {
    pub fn new(origin: Position3, spacing: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument(format!("grid spacing must be > 0, got {spacing:?}")));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dims must be >= 1, got {dims:?}")));
        }
        Ok(Self { origin, spacing, dims })
    }

    /// Grid whose voxel centers are symmetric about `center`.
    pub fn centered(center: Position3, spacing: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        let half = |i: usize| 0.5 * (dims[i].max(1) - 1) as f64 * spacing[i];
        let origin = Position3::new(center.x - half(0), center.y - half(1), center.z - half(2));
        Self::new(origin, spacing, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn position(&self, index: usize) -> Position3 {
        let [ix, iy, iz] = self.coords(index);
        Position3::new(
            self.origin.x + ix as f64 * self.spacing[0],
            self.origin.y + iy as f64 * self.spacing[1],
            self.origin.z + iz as f64 * self.spacing[2],
        )
    }

    /// Height of the top voxel layer.
    pub fn max_z(&self) -> f64 {
        self.origin.z + (self.dims[2] - 1) as f64 * self.spacing[2]
    }

    /// Voxel closest to `p`, or `None` if `p` lies more than half a voxel
    /// outside the grid.
    pub fn nearest(&self, p: &Position3) -> Option<[usize; 3]> {
        let coord = |v: f64, o: f64, s: f64, n: usize| {
            let i = ((v - o) / s).round();
            (i >= 0.0 && i < n as f64).then_some(i as usize)
        };
        Some([
            coord(p.x, self.origin.x, self.spacing[0], self.dims[0])?,
            coord(p.y, self.origin.y, self.spacing[1], self.dims[1])?,
            coord(p.z, self.origin.z, self.spacing[2], self.dims[2])?,
        ])
    }

    /// Physical extent `[min, max]` of voxel centers along each axis.
    pub fn extent(&self) -> [[f64; 2]; 3] {
        let o = [self.origin.x, self.origin.y, self.origin.z];
        std::array::from_fn(|i| [o[i], o[i] + (self.dims[i] - 1) as f64 * self.spacing[i]])
    }

    /// Every voxel must sit strictly in front of an aperture at height `z_m`.
    pub fn check_in_front(&self, z_m: f64) -> Result<()> {
        let rz = self.max_z() - z_m;
        if rz < 0.0 {
            Ok(())
        } else {
            Err(Error::WrongBranch { rz })
        }
    }
}

/// Complex voxel values in `[z][y][x]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVolume {
    pub grid: ImageGrid,
    pub voxels: Vec<C64>,
    pub normalized: bool,
}

impl ImageVolume {
    pub fn zeros(grid: ImageGrid) -> Self {
        Self {
            grid,
            voxels: vec![C64::new(0.0, 0.0); grid.len()],
            normalized: false,
        }
    }

    pub fn from_voxels(grid: ImageGrid, voxels: Vec<C64>) -> Result<Self> {
        if voxels.len() != grid.len() {
            return Err(Error::DimMismatch(format!("{} voxels for a grid of {}", voxels.len(), grid.len())));
        }
        Ok(Self {
            grid,
            voxels,
            normalized: false,
        })
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> C64 {
        self.voxels[self.grid.index(ix, iy, iz)]
    }

    /// Index and magnitude of the largest voxel; the first one wins ties.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.voxels.iter().enumerate() {
            let m = v.norm();
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.argmax().map_or(0.0, |(_, m)| m)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.voxels.iter().map(|v| v.norm()).collect()
    }

    pub fn scaled(&self, c: C64) -> ImageVolume {
        ImageVolume {
            grid: self.grid,
            voxels: self.voxels.iter().map(|v| v * c).collect(),
            normalized: false,
        }
    }
}

/// Divides by the largest voxel magnitude, keeping per-voxel phase.
pub fn normalize(v: &ImageVolume) -> Result<ImageVolume> {
    let (_, max) = v.argmax().ok_or(Error::EmptyImage)?;
    if !(max > 0.0) {
        return Err(Error::EmptyImage);
    }
    Ok(ImageVolume {
        grid: v.grid,
        voxels: v.voxels.iter().map(|x| x / max).collect(),
        normalized: true,
    })
}

/// Voxels per work item. Any value gives the same numbers.
const CHUNK: usize = 64;

/// Back-projection engine with a fixed worker count (`0` = all cores).
#[derive(Debug, Clone, Copy, Default)]
pub struct Engine {
    workers: usize,
}

/// Per-frequency data prepared once: kernel and quadrature-weighted samples.
struct FrequencyPlan {
    kernel: Kernel,
    weighted: Vec<C64>,
}

impl Engine {
    pub fn new(workers: usize) -> Self {
        Self { workers }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        if self.workers == 0 {
            return Ok(job());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", self.workers)))?;
        Ok(pool.install(job))
    }

    /// Unnormalized single-frequency image.
    pub fn backproject_single_freq(
        &self,
        ms: &MeasurementSet,
        freq_index: usize,
        grid: &ImageGrid,
        kind: FocusingOperatorKind,
    ) -> Result<ImageVolume> {
        if freq_index >= ms.frequencies.len() {
            return Err(Error::InvalidArgument(format!(
                "frequency index {freq_index} out of range ({} frequencies)",
                ms.frequencies.len()
            )));
        }
        self.backproject(ms, &[freq_index], grid, kind)
    }

    /// Coherent sum over all frequencies (ascending), then max-normalized.
    ///
    /// An all-zero image cannot be normalized; it is returned as is with
    /// `normalized == false` and a warning is logged.
    pub fn backproject_multi_freq(
        &self,
        ms: &MeasurementSet,
        grid: &ImageGrid,
        kind: FocusingOperatorKind,
    ) -> Result<ImageVolume> {
        if ms.frequencies.is_empty() {
            return Err(Error::InvalidArgument("measurement set has no frequencies".into()));
        }
        let all: Vec<usize> = (0..ms.frequencies.len()).collect();
        let raw = self.backproject(ms, &all, grid, kind)?;
        match normalize(&raw) {
            Ok(v) => Ok(v),
            Err(Error::EmptyImage) => {
                log::warn!("back-projected image is identically zero; left unnormalized");
                Ok(raw)
            }
            Err(e) => Err(e),
        }
    }

    fn backproject(
        &self,
        ms: &MeasurementSet,
        freq_indices: &[usize],
        grid: &ImageGrid,
        kind: FocusingOperatorKind,
    ) -> Result<ImageVolume> {
        ms.validate()?;
        let Some(z_m) = ms.layout.min_z() else {
            return Ok(ImageVolume::zeros(*grid));
        };
        grid.check_in_front(z_m)?;

        let rows = Rows::new(ms);
        let plans = freq_indices
            .iter()
            .map(|&fi| {
                let k = WaveNumber::from_frequency(ms.frequencies[fi])?;
                Ok(FrequencyPlan {
                    kernel: Kernel::new(kind, k),
                    weighted: rows.weighted(ms, fi),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut voxels = vec![C64::new(0.0, 0.0); grid.len()];
        self.run(|| {
            voxels.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
                let mut g_tx = vec![C64::new(0.0, 0.0); ms.n_tx()];
                let mut g_rx = vec![C64::new(0.0, 0.0); ms.n_rx()];
                for (offset, value) in out.iter_mut().enumerate() {
                    let voxel = grid.position(chunk * CHUNK + offset);
                    let mut acc = C64::new(0.0, 0.0);
                    for plan in &plans {
                        fill_kernel(&plan.kernel, &ms.layout.tx_positions, &voxel, &mut g_tx);
                        fill_kernel(&plan.kernel, &ms.layout.rx_positions, &voxel, &mut g_rx);
                        acc += rows.sum(&plan.weighted, &g_tx, &g_rx);
                    }
                    *value = acc;
                }
            });
        })?;
        ImageVolume::from_voxels(*grid, voxels)
    }
}

/// Pair structure shared by every frequency, as rows of one receiver each.
enum Rows {
    /// Every Tx for every Rx, in storage order.
    Full { n_tx: usize },
    /// Row `i` pairs receiver `rx[i]` with transmitters
    /// `tx[start[i]..start[i + 1]]`; `order` maps that layout back to storage.
    Grouped {
        rx: Vec<usize>,
        start: Vec<usize>,
        tx: Vec<usize>,
        order: Vec<usize>,
    },
}

impl Rows {
    fn new(ms: &MeasurementSet) -> Self {
        match &ms.pairing {
            Pairing::FullMatrix => Rows::Full { n_tx: ms.n_tx() },
            Pairing::Pairs(pairs) => {
                let mut order: Vec<usize> = (0..pairs.len()).collect();
                order.sort_by_key(|&i| pairs[i].1);
                let (mut rx, mut start) = (Vec::new(), Vec::new());
                for (j, &i) in order.iter().enumerate() {
                    let r = pairs[i].1;
                    if rx.last() != Some(&r) {
                        rx.push(r);
                        start.push(j);
                    }
                }
                start.push(order.len());
                let tx = order.iter().map(|&i| pairs[i].0).collect();
                Rows::Grouped { rx, start, tx, order }
            }
        }
    }

    /// `w_R w_T T` for one frequency, in row layout.
    fn weighted(&self, ms: &MeasurementSet, freq_index: usize) -> Vec<C64> {
        let block = ms.frequency_block(freq_index);
        let (wt, wr) = (&ms.layout.tx_weights, &ms.layout.rx_weights);
        match self {
            Rows::Full { n_tx } => block
                .iter()
                .enumerate()
                .map(|(i, s)| s * (wr[i / n_tx] * wt[i % n_tx]))
                .collect(),
            Rows::Grouped { order, .. } => {
                let Pairing::Pairs(pairs) = &ms.pairing else {
                    unreachable!("grouped rows come from a pair list")
                };
                order
                    .iter()
                    .map(|&i| {
                        let (t, r) = pairs[i];
                        block[i] * (wr[r] * wt[t])
                    })
                    .collect()
            }
        }
    }

    /// `sum_r g_R[r] sum_t D[r][t] g_T[t]`.
    #[inline]
    fn sum(&self, weighted: &[C64], g_tx: &[C64], g_rx: &[C64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        match self {
            Rows::Full { n_tx } => {
                if *n_tx == 0 {
                    return s;
                }
                for (row, gr) in weighted.chunks_exact(*n_tx).zip(g_rx) {
                    let mut inner = C64::new(0.0, 0.0);
                    for (d, gt) in row.iter().zip(g_tx) {
                        inner += d * gt;
                    }
                    s += inner * gr;
                }
            }
            Rows::Grouped { rx, start, tx, .. } => {
                for (i, r) in rx.iter().enumerate() {
                    let span = start[i]..start[i + 1];
                    let mut inner = C64::new(0.0, 0.0);
                    for (d, t) in weighted[span.clone()].iter().zip(&tx[span]) {
                        inner += d * g_tx[*t];
                    }
                    s += inner * g_rx[*r];
                }
            }
        }
        s
    }
}

#[inline]
fn fill_kernel(kernel: &Kernel, elements: &[Position3], voxel: &Position3, out: &mut [C64]) {
    for (o, e) in out.iter_mut().zip(elements) {
        *o = kernel.at(e, voxel).unwrap_or_default();
    }
}

/// [`Engine::backproject_single_freq`] on all cores.
pub fn backproject_single_freq(
    ms: &MeasurementSet,
    freq_index: usize,
    grid: &ImageGrid,
    kind: FocusingOperatorKind,
) -> Result<ImageVolume> {
    Engine::default().backproject_single_freq(ms, freq_index, grid, kind)
}

/// [`Engine::backproject_multi_freq`] on all cores.
pub fn backproject_multi_freq(ms: &MeasurementSet, grid: &ImageGrid, kind: FocusingOperatorKind) -> Result<ImageVolume> {
    Engine::default().backproject_multi_freq(ms, grid, kind)
}
