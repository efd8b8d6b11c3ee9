//! Scalar first-order Born forward model for ideal point scatterers.
//!
//! `T(r_R, r_T, f) = sum_i a_i exp(-jk(|r_T - r_i| + |r_R - r_i|)) / (|r_T - r_i| |r_R - r_i|)`
//! with `k = 2 pi f / c0`. The `1/(4 pi)` Green's-function constants are
//! absorbed into the reflectivities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::focusing::r_min;
use crate::geometry::{ArrayLayout, Position3, WaveNumber};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScatterer {
    pub position: Position3,
    pub reflectivity: C64,
}

impl PointScatterer {
    pub fn new(position: Position3, reflectivity: C64) -> Self {
        Self { position, reflectivity }
    }

    /// Unit-reflectivity scatterer.
    pub fn unit(position: Position3) -> Self {
        Self::new(position, C64::new(1.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub scatterers: Vec<PointScatterer>,
}

impl Scene {
    pub fn new(scatterers: Vec<PointScatterer>) -> Self {
        Self { scatterers }
    }

    pub fn union(&self, other: &Scene) -> Scene {
        let mut scatterers = self.scatterers.clone();
        scatterers.extend_from_slice(&other.scatterers);
        Scene { scatterers }
    }

    /// `count` unit scatterers evenly spaced on a circle of `radius` around
    /// `(cx, cy)` at height `z`, the first at angle `start_angle`.
    pub fn ring(center: Position3, radius: f64, count: usize, start_angle: f64) -> Scene {
        let step = 2.0 * std::f64::consts::PI / count as f64;
        let scatterers = (0..count)
            .map(|i| {
                let phi = start_angle + i as f64 * step;
                PointScatterer::unit(Position3::new(
                    center.x + radius * phi.cos(),
                    center.y + radius * phi.sin(),
                    center.z,
                ))
            })
            .collect();
        Scene { scatterers }
    }

    /// Two interleaved rings of seven unit scatterers (radii 2.25 cm and
    /// 5.25 cm, outer ring rotated by pi/7) in the plane `z`.
    pub fn two_rings(z: f64) -> Scene {
        let c = Position3::new(0.0, 0.0, z);
        let step = std::f64::consts::PI / 7.0;
        Scene::ring(c, 0.0225, 7, 0.0).union(&Scene::ring(c, 0.0525, 7, step))
    }
}

/// How the samples of a [`MeasurementSet`] map onto Tx/Rx elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pairing {
    /// Every Rx with every Tx; samples indexed `[freq][rx][tx]`.
    FullMatrix,
    /// Explicit `(tx, rx)` index pairs; samples indexed `[freq][pair]`.
    Pairs(Vec<(usize, usize)>),
}

/// Multi-static, multi-frequency scattering data on one aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub layout: ArrayLayout,
    pub frequencies: Vec<f64>,
    pub samples: Vec<C64>,
    pub pairing: Pairing,
}

impl MeasurementSet {
    pub fn new(layout: ArrayLayout, frequencies: Vec<f64>, samples: Vec<C64>, pairing: Pairing) -> Result<Self> {
        let ms = Self {
            layout,
            frequencies,
            samples,
            pairing,
        };
        ms.validate()?;
        Ok(ms)
    }

    /// A set with no elements and no samples.
    pub fn empty(frequencies: Vec<f64>) -> Self {
        Self {
            layout: ArrayLayout::empty(),
            frequencies,
            samples: Vec::new(),
            pairing: Pairing::FullMatrix,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.frequencies.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidArgument("frequencies must be finite and > 0".into()));
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("frequencies must be strictly increasing".into()));
        }
        if let Pairing::Pairs(pairs) = &self.pairing {
            let (nt, nr) = (self.layout.tx_positions.len(), self.layout.rx_positions.len());
            if let Some(p) = pairs.iter().find(|(t, r)| *t >= nt || *r >= nr) {
                return Err(Error::DimMismatch(format!("pair {p:?} outside {nt} tx / {nr} rx")));
            }
        }
        let want = self.frequencies.len() * self.pairs_per_frequency();
        if self.samples.len() != want {
            return Err(Error::DimMismatch(format!(
                "{} samples, expected {want} ({} frequencies x {} pairs)",
                self.samples.len(),
                self.frequencies.len(),
                self.pairs_per_frequency()
            )));
        }
        Ok(())
    }

    pub fn n_tx(&self) -> usize {
        self.layout.tx_positions.len()
    }

    pub fn n_rx(&self) -> usize {
        self.layout.rx_positions.len()
    }

    pub fn pairs_per_frequency(&self) -> usize {
        match &self.pairing {
            Pairing::FullMatrix => self.n_tx() * self.n_rx(),
            Pairing::Pairs(p) => p.len(),
        }
    }

    /// Samples of one frequency in storage order.
    pub fn frequency_block(&self, freq_index: usize) -> &[C64] {
        let n = self.pairs_per_frequency();
        &self.samples[freq_index * n..(freq_index + 1) * n]
    }

    /// `(tx, rx)` indices in storage order.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        match &self.pairing {
            Pairing::FullMatrix => {
                let nt = self.n_tx();
                (0..self.n_rx()).flat_map(|r| (0..nt).map(move |t| (t, r))).collect()
            }
            Pairing::Pairs(p) => p.clone(),
        }
    }

    /// The same data with an explicit pair list.
    pub fn into_pairs(self) -> MeasurementSet {
        match self.pairing {
            Pairing::Pairs(_) => self,
            Pairing::FullMatrix => {
                let pairs = self.pair_indices();
                MeasurementSet {
                    pairing: Pairing::Pairs(pairs),
                    ..self
                }
            }
        }
    }

    /// Mean sample power `|T|^2`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Applies `f` to every sample.
    pub fn map_samples(&self, f: impl Fn(C64) -> C64) -> MeasurementSet {
        MeasurementSet {
            samples: self.samples.iter().map(|s| f(*s)).collect(),
            ..self.clone()
        }
    }
}

fn check_scene(scene: &Scene, layout: &ArrayLayout, frequencies: &[f64]) -> Result<f64> {
    if scene.scatterers.is_empty() {
        return Err(Error::InvalidArgument("scene has no scatterers".into()));
    }
    if frequencies.is_empty() {
        return Err(Error::InvalidArgument("no frequencies".into()));
    }
    let z_m = layout
        .min_z()
        .ok_or_else(|| Error::InvalidArgument("layout has no elements".into()))?;
    // the guard is widest at the lowest frequency
    let f_min = frequencies.iter().copied().fold(f64::INFINITY, f64::min);
    let guard = r_min(WaveNumber::from_frequency(f_min)?);
    for (i, s) in scene.scatterers.iter().enumerate() {
        if !s.position.is_finite() || !s.reflectivity.is_finite() {
            return Err(Error::InvalidArgument(format!("scatterer {i} is not finite")));
        }
        if s.position.z >= z_m {
            return Err(Error::InvalidArgument(format!(
                "scatterer {i} at z = {} is not in front of the aperture plane z = {z_m}",
                s.position.z
            )));
        }
        let closest = layout
            .tx_positions
            .iter()
            .chain(&layout.rx_positions)
            .map(|p| p.distance(&s.position))
            .fold(f64::INFINITY, f64::min);
        if closest < guard {
            return Err(Error::ScattererOnAperture { index: i, distance: closest });
        }
    }
    Ok(guard)
}

/// One row of the distance table: element-to-scatterer distances.
fn distances(elements: &[Position3], scene: &Scene) -> Vec<Vec<f64>> {
    elements
        .iter()
        .map(|e| scene.scatterers.iter().map(|s| e.distance(&s.position)).collect())
        .collect()
}

#[inline]
fn born_sample(scene: &Scene, k: f64, d_tx: &[f64], d_rx: &[f64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ((s, dt), dr) in scene.scatterers.iter().zip(d_tx).zip(d_rx) {
        let (sin, cos) = (-k * (dt + dr)).sin_cos();
        acc += s.reflectivity * C64::new(cos, sin) / (dt * dr);
    }
    acc
}

/// Synthesizes full-matrix data for every Rx/Tx combination.
pub fn synthesize(scene: &Scene, layout: &ArrayLayout, frequencies: &[f64]) -> Result<MeasurementSet> {
    check_scene(scene, layout, frequencies)?;
    let d_tx = distances(&layout.tx_positions, scene);
    let d_rx = distances(&layout.rx_positions, scene);
    let nt = layout.tx_positions.len();
    let nr = layout.rx_positions.len();
    let mut samples = vec![C64::new(0.0, 0.0); frequencies.len() * nr * nt];
    if nt > 0 {
        samples.par_chunks_mut(nt).enumerate().for_each(|(row, out)| {
            let (fi, r) = (row / nr, row % nr);
            let k = WaveNumber::from_frequency(frequencies[fi]).map(WaveNumber::value).unwrap_or(0.0);
            for (t, o) in out.iter_mut().enumerate() {
                *o = born_sample(scene, k, &d_tx[t], &d_rx[r]);
            }
        });
    }
    MeasurementSet::new(layout.clone(), frequencies.to_vec(), samples, Pairing::FullMatrix)
}

/// Synthesizes data for an explicit `(tx, rx)` pair list.
pub fn synthesize_pairs(
    scene: &Scene,
    layout: &ArrayLayout,
    frequencies: &[f64],
    pairs: Vec<(usize, usize)>,
) -> Result<MeasurementSet> {
    check_scene(scene, layout, frequencies)?;
    let d_tx = distances(&layout.tx_positions, scene);
    let d_rx = distances(&layout.rx_positions, scene);
    let (nt, nr) = (layout.tx_positions.len(), layout.rx_positions.len());
    if let Some(p) = pairs.iter().find(|(t, r)| *t >= nt || *r >= nr) {
        return Err(Error::DimMismatch(format!("pair {p:?} outside {nt} tx / {nr} rx")));
    }
    let np = pairs.len();
    let mut samples = vec![C64::new(0.0, 0.0); frequencies.len() * np];
    if np > 0 {
        samples.par_chunks_mut(np).enumerate().for_each(|(fi, out)| {
            let k = WaveNumber::from_frequency(frequencies[fi]).map(WaveNumber::value).unwrap_or(0.0);
            for (o, (t, r)) in out.iter_mut().zip(&pairs) {
                *o = born_sample(scene, k, &d_tx[*t], &d_rx[*r]);
            }
        });
    }
    MeasurementSet::new(layout.clone(), frequencies.to_vec(), samples, Pairing::Pairs(pairs))
}

/// Adds circularly-symmetric complex Gaussian noise at the requested SNR,
/// with the noise power set from the mean signal power of the whole set.
pub fn add_noise(ms: &MeasurementSet, snr_db: f64, seed: u64) -> Result<MeasurementSet> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr_db must be finite, got {snr_db}")));
    }
    let noise_power = ms.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut out = ms.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut out.samples {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *s += C64::new(re, im);
    }
    Ok(out)
}

/// Combines two captures on the same frequency grid.
///
/// Elements of `b` are appended after those of `a`. Full-matrix inputs turn
/// into a block-diagonal pair list: no Tx of one capture is paired with an
/// Rx of the other. Merging with an empty set returns the other input.
pub fn merge(a: &MeasurementSet, b: &MeasurementSet) -> Result<MeasurementSet> {
    if a.frequencies != b.frequencies {
        return Err(Error::FrequencyMismatch);
    }
    if b.layout.is_empty() && b.samples.is_empty() {
        return Ok(a.clone());
    }
    if a.layout.is_empty() && a.samples.is_empty() {
        return Ok(b.clone());
    }
    let same_mode = matches!(
        (&a.pairing, &b.pairing),
        (Pairing::FullMatrix, Pairing::FullMatrix) | (Pairing::Pairs(_), Pairing::Pairs(_))
    );
    if !same_mode {
        return Err(Error::PairingMismatch);
    }
    let (t_off, r_off) = (a.n_tx(), a.n_rx());
    let mut pairs = a.pair_indices();
    pairs.extend(b.pair_indices().into_iter().map(|(t, r)| (t + t_off, r + r_off)));
    let (na, nb) = (a.pairs_per_frequency(), b.pairs_per_frequency());
    let mut samples = Vec::with_capacity(a.samples.len() + b.samples.len());
    for fi in 0..a.frequencies.len() {
        samples.extend_from_slice(&a.samples[fi * na..(fi + 1) * na]);
        samples.extend_from_slice(&b.samples[fi * nb..(fi + 1) * nb]);
    }
    MeasurementSet::new(
        a.layout.concat(&b.layout),
        a.frequencies.clone(),
        samples,
        Pairing::Pairs(pairs),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shift_layout, spiral_layout, SPEED_OF_LIGHT};
    use std::f64::consts::PI;

    fn single(p: Position3) -> ArrayLayout {
        ArrayLayout::monostatic(vec![p], vec![1.0]).unwrap()
    }

    #[test]
    fn monostatic_broadside_value() {
        let d = 0.1;
        let layout = single(Position3::new(0.0, 0.0, d));
        let scene = Scene::new(vec![PointScatterer::unit(Position3::default())]);
        let f = 40e9;
        let ms = synthesize(&scene, &layout, &[f]).unwrap();
        let k = 2.0 * PI * f / SPEED_OF_LIGHT;
        let want = C64::from_polar(1.0 / (d * d), -2.0 * k * d);
        assert!((ms.samples[0] - want).norm() < 1e-12 * want.norm());
        assert!((ms.samples[0].norm() * d * d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_opposite_scatterers_cancel() {
        let layout = single(Position3::new(0.0, 0.0, 0.1));
        let scene = Scene::new(vec![
            PointScatterer::new(Position3::new(0.02, 0.0, 0.0), C64::new(1.0, 0.0)),
            PointScatterer::new(Position3::new(-0.02, 0.0, 0.0), C64::new(-1.0, 0.0)),
        ]);
        let ms = synthesize(&scene, &layout, &[40e9]).unwrap();
        assert!(ms.samples[0].norm() < 1e-12);
    }

    #[test]
    fn two_rings_layout() {
        let scene = Scene::two_rings(0.0);
        assert_eq!(scene.scatterers.len(), 14);
        let radii: Vec<f64> = scene.scatterers.iter().map(|s| s.position.norm()).collect();
        assert!(radii[..7].iter().all(|r| (r - 0.0225).abs() < 1e-15));
        assert!(radii[7..].iter().all(|r| (r - 0.0525).abs() < 1e-15));
    }

    #[test]
    fn scatterer_on_aperture_rejected() {
        let layout = single(Position3::new(0.0, 0.0, 0.1));
        let on = Scene::new(vec![PointScatterer::unit(Position3::new(0.0, 0.0, 0.1 - 1e-7))]);
        assert!(matches!(synthesize(&on, &layout, &[40e9]), Err(Error::ScattererOnAperture { .. })));
        let behind = Scene::new(vec![PointScatterer::unit(Position3::new(0.5, 0.0, 0.2))]);
        assert!(synthesize(&behind, &layout, &[40e9]).is_err());
        assert!(synthesize(&Scene::default(), &layout, &[40e9]).is_err());
    }

    #[test]
    fn pair_list_matches_full_matrix() {
        let layout = spiral_layout(12, 0.1, 0.1).unwrap();
        let scene = Scene::two_rings(0.0);
        let freqs = [70e9, 75e9];
        let full = synthesize(&scene, &layout, &freqs).unwrap();
        let pairs = full.pair_indices();
        let listed = synthesize_pairs(&scene, &layout, &freqs, pairs).unwrap();
        assert_eq!(full.samples, listed.samples);
        assert_eq!(full.clone().into_pairs(), listed);
    }

    #[test]
    fn noise_examples() {
        let layout = spiral_layout(40, 0.1, 0.1).unwrap();
        let scene = Scene::two_rings(0.0);
        let ms = synthesize(&scene, &layout, &[40e9, 41e9, 42e9, 43e9, 44e9, 45e9, 46e9]).unwrap();
        assert!(ms.samples.len() >= 10_000);

        let quiet = add_noise(&ms, 300.0, 7).unwrap();
        for (a, b) in quiet.samples.iter().zip(&ms.samples) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(ms.mean_power().sqrt()));
        }

        let a = add_noise(&ms, 20.0, 42).unwrap();
        let b = add_noise(&ms, 20.0, 42).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
        let c = add_noise(&ms, 20.0, 43).unwrap();
        assert_ne!(a.samples, c.samples);

        let noise: f64 = a.samples.iter().zip(&ms.samples).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>()
            / ms.samples.len() as f64;
        let snr = 10.0 * (ms.mean_power() / noise).log10();
        assert!((snr - 20.0).abs() < 0.5, "empirical SNR {snr}");
        assert!(add_noise(&ms, f64::NAN, 0).is_err());
    }

    #[test]
    fn merge_examples() {
        let base = spiral_layout(240, 0.1, 0.1).unwrap();
        let moved = shift_layout(&base, Position3::new(0.01, 0.0, 0.0)).unwrap();
        let scene = Scene::two_rings(0.0);
        let freqs = [76e9];
        let a = synthesize(&scene, &base, &freqs).unwrap();
        let b = synthesize(&scene, &moved, &freqs).unwrap();

        assert_eq!(merge(&a, &MeasurementSet::empty(freqs.to_vec())).unwrap(), a);

        let m = merge(&a, &b).unwrap();
        assert_eq!(m.n_tx(), 480);
        assert_eq!(m.n_rx(), 480);
        assert_eq!(m.pairs_per_frequency(), 2 * 240 * 240);
        assert_eq!(&m.samples[..a.samples.len()], &a.samples[..]);
        assert_eq!(&m.samples[a.samples.len()..], &b.samples[..]);
        let pairs = m.pair_indices();
        assert!(pairs[..240 * 240].iter().all(|(t, r)| *t < 240 && *r < 240));
        assert!(pairs[240 * 240..].iter().all(|(t, r)| *t >= 240 && *r >= 240));

        let other = synthesize(&scene, &base, &[77e9]).unwrap();
        assert!(matches!(merge(&a, &other), Err(Error::FrequencyMismatch)));
        assert!(matches!(merge(&m, &a), Err(Error::PairingMismatch)));
        assert!(merge(&m, &a.clone().into_pairs()).is_ok());
    }

    #[test]
    fn merge_interleaves_frequency_blocks() {
        let scene = Scene::two_rings(0.0);
        let freqs = [70e9, 80e9];
        let a = synthesize(&scene, &spiral_layout(3, 0.1, 0.1).unwrap(), &freqs).unwrap();
        let b = synthesize(&scene, &spiral_layout(2, 0.05, 0.1).unwrap(), &freqs).unwrap();
        let m = merge(&a, &b).unwrap();
        assert_eq!(m.frequency_block(1)[..9], a.frequency_block(1)[..]);
        assert_eq!(m.frequency_block(1)[9..], b.frequency_block(1)[..]);
    }
}
