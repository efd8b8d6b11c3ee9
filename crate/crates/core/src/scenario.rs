//! Declarative scenarios and the end-to-end pipeline.
//!
//! A scenario is a TOML file describing the array, the scene (or a recorded
//! dataset), the frequency sweep, the image grid and the operators to
//! compare. [`Scenario::run`] synthesizes or loads the data, reconstructs one
//! normalized volume per operator and writes volumes, projections,
//! difference images and a `report.toml` with every metric.
//!
//! ```toml
//! name = "smoke"
//! seed = 7
//! operators = ["PhaseOnly", "F1"]
//!
//! [frequencies]
//! start_hz = 40e9
//! stop_hz = 40e9
//! count = 1
//!
//! [array]
//! kind = "spiral"        # or "rect" with nx, ny, lx, ly
//! z_m = 0.1
//! r_max = 0.1
//! n_tx = 16
//! n_rx = 16
//! rx_rotation_rad = 0.0  # Rx spiral rotated against Tx
//! pairing = "full"       # or "monostatic"
//! sar_shifts = []        # [[dx, dy], ...] extra captures, merged
//!
//! [scene]
//! scatterers = [{ x = 0.0, y = 0.0, z = 0.0 }]
//! # rings = [{ center = [0, 0, 0], radius = 0.02, count = 7 }]
//! # lattice = { center = [0, 0, 0], pitch = [0.01, 0.01], counts = [5, 5] }
//! # dataset = "capture.nfbp"  (scatterers then only serve as ground truth)
//!
//! [grid]
//! center = [0.0, 0.0, 0.0]
//! spacing = [1e-3, 1e-3, 1e-3]
//! dims = [21, 21, 1]
//!
//! [noise]          # optional
//! snr_db = 30.0
//!
//! [metrics]        # optional
//! mask_radius_m = 5e-3
//!
//! [output]
//! dir = "out/smoke"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::focusing::FocusingOperatorKind;
use crate::forward::{add_noise, merge, synthesize, synthesize_pairs, MeasurementSet, PointScatterer, Scene};
use crate::geometry::{rect_points, shift_layout, spiral_points, ArrayLayout, Position3, WaveNumber, PLANE_TOLERANCE};
use crate::metrics::{artifact_level, diff_image, entropy, mip, resolution_cell, target_mask, ProjectionAxis};
use crate::reconstruct::{Engine, ImageGrid, ImageVolume};
use crate::{io, Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub operators: Vec<String>,
    pub frequencies: FrequencySpec,
    pub array: Option<ArraySpec>,
    pub scene: SceneSpec,
    pub grid: GridSpec,
    pub noise: Option<NoiseSpec>,
    pub metrics: Option<MetricsSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Linear sweep of `count` frequencies from `start_hz` to `stop_hz`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub kind: String,
    pub z_m: f64,
    pub r_max: Option<f64>,
    pub n_tx: Option<usize>,
    pub n_rx: Option<usize>,
    #[serde(default)]
    pub rx_rotation_rad: f64,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    #[serde(default = "default_pairing")]
    pub pairing: String,
    #[serde(default)]
    pub sar_shifts: Vec<[f64; 2]>,
}

fn default_pairing() -> String {
    "full".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub scatterers: Vec<ScattererSpec>,
    #[serde(default)]
    pub rings: Vec<RingSpec>,
    pub lattice: Option<LatticeSpec>,
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub count: usize,
    #[serde(default)]
    pub start_angle_rad: f64,
}

/// `counts[0] x counts[1]` unit scatterers centered on `center`, in its plane.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub center: [f64; 3],
    pub pitch: [f64; 2],
    pub counts: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub center: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    pub mask_radius_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// Names of the scenarios shipped with the crate.
pub const BUNDLED: [&str; 4] = ["fig1_point_scatterers", "rect_dense", "sar_plate_like", "smoke"];

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "fig1_point_scatterers" => Some(include_str!("../scenarios/fig1_point_scatterers.toml")),
        "rect_dense" => Some(include_str!("../scenarios/rect_dense.toml")),
        "sar_plate_like" => Some(include_str!("../scenarios/sar_plate_like.toml")),
        "smoke" => Some(include_str!("../scenarios/smoke.toml")),
        _ => None,
    }
}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Data, grid and ground truth ready for reconstruction.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub measurements: MeasurementSet,
    pub grid: ImageGrid,
    pub truth: Vec<Position3>,
    pub mask_radius: f64,
}

/// Metrics of one reconstructed volume.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    pub entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact_level_db: Option<f64>,
    pub max_abs: f64,
    pub peak_voxel: [usize; 3],
    pub peak_position_m: [f64; 3],
}

/// Summary of `|b| - |a|` on one projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Everything `run` measured, serialized as `report.toml`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub frequencies: usize,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub pairs_per_frequency: usize,
    pub grid_dims: [usize; 3],
    pub mask_radius_m: f64,
    pub truth_points: usize,
    pub operators: BTreeMap<String, OperatorReport>,
    pub differences: BTreeMap<String, DiffReport>,
}

impl Report {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("report serialization: {e}")))
    }
}

/// Knobs that do not belong in the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory that relative dataset paths resolve against.
    pub base_dir: PathBuf,
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Reconstruction workers, `0` = all cores.
    pub workers: usize,
    /// Overrides the scenario's operator list.
    pub operators: Option<Vec<FocusingOperatorKind>>,
}

impl Scenario {
    /// Parses without validating.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&src)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let src = bundled_source(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no bundled scenario named '{name}'")))?;
        Self::from_toml_str(src)
    }

    /// Every violated invariant, as `field.path: message`.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |path: &str, msg: &str| out.push(format!("{path}: {msg}"));

        if self.name.trim().is_empty() {
            bad("name", "must not be empty");
        }
        if self.operators.is_empty() {
            bad("operators", "must list at least one operator");
        }
        for (i, op) in self.operators.iter().enumerate() {
            if op.parse::<FocusingOperatorKind>().is_err() {
                bad(&format!("operators[{i}]"), &format!("unknown operator '{op}' (PhaseOnly, F0, F1, F2)"));
            }
        }

        let f = &self.frequencies;
        if f.count == 0 {
            bad("frequencies.count", "must be >= 1");
        }
        if !(f.start_hz.is_finite() && f.start_hz > 0.0) {
            bad("frequencies.start_hz", "must be > 0");
        }
        if !(f.stop_hz.is_finite() && f.stop_hz >= f.start_hz) {
            bad("frequencies.stop_hz", "must be >= start_hz");
        }
        if f.count == 1 && f.stop_hz != f.start_hz {
            bad("frequencies.stop_hz", "must equal start_hz when count = 1");
        }

        let z_m = match (&self.array, &self.scene.dataset) {
            (Some(a), _) => {
                array_issues(a, &mut bad);
                Some(a.z_m)
            }
            (None, Some(_)) => None,
            (None, None) => {
                bad("array", "required unless scene.dataset is given");
                None
            }
        };

        let s = &self.scene;
        if s.dataset.is_none() && s.scatterers.is_empty() && s.rings.is_empty() && s.lattice.is_none() {
            bad("scene", "needs scatterers, rings, a lattice or a dataset");
        }
        for (i, r) in s.rings.iter().enumerate() {
            if !(r.radius > 0.0) {
                bad(&format!("scene.rings[{i}].radius"), "must be > 0");
            }
            if r.count == 0 {
                bad(&format!("scene.rings[{i}].count"), "must be >= 1");
            }
        }
        if let Some(l) = &s.lattice {
            if l.counts.contains(&0) {
                bad("scene.lattice.counts", "must be >= 1");
            }
            if l.pitch.iter().any(|p| !(*p > 0.0)) {
                bad("scene.lattice.pitch", "must be > 0");
            }
        }
        if let Some(z_m) = z_m {
            for (path, p) in self.truth_with_paths() {
                if !p.is_finite() {
                    bad(&path, "must be finite");
                } else if (p.z - z_m).abs() <= PLANE_TOLERANCE {
                    bad(&path, "scatterer on aperture plane");
                } else if p.z > z_m {
                    bad(&path, "scatterer behind aperture");
                }
            }
        }

        let g = &self.grid;
        if g.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            bad("grid.spacing", "must be > 0");
        }
        if g.dims.contains(&0) {
            bad("grid.dims", "must be >= 1");
        }
        if let (Some(z_m), Ok(grid)) = (z_m, self.image_grid()) {
            if grid.check_in_front(z_m).is_err() {
                bad("grid", "grid must satisfy R_z < 0");
            }
        }

        if let Some(n) = &self.noise {
            if !n.snr_db.is_finite() {
                bad("noise.snr_db", "must be finite");
            }
        }
        if let Some(r) = self.metrics.and_then(|m| m.mask_radius_m) {
            if !(r > 0.0) {
                bad("metrics.mask_radius_m", "must be > 0");
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn operator_kinds(&self) -> Result<Vec<FocusingOperatorKind>> {
        self.operators.iter().map(|s| s.parse()).collect()
    }

    /// The linear frequency sweep, ascending.
    pub fn frequency_list(&self) -> Vec<f64> {
        let f = &self.frequencies;
        if f.count <= 1 {
            return vec![f.start_hz; f.count];
        }
        let step = (f.stop_hz - f.start_hz) / (f.count - 1) as f64;
        (0..f.count).map(|i| f.start_hz + i as f64 * step).collect()
    }

    pub fn image_grid(&self) -> Result<ImageGrid> {
        let c = self.grid.center;
        ImageGrid::centered(Position3::new(c[0], c[1], c[2]), self.grid.spacing, self.grid.dims)
    }

    fn truth_with_paths(&self) -> Vec<(String, Position3)> {
        let s = &self.scene;
        let mut out: Vec<(String, Position3)> = s
            .scatterers
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("scene.scatterers[{i}]"), Position3::new(p.x, p.y, p.z)))
            .collect();
        for (i, r) in s.rings.iter().enumerate() {
            for p in ring_scene(r).scatterers {
                out.push((format!("scene.rings[{i}]"), p.position));
            }
        }
        if let Some(l) = &s.lattice {
            for p in lattice_scene(l).scatterers {
                out.push(("scene.lattice".into(), p.position));
            }
        }
        out
    }

    /// Every scatterer the scenario declares.
    pub fn scene(&self) -> Scene {
        let s = &self.scene;
        let listed = Scene::new(
            s.scatterers
                .iter()
                .map(|p| PointScatterer::new(Position3::new(p.x, p.y, p.z), C64::new(p.re, p.im)))
                .collect(),
        );
        let rings = s.rings.iter().map(ring_scene).fold(Scene::default(), |a, b| a.union(&b));
        let lattice = s.lattice.as_ref().map(lattice_scene).unwrap_or_default();
        listed.union(&rings).union(&lattice)
    }

    /// Element layout of one capture, before SAR shifts.
    pub fn base_layout(&self) -> Result<ArrayLayout> {
        let a = self
            .array
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("scenario has no array section".into()))?;
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("array.{name} is required")))
        };
        let needf = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("array.{name} is required")))
        };
        match a.kind.as_str() {
            "spiral" => {
                let r_max = needf(a.r_max, "r_max")?;
                let (tp, tw) = spiral_points(need(a.n_tx, "n_tx")?, r_max, a.z_m)?;
                let (rp, rw) = spiral_points(need(a.n_rx, "n_rx")?, r_max, a.z_m)?;
                let (s, c) = a.rx_rotation_rad.sin_cos();
                let rp = rp
                    .iter()
                    .map(|p| Position3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z))
                    .collect();
                ArrayLayout::new(tp, tw, rp, rw)
            }
            "rect" => {
                let (p, w) = rect_points(
                    need(a.nx, "nx")?,
                    need(a.ny, "ny")?,
                    needf(a.lx, "lx")?,
                    needf(a.ly, "ly")?,
                    a.z_m,
                )?;
                ArrayLayout::monostatic(p, w)
            }
            other => Err(Error::InvalidArgument(format!("unknown array kind '{other}'"))),
        }
    }

    /// Synthesizes every capture (base position plus SAR shifts) and merges
    /// them into one dataset.
    pub fn synthesize(&self) -> Result<MeasurementSet> {
        let a = self
            .array
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("scenario has no array section".into()))?;
        let base = self.base_layout()?;
        let scene = self.scene();
        let freqs = self.frequency_list();
        let capture = |layout: &ArrayLayout| match a.pairing.as_str() {
            "monostatic" => {
                let pairs = (0..layout.tx_positions.len()).map(|i| (i, i)).collect();
                synthesize_pairs(&scene, layout, &freqs, pairs)
            }
            _ => synthesize(&scene, layout, &freqs),
        };
        let mut ms = capture(&base)?;
        for [dx, dy] in &a.sar_shifts {
            let shifted = shift_layout(&base, Position3::new(*dx, *dy, 0.0))?;
            ms = merge(&ms, &capture(&shifted)?)?;
        }
        if let Some(n) = &self.noise {
            ms = add_noise(&ms, n.snr_db, self.seed)?;
        }
        Ok(ms)
    }

    /// Validates, then synthesizes or loads the data.
    pub fn prepare(&self, base_dir: &Path) -> Result<Prepared> {
        self.validate()?;
        let measurements = match &self.scene.dataset {
            Some(p) => {
                let ms = io::load_measurements(&base_dir.join(p))?;
                match &self.noise {
                    Some(n) => add_noise(&ms, n.snr_db, self.seed)?,
                    None => ms,
                }
            }
            None => self.synthesize()?,
        };
        let grid = self.image_grid()?;
        if let Some(z_m) = measurements.layout.min_z() {
            if grid.check_in_front(z_m).is_err() {
                return Err(Error::Validation(vec!["grid: grid must satisfy R_z < 0".into()]));
            }
        }
        let truth: Vec<Position3> = self.scene().scatterers.iter().map(|s| s.position).collect();
        let mask_radius = match self.metrics.and_then(|m| m.mask_radius_m) {
            Some(r) => r,
            None => default_mask_radius(&measurements, &grid)?,
        };
        Ok(Prepared {
            measurements,
            grid,
            truth,
            mask_radius,
        })
    }

    /// Runs the full pipeline and writes its outputs.
    pub fn run(&self, opts: &RunOptions) -> Result<Report> {
        let kinds = match &opts.operators {
            Some(k) if !k.is_empty() => k.clone(),
            _ => {
                self.validate()?;
                self.operator_kinds()?
            }
        };
        let prepared = self.prepare(&opts.base_dir)?;
        let out = opts
            .out_dir
            .clone()
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name));
        fs::create_dir_all(&out)?;

        let engine = Engine::new(opts.workers);
        let mask = (!prepared.truth.is_empty()).then(|| target_mask(&prepared.grid, &prepared.truth, prepared.mask_radius));
        let mut operators = BTreeMap::new();
        let mut projections: Vec<(FocusingOperatorKind, Vec<_>)> = Vec::new();
        for kind in &kinds {
            log::info!("reconstructing with {kind}");
            let v = engine.backproject_multi_freq(&prepared.measurements, &prepared.grid, *kind)?;
            if !v.normalized {
                return Err(Error::EmptyImage);
            }
            let dir = out.join(kind.name());
            fs::create_dir_all(&dir)?;
            io::save_volume(&dir.join("volume.nfim"), &v)?;
            let mips: Vec<_> = ProjectionAxis::ALL.iter().map(|a| (*a, mip(&v, *a))).collect();
            for (axis, img) in &mips {
                io::save_image(&dir, &format!("mip_{axis}"), img)?;
            }
            operators.insert(kind.name().to_string(), operator_report(&v, mask.as_deref())?);
            projections.push((*kind, mips));
        }

        let mut differences = BTreeMap::new();
        if projections.len() > 1 {
            let dir = out.join("diff");
            fs::create_dir_all(&dir)?;
            for (i, (ka, ma)) in projections.iter().enumerate() {
                for (kb, mb) in &projections[i + 1..] {
                    for ((axis, a), (_, b)) in ma.iter().zip(mb) {
                        let d = diff_image(b, a)?;
                        let stem = format!("{}_minus_{}_{axis}", kb.name(), ka.name());
                        let mut w = std::io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?);
                        io::write_image_csv(&mut w, &d)?;
                        io::save_image(&dir, &format!("{stem}_pos"), &d.positive_part())?;
                        io::save_image(&dir, &format!("{stem}_neg"), &d.negative_part())?;
                        differences.insert(
                            stem,
                            DiffReport {
                                min: d.min(),
                                max: d.max(),
                                mean: d.values.iter().sum::<f64>() / d.values.len() as f64,
                            },
                        );
                    }
                }
            }
        }

        let ms = &prepared.measurements;
        let report = Report {
            scenario: self.name.clone(),
            seed: self.seed,
            frequencies: ms.frequencies.len(),
            tx_elements: ms.n_tx(),
            rx_elements: ms.n_rx(),
            pairs_per_frequency: ms.pairs_per_frequency(),
            grid_dims: prepared.grid.dims,
            mask_radius_m: prepared.mask_radius,
            truth_points: prepared.truth.len(),
            operators,
            differences,
        };
        fs::write(out.join("report.toml"), report.to_toml()?)?;
        Ok(report)
    }
}

fn array_issues(a: &ArraySpec, bad: &mut impl FnMut(&str, &str)) {
    if !a.z_m.is_finite() {
        bad("array.z_m", "must be finite");
    }
    match a.kind.as_str() {
        "spiral" => {
            if !a.r_max.is_some_and(|r| r > 0.0) {
                bad("array.r_max", "spiral needs r_max > 0");
            }
            if !a.n_tx.is_some_and(|n| n >= 1) {
                bad("array.n_tx", "spiral needs n_tx >= 1");
            }
            if !a.n_rx.is_some_and(|n| n >= 1) {
                bad("array.n_rx", "spiral needs n_rx >= 1");
            }
            if a.pairing == "monostatic" && (a.n_tx != a.n_rx || a.rx_rotation_rad != 0.0) {
                bad("array.pairing", "monostatic pairing needs identical Tx and Rx spirals");
            }
        }
        "rect" => {
            for (name, v) in [("nx", a.nx), ("ny", a.ny)] {
                if !v.is_some_and(|n| n >= 1) {
                    bad(&format!("array.{name}"), "rect needs a count >= 1");
                }
            }
            for (name, v) in [("lx", a.lx), ("ly", a.ly)] {
                if !v.is_some_and(|l| l > 0.0) {
                    bad(&format!("array.{name}"), "rect needs a length > 0");
                }
            }
        }
        other => bad("array.kind", &format!("unknown kind '{other}' (spiral, rect)")),
    }
    if !matches!(a.pairing.as_str(), "full" | "monostatic") {
        bad("array.pairing", &format!("unknown pairing '{}' (full, monostatic)", a.pairing));
    }
    for (i, s) in a.sar_shifts.iter().enumerate() {
        if s.iter().any(|v| !v.is_finite()) {
            bad(&format!("array.sar_shifts[{i}]"), "must be finite");
        }
    }
}

fn ring_scene(r: &RingSpec) -> Scene {
    let c = Position3::new(r.center[0], r.center[1], r.center[2]);
    Scene::ring(c, r.radius, r.count, r.start_angle_rad)
}

fn lattice_scene(l: &LatticeSpec) -> Scene {
    let [nx, ny] = l.counts;
    let off = |n: usize, i: usize, pitch: f64| (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch;
    Scene::new(
        (0..ny)
            .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| {
                PointScatterer::unit(Position3::new(
                    l.center[0] + off(nx, ix, l.pitch[0]),
                    l.center[1] + off(ny, iy, l.pitch[1]),
                    l.center[2],
                ))
            })
            .collect(),
    )
}

/// One resolution cell at the center frequency, for the aperture seen from
/// the grid center. The aperture radius is the largest in-plane distance of
/// an element from the element centroid.
fn default_mask_radius(ms: &MeasurementSet, grid: &ImageGrid) -> Result<f64> {
    let l = &ms.layout;
    let all: Vec<&Position3> = l.tx_positions.iter().chain(&l.rx_positions).collect();
    let n = all.len().max(1) as f64;
    let cx = all.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = all.iter().map(|p| p.y).sum::<f64>() / n;
    let radius = all.iter().map(|p| (p.x - cx).hypot(p.y - cy)).fold(0.0, f64::max);
    let z_m = l.min_z().unwrap_or(0.0);
    let [_, _, [z0, z1]] = grid.extent();
    let range = z_m - 0.5 * (z0 + z1);
    let f = &ms.frequencies;
    let center = 0.5 * (f[0] + f[f.len() - 1]);
    let lambda = WaveNumber::from_frequency(center)?.wavelength();
    if radius > 0.0 {
        Ok(resolution_cell(lambda, radius, range))
    } else {
        Ok(lambda)
    }
}

fn operator_report(v: &ImageVolume, mask: Option<&[bool]>) -> Result<OperatorReport> {
    let (peak, max_abs) = v.argmax().ok_or(Error::EmptyImage)?;
    let p = v.grid.position(peak);
    Ok(OperatorReport {
        entropy: entropy(v)?,
        artifact_level_db: mask.map(|m| artifact_level(v, m)).transpose()?,
        max_abs,
        peak_voxel: v.grid.coords(peak),
        peak_position_m: [p.x, p.y, p.z],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for name in BUNDLED {
            let s = Scenario::bundled(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.issues(), Vec::<String>::new(), "{name}");
        }
        assert!(Scenario::bundled("nope").is_err());
    }

    #[test]
    fn fig1_inputs() {
        let s = Scenario::bundled("fig1_point_scatterers").unwrap();
        assert_eq!(s.frequency_list(), vec![40e9]);
        assert_eq!(s.operator_kinds().unwrap(), vec![FocusingOperatorKind::PhaseOnly, FocusingOperatorKind::F1]);
        let scene = s.scene();
        assert_eq!(scene, Scene::two_rings(0.0));
        let layout = s.base_layout().unwrap();
        assert!(layout.tx_positions.len() >= 400 && layout.rx_positions.len() >= 400);
        let r = layout.tx_positions.iter().map(|p| p.x.hypot(p.y)).fold(0.0, f64::max);
        assert!(r < 0.1 && r > 0.099);
        assert_eq!(layout.aperture_z(), Some(0.1));
    }

    #[test]
    fn sar_plate_like_sizes() {
        let s = Scenario::bundled("sar_plate_like").unwrap();
        let f = s.frequency_list();
        assert_eq!(f.len(), 128);
        assert_eq!((f[0], f[127]), (71e9, 81e9));
        let a = s.array.as_ref().unwrap();
        let per_capture = a.nx.unwrap() * a.ny.unwrap();
        assert!(per_capture * per_capture * (1 + a.sar_shifts.len()) <= 10_000);
    }

    #[test]
    fn frequency_sweep_is_linear() {
        let mut s = Scenario::bundled("smoke").unwrap();
        s.frequencies = FrequencySpec {
            start_hz: 1e9,
            stop_hz: 2e9,
            count: 5,
        };
        assert_eq!(s.frequency_list(), vec![1e9, 1.25e9, 1.5e9, 1.75e9, 2e9]);
    }

    #[test]
    fn diagnostics_name_fields() {
        let mut s = Scenario::bundled("smoke").unwrap();
        s.frequencies.count = 0;
        s.operators.push("F9".into());
        s.scene.scatterers[0].z = s.array.as_ref().unwrap().z_m;
        let issues = s.issues();
        assert!(issues.iter().any(|i| i.starts_with("frequencies.count:")), "{issues:?}");
        let bad_op = format!("operators[{}]:", s.operators.len() - 1);
        assert!(issues.iter().any(|i| i.starts_with(&bad_op)), "{issues:?}");
        assert!(
            issues.iter().any(|i| i == "scene.scatterers[0]: scatterer on aperture plane"),
            "{issues:?}"
        );
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.starts_with("validation error: "), "{msg}");
    }

    #[test]
    fn grid_behind_aperture_is_reported() {
        let mut s = Scenario::bundled("smoke").unwrap();
        s.grid.center[2] = 0.2;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("grid must satisfy R_z < 0"), "{msg}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let src = "name = \"x\"\noperators = [\"F1\"]\nseed = \"seven\"\n";
        match Scenario::from_toml_str(src) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 8)),
            other => panic!("{other:?}"),
        }
        let typo = Scenario::bundled("smoke").map(|_| ()).and_then(|_| {
            Scenario::from_toml_str(&bundled_source("smoke").unwrap().replace("[grid]", "[grid]\nspcing = 1"))
        });
        assert!(matches!(typo, Err(Error::Parse { .. })));
    }

    #[test]
    fn lattice_is_centered() {
        let l = LatticeSpec {
            center: [0.01, 0.0, -0.02],
            pitch: [0.01, 0.02],
            counts: [3, 2],
        };
        let pts: Vec<Position3> = lattice_scene(&l).scatterers.iter().map(|s| s.position).collect();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], Position3::new(0.0, -0.01, -0.02));
        assert_eq!(pts[5], Position3::new(0.02, 0.01, -0.02));
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
