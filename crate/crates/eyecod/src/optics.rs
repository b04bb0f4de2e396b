//! Separable lensless capture `y = Φ_L x Φ_Rᵀ + e`, its Tikhonov-regularized
//! inverse, coded-mask generation and first-layer-in-the-mask encoding.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_matrix_csv, write_matrix_csv, GrayImage};
use crate::workload::{LayerKind, LayerSpec, ReconDims};

/// Grayscale scene with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pub values: DMatrix<f64>,
}

impl SceneImage {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("empty scene".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("scene contains non-finite values".into()));
        }
        Ok(SceneImage { values })
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let values = DMatrix::from_fn(img.height, img.width, |r, c| img.get(r, c) as f64 / 255.0);
        SceneImage { values }
    }

    /// Clamps to `[0, 1]` and quantizes to 8 bits.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = (0..self.height())
            .flat_map(|r| (0..self.width()).map(move |c| (r, c)))
            .map(|(r, c)| (self.values[(r, c)].clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        GrayImage::new(self.height(), self.width(), pixels)
    }

    /// Min-max rescale into `[0, 1]`; a constant image maps to zeros.
    pub fn normalized(&self) -> SceneImage {
        let lo = self.values.min();
        let hi = self.values.max();
        let span = hi - lo;
        let values = if span > 0.0 {
            self.values.map(|v| (v - lo) / span)
        } else {
            DMatrix::zeros(self.height(), self.width())
        };
        SceneImage { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Binary,
    Real,
}

/// Left and right transfer matrices of a separable coded mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub phi_left: DMatrix<f64>,
    pub phi_right: DMatrix<f64>,
    pub kind: MaskKind,
}

impl MaskPair {
    pub fn new(phi_left: DMatrix<f64>, phi_right: DMatrix<f64>, kind: MaskKind) -> Result<Self> {
        let m = MaskPair {
            phi_left,
            phi_right,
            kind,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        MaskPair {
            phi_left: DMatrix::identity(n, n),
            phi_right: DMatrix::identity(n, n),
            kind: MaskKind::Binary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_left.is_empty() || self.phi_right.is_empty() {
            return Err(Error::Shape("empty mask matrix".into()));
        }
        let all = self.phi_left.iter().chain(self.phi_right.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("mask contains non-finite entries".into()));
        }
        if self.kind == MaskKind::Binary && all.clone().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Parameter("binary mask entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Scene `(rows, cols)` this mask accepts.
    pub fn scene_dims(&self) -> (usize, usize) {
        (self.phi_left.ncols(), self.phi_right.ncols())
    }

    /// Sensor `(rows, cols)` this mask produces.
    pub fn sensor_dims(&self) -> (usize, usize) {
        (self.phi_left.nrows(), self.phi_right.nrows())
    }

    pub fn recon_dims(&self) -> ReconDims {
        let (nh, nw) = self.scene_dims();
        let (mh, mw) = self.sensor_dims();
        ReconDims {
            scene: [nh, nw],
            measurement: [mh, mw],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub channels: Vec<DMatrix<f64>>,
    pub noise_sigma: f64,
}

impl Measurement {
    pub fn single(y: DMatrix<f64>, noise_sigma: f64) -> Self {
        Measurement {
            channels: vec![y],
            noise_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.channels.first().ok_or_else(|| Error::Shape("no channels".into()))?;
        if self.channels.iter().any(|c| c.shape() != first.shape()) {
            return Err(Error::Shape("channels differ in size".into()));
        }
        if self.channels.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("measurement contains non-finite values".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Parameter("noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconSettings {
    pub epsilon: f64,
}

impl Default for ReconSettings {
    fn default() -> Self {
        ReconSettings { epsilon: 1e-3 }
    }
}

impl ReconSettings {
    pub fn new(epsilon: f64) -> Result<Self> {
        let s = ReconSettings { epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

fn check_scene(scene: &DMatrix<f64>, masks: &MaskPair) -> Result<()> {
    let (nh, nw) = masks.scene_dims();
    if scene.shape() != (nh, nw) {
        return Err(Error::Shape(format!(
            "scene is {}x{}, masks expect {nh}x{nw}",
            scene.nrows(),
            scene.ncols()
        )));
    }
    Ok(())
}

fn check_measurement(y: &DMatrix<f64>, masks: &MaskPair) -> Result<()> {
    let (mh, mw) = masks.sensor_dims();
    if y.shape() != (mh, mw) {
        return Err(Error::Shape(format!(
            "measurement is {}x{}, masks produce {mh}x{mw}",
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// `Φ_L x Φ_Rᵀ + e` with `e ~ N(0, σ²)` drawn from a seeded generator.
pub fn simulate_capture(scene: &SceneImage, masks: &MaskPair, noise_sigma: f64, seed: u64) -> Result<Measurement> {
    masks.validate()?;
    check_scene(&scene.values, masks)?;
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut y = &masks.phi_left * &scene.values * masks.phi_right.transpose();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
        // column-major fill order is part of the determinism contract
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Measurement::single(y, noise_sigma))
}

/// Thin SVDs of both masks and the per-coefficient shrinkage weights.
#[derive(Debug, Clone)]
pub struct ReconOperator {
    pub u_left: DMatrix<f64>,
    pub s_left: DVector<f64>,
    pub v_left: DMatrix<f64>,
    pub u_right: DMatrix<f64>,
    pub s_right: DVector<f64>,
    pub v_right: DMatrix<f64>,
    /// `w_ij = sL_i sR_j / (sL_i² sR_j² + ε)`.
    pub weights: DMatrix<f64>,
}

fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v requested").transpose();
    (u, svd.singular_values, v)
}

impl ReconOperator {
    pub fn new(masks: &MaskPair, settings: ReconSettings) -> Result<Self> {
        settings.validate()?;
        masks.validate()?;
        let (u_left, s_left, v_left) = thin_svd(&masks.phi_left);
        let (u_right, s_right, v_right) = thin_svd(&masks.phi_right);
        let weights = DMatrix::from_fn(s_left.len(), s_right.len(), |i, j| {
            let (a, b) = (s_left[i], s_right[j]);
            a * b / (a * a * b * b + settings.epsilon)
        });
        Ok(ReconOperator {
            u_left,
            s_left,
            v_left,
            u_right,
            s_right,
            v_right,
            weights,
        })
    }

    pub fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let y_tilde = self.u_left.transpose() * y * &self.u_right;
        let z = y_tilde.component_mul(&self.weights);
        &self.v_left * z * self.v_right.transpose()
    }
}

/// Unique minimizer of `‖Φ_L X Φ_Rᵀ − y‖² + ε‖X‖²`, in closed form.
pub fn reconstruct(y: &DMatrix<f64>, masks: &MaskPair, settings: ReconSettings) -> Result<SceneImage> {
    settings.validate()?;
    check_measurement(y, masks)?;
    let op = ReconOperator::new(masks, settings)?;
    SceneImage::new(op.apply(y))
}

pub fn objective_value(x: &DMatrix<f64>, y: &DMatrix<f64>, masks: &MaskPair, epsilon: f64) -> Result<f64> {
    check_scene(x, masks)?;
    check_measurement(y, masks)?;
    if epsilon < 0.0 {
        return Err(Error::Parameter("epsilon must be >= 0".into()));
    }
    let r = &masks.phi_left * x * masks.phi_right.transpose() - y;
    Ok(r.norm_squared() + epsilon * x.norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskFamily {
    /// Circulant rows of a maximal-length LFSR sequence.
    Mls,
    /// IID Bernoulli(1/2) entries.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub left: f64,
    pub right: f64,
}

/// Sidecar metadata stored next to the mask CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskMeta {
    pub kind: MaskKind,
    pub family: Option<MaskFamily>,
    pub seed: Option<u64>,
    pub left_dims: [usize; 2],
    pub right_dims: [usize; 2],
}

/// Ratio of extreme singular values; infinite for a rank-deficient matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = SVD::new(m.clone(), false, false).singular_values;
    let max = s.max();
    let min = s.min();
    if min <= max * f64::EPSILON * (m.nrows().max(m.ncols()) as f64) {
        f64::INFINITY
    } else {
        max / min
    }
}

// Fibonacci LFSR feedback taps (1-indexed) of primitive polynomials.
const LFSR_TAPS: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 11, 10, 4],
    &[13, 12, 11, 8],
    &[14, 13, 12, 2],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 18, 17, 14],
    &[20, 17],
];

/// One period (`2^degree − 1` bits) of a maximal-length sequence.
pub fn m_sequence(degree: u32) -> Result<Vec<u8>> {
    if !(2..=20).contains(&degree) {
        return Err(Error::Parameter(format!("LFSR degree {degree} outside 2..=20")));
    }
    let taps = LFSR_TAPS[(degree - 2) as usize];
    let len = (1usize << degree) - 1;
    let mut state: u32 = 1;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((state & 1) as u8);
        let fb = taps.iter().fold(0, |acc, &t| acc ^ (state >> (degree - t)) & 1);
        state = (state >> 1) | (fb << (degree - 1));
    }
    Ok(out)
}

fn circulant_mls(rows: usize, cols: usize, offset: usize) -> Result<DMatrix<f64>> {
    let need = rows.max(cols);
    let mut degree = 2;
    while (1usize << degree) - 1 < need {
        degree += 1;
    }
    let seq = m_sequence(degree)?;
    let len = seq.len();
    Ok(DMatrix::from_fn(rows, cols, |r, c| seq[(c + len - (r % len) + offset) % len] as f64))
}

/// Deterministic binary mask pair for a scene of `n` and a sensor of `m`
/// (rows and columns alike).
pub fn generate_mask(family: MaskFamily, m: usize, n: usize, seed: u64) -> Result<(MaskPair, ConditionReport)> {
    if m == 0 || n == 0 {
        return Err(Error::Parameter("mask dimensions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (left, right) = match family {
        MaskFamily::Mls => {
            let a = rng.random_range(0..usize::MAX / 2);
            let b = rng.random_range(0..usize::MAX / 2);
            (circulant_mls(m, n, a)?, circulant_mls(m, n, b)?)
        }
        MaskFamily::Bernoulli => {
            let mut draw = || DMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
            let l = draw();
            let r = draw();
            (l, r)
        }
    };
    let report = ConditionReport {
        left: condition_number(&left),
        right: condition_number(&right),
    };
    Ok((MaskPair::new(left, right, MaskKind::Binary)?, report))
}

/// "Same"-size 1-D correlation as a matrix: `(C a)[i] = Σ_t k[t] a[i + t − K/2]`.
pub fn correlation_matrix(kernel: &[f64], n: usize) -> DMatrix<f64> {
    let c = (kernel.len() / 2) as isize;
    DMatrix::from_fn(n, n, |i, j| {
        let t = j as isize - i as isize + c;
        if t >= 0 && (t as usize) < kernel.len() {
            kernel[t as usize]
        } else {
            0.0
        }
    })
}

/// One filter folded into the optics.
#[derive(Debug, Clone)]
pub struct EncodedChannel {
    pub masks: MaskPair,
    /// Sum of the discarded squared singular values of the filter.
    pub residual: f64,
}

/// Folds the best rank-1 approximation `σ₁ u vᵀ` of every `K x K` filter
/// into the masks so that capture computes that filter's response.
///
/// The optical response becomes `Φ_L C_u X C_vᵀ Φ_Rᵀ`, i.e. the scene
/// correlated with `u vᵀ` under zero "same" padding.
pub fn encode_first_layer(base: &MaskPair, filters: &[DMatrix<f64>]) -> Result<Vec<EncodedChannel>> {
    base.validate()?;
    if filters.is_empty() {
        return Err(Error::Parameter("empty filter bank".into()));
    }
    let (nh, nw) = base.scene_dims();
    filters
        .iter()
        .map(|f| {
            if f.nrows() != f.ncols() || f.is_empty() {
                return Err(Error::Shape(format!("filter must be square K x K, got {:?}", f.shape())));
            }
            let (u, s, v) = thin_svd(f);
            let (mut col, mut row) = (u.column(0).into_owned(), v.column(0).into_owned());
            // fix the SVD sign ambiguity so identical filters map to identical masks
            let pivot = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            if pivot < 0.0 {
                col = -col;
                row = -row;
            }
            let scale = s[0].sqrt();
            let a: Vec<f64> = col.iter().map(|x| x * scale).collect();
            let b: Vec<f64> = row.iter().map(|x| x * scale).collect();
            let residual = s.iter().skip(1).map(|x| x * x).sum();
            let masks = MaskPair {
                phi_left: &base.phi_left * correlation_matrix(&a, nh),
                phi_right: &base.phi_right * correlation_matrix(&b, nw),
                kind: MaskKind::Real,
            };
            Ok(EncodedChannel { masks, residual })
        })
        .collect()
}

/// Layer shapes of the closed-form reconstruction, in execution order:
/// `U_Lᵀ·y`, `·U_R`, scale by `W`, `V_L·`, `·V_Rᵀ`.
pub fn recon_layer_specs(dims: ReconDims) -> Vec<LayerSpec> {
    let [nh, nw] = dims.scene;
    let [mh, mw] = dims.measurement;
    vec![
        LayerSpec::new("recon_ul_t", LayerKind::Matmul, [1, mw, mh], nh),
        LayerSpec::new("recon_ur", LayerKind::Matmul, [1, nh, mw], nw),
        LayerSpec::new("recon_scale", LayerKind::Elementwise, [1, nh, nw], nw),
        LayerSpec::new("recon_vl", LayerKind::Matmul, [1, nw, nh], nh),
        LayerSpec::new("recon_vr_t", LayerKind::Matmul, [1, nh, nw], nw),
    ]
}

/// Reconstruction as an executable layer sequence.
#[derive(Debug, Clone)]
pub struct ReconLayers {
    pub specs: Vec<LayerSpec>,
    pub op: ReconOperator,
}

pub fn recon_as_layers(masks: &MaskPair, settings: ReconSettings) -> Result<ReconLayers> {
    let op = ReconOperator::new(masks, settings)?;
    let specs = recon_layer_specs(masks.recon_dims());
    Ok(ReconLayers { specs, op })
}

impl ReconLayers {
    /// Runs the five layers one by one. Each matmul layer consumes its
    /// activation as `[positions, channels]` rows, matching the layer specs.
    pub fn execute(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let op = &self.op;
        // L1: positions = sensor columns, channels = sensor rows
        let a1 = y.transpose() * &op.u_left; // (mw x nh) == (U_Lᵀ y)ᵀ
        // L2: positions = nh, channels = mw
        let a2 = a1.transpose() * &op.u_right; // (nh x nw)
        let a3 = a2.component_mul(&op.weights);
        // L4: positions = nw, channels = nh
        let a4 = a3.transpose() * op.v_left.transpose(); // (nw x nh) == (V_L Z)ᵀ
        // L5: positions = nh, channels = nw
        a4.transpose() * op.v_right.transpose()
    }
}

fn mask_csv_paths(sidecar: &Path) -> (PathBuf, PathBuf) {
    let stem = sidecar.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dir = sidecar.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}_left.csv")), dir.join(format!("{stem}_right.csv")))
}

/// Writes `stem.json` plus `stem_left.csv` and `stem_right.csv` beside it.
pub fn save_masks(masks: &MaskPair, family: Option<MaskFamily>, seed: Option<u64>, sidecar: impl AsRef<Path>) -> Result<()> {
    let sidecar = sidecar.as_ref();
    let (left, right) = mask_csv_paths(sidecar);
    write_matrix_csv(&left, &masks.phi_left)?;
    write_matrix_csv(&right, &masks.phi_right)?;
    let meta = MaskMeta {
        kind: masks.kind,
        family,
        seed,
        left_dims: [masks.phi_left.nrows(), masks.phi_left.ncols()],
        right_dims: [masks.phi_right.nrows(), masks.phi_right.ncols()],
    };
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    crate::io::write_atomic(sidecar, text.as_bytes())
}

/// Loads a mask pair from its JSON sidecar; the CSV files sit beside it.
pub fn load_masks(sidecar: impl AsRef<Path>) -> Result<(MaskPair, MaskMeta)> {
    let sidecar = sidecar.as_ref();
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let meta: MaskMeta = serde_json::from_str(&text).map_err(|e| Error::format(sidecar, e.to_string()))?;
    let (left, right) = mask_csv_paths(sidecar);
    let phi_left = read_matrix_csv(&left)?;
    let phi_right = read_matrix_csv(&right)?;
    for (name, m, dims) in [("left_dims", &phi_left, meta.left_dims), ("right_dims", &phi_right, meta.right_dims)] {
        if [m.nrows(), m.ncols()] != dims {
            return Err(Error::validation(
                format!("{}#/{name}", sidecar.display()),
                format!("sidecar says {dims:?}, CSV is {}x{}", m.nrows(), m.ncols()),
            ));
        }
    }
    let masks = MaskPair::new(phi_left, phi_right, meta.kind)?;
    Ok((masks, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scene(m: DMatrix<f64>) -> SceneImage {
        SceneImage::new(m).unwrap()
    }

    #[test]
    fn identity_capture() {
        let x = DMatrix::identity(2, 2);
        let y = simulate_capture(&scene(x.clone()), &MaskPair::identity(2), 0.0, 0).unwrap();
        assert_eq!(y.channels[0], x);
    }

    #[test]
    fn scaled_identity_capture() {
        let two = DMatrix::identity(2, 2) * 2.0;
        let masks = MaskPair::new(two.clone(), two, MaskKind::Real).unwrap();
        let y = simulate_capture(&scene(DMatrix::identity(2, 2)), &masks, 0.0, 0).unwrap();
        assert_eq!(y.channels[0], DMatrix::identity(2, 2) * 4.0);
    }

    #[test]
    fn capture_rejects_mismatch() {
        let err = simulate_capture(&scene(DMatrix::zeros(3, 3)), &MaskPair::identity(2), 0.0, 0);
        assert!(matches!(err, Err(Error::Shape(_))));
        let err = simulate_capture(&scene(DMatrix::zeros(2, 2)), &MaskPair::identity(2), -1.0, 0);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let x = scene(DMatrix::from_element(3, 3, 0.5));
        let m = MaskPair::identity(3);
        let a = simulate_capture(&x, &m, 0.1, 7).unwrap();
        let b = simulate_capture(&x, &m, 0.1, 7).unwrap();
        let c = simulate_capture(&x, &m, 0.1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn closed_form_scaled_identity() {
        let two = DMatrix::identity(2, 2) * 2.0;
        let masks = MaskPair::new(two.clone(), two, MaskKind::Real).unwrap();
        let y = DMatrix::identity(2, 2) * 4.0;
        let x = reconstruct(&y, &masks, ReconSettings::new(16.0).unwrap()).unwrap();
        assert_relative_eq!(x.values, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn identity_inverse_small_epsilon() {
        let x = DMatrix::from_row_slice(2, 2, &[0.2, 0.9, 0.4, 0.1]);
        let r = reconstruct(&x, &MaskPair::identity(2), ReconSettings::new(1e-14).unwrap()).unwrap();
        assert_relative_eq!(r.values, x, epsilon = 1e-10);
    }

    #[test]
    fn epsilon_must_be_positive() {
        assert!(ReconSettings::new(0.0).is_err());
        assert!(ReconSettings::new(-1.0).is_err());
        let bad = ReconSettings { epsilon: 0.0 };
        assert!(matches!(
            reconstruct(&DMatrix::zeros(2, 2), &MaskPair::identity(2), bad),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn objective_zero_cases() {
        let x = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.7, 0.5]);
        let m = MaskPair::identity(2);
        assert_eq!(objective_value(&x, &x, &m, 0.0).unwrap(), 0.0);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(objective_value(&DMatrix::zeros(2, 2), &y, &m, 0.5).unwrap(), 30.0);
    }

    fn periodic_autocorrelation(seq: &[u8], lag: usize) -> i64 {
        let n = seq.len();
        (0..n)
            .map(|i| {
                let a = 1 - 2 * seq[i] as i64;
                let b = 1 - 2 * seq[(i + lag) % n] as i64;
                a * b
            })
            .sum()
    }

    #[test]
    fn m_sequences_are_two_valued() {
        for degree in 2..=12 {
            let s = m_sequence(degree).unwrap();
            let n = s.len() as i64;
            assert_eq!(periodic_autocorrelation(&s, 0), n);
            for lag in 1..s.len() {
                assert_eq!(periodic_autocorrelation(&s, lag), -1, "degree {degree} lag {lag}");
            }
        }
    }

    #[test]
    fn mls_length_seven_rows() {
        let (masks, _) = generate_mask(MaskFamily::Mls, 7, 7, 3).unwrap();
        let row0: Vec<u8> = masks.phi_left.row(0).iter().map(|&v| v as u8).collect();
        for r in 1..7 {
            let row: Vec<u8> = masks.phi_left.row(r).iter().map(|&v| v as u8).collect();
            let rotated: Vec<u8> = (0..7).map(|c| row0[(c + 7 - r) % 7]).collect();
            assert_eq!(row, rotated);
        }
        for lag in 1..7 {
            assert_eq!(periodic_autocorrelation(&row0, lag), -1);
        }
    }

    #[test]
    fn bernoulli_is_binary_and_seeded() {
        let (a, rep) = generate_mask(MaskFamily::Bernoulli, 12, 8, 11).unwrap();
        let (b, _) = generate_mask(MaskFamily::Bernoulli, 12, 8, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.phi_left.iter().chain(a.phi_right.iter()).all(|&v| v == 0.0 || v == 1.0));
        assert!(rep.left >= 1.0);
        assert!(generate_mask(MaskFamily::Bernoulli, 0, 8, 1).is_err());
    }

    #[test]
    fn mls_square_round_trip() {
        let (masks, rep) = generate_mask(MaskFamily::Mls, 15, 15, 5).unwrap();
        assert!(rep.left.is_finite() && rep.right.is_finite());
        let x = DMatrix::from_fn(15, 15, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        let y = simulate_capture(&scene(x.clone()), &masks, 0.0, 0).unwrap();
        let est = reconstruct(&y.channels[0], &masks, ReconSettings::new(1e-12).unwrap()).unwrap();
        assert!((est.values - x).amax() < 1e-6);
    }

    #[test]
    fn separable_filter_is_exact() {
        let f = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 1.0, 0.0, -1.0]);
        let enc = encode_first_layer(&MaskPair::identity(6), &[f]).unwrap();
        assert!(enc[0].residual < 1e-20);
    }

    #[test]
    fn delta_filter_keeps_masks() {
        let mut f = DMatrix::zeros(3, 3);
        f[(1, 1)] = 1.0;
        let (base, _) = generate_mask(MaskFamily::Bernoulli, 8, 6, 2).unwrap();
        let enc = encode_first_layer(&base, &[f]).unwrap();
        assert_relative_eq!(enc[0].masks.phi_left, base.phi_left, epsilon = 1e-12);
        assert_relative_eq!(enc[0].masks.phi_right, base.phi_right, epsilon = 1e-12);
        assert_eq!(enc[0].residual, 0.0);
    }

    #[test]
    fn empty_filter_bank() {
        assert!(encode_first_layer(&MaskPair::identity(3), &[]).is_err());
    }

    #[test]
    fn recon_layer_macs_small_and_large() {
        use crate::workload::layer_macs;
        let dims = |n: usize| ReconDims {
            scene: [n, n],
            measurement: [n, n],
        };
        let count = |n| -> u64 { recon_layer_specs(dims(n)).iter().map(|l| layer_macs(l).unwrap()).sum() };
        assert_eq!(count(2), 36);
        let matmul: u64 = recon_layer_specs(dims(512))
            .iter()
            .filter(|l| l.kind == LayerKind::Matmul)
            .map(|l| layer_macs(l).unwrap())
            .sum();
        assert_eq!(matmul, 4 * 512u64.pow(3));
    }

    #[test]
    fn mask_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (m, _) = generate_mask(MaskFamily::Bernoulli, 6, 4, 3).unwrap();
        let side = dir.path().join("mask.json");
        save_masks(&m, Some(MaskFamily::Bernoulli), Some(3), &side).unwrap();
        let (back, meta) = load_masks(&side).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta.left_dims, [6, 4]);
        let mut bad = meta.clone();
        bad.right_dims = [5, 4];
        std::fs::write(&side, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(matches!(load_masks(&side), Err(Error::Validation { .. })));
    }
}
