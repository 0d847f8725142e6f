//! Sensing ensembles and magnitude measurements `y_i = |a_i^* z|`.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sqr, ComplexVector, SquareMatrix};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingModel {
    /// I.i.d. uniform on the unit sphere of `C^n`.
    SphereUniform,
    /// Columns of `K` independent Haar unitary `n × n` matrices, `m = K n`.
    BlockUnitary,
    /// Caller-supplied vectors (replay files, hand-built test ensembles).
    Provided,
}

impl SensingModel {
    pub fn as_str(self) -> &'static str {
        match self {
            SensingModel::SphereUniform => "sphere",
            SensingModel::BlockUnitary => "unitary",
            SensingModel::Provided => "provided",
        }
    }
}

impl fmt::Display for SensingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SensingModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" | "sphere_uniform" => Ok(SensingModel::SphereUniform),
            "unitary" | "block_unitary" => Ok(SensingModel::BlockUnitary),
            "provided" => Ok(SensingModel::Provided),
            other => Err(Error::invalid(format!("unknown sensing model `{other}`"))),
        }
    }
}

/// Identifies the ensemble a [`MeasurementSet`] was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnsembleId {
    pub model: SensingModel,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// FNV-1a over the bit patterns of all entries.
    pub fingerprint: u64,
}

/// `m` sensing vectors of dimension `n`, stored row-major (row `i` is `a_i`).
#[derive(Clone, Debug, PartialEq)]
pub struct SensingEnsemble {
    n: usize,
    m: usize,
    model: SensingModel,
    seed: u64,
    data: Vec<Complex64>,
    row_norm_sqr: Vec<f64>,
    fingerprint: u64,
}

fn fingerprint(data: &[Complex64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for c in data {
        for bits in [c.re.to_bits(), c.im.to_bits()] {
            for byte in bits.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

impl SensingEnsemble {
    fn from_raw(n: usize, m: usize, model: SensingModel, seed: u64, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), n * m);
        let row_norm_sqr = data.chunks_exact(n).map(norm_sqr).collect();
        let fingerprint = fingerprint(&data);
        SensingEnsemble { n, m, model, seed, data, row_norm_sqr, fingerprint }
    }

    /// Builds an ensemble from explicit vectors; rows must be nonzero and share one dimension.
    pub fn from_vectors(vectors: &[ComplexVector], seed: u64) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| Error::invalid("ensemble needs m >= 1"))?;
        let n = first.dim();
        let mut data = Vec::with_capacity(n * vectors.len());
        for v in vectors {
            if v.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.dim() });
            }
            if v.is_zero() {
                return Err(Error::ZeroInput("sensing vectors must be nonzero"));
            }
            data.extend_from_slice(v.as_slice());
        }
        Ok(Self::from_raw(n, vectors.len(), SensingModel::Provided, seed, data))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn model(&self) -> SensingModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> EnsembleId {
        EnsembleId {
            model: self.model,
            n: self.n,
            m: self.m,
            seed: self.seed,
            fingerprint: self.fingerprint,
        }
    }

    /// Row `a_i` (0-based).
    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn vector(&self, i: usize) -> ComplexVector {
        ComplexVector::new(self.row(i).to_vec()).expect("n >= 1")
    }

    #[inline]
    pub fn row_norm_sqr(&self, i: usize) -> f64 {
        self.row_norm_sqr[i]
    }

    pub fn row_norms_sqr(&self) -> &[f64] {
        &self.row_norm_sqr
    }

    /// `a_i^* x` for every row.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows().map(|a| dot(a, x)).collect()
    }

    pub(crate) fn check_dim(&self, x: &ComplexVector) -> Result<()> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(())
    }

    /// Number of `n × n` blocks for the unitary model.
    pub fn blocks(&self) -> usize {
        if self.model == SensingModel::BlockUnitary {
            self.m / self.n
        } else {
            0
        }
    }

    /// Block `k` as a matrix whose columns are `a_{kn}, …, a_{kn+n-1}`.
    pub fn block(&self, k: usize) -> SquareMatrix {
        let mut b = SquareMatrix::zeros(self.n);
        for j in 0..self.n {
            b.col_mut(j).copy_from_slice(self.row(k * self.n + j));
        }
        b
    }

    /// Worst `‖B_k^* B_k − I‖_max` over unitary blocks (0 for other models).
    pub fn max_block_unitarity_defect(&self) -> f64 {
        (0..self.blocks()).map(|k| self.block(k).unitarity_defect()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> EnsembleFile {
        EnsembleFile {
            n: self.n,
            m: self.m,
            model: self.model,
            seed: self.seed,
            data: self.data.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_file(file: EnsembleFile) -> Result<Self> {
        if file.n == 0 || file.m == 0 {
            return Err(Error::invalid("ensemble file needs n, m >= 1"));
        }
        let expected = 2 * file.n * file.m;
        if file.data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: file.data.len() });
        }
        let data: Vec<Complex64> =
            file.data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        if data.chunks_exact(file.n).any(|r| norm_sqr(r) == 0.0) {
            return Err(Error::ZeroInput("sensing vectors must be nonzero"));
        }
        Ok(Self::from_raw(file.n, file.m, file.model, file.seed, data))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// JSON replay format: `data` holds the `m × n` entries row-major as interleaved
/// `re, im` doubles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub n: usize,
    pub m: usize,
    pub model: SensingModel,
    pub seed: u64,
    pub data: Vec<f64>,
}

/// `m` i.i.d. vectors uniform on the unit sphere of `C^n`.
pub fn sample_sphere(n: usize, m: usize, seed: u64) -> Result<SensingEnsemble> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("sphere ensemble needs n >= 1 and m >= 1"));
    }
    let mut rng = rng::stream(seed);
    let mut data = vec![Complex64::new(0.0, 0.0); n * m];
    for row in data.chunks_exact_mut(n) {
        rng::fill_unit_sphere(&mut rng, row);
    }
    Ok(SensingEnsemble::from_raw(n, m, SensingModel::SphereUniform, seed, data))
}

/// Haar-distributed unitary matrix: QR of a complex Gaussian matrix with column `j` of
/// `Q` multiplied by `R_jj / |R_jj|`, so the implied `R` has a positive diagonal.
pub fn haar_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    let g = SquareMatrix::random_normal(n, rng);
    let (mut q, r_diag) = g.qr();
    for (j, r) in r_diag.iter().enumerate() {
        let phase = if r.norm() > 0.0 { r / r.norm() } else { Complex64::new(1.0, 0.0) };
        q.col_mut(j).iter_mut().for_each(|c| *c *= phase);
    }
    q
}

/// `blocks` independent Haar unitary matrices; their columns in block order form the
/// ensemble, so `m = blocks · n`. Block `k` uses substream `k` of `seed`.
pub fn sample_block_unitary(n: usize, blocks: usize, seed: u64) -> Result<SensingEnsemble> {
    if n == 0 || blocks == 0 {
        return Err(Error::invalid("block-unitary ensemble needs n >= 1 and K >= 1"));
    }
    let mut data = Vec::with_capacity(n * n * blocks);
    for k in 0..blocks {
        let mut rng = rng::substream(seed, k as u64);
        let u = haar_unitary(n, &mut rng);
        for j in 0..n {
            data.extend_from_slice(u.col(j));
        }
    }
    Ok(SensingEnsemble::from_raw(n, n * blocks, SensingModel::BlockUnitary, seed, data))
}

/// Whether `√n > (ln m)²` holds for a unitary-model configuration.
pub fn unitary_side_condition(n: usize, m: usize) -> bool {
    (n as f64).sqrt() > (m as f64).ln().powi(2)
}

/// Magnitudes `y_i ≥ 0` tied to the ensemble they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    values: Vec<f64>,
    ensemble: EnsembleId,
}

impl MeasurementSet {
    /// Wraps externally obtained magnitudes for `ensemble`.
    pub fn new(ensemble: &SensingEnsemble, values: Vec<f64>) -> Result<Self> {
        if values.len() != ensemble.m() {
            return Err(Error::DimensionMismatch { expected: ensemble.m(), found: values.len() });
        }
        if values.iter().any(|y| !(y >= &0.0)) {
            return Err(Error::invalid("measurements must be finite and nonnegative"));
        }
        Ok(MeasurementSet { values, ensemble: ensemble.id() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensemble_id(&self) -> EnsembleId {
        self.ensemble
    }

    pub fn check_matches(&self, ensemble: &SensingEnsemble) -> Result<()> {
        if self.ensemble != ensemble.id() {
            return Err(Error::EnsembleMismatch);
        }
        Ok(())
    }
}

/// `y_i = |a_i^* z|`.
pub fn measure(ensemble: &SensingEnsemble, z: &ComplexVector) -> Result<MeasurementSet> {
    ensemble.check_dim(z)?;
    let values = ensemble.rows().map(|a| dot(a, z.as_slice()).norm()).collect();
    Ok(MeasurementSet { values, ensemble: ensemble.id() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, inner};

    #[test]
    fn sphere_vectors_are_unit_and_deterministic() {
        let e = sample_sphere(3, 5, 11).unwrap();
        assert_eq!((e.n(), e.m()), (3, 5));
        for i in 0..5 {
            assert!((e.row_norm_sqr(i).sqrt() - 1.0).abs() < 1e-12);
        }
        let f = sample_sphere(3, 5, 11).unwrap();
        assert_eq!(e, f);
        assert_ne!(e, sample_sphere(3, 5, 12).unwrap());
    }

    #[test]
    fn zero_sizes_are_rejected() {
        assert!(sample_sphere(0, 5, 1).is_err());
        assert!(sample_sphere(3, 0, 1).is_err());
        assert!(sample_block_unitary(0, 2, 1).is_err());
        assert!(sample_block_unitary(2, 0, 1).is_err());
    }

    #[test]
    fn sphere_first_coordinate_energy_is_half_in_c2() {
        let e = sample_sphere(2, 1_000_000, 2).unwrap();
        let mean = e.rows().map(|a| a[0].norm_sqr()).sum::<f64>() / e.m() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn blocks_are_unitary() {
        let e = sample_block_unitary(4, 3, 5).unwrap();
        assert_eq!(e.m(), 12);
        assert_eq!(e.blocks(), 3);
        assert!(e.max_block_unitarity_defect() <= 1e-12);
        for i in 0..12 {
            assert!((e.row_norm_sqr(i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_by_one_unitary_is_a_phase() {
        let e = sample_block_unitary(1, 2, 9).unwrap();
        assert_eq!(e.m(), 2);
        for a in e.rows() {
            assert!((a[0].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unitary_blocks_satisfy_parseval() {
        let e = sample_block_unitary(5, 4, 21).unwrap();
        let mut rng = rng::stream(1);
        let w = ComplexVector::random_normal(5, &mut rng);
        for k in 0..4 {
            let s: f64 = (0..5).map(|j| dot(e.row(k * 5 + j), w.as_slice()).norm_sqr()).sum();
            assert!((s - w.norm_sqr()).abs() < 1e-10);
        }
    }

    #[test]
    fn unitary_mean_energy_is_one_over_n() {
        let e = sample_block_unitary(3, 10_000, 4).unwrap();
        let w = ComplexVector::basis(3, 1);
        let mean = e.rows().map(|a| dot(a, w.as_slice()).norm_sqr()).sum::<f64>() / e.m() as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn haar_diagonal_has_no_phase_bias() {
        // Uncorrected Householder QR biases diag(Q); Haar has E[U_jj] = 0 and E|tr U|² = 1.
        let mut rng = rng::stream(77);
        let trials = 20_000;
        let n = 3;
        let mut diag_mean = Complex64::new(0.0, 0.0);
        let mut trace_sq = 0.0;
        for _ in 0..trials {
            let u = haar_unitary(n, &mut rng);
            let tr: Complex64 = (0..n).map(|j| u[(j, j)]).sum();
            diag_mean += u[(0, 0)];
            trace_sq += tr.norm_sqr();
        }
        diag_mean /= trials as f64;
        trace_sq /= trials as f64;
        assert!(diag_mean.norm() < 0.02, "{diag_mean}");
        assert!((trace_sq - 1.0).abs() < 0.05, "{trace_sq}");
    }

    #[test]
    fn measure_examples() {
        let e = SensingEnsemble::from_vectors(&[ComplexVector::basis(2, 0)], 0).unwrap();
        let y = measure(&e, &ComplexVector::basis(2, 0)).unwrap();
        assert_eq!(y.values(), &[1.0]);

        let e = sample_sphere(4, 30, 3).unwrap();
        let y0 = measure(&e, &ComplexVector::zeros(4)).unwrap();
        assert!(y0.values().iter().all(|&v| v == 0.0));

        let mut rng = rng::stream(5);
        let z = ComplexVector::random_unit(4, &mut rng);
        let y1 = measure(&e, &z).unwrap();
        let y2 = measure(&e, &z.scaled(cis(1.234))).unwrap();
        for (a, b) in y1.values().iter().zip(y2.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (i, v) in y1.values().iter().enumerate() {
            assert!((v - inner(&e.vector(i), &z).unwrap().norm()).abs() < 1e-15);
        }
        assert!(measure(&e, &ComplexVector::zeros(3)).is_err());
    }

    #[test]
    fn measurements_are_tied_to_their_ensemble() {
        let e = sample_sphere(3, 10, 1).unwrap();
        let f = sample_sphere(3, 10, 2).unwrap();
        let y = measure(&e, &ComplexVector::basis(3, 0)).unwrap();
        assert!(y.check_matches(&e).is_ok());
        assert!(matches!(y.check_matches(&f), Err(Error::EnsembleMismatch)));
        assert!(MeasurementSet::new(&e, vec![1.0; 9]).is_err());
        assert!(MeasurementSet::new(&e, vec![-1.0; 10]).is_err());
    }

    #[test]
    fn json_replay_round_trips() {
        let e = sample_block_unitary(3, 2, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.json");
        e.save_json(&path).unwrap();
        let back = SensingEnsemble::load_json(&path).unwrap();
        assert_eq!(e, back);
        let missing = dir.path().join("nope.json");
        let err = SensingEnsemble::load_json(&missing).unwrap_err();
        assert!(err.to_string().contains("nope.json"));
    }

    #[test]
    fn side_condition_flag() {
        assert!(!unitary_side_condition(50, 2000));
        assert!(unitary_side_condition(10_000, 20));
    }
}
