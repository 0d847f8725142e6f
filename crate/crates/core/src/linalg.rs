//! Complex vector primitives shared by every module.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `a^* b` on raw slices; conjugate-linear in `a`. Callers guarantee equal lengths.
#[inline]
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

/// Dense vector in `C^n`, `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        Ok(ComplexVector(entries))
    }

    /// Builds a vector from separate real and imaginary parts.
    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch { expected: re.len(), found: im.len() });
        }
        Self::new(re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect())
    }

    /// # Panics
    /// If `n == 0`.
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "vector dimension must be positive");
        ComplexVector(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Standard basis vector `e_k` (0-based `k`).
    ///
    /// # Panics
    /// If `k >= n`.
    pub fn basis(n: usize, k: usize) -> Self {
        assert!(k < n, "basis index out of range");
        let mut v = Self::zeros(n);
        v.0[k] = Complex64::new(1.0, 0.0);
        v
    }

    /// Uniform on the unit sphere of `C^n`.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(n);
        rng::fill_unit_sphere(rng, &mut v.0);
        v
    }

    /// I.i.d. complex normal entries, unit variance per real component.
    pub fn random_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(n);
        v.0.iter_mut().for_each(|c| *c = rng::complex_normal(rng));
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        ComplexVector(self.0.iter().map(|c| c * s).collect())
    }

    pub fn scaled_real(&self, s: f64) -> Self {
        ComplexVector(self.0.iter().map(|c| c * s).collect())
    }

    /// Unit vector in the same direction.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroInput("cannot normalize the zero vector"));
        }
        Ok(self.scaled_real(n.recip()))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &ComplexVector) -> Result<()> {
        check_dims(self, other)?;
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += s * y;
        }
        Ok(())
    }

    /// Largest-modulus entry index (first one on ties).
    pub fn argmax_modulus(&self) -> usize {
        let mut best = 0;
        let mut best_val = -1.0;
        for (i, c) in self.0.iter().enumerate() {
            let v = c.norm_sqr();
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        best
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<Complex64>> for ComplexVector {
    type Error = Error;
    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ComplexVector> for Vec<Complex64> {
    fn from(v: ComplexVector) -> Self {
        v.0
    }
}

// Arithmetic operators panic on dimension mismatch, like slice indexing.
impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Mul<Complex64> for &ComplexVector {
    type Output = ComplexVector;
    fn mul(self, s: Complex64) -> ComplexVector {
        self.scaled(s)
    }
}

fn check_dims(a: &ComplexVector, b: &ComplexVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Inner product `a^* b`, conjugate-linear in the first argument.
pub fn inner(a: &ComplexVector, b: &ComplexVector) -> Result<Complex64> {
    check_dims(a, b)?;
    Ok(dot(&a.0, &b.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAlignedDistance {
    /// `‖x − z‖`.
    pub raw: f64,
    /// `min_θ ‖x − e^{iθ} z‖`.
    pub aligned: f64,
}

/// Raw and phase-aligned distance between `x` and `z`.
///
/// The aligned value equals `sqrt(‖x‖² + ‖z‖² − 2|z^* x|)` but is evaluated as
/// `‖x − e^{iθ*} z‖` at the optimal phase `e^{iθ*} = z^*x / |z^*x|`, which keeps full
/// relative accuracy when `x` is close to the orbit of `z`.
pub fn dist_phase_aligned(x: &ComplexVector, z: &ComplexVector) -> Result<PhaseAlignedDistance> {
    check_dims(x, z)?;
    Ok(aligned_unchecked(&x.0, &z.0))
}

pub(crate) fn aligned_unchecked(x: &[Complex64], z: &[Complex64]) -> PhaseAlignedDistance {
    let c = dot(z, x);
    let phase = if c.norm() > 0.0 { c / c.norm() } else { Complex64::new(1.0, 0.0) };
    let mut raw = 0.0;
    let mut aligned = 0.0;
    for (xi, zi) in x.iter().zip(z) {
        raw += (xi - zi).norm_sqr();
        aligned += (xi - phase * zi).norm_sqr();
    }
    PhaseAlignedDistance { raw: raw.sqrt(), aligned: aligned.sqrt().min(raw.sqrt()) }
}

/// Checks `|x/|x| − z/|z|| ≤ 2·min(|x − z|/|z|, 1)` for nonzero scalars; a rounding
/// allowance of a few ulps is applied to the right-hand side.
pub fn phase_diff_bound_check(x: Complex64, z: Complex64) -> Result<bool> {
    if x.norm() == 0.0 || z.norm() == 0.0 {
        return Err(Error::ZeroInput("phase difference needs nonzero scalars"));
    }
    let lhs = (x / x.norm() - z / z.norm()).norm();
    let rhs = 2.0 * ((x - z).norm() / z.norm()).min(1.0);
    Ok(lhs <= rhs * (1.0 + 8.0 * f64::EPSILON) + 8.0 * f64::EPSILON)
}

/// Square complex matrix stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn random_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(n);
        m.data.iter_mut().for_each(|c| *c = rng::complex_normal(rng));
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (j, xj) in x.iter().enumerate() {
            for (yi, mij) in y.iter_mut().zip(self.col(j)) {
                *yi += mij * xj;
            }
        }
    }

    /// `M += w · u u^*`.
    pub fn add_outer(&mut self, w: f64, u: &[Complex64]) {
        let n = self.n;
        for j in 0..n {
            let uj = u[j].conj() * w;
            let col = &mut self.data[j * n..(j + 1) * n];
            for (mij, ui) in col.iter_mut().zip(u) {
                *mij += ui * uj;
            }
        }
    }

    /// `max_{ij} |M_ij − conj(M_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max_{ij} |(M^* M − I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let g = dot(self.col(i), self.col(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    /// Householder QR: returns `(Q, diag(R))` with `Q` unitary and `self = Q R`.
    pub fn qr(&self) -> (SquareMatrix, Vec<Complex64>) {
        let n = self.n;
        let mut a = self.clone();
        let mut reflectors: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);
        let mut r_diag = Vec::with_capacity(n);
        for k in 0..n {
            let x = &a.col(k)[k..];
            let xnorm = norm_sqr(x).sqrt();
            if xnorm == 0.0 {
                reflectors.push(None);
                r_diag.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let x0 = x[0];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
            let alpha = -phase * xnorm;
            let mut v: Vec<Complex64> = x.to_vec();
            v[0] -= alpha;
            let vnorm = norm_sqr(&v).sqrt();
            if vnorm == 0.0 {
                reflectors.push(None);
                r_diag.push(x0);
                continue;
            }
            v.iter_mut().for_each(|c| *c /= vnorm);
            for j in k..n {
                let col = &mut a.col_mut(j)[k..];
                let s = dot(&v, col) * 2.0;
                for (ci, vi) in col.iter_mut().zip(&v) {
                    *ci -= vi * s;
                }
            }
            r_diag.push(alpha);
            reflectors.push(Some(v));
        }
        let mut q = SquareMatrix::identity(n);
        for (k, refl) in reflectors.iter().enumerate().rev() {
            let Some(v) = refl else { continue };
            for j in 0..n {
                let col = &mut q.col_mut(j)[k..];
                let s = dot(v, col) * 2.0;
                for (ci, vi) in col.iter_mut().zip(v) {
                    *ci -= vi * s;
                }
            }
        }
        (q, r_diag)
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[j * self.n + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[j * self.n + i]
    }
}

/// Unit-modulus `e^{iθ}`.
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// `θ` grid of `points` equally spaced samples on `[0, 2π)`.
pub fn phase_grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |k| 2.0 * PI * k as f64 / points as f64)
}
