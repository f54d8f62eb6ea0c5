//! Dense complex linear-algebra helpers and the Hermitian eigensystem cache.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, phase, to_f64, Cplx, Real};

pub type CMatrix<T> = DMatrix<Cplx<T>>;
pub type CVector<T> = DVector<Cplx<T>>;

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn anticommutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b + b * a
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
}

/// Largest elementwise deviation `|m_ij - conj(m_ji)|`.
pub fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

/// `<psi|op|psi>` without discarding the imaginary part.
pub fn quadratic_form<T: Real>(psi: &CVector<T>, op: &CMatrix<T>) -> Cplx<T> {
    psi.dotc(&(op * psi))
}

/// Eigen-decomposition `H = V diag(λ) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: DVector<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn new(h: &CMatrix<T>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
        }
        let scale = max_abs(h).max(T::one());
        let tol = T::default_epsilon().sqrt() * lit::<T>(10.0) * scale;
        let defect = hermiticity_defect(h);
        if !(defect <= tol) {
            return Err(Error::Eigen(format!("matrix is not Hermitian (defect {:e})", to_f64(defect))));
        }
        let eig = nalgebra::linalg::SymmetricEigen::try_new(h.clone(), T::default_epsilon(), 0)
            .ok_or_else(|| Error::Eigen("QR iteration did not converge".into()))?;
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `e^{-iHt} psi`.
    pub fn evolve(&self, psi: &CVector<T>, t: T) -> CVector<T> {
        let mut c = self.vectors.ad_mul(psi);
        for (ci, &l) in c.iter_mut().zip(self.values.iter()) {
            *ci *= phase(l * t);
        }
        &self.vectors * c
    }

    /// `e^{-iHt}` as a dense matrix.
    pub fn unitary(&self, t: T) -> CMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let p = phase(l * t);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= p);
        }
        scaled * self.vectors.adjoint()
    }
}

fn content_hash<T: Real>(m: &CMatrix<T>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    m.nrows().hash(&mut h);
    m.ncols().hash(&mut h);
    for z in m.iter() {
        to_f64(z.re).to_bits().hash(&mut h);
        to_f64(z.im).to_bits().hash(&mut h);
    }
    h.finish()
}

/// Shared cache of Hermitian eigensystems keyed by matrix content.
///
/// Insertion is idempotent: concurrent callers that miss on the same key
/// may both decompose, but only the first result is kept and both return
/// an identical decomposition of the same matrix.
#[derive(Debug, Default)]
pub struct EigenCache<T: Real> {
    map: RwLock<HashMap<u64, Arc<HermitianEigen<T>>>>,
}

impl<T: Real> EigenCache<T> {
    pub fn new() -> Self {
        Self { map: RwLock::new(HashMap::new()) }
    }

    pub fn get_or_compute(&self, h: &CMatrix<T>) -> Result<Arc<HermitianEigen<T>>> {
        let key = content_hash(h);
        if let Some(e) = self.map.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(e));
        }
        let eig = Arc::new(HermitianEigen::new(h)?);
        let mut map = self.map.write().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert(eig)))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().expect("cache lock").clear();
    }
}
