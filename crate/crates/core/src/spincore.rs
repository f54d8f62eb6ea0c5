//! Dicke-basis states and collective spin operators.
//!
//! Basis index `k = 0..=N` carries magnetic quantum number `m = J - k`,
//! so index 0 is the north pole `|↑⟩^⊗N`.

use nalgebra::{Complex, DVector, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, quadratic_form, CMatrix, CVector, HermitianEigen};
use crate::scalar::{cr, lit, to_f64, tol, Cplx, Real};

/// Default cap on the ensemble size; dense `(N+1)^2` storage beyond this
/// is rarely what anyone wants.
pub const DEFAULT_MAX_PARTICLES: usize = 2048;

/// Unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction<T: Real> {
    v: Vector3<T>,
}

impl<T: Real> Direction<T> {
    /// Accepts an already-normalized vector.
    pub fn new(nx: T, ny: T, nz: T) -> Result<Self> {
        let v = Vector3::new(nx, ny, nz);
        let norm = v.norm();
        if (norm - T::one()).abs() > tol::<T>(1e-12, 64.0) {
            return Err(Error::NotUnit { norm: to_f64(norm) });
        }
        Ok(Self { v })
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(nx: T, ny: T, nz: T) -> Result<Self> {
        Self::from_vector(Vector3::new(nx, ny, nz))
    }

    pub fn from_vector(v: Vector3<T>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > T::default_epsilon()) {
            return Err(Error::NotUnit { norm: to_f64(norm) });
        }
        Ok(Self { v: v / norm })
    }

    pub fn x() -> Self {
        Self { v: Vector3::x() }
    }

    pub fn y() -> Self {
        Self { v: Vector3::y() }
    }

    pub fn z() -> Self {
        Self { v: Vector3::z() }
    }

    /// `(cos α, sin α, 0)`, the drive axis at phase α.
    pub fn in_plane(alpha: T) -> Self {
        Self { v: Vector3::new(alpha.cos(), alpha.sin(), T::zero()) }
    }

    pub fn spherical(theta: T, phi: T) -> Self {
        Self {
            v: Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
        }
    }

    pub fn nx(&self) -> T {
        self.v.x
    }

    pub fn ny(&self) -> T {
        self.v.y
    }

    pub fn nz(&self) -> T {
        self.v.z
    }

    pub fn as_vector(&self) -> &Vector3<T> {
        &self.v
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.v.x, self.v.y, self.v.z]
    }

    pub fn dot(&self, other: &Self) -> T {
        self.v.dot(&other.v)
    }

    pub fn negated(&self) -> Self {
        Self { v: -self.v }
    }
}

/// Pure state of `N` spins in the symmetric subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState<T: Real> {
    n_particles: usize,
    amplitudes: CVector<T>,
}

impl<T: Real> DickeState<T> {
    pub fn new(n_particles: usize, amplitudes: CVector<T>) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if amplitudes.len() != n_particles + 1 {
            return Err(Error::DimensionMismatch { expected: n_particles + 1, got: amplitudes.len() });
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - T::one()).abs() > tol::<T>(1e-10, 1e3) {
            return Err(Error::InvalidParameter(format!(
                "state is not normalized (norm^2 = {})",
                to_f64(norm2)
            )));
        }
        Ok(Self { n_particles, amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn from_unnormalized(n_particles: usize, amplitudes: CVector<T>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > T::zero()) {
            return Err(Error::InvalidParameter("zero vector".into()));
        }
        Self::new(n_particles, amplitudes.unscale(norm))
    }

    pub(crate) fn from_raw(n_particles: usize, amplitudes: CVector<T>) -> Self {
        debug_assert_eq!(amplitudes.len(), n_particles + 1);
        Self { n_particles, amplitudes }
    }

    /// `|J, m = J - index⟩`.
    pub fn basis(n_particles: usize, index: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if index > n_particles {
            return Err(Error::DimensionMismatch { expected: n_particles + 1, got: index + 1 });
        }
        let mut a = CVector::zeros(n_particles + 1);
        a[index] = Complex::new(T::one(), T::zero());
        Ok(Self { n_particles, amplitudes: a })
    }

    /// `|↑⟩^⊗N`.
    pub fn north_pole(n_particles: usize) -> Result<Self> {
        Self::basis(n_particles, 0)
    }

    /// `|↓⟩^⊗N`.
    pub fn south_pole(n_particles: usize) -> Result<Self> {
        Self::basis(n_particles, n_particles)
    }

    /// `(|J⟩ + |-J⟩)/√2`.
    pub fn ghz_z(n_particles: usize) -> Result<Self> {
        let mut s = Self::basis(n_particles, 0)?;
        let h = T::one() / lit::<T>(2.0).sqrt();
        s.amplitudes[0] = cr(h);
        s.amplitudes[n_particles] = cr(h);
        Ok(s)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// Total spin `J = N/2`.
    pub fn spin(&self) -> T {
        lit::<T>(self.n_particles as f64 / 2.0)
    }

    /// Magnetic quantum number for basis index `k`.
    pub fn m_of(&self, k: usize) -> T {
        lit::<T>(self.n_particles as f64 / 2.0 - k as f64)
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector<T> {
        self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Cplx<T> {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> T {
        self.overlap(other).norm_sqr()
    }

    /// Populations `|c_m|²` in basis order.
    pub fn populations(&self) -> DVector<T> {
        self.amplitudes.map(|z| z.norm_sqr())
    }

    pub fn apply(&self, op: &CMatrix<T>) -> Result<Self> {
        check_dim(op, self.dim())?;
        Ok(Self::from_raw(self.n_particles, op * &self.amplitudes))
    }
}

/// Collective spin matrices `Ĵx, Ĵy, Ĵz` for spin `J = N/2`.
#[derive(Debug, Clone)]
pub struct CollectiveOps<T: Real> {
    n_particles: usize,
    pub jx: CMatrix<T>,
    pub jy: CMatrix<T>,
    pub jz: CMatrix<T>,
}

impl<T: Real> CollectiveOps<T> {
    pub fn new(n_particles: usize) -> Result<Self> {
        build_collective_ops_with_limit(n_particles, DEFAULT_MAX_PARTICLES)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    pub fn spin(&self) -> T {
        lit::<T>(self.n_particles as f64 / 2.0)
    }

    /// `[Ĵx, Ĵy, Ĵz]`.
    pub fn components(&self) -> [&CMatrix<T>; 3] {
        [&self.jx, &self.jy, &self.jz]
    }

    /// `n·Ĵ`.
    pub fn j_axis(&self, dir: &Direction<T>) -> CMatrix<T> {
        j_axis(self, dir)
    }

    /// `Ĵα = cos α Ĵx + sin α Ĵy`.
    pub fn j_alpha(&self, alpha: T) -> CMatrix<T> {
        j_axis(self, &Direction::in_plane(alpha))
    }

    /// `Ĵβ` with `β = α + π/2`.
    pub fn j_beta(&self, alpha: T) -> CMatrix<T> {
        j_axis(self, &Direction::in_plane(alpha + T::frac_pi_2()))
    }

    pub fn casimir(&self) -> CMatrix<T> {
        &self.jx * &self.jx + &self.jy * &self.jy + &self.jz * &self.jz
    }

    pub fn identity(&self) -> CMatrix<T> {
        CMatrix::identity(self.dim(), self.dim())
    }

    /// `e^{-i angle n·Ĵ}`.
    pub fn rotation(&self, axis: &Direction<T>, angle: T) -> CMatrix<T> {
        let eig = HermitianEigen::new(&self.j_axis(axis)).expect("collective operators are Hermitian");
        eig.unitary(angle)
    }
}

pub fn build_collective_ops<T: Real>(n_particles: usize) -> Result<CollectiveOps<T>> {
    build_collective_ops_with_limit(n_particles, DEFAULT_MAX_PARTICLES)
}

pub fn build_collective_ops_with_limit<T: Real>(
    n_particles: usize,
    limit: usize,
) -> Result<CollectiveOps<T>> {
    if n_particles == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if n_particles > limit {
        return Err(Error::TooManyParticles { n: n_particles, limit });
    }
    let dim = n_particles + 1;
    let j = n_particles as f64 / 2.0;
    let mut jz = CMatrix::zeros(dim, dim);
    let mut jx = CMatrix::zeros(dim, dim);
    let mut jy = CMatrix::zeros(dim, dim);
    let half = lit::<T>(0.5);
    for k in 0..dim {
        let m = j - k as f64;
        jz[(k, k)] = cr(lit(m));
        if k + 1 < dim {
            // ⟨m|Ĵ+|m-1⟩ lives at (k, k+1).
            let lower = m - 1.0;
            let elem = lit::<T>((j * (j + 1.0) - lower * (lower + 1.0)).sqrt());
            jx[(k, k + 1)] = cr(elem * half);
            jx[(k + 1, k)] = cr(elem * half);
            // Ĵy = (Ĵ+ - Ĵ-)/(2i)
            jy[(k, k + 1)] = Complex::new(T::zero(), -elem * half);
            jy[(k + 1, k)] = Complex::new(T::zero(), elem * half);
        }
    }
    Ok(CollectiveOps { n_particles, jx, jy, jz })
}

pub fn j_axis<T: Real>(ops: &CollectiveOps<T>, dir: &Direction<T>) -> CMatrix<T> {
    ops.jx.scale(dir.nx()) + ops.jy.scale(dir.ny()) + ops.jz.scale(dir.nz())
}

/// `ln C(n, k)` for all `k`, via cumulative log-factorials.
pub(crate) fn log_binomials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0f64; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    (0..=n).map(|k| lf[n] - lf[k] - lf[n - k]).collect()
}

/// Spin coherent state pointing at polar angle `theta`, azimuth `phi`.
///
/// `c_m = √C(N, J−m) cos(θ/2)^{J+m} sin(θ/2)^{J−m} e^{+i(J−m)φ}`, so that
/// `⟨Ĵ⟩ = J (sinθ cosφ, sinθ sinφ, cosθ)`. Evaluated
/// in log space so large `N` neither overflows nor underflows prematurely.
pub fn spin_coherent_state<T: Real>(n_particles: usize, theta: T, phi: T) -> Result<DickeState<T>> {
    if n_particles == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let lb = log_binomials(n_particles);
    let half = to_f64(theta) / 2.0;
    let (c, s) = (half.cos(), half.sin());
    let phi = to_f64(phi);
    let amps = CVector::from_fn(n_particles + 1, |k, _| {
        let up = n_particles - k;
        let mut log_mag = 0.5 * lb[k];
        let mut sign = 1.0;
        for (base, pow) in [(c, up), (s, k)] {
            if pow == 0 {
                continue;
            }
            if base == 0.0 {
                return Complex::new(T::zero(), T::zero());
            }
            log_mag += pow as f64 * base.abs().ln();
            if base < 0.0 && pow % 2 == 1 {
                sign = -sign;
            }
        }
        let mag = sign * log_mag.exp();
        let ang = (k as f64) * phi;
        Complex::new(lit(mag * ang.cos()), lit(mag * ang.sin()))
    });
    // Renormalize away rounding; the analytic norm is exactly one.
    DickeState::from_unnormalized(n_particles, amps)
}

fn check_dim<T: Real>(op: &CMatrix<T>, dim: usize) -> Result<()> {
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: op.nrows() });
    }
    Ok(())
}

/// `⟨ψ|Ô|ψ⟩` for Hermitian `Ô`.
pub fn expectation<T: Real>(state: &DickeState<T>, op: &CMatrix<T>) -> Result<T> {
    check_dim(op, state.dim())?;
    let q = quadratic_form(state.amplitudes(), op);
    let scale = max_abs(op).max(T::one()) * lit::<T>(state.dim() as f64);
    if q.im.abs() > tol::<T>(1e-10, 1e3) * scale {
        return Err(Error::InvalidParameter(format!(
            "operator is not Hermitian: Im⟨O⟩ = {:e}",
            to_f64(q.im)
        )));
    }
    Ok(q.re)
}

/// `e^{−i angle Ĵ_axis}|ψ⟩`.
pub fn rotate<T: Real>(
    ops: &CollectiveOps<T>,
    state: &DickeState<T>,
    axis: &Direction<T>,
    angle: T,
) -> Result<DickeState<T>> {
    if ops.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: state.dim() });
    }
    let eig = HermitianEigen::new(&ops.j_axis(axis))?;
    Ok(DickeState::from_raw(state.n_particles(), eig.evolve(state.amplitudes(), angle)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, frobenius};

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() < eps
    }

    #[test]
    fn zero_particles_rejected() {
        assert_eq!(build_collective_ops::<f64>(0).unwrap_err(), Error::EmptyEnsemble);
        assert!(matches!(
            build_collective_ops_with_limit::<f64>(10, 5),
            Err(Error::TooManyParticles { .. })
        ));
    }

    #[test]
    fn single_spin_jz() {
        let ops = build_collective_ops::<f64>(1).unwrap();
        assert_eq!(ops.jz[(0, 0)].re, 0.5);
        assert_eq!(ops.jz[(1, 1)].re, -0.5);
    }

    #[test]
    fn spin_one_ladder() {
        let ops = build_collective_ops::<f64>(2).unwrap();
        let r = 2f64.sqrt() / 2.0;
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!(close(ops.jx[(i, j)].re, r, 1e-15));
        }
        for k in 0..3 {
            assert_eq!(ops.jx[(k, k)].norm(), 0.0);
        }
        assert_eq!(ops.jx[(0, 2)].norm(), 0.0);
    }

    #[test]
    fn algebra_n7() {
        let ops = build_collective_ops::<f64>(7).unwrap();
        let i = Complex::new(0.0, 1.0);
        let d = commutator(&ops.jx, &ops.jy) - ops.jz.map(|z| z * i);
        assert!(frobenius(&d) < 1e-10);
    }

    #[test]
    fn j_axis_cases() {
        let ops = build_collective_ops::<f64>(5).unwrap();
        assert_eq!(ops.j_axis(&Direction::x()), ops.jx);
        assert_eq!(ops.j_axis(&Direction::z()), ops.jz);
        let jy = ops.j_alpha(std::f64::consts::FRAC_PI_2);
        assert!(frobenius(&(jy - &ops.jy)) < 1e-15);
        // β-axis for α = 0 is y.
        assert!(frobenius(&(ops.j_beta(0.0) - &ops.jy)) < 1e-15);
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(1.0, 1.0, 0.0).is_err());
        let d = Direction::normalized(1.0, 1.0, 0.0).unwrap();
        assert!(close(d.nx(), 0.5f64.sqrt(), 1e-15));
        assert!(Direction::<f64>::normalized(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn coherent_state_poles() {
        let s = spin_coherent_state::<f64>(6, 0.0, 1.3).unwrap();
        assert!(close(s.amplitudes()[0].norm(), 1.0, 1e-15));
        let s = spin_coherent_state::<f64>(6, std::f64::consts::PI, 0.0).unwrap();
        assert!(close(s.amplitudes()[6].norm(), 1.0, 1e-15));
        for k in 0..6 {
            assert!(s.amplitudes()[k].norm() < 1e-15);
        }
    }

    #[test]
    fn coherent_state_equator_n2() {
        let s = spin_coherent_state::<f64>(2, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let want = [0.5, 2f64.sqrt() / 2.0, 0.5];
        for (a, w) in s.amplitudes().iter().zip(want) {
            assert!(close(a.re, w, 1e-15) && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_state_large_n_is_normalized() {
        let s = spin_coherent_state::<f64>(1500, 1.1, 0.4).unwrap();
        assert!(close(s.norm(), 1.0, 1e-12));
        let ops = build_collective_ops::<f64>(1500).unwrap();
        let jz = expectation(&s, &ops.jz).unwrap();
        assert!(close(jz, 750.0 * 1.1f64.cos(), 1e-8));
    }

    #[test]
    fn pole_expectations() {
        let ops = build_collective_ops::<f64>(8).unwrap();
        let s = DickeState::north_pole(8).unwrap();
        assert_eq!(expectation(&s, &ops.jz).unwrap(), 4.0);
        assert_eq!(expectation(&s, &ops.jx).unwrap(), 0.0);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let ops = build_collective_ops::<f64>(3).unwrap();
        let s = DickeState::north_pole(4).unwrap();
        assert!(matches!(expectation(&s, &ops.jz), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let ops = build_collective_ops::<f64>(2).unwrap();
        let s = spin_coherent_state::<f64>(2, 1.0, 0.3).unwrap();
        let i = Complex::new(0.0, 1.0);
        let anti = ops.jx.map(|z| z * i);
        // i·Ĵx has a purely imaginary expectation value.
        assert!(expectation(&s, &anti).is_err());
    }

    #[test]
    fn rotation_pi_pulse() {
        let n = 9;
        let ops = build_collective_ops::<f64>(n).unwrap();
        let up = DickeState::north_pole(n).unwrap();
        let down = DickeState::south_pole(n).unwrap();
        let r = rotate(&ops, &up, &Direction::x(), std::f64::consts::PI).unwrap();
        assert!(close(r.fidelity(&down), 1.0, 1e-12));
        let same = rotate(&ops, &up, &Direction::x(), 0.0).unwrap();
        assert!(close(same.fidelity(&up), 1.0, 1e-14));
    }

    #[test]
    fn rotation_half_pi_matches_coherent_state() {
        use std::f64::consts::FRAC_PI_2;
        let n = 12;
        let ops = build_collective_ops::<f64>(n).unwrap();
        let up = DickeState::north_pole(n).unwrap();
        let r = rotate(&ops, &up, &Direction::x(), FRAC_PI_2).unwrap();
        let scs = spin_coherent_state(n, FRAC_PI_2, -FRAC_PI_2).unwrap();
        assert!(close(r.fidelity(&scs), 1.0, 1e-12));
    }

    #[test]
    fn f32_smoke() {
        let ops = build_collective_ops::<f32>(6).unwrap();
        let s = spin_coherent_state::<f32>(6, 0.7, 0.2).unwrap();
        let jz = expectation(&s, &ops.jz).unwrap();
        assert!((jz - 3.0 * 0.7f32.cos()).abs() < 1e-5);
    }
}
