//! Quantum Fisher information matrix, projection statistics, Husimi
//! distribution and derived figures of merit.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::scalar::{lit, to_f64, Real};
use crate::spincore::{log_binomials, rotate, CollectiveOps, DickeState, Direction};

/// Eigen-analysis of the 3×3 QFI matrix of a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct QfimResult<T: Real> {
    pub matrix: Matrix3<T>,
    /// Descending.
    pub eigenvalues: [T; 3],
    pub eigenvectors: [Direction<T>; 3],
    pub f_q_max: T,
    pub n_max: Direction<T>,
    /// Top two eigenvalues closer than `1e-9 f_q_max`; `n_max` is then one
    /// deterministic representative of the eigenspace.
    pub degenerate_top: bool,
}

fn applied<T: Real>(ops: &CollectiveOps<T>, state: &DickeState<T>) -> Result<[CVector<T>; 3]> {
    if ops.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: state.dim() });
    }
    let psi = state.amplitudes();
    Ok([&ops.jx * psi, &ops.jy * psi, &ops.jz * psi])
}

/// Mean spin vector `⟨Ĵ⟩`.
pub fn mean_spin<T: Real>(state: &DickeState<T>, ops: &CollectiveOps<T>) -> Result<Vector3<T>> {
    let v = applied(ops, state)?;
    let psi = state.amplitudes();
    Ok(Vector3::new(psi.dotc(&v[0]).re, psi.dotc(&v[1]).re, psi.dotc(&v[2]).re))
}

/// `ℱ_{μν} = 2⟨{Ĵμ, Ĵν}⟩ − 4⟨Ĵμ⟩⟨Ĵν⟩`.
pub fn qfim_matrix<T: Real>(state: &DickeState<T>, ops: &CollectiveOps<T>) -> Result<Matrix3<T>> {
    let v = applied(ops, state)?;
    let psi = state.amplitudes();
    let mean = [psi.dotc(&v[0]).re, psi.dotc(&v[1]).re, psi.dotc(&v[2]).re];
    let four = lit::<T>(4.0);
    let mut f = Matrix3::zeros();
    for mu in 0..3 {
        for nu in mu..3 {
            // ⟨{Ĵμ, Ĵν}⟩ = 2 Re ⟨Ĵμψ|Ĵνψ⟩
            let anti = v[mu].dotc(&v[nu]).re * lit(2.0);
            let val = anti * lit(2.0) - four * mean[mu] * mean[nu];
            f[(mu, nu)] = val;
            f[(nu, mu)] = val;
        }
    }
    Ok(f)
}

/// Sign convention: largest-magnitude component positive, ties broken by
/// the first component.
fn canonical_sign<T: Real>(v: Vector3<T>) -> Vector3<T> {
    let slack = T::default_epsilon() * lit(64.0);
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() + slack {
            best = i;
        }
    }
    if v[best] < T::zero() {
        -v
    } else {
        v
    }
}

pub fn qfim<T: Real>(state: &DickeState<T>, ops: &CollectiveOps<T>) -> Result<QfimResult<T>> {
    let matrix = qfim_matrix(state, ops)?;
    let eig = nalgebra::SymmetricEigen::new(matrix);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.map(|i| eig.eigenvalues[i]);
    let mut vecs = order.map(|i| canonical_sign(eig.eigenvectors.column(i).into_owned()));
    let f_q_max = eigenvalues[0];
    let degenerate_top = (eigenvalues[0] - eigenvalues[1]).abs() <= lit::<T>(1e-9) * f_q_max.abs().max(T::one());
    if degenerate_top {
        // Pick the first coordinate axis with a sizable projection onto the
        // top eigenspace so the representative is reproducible.
        let dim = if (eigenvalues[0] - eigenvalues[2]).abs() <= lit::<T>(1e-9) * f_q_max.abs().max(T::one()) {
            3
        } else {
            2
        };
        for axis in 0..3 {
            let e = Vector3::ith(axis, T::one());
            let proj = (0..dim).fold(Vector3::zeros(), |acc, k| acc + vecs[k] * vecs[k].dot(&e));
            if proj.norm() > lit(0.1) {
                let rep = canonical_sign(proj.normalize());
                vecs[0] = rep;
                if dim >= 2 {
                    let other = vecs[1] - rep * rep.dot(&vecs[1]);
                    let other = if other.norm() > lit(1e-6) { other.normalize() } else { rep.cross(&vecs[2]).normalize() };
                    vecs[1] = canonical_sign(other);
                    if dim == 3 {
                        vecs[2] = canonical_sign(rep.cross(&vecs[1]));
                    }
                }
                break;
            }
        }
    }
    let eigenvectors = vecs.map(|v| Direction::from_vector(v).expect("eigenvectors are nonzero"));
    Ok(QfimResult { matrix, eigenvalues, f_q_max, n_max: eigenvectors[0], eigenvectors, degenerate_top })
}

/// `F_Q = 4(ΔĴ_n)²`.
pub fn qfi_along<T: Real>(state: &DickeState<T>, ops: &CollectiveOps<T>, dir: &Direction<T>) -> Result<T> {
    if ops.dim() != state.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: state.dim() });
    }
    let psi = state.amplitudes();
    let v = ops.j_axis(dir) * psi;
    let mean = psi.dotc(&v).re;
    Ok(lit::<T>(4.0) * (v.norm_squared() - mean * mean))
}

/// Populations `P_m` of the eigenstates of `Ĵ_axis`, ordered `m = J..−J`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisDistribution<T: Real> {
    pub axis: Direction<T>,
    pub n_particles: usize,
    pub probabilities: Vec<T>,
}

impl<T: Real> AxisDistribution<T> {
    pub fn m_values(&self) -> impl Iterator<Item = T> + '_ {
        let j = self.n_particles as f64 / 2.0;
        (0..self.probabilities.len()).map(move |k| lit(j - k as f64))
    }

    pub fn total(&self) -> T {
        self.probabilities.iter().fold(T::zero(), |a, &p| a + p)
    }

    pub fn mean(&self) -> T {
        self.m_values().zip(&self.probabilities).fold(T::zero(), |a, (m, &p)| a + m * p)
    }

    pub fn variance(&self) -> T {
        let mean = self.mean();
        self.m_values().zip(&self.probabilities).fold(T::zero(), |a, (m, &p)| a + (m - mean) * (m - mean) * p)
    }

    /// CSV with header `m,P`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,P\n");
        for (m, p) in self.m_values().zip(&self.probabilities) {
            let _ = writeln!(out, "{},{}", to_f64(m), to_f64(*p));
        }
        out
    }
}

/// Rotates `axis` onto `z` and reads off the populations.
pub fn axis_distribution<T: Real>(
    state: &DickeState<T>,
    ops: &CollectiveOps<T>,
    axis: &Direction<T>,
) -> Result<AxisDistribution<T>> {
    let rotated = rotate_axis_to_z(state, ops, axis)?;
    Ok(AxisDistribution {
        axis: *axis,
        n_particles: state.n_particles(),
        probabilities: rotated.populations().iter().copied().collect(),
    })
}

/// Applies the rotation that carries `axis` onto `+z`.
pub fn rotate_axis_to_z<T: Real>(
    state: &DickeState<T>,
    ops: &CollectiveOps<T>,
    axis: &Direction<T>,
) -> Result<DickeState<T>> {
    let z = Vector3::z();
    let cross = axis.as_vector().cross(&z);
    let cos = axis.nz().max(-T::one()).min(T::one());
    if cross.norm() <= lit::<T>(1e-14) {
        if cos > T::zero() {
            return Ok(state.clone());
        }
        return rotate(ops, state, &Direction::x(), T::pi());
    }
    let k = Direction::from_vector(cross)?;
    let angle = cross.norm().atan2(cos);
    rotate(ops, state, &k, angle)
}

/// Husimi distribution `Q(θ, φ) = |⟨θ, φ|ψ⟩|²` on a uniform grid,
/// `θ ∈ [0, π]` inclusive and `φ ∈ [−π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiField<T: Real> {
    pub thetas: Vec<T>,
    pub phis: Vec<T>,
    /// Row-major: `values[i * phis.len() + j]` at `(thetas[i], phis[j])`.
    pub values: Vec<T>,
}

impl<T: Real> HusimiField<T> {
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.phis.len() + j]
    }

    pub fn argmax(&self) -> (T, T, T) {
        let (idx, &v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, &self.values[0]), |best, cur| if *cur.1 > *best.1 { cur } else { best });
        (self.thetas[idx / self.phis.len()], self.phis[idx % self.phis.len()], v)
    }

    /// Grid points that are maxima over their 8-neighbourhood (φ periodic)
    /// and exceed `floor`.
    pub fn local_maxima(&self, floor: T) -> Vec<(T, T, T)> {
        let (nt, np) = (self.thetas.len(), self.phis.len());
        let mut out = Vec::new();
        for i in 0..nt {
            for j in 0..np {
                let v = self.at(i, j);
                if v < floor {
                    continue;
                }
                let mut is_max = true;
                for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let ii = i as i64 + di;
                        if ii < 0 || ii >= nt as i64 {
                            continue;
                        }
                        let jj = (j as i64 + dj).rem_euclid(np as i64) as usize;
                        if self.at(ii as usize, jj) > v {
                            is_max = false;
                        }
                    }
                }
                // Poles are single points in θ; keep one representative.
                if is_max && (i == 0 || i == nt - 1) && out.iter().any(|&(t, _, _): &(T, T, T)| t == self.thetas[i]) {
                    continue;
                }
                if is_max {
                    out.push((self.thetas[i], self.phis[j], v));
                }
            }
        }
        out
    }

    /// CSV with header `theta,phi,Q`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,Q\n");
        for (i, th) in self.thetas.iter().enumerate() {
            for (j, ph) in self.phis.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", to_f64(*th), to_f64(*ph), to_f64(self.at(i, j)));
            }
        }
        out
    }
}

pub const MIN_HUSIMI_RESOLUTION: usize = 16;

pub fn husimi<T: Real>(state: &DickeState<T>, n_theta: usize, n_phi: usize) -> Result<HusimiField<T>> {
    if n_theta < MIN_HUSIMI_RESOLUTION || n_phi < MIN_HUSIMI_RESOLUTION {
        return Err(Error::InvalidParameter(format!(
            "Husimi grid must be at least {MIN_HUSIMI_RESOLUTION}x{MIN_HUSIMI_RESOLUTION}"
        )));
    }
    let n = state.n_particles();
    let lb = log_binomials(n);
    let thetas: Vec<f64> = (0..n_theta).map(|i| std::f64::consts::PI * i as f64 / (n_theta - 1) as f64).collect();
    let phis: Vec<f64> = (0..n_phi)
        .map(|j| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64)
        .collect();
    let amps: Vec<(f64, f64)> = state.amplitudes().iter().map(|z| (to_f64(z.re), to_f64(z.im))).collect();
    let rows: Vec<Vec<T>> = thetas
        .par_iter()
        .map(|&theta| {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            // |SCS magnitude| per basis index; zero where a factor vanishes.
            let mags: Vec<f64> = (0..=n)
                .map(|k| {
                    let up = n - k;
                    if (up > 0 && c.abs() < 1e-300) || (k > 0 && s.abs() < 1e-300) {
                        return 0.0;
                    }
                    let mut l = 0.5 * lb[k];
                    if up > 0 {
                        l += up as f64 * c.abs().ln();
                    }
                    if k > 0 {
                        l += k as f64 * s.abs().ln();
                    }
                    l.exp()
                })
                .collect();
            phis.iter()
                .map(|&phi| {
                    // ⟨θφ|ψ⟩ = Σ_k mag_k e^{−ikφ} ψ_k
                    let (mut re, mut im) = (0.0, 0.0);
                    for (k, (&mag, &(ar, ai))) in mags.iter().zip(&amps).enumerate() {
                        if mag == 0.0 {
                            continue;
                        }
                        let (sn, cs) = (k as f64 * phi).sin_cos();
                        re += mag * (cs * ar + sn * ai);
                        im += mag * (cs * ai - sn * ar);
                    }
                    lit::<T>((re * re + im * im).min(1.0))
                })
                .collect()
        })
        .collect();
    Ok(HusimiField {
        thetas: thetas.into_iter().map(lit).collect(),
        phis: phis.into_iter().map(lit).collect(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// Normalized average spin length `Z̄ = (2/N) Σ |m| P_m` along `z`.
pub fn average_spin_length<T: Real>(state: &DickeState<T>) -> T {
    let n = state.n_particles();
    let pops = state.populations();
    let sum = pops.iter().enumerate().fold(T::zero(), |a, (k, &p)| a + state.m_of(k).abs() * p);
    sum * lit(2.0) / lit(n as f64)
}

/// Cat-state estimate `N² Z̄²` for a state whose lobes already lie on `z`.
pub fn cat_qfi_estimate<T: Real>(state: &DickeState<T>) -> T {
    let n = lit::<T>(state.n_particles() as f64);
    let z = average_spin_length(state);
    n * n * z * z
}

/// Cat-state estimate for raw two-axis-twisting output (lobes on `y`):
/// applies `e^{−iĴx π/2}` first.
pub fn cat_qfi_estimate_from_tatnt<T: Real>(state: &DickeState<T>, ops: &CollectiveOps<T>) -> Result<T> {
    let rotated = rotate(ops, state, &Direction::x(), T::frac_pi_2())?;
    Ok(cat_qfi_estimate(&rotated))
}

/// `G = 20 log10((1/√N)/Δφ)` in dB.
pub fn metrological_gain(delta_phi: f64, n_particles: usize) -> Result<f64> {
    if !(delta_phi > 0.0) || !delta_phi.is_finite() {
        return Err(Error::InvalidParameter(format!("delta_phi must be positive, got {delta_phi}")));
    }
    if n_particles == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let sql = 1.0 / (n_particles as f64).sqrt();
    Ok(20.0 * (sql / delta_phi).log10())
}

/// QCRB gain `20 log10(√(F_Q/N))`.
pub fn qcrb_gain(f_q: f64, n_particles: usize) -> Result<f64> {
    metrological_gain(1.0 / f_q.sqrt(), n_particles)
}
