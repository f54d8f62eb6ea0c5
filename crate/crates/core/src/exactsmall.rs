//! Brute-force tensor-product oracle for small ensembles.
//!
//! Everything here works in the full `2^N` space with sparse operators
//! assembled from single-site Pauli matrices, and exponentiates with a
//! scaled Taylor series. Nothing is shared with the Dicke-basis pipeline
//! beyond the model parameters, so agreement between the two is a real
//! check.

use std::collections::BTreeMap;

use nalgebra::{Complex, Matrix3};

use crate::error::{Error, Result};
use crate::models::{bessel_j, HamiltonianKind, HamiltonianSpec};
use crate::spincore::{DickeState, Direction};

pub const MAX_ORACLE_PARTICLES: usize = 12;

type C64 = Complex<f64>;

const I: C64 = Complex { re: 0.0, im: 1.0 };

/// Row-wise sparse complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, rows: (0..dim).map(|i| vec![(i, C64::new(1.0, 0.0))]).collect() }
    }

    fn from_dense(m: [[C64; 2]; 2]) -> Self {
        let mut out = Self::zeros(2);
        for (r, row) in m.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != C64::new(0.0, 0.0) {
                    out.rows[r].push((c, v));
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.rows[r].iter().filter(|(j, _)| *j == c).map(|(_, v)| *v).sum()
    }

    pub fn kron(&self, other: &SparseOp) -> SparseOp {
        let dim = self.dim * other.dim;
        let mut rows = vec![Vec::new(); dim];
        for (ra, row_a) in self.rows.iter().enumerate() {
            for (rb, row_b) in other.rows.iter().enumerate() {
                let r = ra * other.dim + rb;
                for &(ca, va) in row_a {
                    for &(cb, vb) in row_b {
                        rows[r].push((ca * other.dim + cb, va * vb));
                    }
                }
            }
        }
        SparseOp { dim, rows }
    }

    fn from_maps(dim: usize, maps: Vec<BTreeMap<usize, C64>>) -> Self {
        let rows = maps
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| v.norm() > 0.0).collect())
            .collect();
        SparseOp { dim, rows }
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        self.combine(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &SparseOp, b: C64) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let maps = (0..self.dim)
            .map(|r| {
                let mut m = BTreeMap::new();
                for &(c, v) in &self.rows[r] {
                    *m.entry(c).or_insert(C64::new(0.0, 0.0)) += a * v;
                }
                for &(c, v) in &other.rows[r] {
                    *m.entry(c).or_insert(C64::new(0.0, 0.0)) += b * v;
                }
                m
            })
            .collect();
        Self::from_maps(self.dim, maps)
    }

    pub fn scale(&self, s: C64) -> SparseOp {
        SparseOp { dim: self.dim, rows: self.rows.iter().map(|r| r.iter().map(|&(c, v)| (c, v * s)).collect()).collect() }
    }

    pub fn mul(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let maps = self
            .rows
            .iter()
            .map(|row| {
                let mut m = BTreeMap::new();
                for &(k, a) in row {
                    for &(c, b) in &other.rows[k] {
                        *m.entry(c).or_insert(C64::new(0.0, 0.0)) += a * b;
                    }
                }
                m
            })
            .collect();
        Self::from_maps(self.dim, maps)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.rows.iter().map(|row| row.iter().map(|&(c, a)| a * v[c]).sum()).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if n > MAX_ORACLE_PARTICLES {
        return Err(Error::TooManyParticles { n, limit: MAX_ORACLE_PARTICLES });
    }
    Ok(())
}

/// `Ĵ_μ = ½ Σ_k σ̂_μ^{(k)}`, `μ ∈ {0, 1, 2}` for `x, y, z`; site 0 is the
/// leftmost tensor factor and `|0⟩ = |↑⟩`.
pub fn full_collective_op(n: usize, mu: usize) -> Result<SparseOp> {
    check_n(n)?;
    let z = C64::new(0.0, 0.0);
    let h = C64::new(0.5, 0.0);
    let half_pauli = match mu {
        0 => [[z, h], [h, z]],
        1 => [[z, -I * 0.5], [I * 0.5, z]],
        2 => [[h, z], [z, -h]],
        _ => return Err(Error::InvalidParameter(format!("axis index {mu} out of range"))),
    };
    let single = SparseOp::from_dense(half_pauli);
    let id2 = SparseOp::identity(2);
    let mut total = SparseOp::zeros(1 << n);
    for site in 0..n {
        let mut term = SparseOp::identity(1);
        for k in 0..n {
            term = term.kron(if k == site { &single } else { &id2 });
        }
        total = total.add(&term);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct FullOps {
    pub n_particles: usize,
    pub jx: SparseOp,
    pub jy: SparseOp,
    pub jz: SparseOp,
}

impl FullOps {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self { n_particles: n, jx: full_collective_op(n, 0)?, jy: full_collective_op(n, 1)?, jz: full_collective_op(n, 2)? })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_particles
    }

    pub fn components(&self) -> [&SparseOp; 3] {
        [&self.jx, &self.jy, &self.jz]
    }

    pub fn axis(&self, n: [f64; 3]) -> SparseOp {
        self.jx
            .combine(C64::new(n[0], 0.0), &self.jy, C64::new(n[1], 0.0))
            .combine(C64::new(1.0, 0.0), &self.jz, C64::new(n[2], 0.0))
    }

    pub fn in_plane(&self, alpha: f64) -> SparseOp {
        self.axis([alpha.cos(), alpha.sin(), 0.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub n_particles: usize,
    pub amplitudes: Vec<C64>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Normalized symmetric basis vector with `k` down spins.
fn symmetric_vector(n: usize, k: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let count = (0..dim).filter(|b: &usize| b.count_ones() as usize == k).count();
    let amp = 1.0 / (count as f64).sqrt();
    (0..dim).map(|b: usize| if b.count_ones() as usize == k { C64::new(amp, 0.0) } else { C64::new(0.0, 0.0) }).collect()
}

impl FullState {
    pub fn fidelity(&self, other: &FullState) -> f64 {
        dot(&self.amplitudes, &other.amplitudes).norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }
}

pub fn symmetric_embed(state: &DickeState<f64>) -> Result<FullState> {
    let n = state.n_particles();
    check_n(n)?;
    let dim = 1usize << n;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (k, c) in state.amplitudes().iter().enumerate() {
        for (a, v) in amps.iter_mut().zip(symmetric_vector(n, k)) {
            *a += c * v;
        }
    }
    Ok(FullState { n_particles: n, amplitudes: amps })
}

/// Projects onto the symmetric sector; returns the Dicke state (not
/// renormalized) and the weight outside the sector.
pub fn project_back(state: &FullState) -> Result<(DickeState<f64>, f64)> {
    let n = state.n_particles;
    check_n(n)?;
    let coeffs: Vec<C64> = (0..=n).map(|k| dot(&symmetric_vector(n, k), &state.amplitudes)).collect();
    let inside: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    let leakage = (state.norm().powi(2) - inside).max(0.0);
    let dicke = DickeState::from_unnormalized(n, nalgebra::DVector::from_vec(coeffs))?;
    Ok((dicke, leakage))
}

/// Static part of a model in the full space (the drive is added separately).
pub fn full_static_hamiltonian(spec: &HamiltonianSpec, ops: &FullOps) -> Result<SparseOp> {
    spec.validate()?;
    let c = |x: f64| C64::new(x, 0.0);
    let jz2 = ops.jz.mul(&ops.jz);
    let tat = |sign: f64| -> Result<SparseOp> {
        let ja = ops.in_plane(spec.alpha);
        let jb = ops.in_plane(spec.alpha + std::f64::consts::FRAC_PI_2);
        let chi3 = spec.chi / 3.0;
        let mut h = jb.mul(&jb).combine(c(chi3), &ja.mul(&ja), c(-chi3));
        if spec.kind != HamiltonianKind::Tat {
            // K₀ at the two-axis working point, evaluated independently.
            let k0 = bessel_j(0, working_ratio())?;
            h = h.combine(c(1.0), &ops.jz, c(k0 * spec.delta));
        }
        Ok(h.scale(c(sign)))
    };
    Ok(match spec.kind {
        HamiltonianKind::Oat => jz2.scale(c(spec.chi)),
        HamiltonianKind::Oatnt => jz2.combine(c(spec.chi), &ops.in_plane(spec.alpha), c(spec.omega0)),
        HamiltonianKind::Tat | HamiltonianKind::Tatnt => tat(1.0)?,
        HamiltonianKind::AntiTatnt => tat(-1.0)?,
        HamiltonianKind::DrivenFe => jz2.combine(c(spec.chi), &ops.jz, c(spec.delta)),
        HamiltonianKind::EffectiveH0i => {
            let r = spec.ratio();
            let l0 = bessel_j(0, 2.0 * r)?;
            let k0 = bessel_j(0, r)?;
            let jb = ops.in_plane(spec.alpha + std::f64::consts::FRAC_PI_2);
            jz2.combine(c(0.5 * spec.chi * (1.0 + l0)), &jb.mul(&jb), c(0.5 * spec.chi * (1.0 - l0)))
                .combine(c(1.0), &ops.jz, c(k0 * spec.delta))
        }
    })
}

/// Root of `𝒥₀(2r) = −1/3` by a secant iteration (independent of the
/// bisection used in the models).
fn working_ratio() -> f64 {
    let f = |r: f64| bessel_j(0, 2.0 * r).unwrap_or(f64::NAN) + 1.0 / 3.0;
    let (mut a, mut b) = (1.5, 1.7);
    for _ in 0..60 {
        let (fa, fb) = (f(a), f(b));
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        a = b;
        b = c;
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    b
}

/// `e^{−iHt}v` by a Taylor series on `s` substeps with `‖H‖ t/s ≤ 1/2`.
pub fn taylor_evolve(h: &SparseOp, v: &[C64], t: f64) -> Vec<C64> {
    let scale = h.norm_inf() * t.abs();
    let steps = (scale / 0.5).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut out = v.to_vec();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..60 {
            let hv = h.apply(&term);
            let f = -I * (dt / k as f64);
            term = hv.into_iter().map(|z| z * f).collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if norm(&term) < 1e-18 {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Propagates from `t0` to `t1` (either direction) under `spec`. The
/// driven model uses the fourth-order commutator-free Magnus scheme with
/// `steps_per_unit` steps per unit time.
pub fn full_evolve(spec: &HamiltonianSpec, ops: &FullOps, v: &[C64], t0: f64, t1: f64, steps_per_unit: usize) -> Result<Vec<C64>> {
    let h0 = full_static_hamiltonian(spec, ops)?;
    if spec.kind != HamiltonianKind::DrivenFe {
        return Ok(taylor_evolve(&h0, v, t1 - t0));
    }
    let drive = ops.in_plane(spec.alpha);
    let span = t1 - t0;
    let steps = ((span.abs() * steps_per_unit as f64).ceil() as usize).max(1);
    let h = span / steps as f64;
    let s3 = 3f64.sqrt();
    let (a1, a2) = (0.25 + s3 / 6.0, 0.25 - s3 / 6.0);
    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
    let mut out = v.to_vec();
    let c = |x: f64| C64::new(x, 0.0);
    for k in 0..steps {
        let t = t0 + h * k as f64;
        let f1 = spec.omega0 * (spec.omega * (t + c1 * h)).cos();
        let f2 = spec.omega0 * (spec.omega * (t + c2 * h)).cos();
        // exp(−ih(a2H1 + a1H2)) acts first.
        let first = h0.combine(c(a2 + a1), &drive, c(a2 * f1 + a1 * f2));
        let second = h0.combine(c(a1 + a2), &drive, c(a1 * f1 + a2 * f2));
        out = taylor_evolve(&first, &out, h);
        out = taylor_evolve(&second, &out, h);
    }
    Ok(out)
}

/// QFIM `4 Cov_sym(Ĵμ, Ĵν)` of a full-space state.
pub fn oracle_qfim(state: &FullState, ops: &FullOps) -> Matrix3<f64> {
    let psi = &state.amplitudes;
    let v: Vec<Vec<C64>> = ops.components().iter().map(|j| j.apply(psi)).collect();
    let mean: Vec<f64> = v.iter().map(|x| dot(psi, x).re).collect();
    Matrix3::from_fn(|a, b| 2.0 * (dot(&v[a], &v[b]) + dot(&v[b], &v[a])).re - 4.0 * mean[a] * mean[b])
}

/// Response and covariance matrices of the echo chain, every operator
/// applied by forward/backward propagation in the full space.
pub struct OracleReadout {
    pub m_matrix: Matrix3<f64>,
    pub q_matrix: Matrix3<f64>,
    pub final_state: FullState,
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_readout(
    initial: &DickeState<f64>,
    prep: &HamiltonianSpec,
    prep_time: f64,
    readout: &HamiltonianSpec,
    readout_time: f64,
    sensing_dir: &Direction<f64>,
    phase: f64,
    steps_per_unit: usize,
) -> Result<OracleReadout> {
    let n = initial.n_particles();
    let ops = FullOps::new(n)?;
    let psi = symmetric_embed(initial)?.amplitudes;
    let gen = ops.axis(sensing_dir.to_array());
    let u1 = |v: &[C64]| full_evolve(prep, &ops, v, 0.0, prep_time, steps_per_unit);
    let u1_adj = |v: &[C64]| full_evolve(prep, &ops, v, prep_time, 0.0, steps_per_unit);
    let u2 = |v: &[C64]| full_evolve(readout, &ops, v, 0.0, readout_time, steps_per_unit);
    let u2_adj = |v: &[C64]| full_evolve(readout, &ops, v, readout_time, 0.0, steps_per_unit);
    let w = |v: &[C64]| -> Result<Vec<C64>> { u2(&taylor_evolve(&gen, &u1(v)?, phase)) };
    let w_adj = |v: &[C64]| -> Result<Vec<C64>> { u1_adj(&taylor_evolve(&gen, &u2_adj(v)?, -phase)) };

    let prepared = u1(&psi)?;
    let fin = w(&psi)?;
    let mut g = Vec::new();
    let mut tl = Vec::new();
    for j in ops.components() {
        g.push(u1_adj(&j.apply(&prepared))?);
        tl.push(w_adj(&j.apply(&fin))?);
    }
    let mean: Vec<f64> = tl.iter().map(|x| dot(&psi, x).re).collect();
    let m_matrix = Matrix3::from_fn(|a, b| {
        let comm = dot(&g[a], &tl[b]) - dot(&tl[b], &g[a]);
        (I * comm).re
    });
    let q_matrix = Matrix3::from_fn(|a, b| 0.5 * (dot(&tl[a], &tl[b]) + dot(&tl[b], &tl[a])).re - mean[a] * mean[b]);
    Ok(OracleReadout { m_matrix, q_matrix, final_state: FullState { n_particles: n, amplitudes: fin } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_is_half_pauli() {
        let jx = full_collective_op(1, 0).unwrap();
        assert_eq!(jx.get(0, 1), C64::new(0.5, 0.0));
        let jy = full_collective_op(1, 1).unwrap();
        assert_eq!(jy.get(0, 1), C64::new(0.0, -0.5));
        let jz = full_collective_op(1, 2).unwrap();
        assert_eq!(jz.get(1, 1), C64::new(-0.5, 0.0));
        assert!(full_collective_op(13, 0).is_err());
    }

    #[test]
    fn jz_spectrum_three_sites() {
        let jz = full_collective_op(3, 2).unwrap();
        let mut diag: Vec<f64> = (0..8).map(|i| jz.get(i, i).re).collect();
        diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(diag, vec![-1.5, -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 1.5]);
    }

    #[test]
    fn symmetric_sector_reproduces_dicke_matrices() {
        let n = 4;
        let ops = FullOps::new(n).unwrap();
        let dicke = crate::spincore::CollectiveOps::<f64>::new(n).unwrap();
        let basis: Vec<Vec<C64>> = (0..=n).map(|k| symmetric_vector(n, k)).collect();
        for (full, small) in ops.components().iter().zip(dicke.components()) {
            for a in 0..=n {
                for b in 0..=n {
                    let elem = dot(&basis[a], &full.apply(&basis[b]));
                    assert!((elem - small[(a, b)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn embedding_round_trip() {
        let n = 5;
        let pole = DickeState::north_pole(n).unwrap();
        let full = symmetric_embed(&pole).unwrap();
        assert_eq!(full.amplitudes[0], C64::new(1.0, 0.0));
        let s = crate::spincore::spin_coherent_state::<f64>(n, 0.7, -1.2).unwrap();
        let (back, leak) = project_back(&symmetric_embed(&s).unwrap()).unwrap();
        assert!(leak < 1e-12);
        assert!((back.amplitudes() - s.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn taylor_matches_closed_form() {
        let jz = full_collective_op(2, 2).unwrap();
        let v = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let out = taylor_evolve(&jz, &v, 7.3);
        assert!((out[0] - (-I * 7.3).exp()).norm() < 1e-13);
    }

    #[test]
    fn secant_working_ratio() {
        assert!((working_ratio() - 1.6262104442).abs() < 1e-9);
    }
}
