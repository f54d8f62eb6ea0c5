//! Interaction-based readout: echo chain, response and covariance matrices,
//! optimal measurement direction, detection noise, parity comparison and
//! pulse decomposition of arbitrary axes.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagator, PropagationSettings};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::metrology::{axis_distribution, qfi_along, qfim, AxisDistribution};
use crate::models::HamiltonianSpec;
use crate::scalar::{lit, to_f64, Real};
use crate::spincore::{CollectiveOps, DickeState, Direction};

/// `U₂ R̂_n(φ) U₁ |ψ_i⟩` with `R̂_n(φ) = e^{−iφ n·Ĵ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutPlan<T: Real> {
    pub prep_spec: HamiltonianSpec,
    pub readout_spec: HamiltonianSpec,
    pub prep_time: T,
    pub readout_time: T,
    pub sensing_dir: Direction<T>,
    pub phase: T,
}

impl<T: Real> ReadoutPlan<T> {
    /// Two-axis twisting-and-turn preparation followed by its exact reversal.
    pub fn twisting_echo(chi: f64, delta: f64, t: T, sensing_dir: Direction<T>, phase: T) -> Self {
        Self {
            prep_spec: HamiltonianSpec::tatnt(chi, delta, 0.0),
            readout_spec: HamiltonianSpec::anti_tatnt(chi, delta, 0.0),
            prep_time: t,
            readout_time: t,
            sensing_dir,
            phase,
        }
    }

    /// One-axis twisting followed by `χ → −χ`.
    pub fn oat_echo(chi: f64, t: T, sensing_dir: Direction<T>, phase: T) -> Self {
        Self {
            prep_spec: HamiltonianSpec::oat(chi),
            readout_spec: HamiltonianSpec::oat(-chi),
            prep_time: t,
            readout_time: t,
            sensing_dir,
            phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prep_spec.validate()?;
        self.readout_spec.validate()?;
        if !(self.prep_time >= T::zero()) || !(self.readout_time >= T::zero()) {
            return Err(Error::InvalidParameter("readout times must be non-negative".into()));
        }
        if self.phase == T::zero() || !self.phase.is_finite() {
            return Err(Error::InvalidParameter("signal phase must be finite and nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrices<T: Real> {
    /// `ℳ_{μν} = i⟨[Û₁†ĴμÛ₁, J̃ν]⟩`.
    pub m_matrix: Matrix3<T>,
    /// Symmetrized covariance of the `J̃ν`.
    pub q_matrix: Matrix3<T>,
    /// Pseudo-inverse of `𝒬` with eigenvalues below `1e-10 tr 𝒬` dropped.
    pub q_pinv: Matrix3<T>,
    /// `ℳ 𝒬⁺ ℳᵀ`.
    pub k_matrix: Matrix3<T>,
    pub q_rank: usize,
    /// Largest imaginary part met among the expectation building blocks.
    pub max_imag: T,
}

impl<T: Real> ResponseMatrices<T> {
    pub fn from_parts(m_matrix: Matrix3<T>, q_matrix: Matrix3<T>, max_imag: T) -> Result<Self> {
        let q_matrix = (q_matrix + q_matrix.transpose()) * lit::<T>(0.5);
        let trace = q_matrix.trace();
        if !(trace > T::zero()) {
            return Err(Error::DegenerateReadout("covariance matrix vanishes".into()));
        }
        let eig = SymmetricEigen::new(q_matrix);
        if eig.eigenvalues.iter().any(|&l| l < lit::<T>(-1e-8) * trace.max(T::one())) {
            return Err(Error::DegenerateReadout("covariance matrix is not positive semidefinite".into()));
        }
        let floor = lit::<T>(1e-10) * trace;
        let mut q_pinv = Matrix3::zeros();
        let mut rank = 0;
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > floor {
                let v = eig.eigenvectors.column(i);
                q_pinv += v * v.transpose() / l;
                rank += 1;
            }
        }
        let k_matrix = m_matrix * q_pinv * m_matrix.transpose();
        Ok(Self { m_matrix, q_matrix, q_pinv, k_matrix, q_rank: rank, max_imag })
    }

    /// Error propagation `√(mᵀ𝒬m) / |nᵀℳm|` for observable `m·Ĵ`.
    pub fn error_propagation(&self, sensing_dir: &Direction<T>, measure: &Direction<T>) -> Result<T> {
        let (n, m) = (sensing_dir.as_vector(), measure.as_vector());
        let slope = (n.transpose() * self.m_matrix * m)[(0, 0)];
        if slope.abs() <= T::default_epsilon() {
            return Err(Error::NoSignal);
        }
        let var = (m.transpose() * self.q_matrix * m)[(0, 0)].max(T::zero());
        Ok(var.sqrt() / slope.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalMeasurement<T: Real> {
    pub m_opt: Direction<T>,
    /// `1/√(nᵀ𝒦n)`.
    pub delta_phi: T,
    /// Error propagation evaluated at `m_opt`; equals `delta_phi` when the
    /// bound is saturated.
    pub error_propagation: T,
}

pub fn optimal_measurement<T: Real>(mats: &ResponseMatrices<T>, sensing_dir: &Direction<T>) -> Result<OptimalMeasurement<T>> {
    let n = sensing_dir.as_vector();
    let signal: Vector3<T> = mats.m_matrix.transpose() * n;
    let scale = mats.m_matrix.abs().max().max(T::default_epsilon());
    if signal.norm() <= lit::<T>(1e-12) * scale {
        return Err(Error::NoSignal);
    }
    let nkn = (n.transpose() * mats.k_matrix * n)[(0, 0)];
    let raw = mats.q_pinv * signal;
    if !(nkn > T::zero()) || raw.norm() <= T::default_epsilon() {
        return Err(Error::DegenerateReadout("signal lies outside the covariance range".into()));
    }
    let m_opt = Direction::from_vector(raw)?;
    let error_propagation = mats.error_propagation(sensing_dir, &m_opt)?;
    Ok(OptimalMeasurement { m_opt, delta_phi: T::one() / nkn.sqrt(), error_propagation })
}

/// Precomputed echo chain for one plan.
#[derive(Debug, Clone)]
pub struct ReadoutChain<T: Real> {
    ops: CollectiveOps<T>,
    plan: ReadoutPlan<T>,
    initial: DickeState<T>,
    u1: CMatrix<T>,
    u2: CMatrix<T>,
    prepared: DickeState<T>,
}

impl<T: Real> ReadoutChain<T> {
    pub fn new(
        ops: &CollectiveOps<T>,
        initial: &DickeState<T>,
        plan: ReadoutPlan<T>,
        settings: PropagationSettings,
    ) -> Result<Self> {
        plan.validate()?;
        if initial.dim() != ops.dim() {
            return Err(Error::DimensionMismatch { expected: ops.dim(), got: initial.dim() });
        }
        let u1 = propagator(&plan.prep_spec, ops, plan.prep_time, settings)?;
        let u2 = propagator(&plan.readout_spec, ops, plan.readout_time, settings)?;
        let prepared = initial.apply(&u1)?;
        Ok(Self { ops: ops.clone(), plan, initial: initial.clone(), u1, u2, prepared })
    }

    /// Uses caller-supplied propagators (for example from an independent
    /// construction).
    pub fn from_unitaries(
        ops: &CollectiveOps<T>,
        initial: &DickeState<T>,
        plan: ReadoutPlan<T>,
        u1: CMatrix<T>,
        u2: CMatrix<T>,
    ) -> Result<Self> {
        plan.validate()?;
        let prepared = initial.apply(&u1)?;
        Ok(Self { ops: ops.clone(), plan, initial: initial.clone(), u1, u2, prepared })
    }

    pub fn plan(&self) -> &ReadoutPlan<T> {
        &self.plan
    }

    pub fn ops(&self) -> &CollectiveOps<T> {
        &self.ops
    }

    /// `U₁|ψ_i⟩`.
    pub fn prepared(&self) -> &DickeState<T> {
        &self.prepared
    }

    fn encode(&self, phase: T) -> CMatrix<T> {
        self.ops.rotation(&self.plan.sensing_dir, phase)
    }

    pub fn final_state_at(&self, phase: T) -> Result<DickeState<T>> {
        let encoded = self.prepared.apply(&self.encode(phase))?;
        encoded.apply(&self.u2)
    }

    pub fn final_state(&self) -> Result<DickeState<T>> {
        self.final_state_at(self.plan.phase)
    }

    /// Builds `J̃ν = W†ĴνW`, `W = U₂RU₁`, by explicit conjugation and takes
    /// expectations in the initial state.
    pub fn response_matrices(&self) -> Result<ResponseMatrices<T>> {
        let w = &self.u2 * self.encode(self.plan.phase) * &self.u1;
        let w_adj = w.adjoint();
        let u1_adj = self.u1.adjoint();
        let psi = self.initial.amplitudes();
        let comps = self.ops.components();
        let g: Vec<CVector<T>> = comps.iter().map(|j| &u1_adj * (*j * (&self.u1 * psi))).collect();
        let tilde: Vec<CVector<T>> = comps.iter().map(|j| &w_adj * (*j * (&w * psi))).collect();

        let mut max_imag = T::zero();
        let mut mean = [T::zero(); 3];
        for nu in 0..3 {
            let e = psi.dotc(&tilde[nu]);
            max_imag = max_imag.max(e.im.abs());
            mean[nu] = e.re;
        }
        let mut m = Matrix3::zeros();
        let mut q = Matrix3::zeros();
        for mu in 0..3 {
            for nu in 0..3 {
                // ⟨[G, J̃]⟩ = g†t − t†g; i times it must be real.
                let comm = g[mu].dotc(&tilde[nu]) - tilde[nu].dotc(&g[mu]);
                let val = comm * nalgebra::Complex::new(T::zero(), T::one());
                max_imag = max_imag.max(val.im.abs());
                m[(mu, nu)] = val.re;
                let anti = tilde[mu].dotc(&tilde[nu]) + tilde[nu].dotc(&tilde[mu]);
                max_imag = max_imag.max(anti.im.abs());
                q[(mu, nu)] = anti.re * lit(0.5) - mean[mu] * mean[nu];
            }
        }
        ResponseMatrices::from_parts(m, q, max_imag)
    }

    pub fn optimal_measurement(&self) -> Result<OptimalMeasurement<T>> {
        optimal_measurement(&self.response_matrices()?, &self.plan.sensing_dir)
    }

    /// `1/√F_Q^max` of the prepared state.
    pub fn qcrb(&self) -> Result<T> {
        Ok(T::one() / qfim(&self.prepared, &self.ops)?.f_q_max.sqrt())
    }

    /// `1/√F_Q` for rotations about the sensing direction.
    pub fn qcrb_along_sensing(&self) -> Result<T> {
        Ok(T::one() / qfi_along(&self.prepared, &self.ops, &self.plan.sensing_dir)?.sqrt())
    }

    /// Projection statistics of `m·Ĵ` in the final state at `phase`.
    pub fn distribution_at(&self, phase: T, measure: &Direction<T>) -> Result<AxisDistribution<T>> {
        axis_distribution(&self.final_state_at(phase)?, &self.ops, measure)
    }

    /// `ΔM/|∂⟨M⟩/∂φ|` for `M = m·Ĵ` read out through a noisy detector;
    /// slope by central differences with step `φ/10`.
    pub fn noisy_precision(&self, measure: &Direction<T>, noise: &NoiseModel) -> Result<T> {
        noise.validate()?;
        let phi = self.plan.phase;
        let h = phi / lit(10.0);
        let centre = noisy_distribution(&self.distribution_at(phi, measure)?, noise);
        let plus = noisy_distribution(&self.distribution_at(phi + h, measure)?, noise);
        let minus = noisy_distribution(&self.distribution_at(phi - h, measure)?, noise);
        let slope = (plus.mean() - minus.mean()) / (h + h);
        if slope.abs() <= T::default_epsilon() * lit(1e3) {
            return Err(Error::VanishingSlope);
        }
        Ok(centre.variance().max(T::zero()).sqrt() / slope.abs())
    }
}

pub fn final_state<T: Real>(
    ops: &CollectiveOps<T>,
    initial: &DickeState<T>,
    plan: ReadoutPlan<T>,
    settings: PropagationSettings,
) -> Result<DickeState<T>> {
    ReadoutChain::new(ops, initial, plan, settings)?.final_state()
}

pub fn response_matrices<T: Real>(
    ops: &CollectiveOps<T>,
    initial: &DickeState<T>,
    plan: ReadoutPlan<T>,
    settings: PropagationSettings,
) -> Result<ResponseMatrices<T>> {
    ReadoutChain::new(ops, initial, plan, settings)?.response_matrices()
}

/// Gaussian detection noise of width `sigma` (in units of `m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        let model = Self { sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `P_m(σ) = Σ_n C_n e^{−(m−n)²/2σ²} P_n`, each source row normalized over
/// the physical window.
pub fn noisy_distribution<T: Real>(dist: &AxisDistribution<T>, noise: &NoiseModel) -> AxisDistribution<T> {
    if noise.sigma == 0.0 {
        return dist.clone();
    }
    let dim = dist.probabilities.len();
    let inv = 1.0 / (2.0 * noise.sigma * noise.sigma);
    // Kernel depends only on |k − l| since m is an equally spaced ladder.
    let kernel: Vec<f64> = (0..dim).map(|d| (-((d * d) as f64) * inv).exp()).collect();
    let mut out = vec![T::zero(); dim];
    for (l, &p) in dist.probabilities.iter().enumerate() {
        let norm: f64 = (0..dim).map(|k| kernel[k.abs_diff(l)]).sum();
        let c = p / lit(norm);
        for (k, o) in out.iter_mut().enumerate() {
            *o += c * lit(kernel[k.abs_diff(l)]);
        }
    }
    AxisDistribution { axis: dist.axis, n_particles: dist.n_particles, probabilities: out }
}

/// `Σ m P_m(σ)`.
pub fn noisy_observable<T: Real>(dist: &AxisDistribution<T>, noise: &NoiseModel) -> T {
    noisy_distribution(dist, noise).mean()
}

/// `⟨Π⟩ = Σ (−1)^{J−m} P_m(σ)`.
pub fn parity<T: Real>(dist: &AxisDistribution<T>, noise: &NoiseModel) -> T {
    noisy_distribution(dist, noise)
        .probabilities
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (k, &p)| if k % 2 == 0 { acc + p } else { acc - p })
}

/// Parity-readout precision at `phase`: `√(1 − ⟨Π⟩²)/|∂⟨Π⟩/∂φ|`, slope by
/// central differences with step `phase/10`. `family` maps a phase to the
/// distribution along the parity axis.
pub fn parity_precision<T: Real, F>(family: F, phase: T, noise: &NoiseModel) -> Result<T>
where
    F: Fn(T) -> Result<AxisDistribution<T>>,
{
    noise.validate()?;
    if phase == T::zero() {
        return Err(Error::InvalidParameter("parity operating point must be nonzero".into()));
    }
    let h = phase / lit(10.0);
    let centre = parity(&family(phase)?, noise);
    let slope = (parity(&family(phase + h)?, noise) - parity(&family(phase - h)?, noise)) / (h + h);
    if slope.abs() <= T::default_epsilon() * lit(1e3) {
        return Err(Error::VanishingSlope);
    }
    Ok((T::one() - centre * centre).max(T::zero()).sqrt() / slope.abs())
}

/// Best parity precision over a grid of operating points.
pub fn best_parity_precision<T: Real, F>(family: F, phases: &[T], noise: &NoiseModel) -> Result<(T, T)>
where
    F: Fn(T) -> Result<AxisDistribution<T>>,
{
    let mut best: Option<(T, T)> = None;
    for &phi in phases {
        match parity_precision(&family, phi, noise) {
            Ok(dp) => {
                if best.map_or(true, |(_, b)| dp < b) {
                    best = Some((phi, dp));
                }
            }
            Err(Error::VanishingSlope) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::VanishingSlope)
}

/// Two pulses `e^{−iϑĴx}` and `e^{−iφ_nĴy}` that carry `Ĵz` onto
/// `Ĵ_target`: `e^{iϑĴx}e^{iφ_nĴy} Ĵz e^{−iφ_nĴy}e^{−iϑĴx} = n·Ĵ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence<T: Real> {
    pub theta_pulse: T,
    pub phi_pulse: T,
    pub target: Direction<T>,
}

impl<T: Real> PulseSequence<T> {
    /// `cos φ_n (cos ϑ ẑ + sin ϑ ŷ) − sin φ_n x̂`.
    pub fn realized_axis(&self) -> Vector3<T> {
        let (st, ct) = self.theta_pulse.sin_cos();
        let (sp, cp) = self.phi_pulse.sin_cos();
        Vector3::new(-sp, cp * st, cp * ct)
    }

    /// The conjugated generator as a matrix.
    pub fn generator(&self, ops: &CollectiveOps<T>) -> CMatrix<T> {
        let rx = ops.rotation(&Direction::x(), -self.theta_pulse);
        let ry = ops.rotation(&Direction::y(), -self.phi_pulse);
        let outer = &rx * &ry;
        &outer * &ops.jz * outer.adjoint()
    }
}

pub fn pulse_angles<T: Real>(target: &Direction<T>) -> PulseSequence<T> {
    let nx = target.nx().max(-T::one()).min(T::one());
    PulseSequence { theta_pulse: target.ny().atan2(target.nz()), phi_pulse: -nx.asin(), target: *target }
}

/// `20 log10` gain helper on generic scalars.
pub fn gain_db<T: Real>(delta_phi: T, n_particles: usize) -> Result<f64> {
    crate::metrology::metrological_gain(to_f64(delta_phi), n_particles)
}
