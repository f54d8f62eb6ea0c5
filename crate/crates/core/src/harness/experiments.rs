//! Physics behind each sweep: protocol curves, the two-parameter optimum,
//! readout points and noise comparisons. Everything is `f64`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dynamics::{
    evolve_driven, evolve_spec, propagator, to_interaction_frame, ConvergenceRow, PropagationSettings, StaticPropagator,
};
use crate::error::{Error, Result};
use crate::linalg::EigenCache;
use crate::metrology::{axis_distribution, metrological_gain, qfim};
use crate::models::{static_hamiltonian, HamiltonianKind, HamiltonianSpec};
use crate::readout::{best_parity_precision, NoiseModel, ReadoutChain, ReadoutPlan};
use crate::semiclassical::{integrate_flow, max_step, separatrix_point, BlochPoint, FlowParams, SeparatrixBranch, TrajectorySample};
use crate::spincore::{rotate, spin_coherent_state, CollectiveOps, DickeState, Direction};

/// Turning strength of the OATNT comparison curve, `Ω₀/(Nχ)`.
pub const OATNT_TURNING: f64 = 0.5;
/// Drive amplitude of the driven curve, `Ω₀/(2πNχ)`.
pub const DEFAULT_DRIVE: f64 = 100.0;
/// Operating points of the parity readout: `kπ/(32N)` for `k = 1..=32`.
pub const PARITY_PHASES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Oat,
    Oatnt,
    Tat,
    Tatnt,
    DrivenFe,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [Protocol::Oat, Protocol::Oatnt, Protocol::Tat, Protocol::Tatnt, Protocol::DrivenFe];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Oat => "OAT",
            Protocol::Oatnt => "OATNT",
            Protocol::Tat => "TAT",
            Protocol::Tatnt => "TATNT",
            Protocol::DrivenFe => "DRIVEN_FE",
        }
    }

    /// One-axis protocols start from the x-polarized coherent state, the
    /// two-axis ones from the north pole.
    pub fn initial_state(&self, n: usize) -> Result<DickeState<f64>> {
        match self {
            Protocol::Oat | Protocol::Oatnt => spin_coherent_state(n, PI / 2.0, 0.0),
            _ => DickeState::north_pole(n),
        }
    }

    /// `delta_ratio` is `δ/(Nχ)`, `drive` is `Ω₀/(2πNχ)`.
    pub fn spec(&self, n: usize, chi: f64, alpha: f64, delta_ratio: f64, drive: f64) -> HamiltonianSpec {
        let nchi = n as f64 * chi;
        match self {
            Protocol::Oat => HamiltonianSpec::oat(chi),
            Protocol::Oatnt => HamiltonianSpec::oatnt(chi, OATNT_TURNING * nchi, alpha),
            Protocol::Tat => HamiltonianSpec::tat(chi, alpha),
            Protocol::Tatnt => HamiltonianSpec::tatnt(chi, delta_ratio * nchi, alpha),
            Protocol::DrivenFe => HamiltonianSpec::driven_at_working_point(chi, delta_ratio * nchi, 2.0 * PI * drive * nchi, alpha),
        }
    }
}

/// `F_Q^max/N²` at each `χt` in `chi_ts`.
pub fn protocol_curve(
    protocol: Protocol,
    ops: &CollectiveOps<f64>,
    chi: f64,
    alpha: f64,
    delta_ratio: f64,
    drive: f64,
    chi_ts: &[f64],
    settings: PropagationSettings,
    cache: Option<&EigenCache<f64>>,
) -> Result<Vec<f64>> {
    let n = ops.n_particles();
    let spec = protocol.spec(n, chi, alpha, delta_ratio, drive);
    let times: Vec<f64> = chi_ts.iter().map(|t| t / chi).collect();
    let run = evolve_spec(&spec, ops, &protocol.initial_state(n)?, &times, settings, cache)?;
    let n2 = (n * n) as f64;
    run.snapshots.iter().map(|s| Ok(qfim(s, ops)?.f_q_max / n2)).collect()
}

/// Ideal TATNT `F_Q^max/N²` for the north pole at one detuning.
struct TatntSlice {
    prop: StaticPropagator<f64>,
    start: DickeState<f64>,
    chi: f64,
}

impl TatntSlice {
    fn new(ops: &CollectiveOps<f64>, chi: f64, alpha: f64, delta_ratio: f64) -> Result<Self> {
        let n = ops.n_particles();
        let h = static_hamiltonian(&HamiltonianSpec::tatnt(chi, delta_ratio * n as f64 * chi, alpha), ops)?;
        Ok(Self { prop: StaticPropagator::new(&h)?, start: DickeState::north_pole(n)?, chi })
    }

    fn fq_over_n2(&self, ops: &CollectiveOps<f64>, chi_t: f64) -> Result<f64> {
        let n = ops.n_particles() as f64;
        Ok(qfim(&self.prop.evolve(&self.start, chi_t / self.chi)?, ops)?.f_q_max / (n * n))
    }
}

/// One detuning row of the dense grid.
pub fn tatnt_slice(ops: &CollectiveOps<f64>, chi: f64, alpha: f64, delta_ratio: f64, chi_ts: &[f64]) -> Result<Vec<f64>> {
    let slice = TatntSlice::new(ops, chi, alpha, delta_ratio)?;
    chi_ts.iter().map(|&t| slice.fq_over_n2(ops, t)).collect()
}

/// Maximizes a unimodal `f` on `[a, b]`; returns `(x, f(x))`.
pub fn golden_max<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub n_particles: usize,
    pub delta_ratio: f64,
    pub chi_t: f64,
    pub fq_over_n2: f64,
    /// Best value on the coarse grid; never above `fq_over_n2`.
    pub coarse_fq_over_n2: f64,
}

fn bracket(grid: &[f64], i: usize) -> (f64, f64) {
    (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)])
}

/// Coarse `(δ, t)` grid search followed by nested golden-section refinement
/// within one grid cell of the coarse optimum.
pub fn optimize_tatnt(
    ops: &CollectiveOps<f64>,
    chi: f64,
    alpha: f64,
    delta_ratios: &[f64],
    chi_ts: &[f64],
) -> Result<Optimum> {
    if delta_ratios.is_empty() || chi_ts.is_empty() {
        return Err(Error::Config("optimization needs non-empty grids".into()));
    }
    let coarse: Vec<Vec<f64>> =
        delta_ratios.par_iter().map(|&d| tatnt_slice(ops, chi, alpha, d, chi_ts)).collect::<Result<_>>()?;
    let (mut bi, mut bj, mut best) = (0, 0, f64::NEG_INFINITY);
    for (i, row) in coarse.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > best {
                (bi, bj, best) = (i, j, v);
            }
        }
    }
    let (d_lo, d_hi) = bracket(delta_ratios, bi);
    let (t_lo, t_hi) = bracket(chi_ts, bj);
    let inner = |d: f64| -> Result<(f64, f64)> {
        let slice = TatntSlice::new(ops, chi, alpha, d)?;
        golden_max(|t| slice.fq_over_n2(ops, t), t_lo, t_hi, 1e-7)
    };
    let (d_opt, _) = golden_max(|d| Ok(inner(d)?.1), d_lo, d_hi, 1e-7)?;
    let (t_opt, f_opt) = inner(d_opt)?;
    let mut out = Optimum {
        n_particles: ops.n_particles(),
        delta_ratio: d_opt,
        chi_t: t_opt,
        fq_over_n2: f_opt,
        coarse_fq_over_n2: best,
    };
    if f_opt < best {
        out.delta_ratio = delta_ratios[bi];
        out.chi_t = chi_ts[bj];
        out.fq_over_n2 = best;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivenCheck {
    pub fq_ideal_over_n2: f64,
    pub fq_driven_over_n2: f64,
    pub rel_gap: f64,
    /// Infidelity between the frame-corrected driven state and the ideal one.
    pub fidelity_gap: f64,
    pub steps_per_period: usize,
}

/// Re-evaluates a TATNT point with the driven Hamiltonian at `Ω₀ = 2π·drive·Nχ`.
pub fn driven_check(
    ops: &CollectiveOps<f64>,
    chi: f64,
    alpha: f64,
    delta_ratio: f64,
    chi_t: f64,
    drive: f64,
    settings: PropagationSettings,
) -> Result<DrivenCheck> {
    let n = ops.n_particles();
    let n2 = (n * n) as f64;
    let start = DickeState::north_pole(n)?;
    let t = chi_t / chi;
    let ideal_spec = Protocol::Tatnt.spec(n, chi, alpha, delta_ratio, drive);
    let ideal = evolve_spec(&ideal_spec, ops, &start, &[t], settings, None)?.final_state;
    let spec = Protocol::DrivenFe.spec(n, chi, alpha, delta_ratio, drive);
    let run = evolve_driven(&spec, ops, t, &start, settings)?;
    let fi = qfim(&ideal, ops)?.f_q_max / n2;
    let fd = qfim(&run.final_state, ops)?.f_q_max / n2;
    let framed = to_interaction_frame(&spec, ops, t, &run.final_state)?;
    Ok(DrivenCheck {
        fq_ideal_over_n2: fi,
        fq_driven_over_n2: fd,
        rel_gap: (fd - fi).abs() / fi,
        fidelity_gap: (1.0 - framed.fidelity(&ideal)).max(0.0),
        steps_per_period: run.steps_per_period,
    })
}

/// Echo chain with the sensing direction set to the top QFIM eigenvector
/// of the prepared state. TATNT starts from the north pole, OAT from the
/// x-polarized coherent state.
pub fn echo_chain(
    ops: &CollectiveOps<f64>,
    kind: HamiltonianKind,
    chi: f64,
    delta_ratio: f64,
    chi_t: f64,
    phase: f64,
    settings: PropagationSettings,
) -> Result<ReadoutChain<f64>> {
    let n = ops.n_particles();
    let t = chi_t / chi;
    let (initial, template) = match kind {
        HamiltonianKind::Tatnt => (
            DickeState::north_pole(n)?,
            ReadoutPlan::twisting_echo(chi, delta_ratio * n as f64 * chi, t, Direction::z(), phase),
        ),
        HamiltonianKind::Oat => (spin_coherent_state(n, PI / 2.0, 0.0)?, ReadoutPlan::oat_echo(chi, t, Direction::z(), phase)),
        other => return Err(Error::Config(format!("no echo readout for {other}"))),
    };
    let u1 = propagator(&template.prep_spec, ops, t, settings)?;
    let u2 = propagator(&template.readout_spec, ops, t, settings)?;
    let prepared = initial.apply(&u1)?;
    let plan = ReadoutPlan { sensing_dir: qfim(&prepared, ops)?.n_max, ..template };
    ReadoutChain::from_unitaries(ops, &initial, plan, u1, u2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutPoint {
    pub chi_t: f64,
    pub delta_phi: f64,
    pub qcrb: f64,
    pub gain_db: f64,
    pub sigma: f64,
}

impl ReadoutPoint {
    pub fn ratio(&self) -> f64 {
        self.delta_phi / self.qcrb
    }
}

/// Optimal-measurement precision of an echo chain. With `sigma > 0` the
/// noiseless optimal direction is read through the noisy detector.
pub fn readout_point(chain: &ReadoutChain<f64>, chi_t: f64, sigma: f64) -> Result<ReadoutPoint> {
    let opt = chain.optimal_measurement()?;
    let delta_phi = if sigma == 0.0 {
        opt.delta_phi
    } else {
        chain.noisy_precision(&opt.m_opt, &NoiseModel::new(sigma)?)?
    };
    let n = chain.ops().n_particles();
    Ok(ReadoutPoint { chi_t, delta_phi, qcrb: chain.qcrb()?, gain_db: metrological_gain(delta_phi, n)?, sigma })
}

/// Cat state from one-axis twisting of the x-polarized coherent state for
/// `χt = π/2`.
pub fn oat_cat(ops: &CollectiveOps<f64>) -> Result<DickeState<f64>> {
    let n = ops.n_particles();
    let h = static_hamiltonian(&HamiltonianSpec::oat(1.0), ops)?;
    StaticPropagator::new(&h)?.evolve(&spin_coherent_state(n, PI / 2.0, 0.0)?, PI / 2.0)
}

/// Best parity-readout precision of the cat state: phase imprinted about
/// the cat axis, parity taken along `z`.
pub fn ghz_parity_precision(ops: &CollectiveOps<f64>, cat: &DickeState<f64>, sigma: f64) -> Result<f64> {
    let n = ops.n_particles();
    let axis = qfim(cat, ops)?.n_max;
    let noise = NoiseModel::new(sigma)?;
    let phases: Vec<f64> = (1..=PARITY_PHASES).map(|k| k as f64 * PI / (PARITY_PHASES as f64 * n as f64)).collect();
    let family = |phi: f64| axis_distribution(&rotate(ops, cat, &axis, phi)?, ops, &Direction::z());
    Ok(best_parity_precision(family, &phases, &noise)?.1)
}

/// Frame-corrected comparison of the driven model with ideal TATNT at one
/// drive amplitude `Ω₀/(2πNχ)`.
pub fn convergence_row(
    ops: &CollectiveOps<f64>,
    chi: f64,
    alpha: f64,
    delta_ratio: f64,
    chi_t: f64,
    drive: f64,
    settings: PropagationSettings,
) -> Result<ConvergenceRow> {
    let check = driven_check(ops, chi, alpha, delta_ratio, chi_t, drive, settings)?;
    let n = ops.n_particles();
    let spec = Protocol::DrivenFe.spec(n, chi, alpha, delta_ratio, drive);
    let n2 = (n * n) as f64;
    Ok(ConvergenceRow {
        omega: spec.omega,
        omega0: spec.omega0,
        omega0_over_2pi_n_chi: drive,
        qfi_driven: check.fq_driven_over_n2 * n2,
        qfi_ideal: check.fq_ideal_over_n2 * n2,
        qfi_gap: check.rel_gap,
        fidelity_gap: check.fidelity_gap,
        steps_per_period: check.steps_per_period,
    })
}

/// Mean-field trajectory sampled at `chi_ts`, launched on the upper
/// separatrix one coherent-state width (`ΔZ = 2/N`) below the pole.
pub fn separatrix_trajectory(n: usize, chi: f64, delta_ratio: f64, chi_ts: &[f64]) -> Result<Vec<TrajectorySample<f64>>> {
    let params = FlowParams::from_tatnt(n, chi, delta_ratio * n as f64 * chi)?;
    let start = separatrix_point(&params, SeparatrixBranch::Upper, 1.0 - 2.0 / n as f64, true, true)?;
    let h_max = 0.5 * max_step(&params);
    let mut point: BlochPoint<f64> = start;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(chi_ts.len());
    for &chi_t in chi_ts {
        let target = chi_t / chi;
        if target < now {
            return Err(Error::Config("semiclassical sample times must be non-decreasing".into()));
        }
        let span = target - now;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0);
            let traj = integrate_flow(&point, &params, span, span / steps)?;
            point = traj.last().point;
            now = target;
        }
        out.push(TrajectorySample { t: chi_t, point, energy: crate::semiclassical::energy(&point, &params) });
    }
    Ok(out)
}
