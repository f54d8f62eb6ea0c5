//! Oracle suite behind `validate`: the Dicke pipeline against the 2^N
//! tensor-product construction for N = 2, 3, 4.

use std::f64::consts::FRAC_PI_2;

use crate::dynamics::{evolve_spec, PropagationSettings, Splitting};
use crate::error::Result;
use crate::exactsmall::{full_evolve, oracle_qfim, oracle_readout, project_back, symmetric_embed, FullOps, FullState};
use crate::metrology::qfim_matrix;
use crate::models::HamiltonianSpec;
use crate::readout::{optimal_measurement, ReadoutChain, ReadoutPlan, ResponseMatrices};
use crate::spincore::{spin_coherent_state, CollectiveOps, DickeState, Direction};

pub const ORACLE_TOL: f64 = 1e-8;
pub const LEAKAGE_TOL: f64 = 1e-12;
const ORACLE_STEPS: usize = 120_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst relative discrepancy met.
    pub error: f64,
    pub passed: bool,
}

fn settings() -> PropagationSettings {
    PropagationSettings {
        steps_per_period: 1024,
        convergence_doublings: 4,
        fidelity_tol: 1e-15,
        splitting: Splitting::Suzuki4,
        ..Default::default()
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

fn kinds() -> Vec<HamiltonianSpec> {
    vec![
        HamiltonianSpec::oat(1.0),
        HamiltonianSpec::oatnt(1.0, 1.7, 0.4),
        HamiltonianSpec::tat(1.0, 0.3),
        HamiltonianSpec::tatnt(1.0, 1.1, 0.0),
        HamiltonianSpec::anti_tatnt(1.0, 1.1, 0.9),
        HamiltonianSpec::driven_at_working_point(1.0, 0.6, 30.0, 0.5),
        HamiltonianSpec::effective_h0i(1.0, 0.6, 30.0, 18.0, 0.2),
    ]
}

fn evolution_check(n: usize, spec: &HamiltonianSpec) -> Result<Check> {
    let ops = CollectiveOps::<f64>::new(n)?;
    let full_ops = FullOps::new(n)?;
    let initial = spin_coherent_state::<f64>(n, 0.9, 0.4)?;
    let t = 0.7;
    let ours = evolve_spec(spec, &ops, &initial, &[t], settings(), None)?.final_state;
    let full = full_evolve(spec, &full_ops, &symmetric_embed(&initial)?.amplitudes, 0.0, t, ORACLE_STEPS)?;
    let full = FullState { n_particles: n, amplitudes: full };
    let (back, leakage) = project_back(&full)?;
    let state_err = (back.amplitudes() - ours.amplitudes()).norm();
    let f_ours = qfim_matrix(&ours, &ops)?;
    let f_oracle = oracle_qfim(&full, &full_ops);
    let qfim_err = rel((f_ours - f_oracle).abs().max(), f_oracle.abs().max());
    let error = state_err.max(qfim_err);
    Ok(Check {
        name: format!("evolution+qfim {} N={n}", spec.kind),
        error,
        passed: error < ORACLE_TOL && leakage < LEAKAGE_TOL,
    })
}

fn chain_check(n: usize, label: &str, plan: ReadoutPlan<f64>, initial: &DickeState<f64>) -> Result<Check> {
    let ops = CollectiveOps::<f64>::new(n)?;
    let chain = ReadoutChain::new(&ops, initial, plan, settings())?;
    let mats = chain.response_matrices()?;
    let oracle = oracle_readout(
        initial,
        &plan.prep_spec,
        plan.prep_time,
        &plan.readout_spec,
        plan.readout_time,
        &plan.sensing_dir,
        plan.phase,
        ORACLE_STEPS,
    )?;
    let dm = rel((mats.m_matrix - oracle.m_matrix).abs().max(), oracle.m_matrix.abs().max());
    let dq = rel((mats.q_matrix - oracle.q_matrix).abs().max(), oracle.q_matrix.abs().max());
    let (back, leakage) = project_back(&oracle.final_state)?;
    let infidelity = 1.0 - back.fidelity(&chain.final_state()?);
    let ours = optimal_measurement(&mats, &plan.sensing_dir)?;
    let theirs = optimal_measurement(&ResponseMatrices::from_parts(oracle.m_matrix, oracle.q_matrix, 0.0)?, &plan.sensing_dir)?;
    let dphi = (ours.delta_phi / theirs.delta_phi - 1.0).abs();
    let error = dm.max(dq).max(dphi).max(infidelity.abs());
    Ok(Check { name: format!("readout {label} N={n}"), error, passed: error < ORACLE_TOL && leakage < LEAKAGE_TOL })
}

/// Runs every comparison; a check that errors is reported as failed.
pub fn oracle_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: String, r: Result<Check>| {
        out.push(r.unwrap_or_else(|e| Check { name: format!("{name}: {e}"), error: f64::INFINITY, passed: false }));
    };
    for n in [2usize, 3, 4] {
        for spec in kinds() {
            push(format!("evolution {} N={n}", spec.kind), evolution_check(n, &spec));
        }
        let pole = DickeState::north_pole(n).expect("n > 0");
        let x_state = spin_coherent_state::<f64>(n, FRAC_PI_2, 0.0).expect("n > 0");
        let dir = Direction::normalized(0.6, 0.7, 0.3).expect("nonzero");
        let echo = ReadoutPlan::twisting_echo(1.0, 0.31 * n as f64, 0.4, dir, 1e-3);
        push(format!("twisting echo N={n}"), chain_check(n, "twisting echo", echo, &pole));
        let oat = ReadoutPlan::oat_echo(1.0, 0.3, Direction::y(), 0.05);
        push(format!("oat echo N={n}"), chain_check(n, "oat echo", oat, &x_state));
        let mut driven = ReadoutPlan::twisting_echo(1.0, 0.5, 0.3, dir, 0.02);
        driven.prep_spec = HamiltonianSpec::driven_at_working_point(1.0, 0.5, 30.0, 0.0);
        push(format!("driven echo N={n}"), chain_check(n, "driven echo", driven, &pole));
    }
    out
}
