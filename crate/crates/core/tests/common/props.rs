//! Randomized invariant suites, shared by the property tests and the
//! acceptance run. Each suite draws from a fixed-seed runner.

use std::f64::consts::PI;

use nalgebra::{Complex, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use spinforge::dynamics::StaticPropagator;
use spinforge::harness::experiments::echo_chain;
use spinforge::linalg::{commutator, hermiticity_defect, max_abs, CVector};
use spinforge::metrology::{qfi_along, qfim};
use spinforge::models::{static_hamiltonian, HamiltonianKind, HamiltonianSpec};
use spinforge::readout::NoiseModel;
use spinforge::semiclassical::{
    energy, fixed_points, flow_rhs, integrate_flow, jacobian, max_step, numeric_jacobian, BlochPoint, FlowParams,
};
use spinforge::spincore::{expectation, rotate, CollectiveOps, DickeState, Direction};

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("operator algebra", operator_algebra),
    ("rotation composition and norm", rotation_composition),
    ("static unitarity, additivity, energy", static_evolution),
    ("hermiticity of static models", hermiticity),
    ("qfim psd, trace identity, bound", qfim_identities),
    ("qfim rotation invariance", qfim_rotation_invariance),
    ("cauchy-schwarz and qcrb dominance", cauchy_schwarz),
    ("twisting echo identity", echo_identity),
    ("noise monotonicity", noise_monotonicity),
    ("semiclassical conservation", semiclassical_conservation),
    ("jacobian analytic vs numeric", jacobian_match),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(what()))
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Random normalized Dicke state.
fn state_strategy(n_lo: usize, n_hi: usize) -> impl Strategy<Value = DickeState<f64>> {
    (n_lo..=n_hi).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n + 1).prop_filter_map("nonzero", move |v| {
            let amps = CVector::from_iterator(n + 1, v.into_iter().map(|(re, im)| Complex::new(re, im)));
            DickeState::from_unnormalized(n, amps).ok()
        })
    })
}

fn unit_strategy() -> impl Strategy<Value = Direction<f64>> {
    (0.0f64..PI, -PI..PI).prop_map(|(t, p)| Direction::spherical(t, p))
}

fn static_spec_strategy() -> impl Strategy<Value = HamiltonianSpec> {
    (0usize..5, -2.0f64..2.0, -3.0f64..3.0, 0.0f64..3.0, -PI..PI).prop_map(|(k, chi, delta, omega0, alpha)| match k {
        0 => HamiltonianSpec::oat(chi),
        1 => HamiltonianSpec::oatnt(chi, omega0, alpha),
        2 => HamiltonianSpec::tat(chi, alpha),
        3 => HamiltonianSpec::tatnt(chi, delta, alpha),
        _ => HamiltonianSpec::anti_tatnt(chi, delta, alpha),
    })
}

pub fn operator_algebra() -> Result<(), String> {
    check(24, 1usize..=64, |n| {
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let i = Complex::new(0.0, 1.0);
        let [x, y, z] = ops.components();
        for (a, b, c) in [(x, y, z), (y, z, x), (z, x, y)] {
            let defect = max_abs(&(commutator(a, b) - c.map(|v| v * i)));
            ensure(defect < 1e-10, || format!("N={n}: commutator defect {defect:e}"))?;
        }
        let j = n as f64 / 2.0;
        let defect = max_abs(&(ops.casimir() - ops.identity().map(|v| v * j * (j + 1.0))));
        ensure(defect < 1e-10 * (j * (j + 1.0)).max(1.0), || format!("N={n}: Casimir defect {defect:e}"))
    })
}

pub fn rotation_composition() -> Result<(), String> {
    check(48, (state_strategy(1, 40), unit_strategy(), -PI..PI, -PI..PI), |(s, axis, a, b)| {
        let ops = ok(CollectiveOps::<f64>::new(s.n_particles()))?;
        let two = ok(rotate(&ops, &ok(rotate(&ops, &s, &axis, a))?, &axis, b))?;
        let one = ok(rotate(&ops, &s, &axis, a + b))?;
        let d = (two.amplitudes() - one.amplitudes()).norm();
        ensure(d < 1e-10, || format!("composition defect {d:e}"))?;
        ensure((one.norm() - 1.0).abs() < 1e-10, || "norm drift".into())
    })
}

pub fn static_evolution() -> Result<(), String> {
    check(48, (state_strategy(1, 40), static_spec_strategy(), 0.0f64..1.5, 0.0f64..1.5), |(s, spec, t1, t2)| {
        let ops = ok(CollectiveOps::<f64>::new(s.n_particles()))?;
        let h = ok(static_hamiltonian(&spec, &ops))?;
        let prop = ok(StaticPropagator::new(&h))?;
        let a = ok(prop.evolve(&ok(prop.evolve(&s, t1))?, t2))?;
        let b = ok(prop.evolve(&s, t1 + t2))?;
        let d = (a.amplitudes() - b.amplitudes()).norm();
        ensure(d < 1e-10, || format!("{}: additivity defect {d:e}", spec.kind))?;
        ensure((b.norm() - 1.0).abs() < 1e-9, || "unitarity".into())?;
        let e0 = ok(expectation(&s, &h))?;
        let e1 = ok(expectation(&b, &h))?;
        let scale = e0.abs().max(max_abs(&h)).max(1e-300);
        ensure((e1 - e0).abs() / scale < 1e-8, || format!("{}: energy drift {e0} -> {e1}", spec.kind))
    })
}

pub fn hermiticity() -> Result<(), String> {
    check(48, (1usize..=40, static_spec_strategy()), |(n, spec)| {
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let h = ok(static_hamiltonian(&spec, &ops))?;
        let d = hermiticity_defect(&h);
        ensure(d < 1e-12 * max_abs(&h).max(1.0), || format!("{}: hermiticity defect {d:e}", spec.kind))
    })
}

pub fn qfim_identities() -> Result<(), String> {
    check(64, state_strategy(1, 60), |s| {
        let n = s.n_particles();
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let res = ok(qfim(&s, &ops))?;
        let scale = (n * n) as f64;
        ensure(res.eigenvalues[2] > -1e-9 * scale, || format!("negative eigenvalue {:?}", res.eigenvalues))?;
        ensure(res.f_q_max <= scale * (1.0 + 1e-12), || format!("F_max {} above N²", res.f_q_max))?;
        let j = n as f64 / 2.0;
        let mean = Vector3::new(
            ok(expectation(&s, &ops.jx))?,
            ok(expectation(&s, &ops.jy))?,
            ok(expectation(&s, &ops.jz))?,
        );
        let trace = 4.0 * (j * (j + 1.0) - mean.norm_squared());
        ensure((res.matrix.trace() - trace).abs() < 1e-8 * scale.max(1.0), || "trace identity".into())?;
        for (mu, axis) in [Direction::x(), Direction::y(), Direction::z()].iter().enumerate() {
            let f = ok(qfi_along(&s, &ops, axis))?;
            ensure((f - res.matrix[(mu, mu)]).abs() < 1e-10 * scale.max(1.0), || format!("qfi_along[{mu}]"))?;
        }
        Ok(())
    })
}

pub fn qfim_rotation_invariance() -> Result<(), String> {
    check(64, (state_strategy(2, 40), unit_strategy(), -PI..PI), |(s, axis, angle)| {
        let ops = ok(CollectiveOps::<f64>::new(s.n_particles()))?;
        let before = ok(qfim(&s, &ops))?;
        let after = ok(qfim(&ok(rotate(&ops, &s, &axis, angle))?, &ops))?;
        let scale = before.f_q_max.max(1.0);
        ensure((after.f_q_max - before.f_q_max).abs() < 1e-8 * scale, || {
            format!("F_max {} -> {}", before.f_q_max, after.f_q_max)
        })?;
        let o = Rotation3::from_axis_angle(&Unit::new_normalize(*axis.as_vector()), angle);
        // Matrix-level covariance holds regardless of degeneracy.
        let expect = o.matrix() * before.matrix * o.matrix().transpose();
        let d = (expect - after.matrix).abs().max();
        ensure(d < 1e-8 * scale, || format!("QFIM covariance defect {d:e}"))?;
        let gap = before.eigenvalues[0] - before.eigenvalues[1];
        if gap > 1e-3 * scale {
            let moved = o * before.n_max.as_vector();
            let overlap = moved.dot(after.n_max.as_vector()).abs();
            ensure((overlap - 1.0).abs() < 1e-8, || format!("n_max overlap {overlap}"))?;
        }
        Ok(())
    })
}

fn chain_strategy() -> impl Strategy<Value = (usize, bool, f64, f64)> {
    (4usize..=24, any::<bool>(), 0.02f64..0.6, 0.05f64..0.45)
}

pub fn cauchy_schwarz() -> Result<(), String> {
    let m_dirs = prop::collection::vec(unit_strategy(), 50);
    check(24, (chain_strategy(), m_dirs), |((n, tatnt, chi_t, delta), dirs)| {
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let kind = if tatnt { HamiltonianKind::Tatnt } else { HamiltonianKind::Oat };
        let chain = ok(echo_chain(&ops, kind, 1.0, delta, chi_t, 1e-3, Default::default()))?;
        let mats = ok(chain.response_matrices())?;
        let opt = match chain.optimal_measurement() {
            Ok(o) => o,
            Err(_) => return Ok(()),
        };
        let nkn = 1.0 / (opt.delta_phi * opt.delta_phi);
        let rel = (opt.error_propagation / opt.delta_phi - 1.0).abs();
        ensure(rel < 1e-8, || format!("saturation defect {rel:e}"))?;
        for m in &dirs {
            if let Ok(dp) = mats.error_propagation(&chain.plan().sensing_dir, m) {
                ensure(dp.powi(-2) <= nkn * (1.0 + 1e-6) + 1e-6, || format!("bound violated: {} > {nkn}", dp.powi(-2)))?;
            }
        }
        let qcrb = ok(chain.qcrb())?;
        ensure(opt.delta_phi >= qcrb - 1e-9, || format!("Δφ {} below QCRB {qcrb}", opt.delta_phi))
    })
}

pub fn echo_identity() -> Result<(), String> {
    check(32, (2usize..=60, -1.0f64..1.0, 0.0f64..0.5, -PI..PI), |(n, delta, chi_t, alpha)| {
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let fwd = ok(static_hamiltonian(&HamiltonianSpec::tatnt(1.0, delta * n as f64, alpha), &ops))?;
        let back = ok(static_hamiltonian(&HamiltonianSpec::anti_tatnt(1.0, delta * n as f64, alpha), &ops))?;
        let start = ok(DickeState::north_pole(n))?;
        let mid = ok(ok(StaticPropagator::new(&fwd))?.evolve(&start, chi_t))?;
        let end = ok(ok(StaticPropagator::new(&back))?.evolve(&mid, chi_t))?;
        let f = end.fidelity(&start);
        ensure(f > 1.0 - 1e-9, || format!("echo fidelity {f}"))
    })
}

pub fn noise_monotonicity() -> Result<(), String> {
    check(12, chain_strategy(), |(n, tatnt, chi_t, delta)| {
        let ops = ok(CollectiveOps::<f64>::new(n))?;
        let kind = if tatnt { HamiltonianKind::Tatnt } else { HamiltonianKind::Oat };
        let chain = ok(echo_chain(&ops, kind, 1.0, delta, chi_t, 1e-3, Default::default()))?;
        let Ok(opt) = chain.optimal_measurement() else { return Ok(()) };
        let mut last = 0.0;
        for sigma in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let dp = ok(chain.noisy_precision(&opt.m_opt, &ok(NoiseModel::new(sigma))?))?;
            ensure(dp >= last * (1.0 - 1e-9), || format!("Δφ fell from {last} to {dp} at σ={sigma}"))?;
            last = dp;
        }
        Ok(())
    })
}

fn flow_strategy() -> impl Strategy<Value = (FlowParams<f64>, BlochPoint<f64>)> {
    (10usize..=400, 0.05f64..1.5, -0.7f64..0.7, 0.0f64..PI, -PI..PI).prop_map(|(n, chi, d, th, ph)| {
        let params = FlowParams::new(n, chi / 3.0, d * n as f64 * chi / 3.0).expect("valid flow");
        (params, BlochPoint::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()))
    })
}

pub fn semiclassical_conservation() -> Result<(), String> {
    check(32, flow_strategy(), |(params, p0)| {
        let dt = 0.5 * max_step(&params);
        let traj = ok(integrate_flow(&p0, &params, 2.0 / params.rate().abs(), dt))?;
        let drift = traj.relative_energy_drift(&params);
        ensure(drift < 1e-6, || format!("energy drift {drift:e}"))?;
        ensure(traj.max_norm_defect() < 1e-9, || "norm defect".into())?;
        let e = energy(&traj.last().point, &params);
        ensure(e.is_finite(), || "energy not finite".into())
    })
}

pub fn jacobian_match() -> Result<(), String> {
    check(100, flow_strategy(), |(params, p)| {
        let scale = params.rate().abs().max(params.delta_eff.abs()).max(1.0);
        let d = (jacobian(&p, &params) - numeric_jacobian(&p, &params, 1e-6)).abs().max();
        ensure(d < 1e-6 * scale, || format!("jacobian mismatch {d:e}"))?;
        if let Ok(fps) = fixed_points(&params) {
            for fp in fps {
                let rhs = flow_rhs(&fp.point, &params).norm();
                ensure(rhs < 1e-12 * scale, || format!("fixed point residual {rhs:e}"))?;
                let d = (jacobian(&fp.point, &params) - numeric_jacobian(&fp.point, &params, 1e-6)).abs().max();
                ensure(d < 1e-6 * scale, || format!("fixed-point jacobian mismatch {d:e}"))?;
            }
        }
        Ok(())
    })
}
