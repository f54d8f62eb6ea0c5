//! Mean-field flow of the two-axis-twisting-and-turn model on the Bloch
//! sphere, with `(A, B, Z) = ⟨Ĵα, Ĵβ, Ĵz⟩/J`.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochPoint<T: Real> {
    pub a: T,
    pub b: T,
    pub z: T,
}

impl<T: Real> BlochPoint<T> {
    pub fn new(a: T, b: T, z: T) -> Self {
        Self { a, b, z }
    }

    pub fn north() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn as_vector(&self) -> Vector3<T> {
        Vector3::new(self.a, self.b, self.z)
    }

    pub fn from_vector(v: Vector3<T>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> T {
        self.as_vector().norm()
    }

    pub fn normalized(&self) -> Self {
        Self::from_vector(self.as_vector().normalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams<T: Real> {
    pub n_particles: usize,
    pub chi_eff: T,
    pub delta_eff: T,
}

impl<T: Real> FlowParams<T> {
    pub fn new(n_particles: usize, chi_eff: T, delta_eff: T) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if !chi_eff.is_finite() || !delta_eff.is_finite() || chi_eff == T::zero() {
            return Err(Error::InvalidParameter("chi_eff must be finite and nonzero, delta_eff finite".into()));
        }
        Ok(Self { n_particles, chi_eff, delta_eff })
    }

    /// Mean-field parameters of `(χ/3)(Ĵβ² − Ĵα²) + K₀δĴz`.
    pub fn from_tatnt(n_particles: usize, chi: T, delta: T) -> Result<Self> {
        Self::new(n_particles, chi / lit(3.0), crate::models::tat_k0::<T>() * delta)
    }

    /// `Nχ_eff`.
    pub fn rate(&self) -> T {
        lit::<T>(self.n_particles as f64) * self.chi_eff
    }

    /// `d = δ_eff / (Nχ_eff)`.
    pub fn reduced_detuning(&self) -> T {
        self.delta_eff / self.rate()
    }

    fn in_regime(&self) -> Result<T> {
        let d = self.reduced_detuning();
        if !(d.abs() < T::one()) {
            return Err(Error::OutOfRegime(to_f64(d.abs())));
        }
        Ok(d)
    }
}

pub fn flow_rhs<T: Real>(p: &BlochPoint<T>, params: &FlowParams<T>) -> Vector3<T> {
    let r = params.rate();
    let d = params.delta_eff;
    Vector3::new(
        r * p.b * p.z - d * p.b,
        r * p.a * p.z + d * p.a,
        -(r + r) * p.a * p.b,
    )
}

/// `E = δ_eff Z − (Nχ_eff/2)(A² − B²)`.
pub fn energy<T: Real>(p: &BlochPoint<T>, params: &FlowParams<T>) -> T {
    params.delta_eff * p.z - params.rate() * lit(0.5) * (p.a * p.a - p.b * p.b)
}

pub fn jacobian<T: Real>(p: &BlochPoint<T>, params: &FlowParams<T>) -> Matrix3<T> {
    let r = params.rate();
    let d = params.delta_eff;
    let two = lit::<T>(2.0);
    Matrix3::new(
        T::zero(), r * p.z - d, r * p.b,
        r * p.z + d, T::zero(), r * p.a,
        -two * r * p.b, -two * r * p.a, T::zero(),
    )
}

/// Central-difference Jacobian of [`flow_rhs`].
pub fn numeric_jacobian<T: Real>(p: &BlochPoint<T>, params: &FlowParams<T>, h: T) -> Matrix3<T> {
    let mut out = Matrix3::zeros();
    let x = p.as_vector();
    for j in 0..3 {
        let mut up = x;
        let mut dn = x;
        up[j] += h;
        dn[j] -= h;
        let col = (flow_rhs(&BlochPoint::from_vector(up), params) - flow_rhs(&BlochPoint::from_vector(dn), params)) / (h + h);
        out.set_column(j, &col);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample<T: Real> {
    pub t: T,
    pub point: BlochPoint<T>,
    pub energy: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<TrajectorySample<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &TrajectorySample<T> {
        self.samples.last().expect("trajectory holds the initial point")
    }

    /// Largest `|E(t) − E(0)| / max(|E(0)|, Nχ_eff)`.
    pub fn relative_energy_drift(&self, params: &FlowParams<T>) -> T {
        let e0 = self.samples[0].energy;
        let scale = e0.abs().max(params.rate().abs());
        self.samples.iter().map(|s| (s.energy - e0).abs() / scale).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn max_norm_defect(&self) -> T {
        self.samples.iter().map(|s| (s.point.norm() - T::one()).abs()).fold(T::zero(), |a, b| a.max(b))
    }

    /// CSV with header `t,A,B,Z,E`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,A,B,Z,E\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                to_f64(s.t),
                to_f64(s.point.a),
                to_f64(s.point.b),
                to_f64(s.point.z),
                to_f64(s.energy)
            );
        }
        out
    }
}

/// Largest admissible step `0.01 / (Nχ_eff)`.
pub fn max_step<T: Real>(params: &FlowParams<T>) -> T {
    lit::<T>(0.01) / params.rate().abs()
}

/// Classical RK4 with renormalization to the unit sphere after each step.
pub fn integrate_flow<T: Real>(p0: &BlochPoint<T>, params: &FlowParams<T>, t_final: T, dt: T) -> Result<Trajectory<T>> {
    let max = max_step(params);
    if !(dt > T::zero()) || dt > max * lit(1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt: to_f64(dt), max: to_f64(max) });
    }
    if !(t_final >= T::zero()) {
        return Err(Error::InvalidParameter("t_final must be non-negative".into()));
    }
    let steps = to_f64(t_final / dt).ceil() as usize;
    let h = if steps == 0 { T::zero() } else { t_final / lit(steps as f64) };
    let mut x = p0.normalized().as_vector();
    let f = |v: &Vector3<T>| flow_rhs(&BlochPoint::from_vector(*v), params);
    let sample = |t: T, v: &Vector3<T>| {
        let point = BlochPoint::from_vector(*v);
        TrajectorySample { t, point, energy: energy(&point, params) }
    };
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(T::zero(), &x));
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    for k in 1..=steps {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (h * half)));
        let k3 = f(&(x + k2 * (h * half)));
        let k4 = f(&(x + k3 * h));
        let two = lit::<T>(2.0);
        x += (k1 + k2 * two + k3 * two + k4) * (h * sixth);
        x.normalize_mut();
        samples.push(sample(h * lit(k as f64), &x));
    }
    Ok(Trajectory { samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Saddle,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint<T: Real> {
    pub point: BlochPoint<T>,
    pub stability: Stability,
    /// Largest real part among the Jacobian eigenvalues.
    pub growth_rate: T,
}

/// Classifies from the Jacobian spectrum: any eigenvalue with a positive
/// real part (beyond round-off) makes a saddle.
pub fn classify<T: Real>(p: &BlochPoint<T>, params: &FlowParams<T>) -> (Stability, T) {
    let eig = jacobian(p, params).complex_eigenvalues();
    let growth = eig.iter().map(|z| z.re).fold(T::min_value().unwrap_or(-T::one()), |a, b| a.max(b));
    let slack = lit::<T>(1e-8) * params.rate().abs();
    let stability = if growth > slack { Stability::Saddle } else { Stability::Stable };
    (stability, growth)
}

/// The six fixed points: poles, and four equatorial-band points at height
/// `±d`.
pub fn fixed_points<T: Real>(params: &FlowParams<T>) -> Result<Vec<FixedPoint<T>>> {
    let d = params.in_regime()?;
    let s = (T::one() - d * d).sqrt();
    let zero = T::zero();
    let pts = [
        BlochPoint::new(zero, zero, T::one()),
        BlochPoint::new(zero, zero, -T::one()),
        BlochPoint::new(zero, s, d),
        BlochPoint::new(zero, -s, d),
        BlochPoint::new(s, zero, -d),
        BlochPoint::new(-s, zero, -d),
    ];
    Ok(pts
        .into_iter()
        .map(|point| {
            let (stability, growth_rate) = classify(&point, params);
            FixedPoint { point, stability, growth_rate }
        })
        .collect())
}

/// Local Lyapunov exponent at the polar saddles, `Nχ_eff √(1 − d²)`.
pub fn lyapunov_saddle<T: Real>(params: &FlowParams<T>) -> T {
    let d = params.reduced_detuning();
    params.rate().abs() * (T::one() - d * d).max(T::zero()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningOptimum {
    /// Bare detunings `±(√2 − 1) N (χ/3) / K₀`.
    pub delta_opt: [f64; 2],
    /// `(√2 − 1) N χ_eff`.
    pub delta_eff_opt: f64,
}

pub fn optimal_detuning_sc(n_particles: usize, chi: f64, k0: f64) -> Result<DetuningOptimum> {
    if !(k0 != 0.0) || !k0.is_finite() {
        return Err(Error::InvalidParameter("k0 must be finite and nonzero".into()));
    }
    let chi_eff = chi / 3.0;
    let delta_eff_opt = (2f64.sqrt() - 1.0) * n_particles as f64 * chi_eff;
    let bare = delta_eff_opt / k0;
    Ok(DetuningOptimum { delta_opt: [bare, -bare], delta_eff_opt })
}

/// `χ t_opt = 3(1.9 + 0.55 ln N)/N` with `χ = 1`.
pub fn optimal_time_sc(n_particles: usize) -> Result<f64> {
    if n_particles < 2 {
        return Err(Error::InvalidParameter("timescale law needs N >= 2".into()));
    }
    let n = n_particles as f64;
    Ok(3.0 * (1.9 + 0.55 * n.ln()) / n)
}

/// Closed-form large-N estimate of `Nχ_eff t_opt` at reduced detuning `d`.
pub fn timescale_closed_form(n_particles: usize, d: f64) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::OutOfRegime(d.abs()));
    }
    let s = (1.0 - d * d).sqrt();
    let num = (16.0 * s * s / (1.0 - s)).ln() - 2.0 * ((1.0 - d) / s).atanh() + (n_particles as f64).ln();
    Ok(num / (2.0 * s))
}

fn simpson(g: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let m = intervals.max(2) + intervals % 2;
    let h = (hi - lo) / m as f64;
    let mut sum = g(lo) + g(hi);
    for i in 1..m {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * g(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// `Nχ_eff t_opt = ∫ dZ / ((1 − Z)√((1 + Z)² − 4d²))` from `Z = 2d − 1` up to
/// the uncertainty-patch edge `√(1 − 1/(2N))`, by Simpson quadrature.
/// The lower half uses `Z = 2d − 1 + u²` to remove the square-root
/// singularity, the upper half `w = −ln(1 − Z)` to flatten the pole.
pub fn timescale_quadrature(n_particles: usize, d: f64, intervals: usize) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::OutOfRegime(d.abs()));
    }
    if n_particles < 1 {
        return Err(Error::EmptyEnsemble);
    }
    let z_top = (1.0 - 0.5 / n_particles as f64).sqrt();
    let z_low = 2.0 * d - 1.0;
    let z_mid = 0.5 * (z_low + 1.0);
    if z_top <= z_mid {
        return Err(Error::InvalidParameter("patch edge lies too close to the turning point".into()));
    }
    let lower = simpson(
        |u| {
            let z = z_low + u * u;
            2.0 / ((1.0 - z) * (z + 1.0 + 2.0 * d).sqrt())
        },
        0.0,
        (z_mid - z_low).sqrt(),
        intervals,
    );
    let upper = simpson(
        |w| {
            let z = 1.0 - (-w).exp();
            1.0 / ((1.0 + z).powi(2) - 4.0 * d * d).sqrt()
        },
        -(1.0 - z_mid).ln(),
        -(1.0 - z_top).ln(),
        intervals,
    );
    Ok(lower + upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparatrixBranch {
    /// Through the north-pole saddle, energy `+δ_eff`.
    Upper,
    /// Through the south-pole saddle, energy `−δ_eff`.
    Lower,
}

/// Squared `(A, B)` on a separatrix branch at height `z`.
fn separatrix_squares<T: Real>(d: T, branch: SeparatrixBranch, z: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let two_d = d + d;
    match branch {
        SeparatrixBranch::Upper => (half * (T::one() - z) * (T::one() + z - two_d), half * (T::one() - z) * (T::one() + z + two_d)),
        SeparatrixBranch::Lower => (half * (T::one() + z) * (T::one() - z + two_d), half * (T::one() + z) * (T::one() - z - two_d)),
    }
}

/// Point on a separatrix branch with the given signs of `A` and `B`.
pub fn separatrix_point<T: Real>(
    params: &FlowParams<T>,
    branch: SeparatrixBranch,
    z: T,
    positive_a: bool,
    positive_b: bool,
) -> Result<BlochPoint<T>> {
    let d = params.in_regime()?;
    let (a2, b2) = separatrix_squares(d, branch, z);
    let slack = lit::<T>(-1e-14);
    if a2 < slack || b2 < slack || z.abs() > T::one() {
        return Err(Error::SeparatrixUndefined { z: to_f64(z) });
    }
    let a = a2.max(T::zero()).sqrt();
    let b = b2.max(T::zero()).sqrt();
    Ok(BlochPoint::new(if positive_a { a } else { -a }, if positive_b { b } else { -b }, z))
}

/// Height range over which a branch is real.
pub fn separatrix_range<T: Real>(params: &FlowParams<T>, branch: SeparatrixBranch) -> Result<(T, T)> {
    let d = params.in_regime()?;
    let edge = d.abs() * lit(2.0) - T::one();
    Ok(match branch {
        SeparatrixBranch::Upper => (edge, T::one()),
        SeparatrixBranch::Lower => (-T::one(), -edge),
    })
}

/// Four arcs (sign quadrants of `A, B`) sampled uniformly in `Z`.
pub fn separatrix_curves<T: Real>(
    params: &FlowParams<T>,
    branch: SeparatrixBranch,
    samples: usize,
) -> Result<Vec<Vec<BlochPoint<T>>>> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples per arc".into()));
    }
    let (lo, hi) = separatrix_range(params, branch)?;
    let mut arcs = Vec::with_capacity(4);
    for (pa, pb) in [(true, true), (true, false), (false, true), (false, false)] {
        let arc = (0..samples)
            .map(|i| {
                let z = lo + (hi - lo) * lit(i as f64 / (samples - 1) as f64);
                separatrix_point(params, branch, z, pa, pb)
            })
            .collect::<Result<Vec<_>>>()?;
        arcs.push(arc);
    }
    Ok(arcs)
}

/// Energy of the saddle a branch passes through.
pub fn saddle_energy<T: Real>(params: &FlowParams<T>, branch: SeparatrixBranch) -> T {
    match branch {
        SeparatrixBranch::Upper => params.delta_eff,
        SeparatrixBranch::Lower => -params.delta_eff,
    }
}
