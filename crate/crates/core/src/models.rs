//! Hamiltonian specifications, Bessel/Floquet coefficients and matrix
//! construction for every twisting model.

use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cr, lit, to_f64, Real};
use crate::spincore::CollectiveOps;

pub const MAX_BESSEL_ORDER: u32 = 20;
pub const MAX_BESSEL_ARG: f64 = 100.0;
pub const MAX_FOURIER_ORDER: i32 = 10;

/// Largest drive ratio for which `L₀ = 𝒥₀(2r)` stays on the first descending
/// branch (up to the first minimum of 𝒥₀).
pub const MAX_WORKING_RATIO: f64 = 1.916;

/// Bessel function of the first kind `𝒥_n(x)`.
///
/// Power series below `|x| = 12`, normalized Miller backward recurrence above.
pub fn bessel_j<T: Real>(order: u32, x: T) -> Result<T> {
    if order > MAX_BESSEL_ORDER || !(x.abs() <= lit(MAX_BESSEL_ARG)) {
        return Err(Error::InvalidParameter(format!(
            "bessel_j supports order <= {MAX_BESSEL_ORDER} and |x| <= {MAX_BESSEL_ARG}, got ({order}, {})",
            to_f64(x)
        )));
    }
    if x.abs() < lit(12.0) {
        Ok(bessel_series(order, x))
    } else {
        Ok(bessel_miller(order, x))
    }
}

fn bessel_series<T: Real>(order: u32, x: T) -> T {
    let half = x * lit(0.5);
    let mut term = T::one();
    for k in 1..=order {
        term = term * half / lit(k as f64);
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term = term * q / lit((k * (k + order)) as f64);
        sum += term;
        if term.abs() <= T::default_epsilon() * sum.abs().max(lit(1e-300)) && k as f64 > to_f64(half.abs()) {
            break;
        }
        if k > 500 {
            break;
        }
    }
    sum
}

fn bessel_miller<T: Real>(order: u32, x: T) -> T {
    let ax = x.abs();
    let start = {
        let top = (order as f64).max(to_f64(ax));
        let m = (top + 20.0 + (40.0 * top).sqrt()) as u32;
        m + (m & 1)
    };
    let two_over_x = lit::<T>(2.0) / ax;
    let big = lit::<T>(1e100);
    let mut jp1 = T::zero();
    let mut j = lit::<T>(1e-30);
    let mut result = T::zero();
    let mut norm = T::zero();
    for k in (1..=start).rev() {
        let jm1 = lit::<T>(k as f64) * two_over_x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > big {
            let s = lit::<T>(1e-100);
            j *= s;
            jp1 *= s;
            result *= s;
            norm *= s;
        }
        // j now holds the unnormalized J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += j;
        }
        if k - 1 == order {
            result = j;
        }
    }
    norm = lit::<T>(2.0) * norm + j;
    let mut value = result / norm;
    if x < T::zero() && order % 2 == 1 {
        value = -value;
    }
    value
}

/// Drive ratio `r* = Ω₀/ω` with `𝒥₀(2r*) = −1/3`, found by bisection on
/// `[1.2, 1.9]`.
pub fn solve_tat_ratio<T: Real>() -> T {
    let target = -T::one() / lit(3.0);
    let f = |r: T| bessel_series(0, r + r) - target;
    let (mut lo, mut hi) = (lit::<T>(1.2), lit::<T>(1.9));
    let tol = lit::<T>(1e-10);
    while hi - lo > tol {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * lit(0.5)
}

/// Zeroth-order Floquet coefficients at a given drive ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetCoefficients<T: Real> {
    /// `Ω₀/ω`.
    pub ratio: T,
    /// `L₀ = 𝒥₀(2 ratio)`.
    pub l0: T,
    /// `K₀ = 𝒥₀(ratio)`.
    pub k0: T,
    /// Coefficient of `(Ĵβ² − Ĵα²)` in the effective Hamiltonian, `−χL₀`;
    /// equals `χ/3` at the working point.
    pub chi_eff: T,
    /// `K₀ δ`.
    pub delta_eff: T,
}

impl<T: Real> FloquetCoefficients<T> {
    pub fn new(ratio: T, chi: T, delta: T) -> Result<Self> {
        if !(ratio >= T::zero() && ratio <= lit(MAX_WORKING_RATIO)) {
            return Err(Error::InvalidParameter(format!(
                "drive ratio {} outside [0, {MAX_WORKING_RATIO}]",
                to_f64(ratio)
            )));
        }
        let l0 = bessel_j(0, ratio + ratio)?;
        let k0 = bessel_j(0, ratio)?;
        Ok(Self { ratio, l0, k0, chi_eff: -chi * l0, delta_eff: k0 * delta })
    }

    /// Coefficients at `r*`, where the effective model is pure
    /// two-axis-twisting-and-turn.
    pub fn tat_working_point(chi: T, delta: T) -> Self {
        Self::new(solve_tat_ratio(), chi, delta).expect("r* lies inside the working range")
    }
}

/// `K₀ = 𝒥₀(r*)`.
pub fn tat_k0<T: Real>() -> T {
    bessel_series(0, solve_tat_ratio::<T>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HamiltonianKind {
    #[serde(rename = "OAT")]
    Oat,
    #[serde(rename = "OATNT")]
    Oatnt,
    #[serde(rename = "TAT")]
    Tat,
    #[serde(rename = "TATNT")]
    Tatnt,
    #[serde(rename = "ANTI_TATNT")]
    AntiTatnt,
    #[serde(rename = "DRIVEN_FE")]
    DrivenFe,
    #[serde(rename = "EFFECTIVE_H0I")]
    EffectiveH0i,
}

impl HamiltonianKind {
    pub const ALL: [HamiltonianKind; 7] = [
        HamiltonianKind::Oat,
        HamiltonianKind::Oatnt,
        HamiltonianKind::Tat,
        HamiltonianKind::Tatnt,
        HamiltonianKind::AntiTatnt,
        HamiltonianKind::DrivenFe,
        HamiltonianKind::EffectiveH0i,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HamiltonianKind::Oat => "OAT",
            HamiltonianKind::Oatnt => "OATNT",
            HamiltonianKind::Tat => "TAT",
            HamiltonianKind::Tatnt => "TATNT",
            HamiltonianKind::AntiTatnt => "ANTI_TATNT",
            HamiltonianKind::DrivenFe => "DRIVEN_FE",
            HamiltonianKind::EffectiveH0i => "EFFECTIVE_H0I",
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, HamiltonianKind::DrivenFe)
    }
}

impl fmt::Display for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HamiltonianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HamiltonianKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown Hamiltonian kind `{s}`")))
    }
}

/// Declarative description of one Hamiltonian.
///
/// Rates are in radians per unit time. Fields a kind does not use are
/// ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    #[serde(default)]
    pub chi: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub omega0: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub alpha: f64,
}

impl HamiltonianSpec {
    fn base(kind: HamiltonianKind, chi: f64) -> Self {
        Self { kind, chi, delta: 0.0, omega0: 0.0, omega: 0.0, alpha: 0.0 }
    }

    pub fn oat(chi: f64) -> Self {
        Self::base(HamiltonianKind::Oat, chi)
    }

    pub fn oatnt(chi: f64, omega0: f64, alpha: f64) -> Self {
        Self { omega0, alpha, ..Self::base(HamiltonianKind::Oatnt, chi) }
    }

    pub fn tat(chi: f64, alpha: f64) -> Self {
        Self { alpha, ..Self::base(HamiltonianKind::Tat, chi) }
    }

    /// `delta` is the bare detuning; the matrix uses `K₀ δ`.
    pub fn tatnt(chi: f64, delta: f64, alpha: f64) -> Self {
        Self { delta, alpha, ..Self::base(HamiltonianKind::Tatnt, chi) }
    }

    pub fn anti_tatnt(chi: f64, delta: f64, alpha: f64) -> Self {
        Self { delta, alpha, ..Self::base(HamiltonianKind::AntiTatnt, chi) }
    }

    pub fn driven_fe(chi: f64, delta: f64, omega0: f64, omega: f64, alpha: f64) -> Self {
        Self { delta, omega0, omega, alpha, ..Self::base(HamiltonianKind::DrivenFe, chi) }
    }

    /// Driven model at the two-axis working point `Ω₀/ω = r*`.
    pub fn driven_at_working_point(chi: f64, delta: f64, omega0: f64, alpha: f64) -> Self {
        Self::driven_fe(chi, delta, omega0, omega0 / solve_tat_ratio::<f64>(), alpha)
    }

    pub fn effective_h0i(chi: f64, delta: f64, omega0: f64, omega: f64, alpha: f64) -> Self {
        Self { delta, omega0, omega, alpha, ..Self::base(HamiltonianKind::EffectiveH0i, chi) }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.chi, self.delta, self.omega0, self.omega, self.alpha];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter in {self:?}")));
        }
        if matches!(self.kind, HamiltonianKind::DrivenFe | HamiltonianKind::EffectiveH0i) {
            if !(self.omega > 0.0) {
                return Err(Error::InvalidParameter(format!("{} requires omega > 0", self.kind)));
            }
            if self.omega0 < 0.0 {
                return Err(Error::InvalidParameter(format!("{} requires omega0 >= 0", self.kind)));
            }
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.omega0 / self.omega
    }
}

/// Time-dependent driven Hamiltonian `χĴz² + δĴz + Ω₀cos(ωt)Ĵα`.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian<T: Real> {
    pub static_part: CMatrix<T>,
    pub drive_axis: CMatrix<T>,
    pub omega0: T,
    pub omega: T,
}

impl<T: Real> DrivenHamiltonian<T> {
    pub fn at(&self, t: T) -> CMatrix<T> {
        &self.static_part + self.drive_axis.scale(self.omega0 * (self.omega * t).cos())
    }
}

#[derive(Debug, Clone)]
pub enum Hamiltonian<T: Real> {
    Static(CMatrix<T>),
    Driven(DrivenHamiltonian<T>),
}

impl<T: Real> Hamiltonian<T> {
    pub fn as_static(&self) -> Option<&CMatrix<T>> {
        match self {
            Hamiltonian::Static(h) => Some(h),
            Hamiltonian::Driven(_) => None,
        }
    }

    pub fn into_static(self) -> Result<CMatrix<T>> {
        match self {
            Hamiltonian::Static(h) => Ok(h),
            Hamiltonian::Driven(_) => Err(Error::InvalidParameter("Hamiltonian is time dependent".into())),
        }
    }
}

fn sq<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m * m
}

fn tatnt_matrix<T: Real>(spec: &HamiltonianSpec, ops: &CollectiveOps<T>) -> CMatrix<T> {
    let alpha = lit::<T>(spec.alpha);
    let chi_eff = lit::<T>(spec.chi) / lit(3.0);
    let ja = ops.j_alpha(alpha);
    let jb = ops.j_beta(alpha);
    let mut h = (sq(&jb) - sq(&ja)).scale(chi_eff);
    if spec.kind != HamiltonianKind::Tat {
        let delta_eff = tat_k0::<T>() * lit(spec.delta);
        h += ops.jz.scale(delta_eff);
    }
    h
}

/// Builds the matrix (or matrix function) for `spec`.
pub fn build_hamiltonian<T: Real>(spec: &HamiltonianSpec, ops: &CollectiveOps<T>) -> Result<Hamiltonian<T>> {
    spec.validate()?;
    let chi = lit::<T>(spec.chi);
    let delta = lit::<T>(spec.delta);
    let alpha = lit::<T>(spec.alpha);
    let jz2 = sq(&ops.jz);
    let h = match spec.kind {
        HamiltonianKind::Oat => jz2.scale(chi),
        HamiltonianKind::Oatnt => jz2.scale(chi) + ops.j_alpha(alpha).scale(lit(spec.omega0)),
        HamiltonianKind::Tat | HamiltonianKind::Tatnt => tatnt_matrix(spec, ops),
        HamiltonianKind::AntiTatnt => -tatnt_matrix(spec, ops),
        HamiltonianKind::EffectiveH0i => fourier_zero(spec, ops)?,
        HamiltonianKind::DrivenFe => {
            return Ok(Hamiltonian::Driven(DrivenHamiltonian {
                static_part: jz2.scale(chi) + ops.jz.scale(delta),
                drive_axis: ops.j_alpha(alpha),
                omega0: lit(spec.omega0),
                omega: lit(spec.omega),
            }));
        }
    };
    Ok(Hamiltonian::Static(h))
}

/// Convenience for static kinds.
pub fn static_hamiltonian<T: Real>(spec: &HamiltonianSpec, ops: &CollectiveOps<T>) -> Result<CMatrix<T>> {
    build_hamiltonian(spec, ops)?.into_static()
}

fn fourier_zero<T: Real>(spec: &HamiltonianSpec, ops: &CollectiveOps<T>) -> Result<CMatrix<T>> {
    let r = lit::<T>(spec.ratio());
    let l0 = bessel_j(0, r + r)?;
    let k0 = bessel_j(0, r)?;
    let half_chi = lit::<T>(spec.chi * 0.5);
    let jb = ops.j_beta(lit(spec.alpha));
    Ok(sq(&ops.jz).scale(half_chi * (T::one() + l0))
        + sq(&jb).scale(half_chi * (T::one() - l0))
        + ops.jz.scale(k0 * lit(spec.delta)))
}

/// Fourier component `Ĥ_n^I` of the interaction-picture Hamiltonian.
pub fn fourier_component<T: Real>(n: i32, spec: &HamiltonianSpec, ops: &CollectiveOps<T>) -> Result<CMatrix<T>> {
    spec.validate()?;
    if spec.kind != HamiltonianKind::DrivenFe {
        return Err(Error::InvalidParameter("Fourier components need a DRIVEN_FE spec".into()));
    }
    if n.abs() > MAX_FOURIER_ORDER {
        return Err(Error::InvalidParameter(format!("|n| must be <= {MAX_FOURIER_ORDER}")));
    }
    if n == 0 {
        return fourier_zero(spec, ops);
    }
    let order = n.unsigned_abs();
    let r = lit::<T>(spec.ratio());
    let ln = bessel_j(order, r + r)?;
    let kn = bessel_j(order, r)?;
    let jb = ops.j_beta(lit(spec.alpha));
    let i = Complex::new(T::zero(), T::one());
    let ijb = jb.map(|z| z * i);
    let j1 = &ops.jz + &ijb;
    let j2 = &ops.jz - &ijb;
    let sign = if order % 2 == 0 { T::one() } else { -T::one() };
    // Positive n carries (−1)^n on Ĵ₁, negative n on Ĵ₂.
    let (c1, c2) = if n > 0 { (sign, T::one()) } else { (T::one(), sign) };
    let quad = lit::<T>(spec.chi / 4.0) * ln;
    let lin = lit::<T>(spec.delta / 2.0) * kn;
    Ok((sq(&j1).scale(c1) + sq(&j2).scale(c2)).map(|z| z * cr(quad)) + (j1.scale(c1) + j2.scale(c2)).map(|z| z * cr(lin)))
}

/// Exact interaction-picture Hamiltonian `U†(χĴz² + δĴz)U` with
/// `U = e^{−iγĴα}`, `γ = (Ω₀/ω) sin ωt`.
pub fn interaction_hamiltonian<T: Real>(spec: &HamiltonianSpec, ops: &CollectiveOps<T>, t: T) -> Result<CMatrix<T>> {
    spec.validate()?;
    if spec.kind != HamiltonianKind::DrivenFe {
        return Err(Error::InvalidParameter("interaction picture needs a DRIVEN_FE spec".into()));
    }
    let gamma = lit::<T>(spec.ratio()) * (lit::<T>(spec.omega) * t).sin();
    let axis = crate::spincore::Direction::in_plane(lit(spec.alpha));
    let u = ops.rotation(&axis, gamma);
    let h0 = sq(&ops.jz).scale(lit(spec.chi)) + ops.jz.scale(lit(spec.delta));
    Ok(u.adjoint() * h0 * u)
}

/// `Σ_{|n| ≤ max_order} Ĥ_n^I e^{inωt}`.
pub fn fourier_reconstruction<T: Real>(
    spec: &HamiltonianSpec,
    ops: &CollectiveOps<T>,
    t: T,
    max_order: i32,
) -> Result<CMatrix<T>> {
    let mut acc = CMatrix::zeros(ops.dim(), ops.dim());
    let wt = lit::<T>(spec.omega) * t;
    for n in -max_order..=max_order {
        let arg = lit::<T>(n as f64) * wt;
        let e = Complex::new(arg.cos(), arg.sin());
        acc += fourier_component(n, spec, ops)?.map(|z| z * e);
    }
    Ok(acc)
}
