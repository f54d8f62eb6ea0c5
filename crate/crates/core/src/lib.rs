//! Collective-spin simulation of Floquet-engineered two-axis twisting:
//! Dicke-basis operators, static and driven propagation, quantum Fisher
//! information, mean-field flow, interaction-based readout, a 2^N oracle
//! for small ensembles and a sweep harness.
//!
//! Numerics are generic over [`scalar::Real`] (`f32`, `f64`). The aliases
//! below fix the scalar for everyday use.

pub mod error;
pub mod linalg;
pub mod scalar;
pub mod spincore;
pub mod models;
pub mod metrology;
pub mod dynamics;
pub mod semiclassical;
pub mod readout;
pub mod exactsmall;
pub mod harness;

pub use error::{Error, Result};

pub type DickeState = spincore::DickeState<f64>;
pub type CollectiveOps = spincore::CollectiveOps<f64>;
pub type Direction = spincore::Direction<f64>;
pub type QfimResult = metrology::QfimResult<f64>;
pub type EvolutionResult = dynamics::EvolutionResult<f64>;
pub type ReadoutChain = readout::ReadoutChain<f64>;
pub type ResponseMatrices = readout::ResponseMatrices<f64>;
pub type BlochPoint = semiclassical::BlochPoint<f64>;
pub type FlowParams = semiclassical::FlowParams<f64>;

pub type DickeState32 = spincore::DickeState<f32>;
pub type CollectiveOps32 = spincore::CollectiveOps<f32>;
pub type Direction32 = spincore::Direction<f32>;
pub type QfimResult32 = metrology::QfimResult<f32>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_static;
    use crate::models::{static_hamiltonian, HamiltonianSpec};

    #[test]
    fn single_precision_tracks_double() {
        let spec = HamiltonianSpec::tatnt(1.0, 3.0, 0.0);
        let o64 = CollectiveOps::new(10).unwrap();
        let o32 = CollectiveOps32::new(10).unwrap();
        let s64 = evolve_static(&static_hamiltonian(&spec, &o64).unwrap(), 0.2, &DickeState::north_pole(10).unwrap()).unwrap();
        let s32 = evolve_static(&static_hamiltonian(&spec, &o32).unwrap(), 0.2f32, &DickeState32::north_pole(10).unwrap()).unwrap();
        let f64_ = metrology::qfim(&s64, &o64).unwrap().f_q_max;
        let f32_ = metrology::qfim(&s32, &o32).unwrap().f_q_max as f64;
        assert!((f64_ - f32_).abs() / f64_ < 1e-4, "{f64_} vs {f32_}");
    }
}
