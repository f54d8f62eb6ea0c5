//! Parameter sweeps: configs in, ordered result tables out.
//!
//! Grid points run on a rayon pool; results are collected in grid order so
//! the output does not depend on the thread count.

pub mod config;
pub mod experiments;
pub mod table;
pub mod validate;

use rayon::prelude::*;

pub use config::{Experiment, Grid, Grids, RangeGrid, SweepConfig};
pub use table::{Cell, Format, ResultTable, Row, CODE_VERSION};

use crate::error::{Error, Result};
use crate::models::HamiltonianKind;
use crate::semiclassical::optimal_time_sc;
use crate::spincore::CollectiveOps;
use experiments::*;

pub const THREADS_ENV: &str = "SPINFORGE_THREADS";

type Point = Result<Vec<Vec<Cell>>>;

fn assemble(points: Vec<Point>) -> Vec<Row> {
    let mut rows = Vec::new();
    for (index, p) in points.into_iter().enumerate() {
        match p {
            Ok(rs) => rows.extend(rs.into_iter().map(Row::Ok)),
            Err(e) => rows.push(Row::Failed { index, message: e.to_string() }),
        }
    }
    rows
}

fn cartesian<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// Runs on the current rayon pool.
pub fn run_experiment(config: &SweepConfig) -> Result<ResultTable> {
    config.validate()?;
    let chi = config.model.chi;
    let alpha = config.model.alpha;
    let set = config.settings;
    let g = &config.grids;
    let hash = config.hash();
    let (columns, rows): (&[&str], Vec<Row>) = match config.experiment {
        Experiment::QfiScan => {
            let n = g.n_values()?[0];
            let ops = CollectiveOps::new(n)?;
            let times = g.time_values()?;
            let points: Vec<Point> = g
                .delta_values()?
                .par_iter()
                .map(|&d| {
                    let f = tatnt_slice(&ops, chi, alpha, d, &times)?;
                    Ok(times.iter().zip(f).map(|(&t, v)| vec![d.into(), t.into(), v.into()]).collect())
                })
                .collect();
            (&["delta_over_Nchi", "chi_t", "fq_over_N2"], assemble(points))
        }
        Experiment::QfiVsTime => {
            let times = g.time_values()?;
            let delta = g.delta_values()?[0];
            let drive = g.omega0_values()?[0];
            let jobs = cartesian(&g.n_values()?, &Protocol::ALL);
            let points: Vec<Point> = jobs
                .par_iter()
                .map(|&(n, p)| {
                    let ops = CollectiveOps::new(n)?;
                    let f = protocol_curve(p, &ops, chi, alpha, delta, drive, &times, set, None)?;
                    Ok(times.iter().zip(f).map(|(&t, v)| vec![p.as_str().into(), t.into(), v.into(), n.into()]).collect())
                })
                .collect();
            (&["protocol", "chi_t", "fq_over_N2", "n"], assemble(points))
        }
        Experiment::ScalingVsN => {
            let deltas = g.delta_values()?;
            let scaled = g.time_values()?;
            let points: Vec<Point> = g
                .n_values()?
                .par_iter()
                .map(|&n| {
                    let ops = CollectiveOps::new(n)?;
                    let t_sc = optimal_time_sc(n)?;
                    let times: Vec<f64> = scaled.iter().map(|s| s * t_sc).collect();
                    let opt = optimize_tatnt(&ops, chi, alpha, &deltas, &times)?;
                    let n2 = (n * n) as f64;
                    Ok(vec![vec![
                        n.into(),
                        opt.delta_ratio.into(),
                        opt.chi_t.into(),
                        (opt.fq_over_n2 * n2).into(),
                        opt.fq_over_n2.into(),
                        t_sc.into(),
                    ]])
                })
                .collect();
            (&["n", "delta_opt_over_Nchi", "chi_t_opt", "fq_opt", "fq_opt_over_N2", "chi_t_sc"], assemble(points))
        }
        Experiment::ReadoutScan => {
            let kind = config.model.kind;
            let delta = if kind == HamiltonianKind::Tatnt { g.delta_values()?[0] } else { 0.0 };
            let sigmas = if g.sigma.is_some() { g.sigma_values()? } else { vec![0.0] };
            let phase = g.phi_values()?[0];
            let jobs = cartesian(&g.n_values()?, &g.time_values()?);
            let points: Vec<Point> = jobs
                .par_iter()
                .map(|&(n, t)| {
                    let ops = CollectiveOps::new(n)?;
                    let chain = echo_chain(&ops, kind, chi, delta, t, phase, set)?;
                    sigmas
                        .iter()
                        .map(|&s| {
                            let p = readout_point(&chain, t, s)?;
                            Ok(vec![
                                t.into(),
                                p.delta_phi.into(),
                                p.qcrb.into(),
                                p.gain_db.into(),
                                s.into(),
                                n.into(),
                                p.ratio().into(),
                            ])
                        })
                        .collect()
                })
                .collect();
            (&["t", "delta_phi", "qcrb", "gain_db", "sigma", "n", "ratio"], assemble(points))
        }
        Experiment::NoiseScan => {
            let delta = g.delta_values()?[0];
            let t = g.time_values()?[0];
            let phase = g.phi_values()?[0];
            let jobs = cartesian(&g.n_values()?, &g.sigma_values()?);
            let points: Vec<Point> = jobs
                .par_iter()
                .map(|&(n, s)| {
                    let ops = CollectiveOps::new(n)?;
                    let chain = echo_chain(&ops, HamiltonianKind::Tatnt, chi, delta, t, phase, set)?;
                    let opt = readout_point(&chain, t, s)?;
                    let ghz = ghz_parity_precision(&ops, &oat_cat(&ops)?, s)?;
                    let gain = |dp: f64| crate::metrology::metrological_gain(dp, n);
                    Ok(vec![
                        vec![s.into(), "optimal_readout".into(), opt.delta_phi.into(), opt.gain_db.into(), n.into()],
                        vec![s.into(), "ghz_parity".into(), ghz.into(), gain(ghz)?.into(), n.into()],
                        vec![s.into(), "qcrb".into(), opt.qcrb.into(), gain(opt.qcrb)?.into(), n.into()],
                    ])
                })
                .collect();
            (&["sigma", "protocol", "delta_phi", "gain_db", "n"], assemble(points))
        }
        Experiment::FloquetConvergence => {
            let delta = g.delta_values()?[0];
            let t = g.time_values()?[0];
            let jobs = cartesian(&g.n_values()?, &g.omega0_values()?);
            let points: Vec<Point> = jobs
                .par_iter()
                .map(|&(n, drive)| {
                    let ops = CollectiveOps::new(n)?;
                    let r = convergence_row(&ops, chi, alpha, delta, t, drive, set)?;
                    Ok(vec![vec![
                        n.into(),
                        r.omega0_over_2pi_n_chi.into(),
                        r.omega.into(),
                        r.omega0.into(),
                        r.qfi_driven.into(),
                        r.qfi_ideal.into(),
                        r.qfi_gap.into(),
                        r.fidelity_gap.into(),
                        r.steps_per_period.into(),
                    ]])
                })
                .collect();
            (
                &[
                    "n",
                    "omega0_over_2pi_Nchi",
                    "omega",
                    "omega0",
                    "fq_driven",
                    "fq_ideal",
                    "qfi_gap",
                    "fidelity_gap",
                    "steps_per_period",
                ],
                assemble(points),
            )
        }
        Experiment::Semiclassical => {
            let times = g.time_values()?;
            let jobs = cartesian(&g.n_values()?, &g.delta_values()?);
            let points: Vec<Point> = jobs
                .par_iter()
                .map(|&(n, d)| {
                    let traj = separatrix_trajectory(n, chi, d, &times)?;
                    Ok(traj
                        .iter()
                        .map(|s| {
                            vec![
                                s.t.into(),
                                s.point.a.into(),
                                s.point.b.into(),
                                s.point.z.into(),
                                s.energy.into(),
                                n.into(),
                                d.into(),
                            ]
                        })
                        .collect())
                })
                .collect();
            (&["t", "A", "B", "Z", "E", "n", "delta_over_Nchi"], assemble(points))
        }
    };
    let mut table = ResultTable::new(config.experiment, columns, hash);
    table.rows = rows;
    Ok(table)
}

/// Thread count from `SPINFORGE_THREADS`, else `requested`.
pub fn resolve_threads(requested: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(requested),
    }
}

/// Runs on a dedicated pool of `threads` workers (rayon's default if `None`).
pub fn run_with_threads(config: &SweepConfig, threads: Option<usize>) -> Result<ResultTable> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_experiment(config))
}
