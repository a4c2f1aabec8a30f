//! Command implementations behind the CLI. Each takes a [`RunConfig`],
//! validates it for that command and returns in-memory results; writing
//! files is left to the caller.

use crate::analysis::{trajectory_error, ErrorMetrics, MetricReport};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::evaluator::Snapshot;
use crate::flow_model::{generate_flow, ground_truth, Flow};
use crate::partitioner::{run_spmd, SpmdInput, Stage, TimingBreakdown};
use crate::pipeline::CoeffSet;
use crate::Point;

pub fn cmd_gen(cfg: &RunConfig) -> Result<Flow> {
    cfg.validate(Command::Gen)?;
    generate_flow(&cfg.flow_field(), cfg.m, cfg.samples()?, cfg.coarse_dt())
}

pub fn cmd_fit(cfg: &RunConfig, flow: &Flow) -> Result<(CoeffSet, TimingBreakdown)> {
    cfg.validate(Command::Fit)?;
    let (out, timing) = run_spmd(
        SpmdInput::Flow(flow),
        cfg.p,
        cfg.partition,
        Stage::Fit,
        &cfg.fit_options()?,
        cfg.v,
    )?;
    Ok((out.coeffs.expect("fit stage yields coefficients"), timing))
}

pub fn cmd_eval(cfg: &RunConfig, coeffs: &CoeffSet) -> Result<(Snapshot, TimingBreakdown)> {
    cfg.validate(Command::Eval)?;
    let (out, timing) = run_spmd(
        SpmdInput::Coeffs(coeffs),
        cfg.p,
        cfg.partition,
        Stage::Eval,
        &cfg.fit_options()?,
        cfg.v,
    )?;
    Ok((out.snapshot.expect("eval stage yields a snapshot"), timing))
}

pub fn cmd_pipeline(cfg: &RunConfig, flow: &Flow) -> Result<(CoeffSet, Snapshot, TimingBreakdown)> {
    cfg.validate(Command::Fit)?;
    let (out, timing) = run_spmd(
        SpmdInput::Flow(flow),
        cfg.p,
        cfg.partition,
        Stage::Pipeline,
        &cfg.fit_options()?,
        cfg.v,
    )?;
    Ok((
        out.coeffs.expect("pipeline yields coefficients"),
        out.snapshot.expect("pipeline yields a snapshot"),
        timing,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutput {
    pub flow: Flow,
    pub snapshot: Snapshot,
    pub per_trajectory: Vec<ErrorMetrics>,
    pub overall: ErrorMetrics,
    /// `(truth, spline)` polylines per trajectory.
    pub pairs: Vec<(Vec<Point>, Vec<Point>)>,
}

impl CompareOutput {
    pub fn report(&self, cfg: &RunConfig) -> MetricReport {
        let m = &self.overall;
        let mut r = MetricReport::new("trajectory error against fine-integrated reference");
        r.push("trajectories", self.per_trajectory.len(), "count")
            .push("samples", m.samples, "count")
            .push("coarse_dt", cfg.coarse_dt(), "s")
            .push("fine_dt", cfg.fine_dt(), "s")
            .push("V", cfg.v, "ticks")
            .push("max_deviation", m.max_deviation, "cm")
            .push("rms_deviation", m.rms_deviation, "cm")
            .push("mean_chord", m.mean_chord, "cm")
            .push("max_over_chord", m.max_over_chord(), "ratio")
            .push("rms_over_chord", m.rms_over_chord(), "ratio")
            .note("deviation = distance from each spline sample to the nearest point of the reference polyline");
        r
    }
}

/// Generate, fit, evaluate and measure against ground truth.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareOutput> {
    cfg.validate(Command::Compare)?;
    let flow = cmd_gen(cfg)?;
    let (_, snapshot, _) = cmd_pipeline(cfg, &flow)?;
    let field = cfg.flow_field();
    let used = 3 * snapshot.n_groups() + 1;
    let duration = (used - 1) as f64 * cfg.coarse_dt();
    let mut per_trajectory = Vec::with_capacity(flow.m());
    let mut pairs = Vec::with_capacity(flow.m());
    for i in 0..flow.m() {
        let coarse = &flow.trajectory(i)[..used];
        let truth = ground_truth(&field, coarse[0], duration, cfg.fine_dt())?;
        let spline = snapshot.trajectory(i);
        per_trajectory.push(trajectory_error(spline, &truth, coarse)?);
        pairs.push((truth.polyline, spline.to_vec()));
    }
    let overall = ErrorMetrics::combine(&per_trajectory)?;
    if overall.mean_chord.is_nan() || overall.mean_chord <= 0.0 {
        return Err(Error::Range(
            "flow is degenerate: mean chord is zero".into(),
        ));
    }
    Ok(CompareOutput {
        flow,
        snapshot,
        per_trajectory,
        overall,
        pairs,
    })
}
