//! SPMD execution over contiguous trajectory shards.
//!
//! Each worker owns a disjoint range of trajectories and runs the pure fit
//! and evaluation kernels on it. No data crosses shards, so results are
//! stitched back by range and are bit-identical for every worker count.
//!
//! Timing: `time_execution` is the wall clock of the whole parallel region,
//! `time_cpu` is the summed per-worker kernel time divided by `p`, and
//! `time_overhead = time_execution - time_cpu`. All three are kept in integer
//! nanoseconds so the identity holds exactly.

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{assemble_snapshot_counted, Snapshot};
use crate::flow_model::Flow;
use crate::pipeline::{fit_flow_counted, CoeffSet, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Require `M mod p = 0`.
    Strict,
    /// Shard sizes may differ by one.
    #[default]
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub m: usize,
    pub p: usize,
    pub shards: Vec<Range<usize>>,
}

pub fn partition(m: usize, p: usize, mode: PartitionMode) -> Result<Partition> {
    if p == 0 || p > m {
        return Err(Error::invalid(format!(
            "need 1 <= p <= M, got p={p}, M={m}"
        )));
    }
    if mode == PartitionMode::Strict && !m.is_multiple_of(p) {
        return Err(Error::Divisibility { m, p });
    }
    let base = m / p;
    let extra = m % p;
    let mut start = 0;
    let shards = (0..p)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(Partition { m, p, shards })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerTiming {
    pub kernel_ns: u128,
    /// Wall clock of the region minus this worker's kernel time.
    pub idle_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingBreakdown {
    pub p: usize,
    pub execution_ns: u128,
    pub cpu_ns: u128,
    pub overhead_ns: u128,
    pub workers: Vec<WorkerTiming>,
}

impl TimingBreakdown {
    fn from_measurements(wall_ns: u128, kernels: &[u128]) -> Self {
        let p = kernels.len().max(1);
        let cpu_ns = kernels.iter().sum::<u128>() / p as u128;
        let execution_ns = wall_ns.max(cpu_ns);
        TimingBreakdown {
            p,
            execution_ns,
            cpu_ns,
            overhead_ns: execution_ns - cpu_ns,
            workers: kernels
                .iter()
                .map(|&k| WorkerTiming {
                    kernel_ns: k,
                    idle_ns: execution_ns.saturating_sub(k),
                })
                .collect(),
        }
    }

    pub fn time_execution(&self) -> f64 {
        self.execution_ns as f64 * 1e-9
    }

    pub fn time_cpu(&self) -> f64 {
        self.cpu_ns as f64 * 1e-9
    }

    pub fn time_overhead(&self) -> f64 {
        self.overhead_ns as f64 * 1e-9
    }

    pub fn max_kernel_ns(&self) -> u128 {
        self.workers.iter().map(|w| w.kernel_ns).max().unwrap_or(0)
    }
}

/// Which kernels a parallel run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fit,
    Eval,
    Pipeline,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Fit => "fit",
            Stage::Eval => "eval",
            Stage::Pipeline => "pipeline",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fit" => Ok(Stage::Fit),
            "eval" => Ok(Stage::Eval),
            "pipeline" => Ok(Stage::Pipeline),
            other => Err(Error::invalid(format!("unknown stage '{other}'"))),
        }
    }
}

/// Run `kernel` once per shard on its own thread. Returns per-shard results
/// in shard order and the timing breakdown; the first failing shard's error
/// is returned with its index.
pub fn fork_join<T, F>(part: &Partition, kernel: F) -> Result<(Vec<T>, TimingBreakdown)>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> Result<T> + Sync,
{
    let start = Instant::now();
    let outcomes: Vec<(Result<T>, u128)> = std::thread::scope(|scope| {
        let handles: Vec<_> = part
            .shards
            .iter()
            .cloned()
            .enumerate()
            .map(|(w, range)| {
                let kernel = &kernel;
                scope.spawn(move || {
                    let t0 = Instant::now();
                    let out = kernel(w, range);
                    (out, t0.elapsed().as_nanos())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut results = Vec::with_capacity(outcomes.len());
    let mut kernels = Vec::with_capacity(outcomes.len());
    for (shard, (out, ns)) in outcomes.into_iter().enumerate() {
        kernels.push(ns);
        match out {
            Ok(v) => results.push(v),
            Err(e) => {
                return Err(Error::Shard {
                    shard,
                    source: Box::new(e),
                })
            }
        }
    }
    let wall = start.elapsed().as_nanos();
    Ok((results, TimingBreakdown::from_measurements(wall, &kernels)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpmdOutput {
    pub coeffs: Option<CoeffSet>,
    pub snapshot: Option<Snapshot>,
    /// Instrumented flops summed over shards.
    pub flops: u64,
}

/// What a stage needs: the flow for fitting, or precomputed coefficients for
/// evaluation.
#[derive(Debug, Clone, Copy)]
pub enum SpmdInput<'a> {
    Flow(&'a Flow),
    Coeffs(&'a CoeffSet),
}

/// Execute `stage` with `p` workers.
///
/// `Fit` and `Pipeline` need [`SpmdInput::Flow`]; `Eval` needs
/// [`SpmdInput::Coeffs`].
pub fn run_spmd(
    input: SpmdInput<'_>,
    p: usize,
    mode: PartitionMode,
    stage: Stage,
    fit: &FitOptions,
    v: usize,
) -> Result<(SpmdOutput, TimingBreakdown)> {
    match (stage, input) {
        (Stage::Fit, SpmdInput::Flow(flow)) | (Stage::Pipeline, SpmdInput::Flow(flow)) => {
            let part = partition(flow.m(), p, mode)?;
            let with_eval = stage == Stage::Pipeline;
            let (parts, timing) = fork_join(&part, |_, range| {
                let shard = flow.slice(range)?;
                let mut flops = 0;
                let coeffs = fit_flow_counted(&shard, fit, &mut flops)?;
                let snap = if with_eval {
                    Some(assemble_snapshot_counted(&coeffs, v, &mut flops)?)
                } else {
                    None
                };
                Ok((coeffs, snap, flops))
            })?;
            let flops = parts.iter().map(|p| p.2).sum();
            let mut coeff_parts = Vec::with_capacity(parts.len());
            let mut snap_parts = Vec::with_capacity(parts.len());
            for (c, s, _) in parts {
                coeff_parts.push(c);
                snap_parts.extend(s);
            }
            let snapshot = if with_eval {
                Some(Snapshot::concat(snap_parts)?)
            } else {
                None
            };
            Ok((
                SpmdOutput {
                    coeffs: Some(CoeffSet::concat(coeff_parts)?),
                    snapshot,
                    flops,
                },
                timing,
            ))
        }
        (Stage::Eval, SpmdInput::Coeffs(coeffs)) => {
            let part = partition(coeffs.m(), p, mode)?;
            let (parts, timing) = fork_join(&part, |_, range| {
                let shard = coeffs.slice_rows(range)?;
                let mut flops = 0;
                let snap = assemble_snapshot_counted(&shard, v, &mut flops)?;
                Ok((snap, flops))
            })?;
            let flops = parts.iter().map(|p| p.1).sum();
            let snapshot = Snapshot::concat(parts.into_iter().map(|p| p.0).collect())?;
            Ok((
                SpmdOutput {
                    coeffs: None,
                    snapshot: Some(snapshot),
                    flops,
                },
                timing,
            ))
        }
        (stage, _) => Err(Error::invalid(format!(
            "stage '{stage}' was given the wrong kind of input"
        ))),
    }
}

/// Ideal parallel time: one product per segment, `3N` segments, spread over
/// `p` workers.
pub fn theoretic_time(single_product_s: f64, n_groups: usize, p: usize) -> f64 {
    single_product_s * (3 * n_groups) as f64 / p as f64
}
