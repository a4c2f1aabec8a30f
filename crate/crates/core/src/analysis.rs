//! CFL arithmetic, the spline/finite-difference time-step equivalence,
//! flop estimators and trajectory error metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow_model::GroundTruth;
use crate::Point;

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Largest stable time step `space_step / speed` (sec).
pub fn cfl_max_timestep(space_step: f64, speed: f64) -> Result<f64> {
    require_positive("speed", speed)?;
    if !space_step.is_finite() {
        return Err(Error::invalid("space_step must be finite"));
    }
    Ok(space_step / speed)
}

/// Smallest space step compatible with `time_step` at `speed` (cm).
pub fn cfl_min_spacestep(time_step: f64, speed: f64) -> Result<f64> {
    require_positive("time_step", time_step)?;
    require_positive("speed", speed)?;
    Ok(time_step * speed)
}

/// Heuristic equivalence between `V` evaluation ticks per segment and a
/// finite-difference grid `V` times finer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub dt_splines: f64,
    pub dt_fd: f64,
    /// `dt_splines / dt_fd`, which is `V` by construction.
    pub ratio: f64,
}

pub fn virtual_equivalence(
    length: f64,
    n: usize,
    v: usize,
    speed: f64,
) -> Result<EquivalenceReport> {
    require_positive("L", length)?;
    require_positive("speed", speed)?;
    if n == 0 || v == 0 {
        return Err(Error::invalid(format!(
            "N and V must be positive, got N={n}, V={v}"
        )));
    }
    Ok(EquivalenceReport {
        dt_splines: length / ((3 * n) as f64 * speed),
        dt_fd: length / ((3 * n * v) as f64 * speed),
        ratio: v as f64,
    })
}

/// Flop counts for fitting every segment coefficient of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffFlops {
    /// `40 M² N`: a dense `4M × 5M` product per group.
    pub dense_theoretic: u128,
    /// `10 M² N`, the order-of-magnitude form.
    pub order_form: u128,
    /// `2 · 11M · 3N · dims`: what the block-sparse path executes.
    pub sparse_actual: u128,
}

pub fn flops_coeffs(m: usize, n: usize, dims: usize) -> CoeffFlops {
    let (m, n, dims) = (m as u128, n as u128, dims as u128);
    CoeffFlops {
        dense_theoretic: 2 * (4 * m) * (5 * m) * n,
        order_form: 10 * m * m * n,
        sparse_actual: 2 * 11 * m * 3 * n * dims,
    }
}

/// Flop counts for evaluating every segment of a flow at `V + 1` ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueFlops {
    /// `8 M (V + 1) · 3N`, per spatial dimension.
    pub per_dimension: u128,
    /// `10 M V N`, the order-of-magnitude form.
    pub order_form: u128,
}

pub fn flops_values(m: usize, n: usize, v: usize) -> ValueFlops {
    let (m, n, v) = (m as u128, n as u128, v as u128);
    ValueFlops {
        per_dimension: 8 * m * (v + 1) * 3 * n,
        order_form: 10 * m * v * n,
    }
}

/// `floor(log10(x))` for `x >= 1`.
pub fn order_of_magnitude(x: u128) -> u32 {
    x.max(1).ilog10()
}

/// Deviation of a reconstructed polyline from a reference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub max_deviation: f64,
    pub rms_deviation: f64,
    /// Mean length of the coarse sample-to-sample segments.
    pub mean_chord: f64,
    pub samples: usize,
    chords: usize,
}

impl ErrorMetrics {
    pub fn max_over_chord(&self) -> f64 {
        self.max_deviation / self.mean_chord
    }

    pub fn rms_over_chord(&self) -> f64 {
        self.rms_deviation / self.mean_chord
    }

    /// Pool metrics of several trajectories.
    pub fn combine(parts: &[ErrorMetrics]) -> Result<ErrorMetrics> {
        let samples: usize = parts.iter().map(|p| p.samples).sum();
        let chords: usize = parts.iter().map(|p| p.chords).sum();
        if samples == 0 {
            return Err(Error::invalid("no metrics to combine"));
        }
        let sq: f64 = parts
            .iter()
            .map(|p| p.rms_deviation * p.rms_deviation * p.samples as f64)
            .sum();
        let chord_total: f64 = parts.iter().map(|p| p.mean_chord * p.chords as f64).sum();
        Ok(ErrorMetrics {
            max_deviation: parts.iter().map(|p| p.max_deviation).fold(0.0, f64::max),
            rms_deviation: (sq / samples as f64).sqrt(),
            mean_chord: if chords == 0 {
                0.0
            } else {
                chord_total / chords as f64
            },
            samples,
            chords,
        })
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance from `q` to the segment `[a, b]`.
pub fn point_segment_distance(q: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let aq = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    if len2 == 0.0 {
        return dist(q, a);
    }
    let t = ((aq[0] * ab[0] + aq[1] * ab[1] + aq[2] * ab[2]) / len2).clamp(0.0, 1.0);
    dist(q, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]])
}

/// Distance from `q` to the nearest point of `polyline`.
pub fn point_polyline_distance(q: Point, polyline: &[Point]) -> f64 {
    if polyline.len() == 1 {
        return dist(q, polyline[0]);
    }
    polyline
        .windows(2)
        .map(|w| point_segment_distance(q, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Nearest-distance deviation of every `snapshot` point from the reference
/// polyline; `coarse` are the samples the snapshot was reconstructed from and
/// set the chord normalizer.
pub fn trajectory_error(
    snapshot: &[Point],
    truth: &GroundTruth,
    coarse: &[Point],
) -> Result<ErrorMetrics> {
    if snapshot.is_empty() || truth.polyline.is_empty() {
        return Err(Error::invalid("trajectory_error needs non-empty polylines"));
    }
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for &q in snapshot {
        let e = point_polyline_distance(q, &truth.polyline);
        max = max.max(e);
        sq += e * e;
    }
    let chords = coarse.len().saturating_sub(1);
    let mean_chord = if chords == 0 {
        0.0
    } else {
        coarse.windows(2).map(|w| dist(w[0], w[1])).sum::<f64>() / chords as f64
    };
    Ok(ErrorMetrics {
        max_deviation: max,
        rms_deviation: (sq / snapshot.len() as f64).sqrt(),
        mean_chord,
        samples: snapshot.len(),
        chords,
    })
}

/// A titled list of `(metric, value, units)` rows, rendered either as
/// aligned key-value text or as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub title: String,
    pub notes: Vec<String>,
    pub rows: Vec<(String, String, String)>,
}

impl MetricReport {
    pub fn new(title: impl Into<String>) -> Self {
        MetricReport {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, metric: &str, value: impl ToString, units: &str) -> &mut Self {
        self.rows
            .push((metric.to_string(), value.to_string(), units.to_string()));
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = format!("{}\n", self.title);
        for note in &self.notes {
            let _ = writeln!(out, "  ({note})");
        }
        for (m, v, u) in &self.rows {
            let _ = writeln!(out, "  {m:<width$} = {v} {u}");
        }
        out
    }

    /// CSV with the title and notes as leading `#` lines.
    pub fn to_csv(&self) -> String {
        let mut out = format!("#{}\n", self.title);
        for note in &self.notes {
            let _ = writeln!(out, "#{note}");
        }
        out.push_str("metric,value,units\n");
        for (m, v, u) in &self.rows {
            let _ = writeln!(out, "{m},{v},{u}");
        }
        out
    }
}

pub fn cfl_report(
    space_step: Option<f64>,
    time_step: Option<f64>,
    speed: f64,
) -> Result<MetricReport> {
    let mut r = MetricReport::new("CFL condition");
    r.push("speed", speed, "cm/sec");
    if space_step.is_none() && time_step.is_none() {
        return Err(Error::invalid("give a space step, a time step, or both"));
    }
    if let Some(dx) = space_step {
        r.push("space_step", dx, "cm");
        r.push("max_time_step", cfl_max_timestep(dx, speed)?, "sec");
    }
    if let Some(dt) = time_step {
        r.push("time_step", dt, "sec");
        r.push("min_space_step", cfl_min_spacestep(dt, speed)?, "cm");
    }
    Ok(r)
}

pub fn equivalence_report(length: f64, n: usize, v: usize, speed: f64) -> Result<MetricReport> {
    let e = virtual_equivalence(length, n, v, speed)?;
    let mut r = MetricReport::new("Heuristic equivalence (splines vs finer FD grid)");
    r.note("formulas only; the equivalence itself is not proven");
    r.push("L", length, "cm")
        .push("N", n, "groups")
        .push("V", v, "ticks")
        .push("speed", speed, "cm/sec")
        .push("dt_splines", e.dt_splines, "sec")
        .push("dt_fd", e.dt_fd, "sec")
        .push("ratio", e.ratio, "1");
    Ok(r)
}
