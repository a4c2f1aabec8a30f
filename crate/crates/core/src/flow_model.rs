//! Trajectory containers, synthetic flow sources and four-point grouping.
//!
//! Synthetic fields stand in for an upstream finite-difference solver: seed
//! particles are advected through an analytic velocity field with a
//! fixed-step RK4 integrator and sampled at a coarse interval. The same
//! integrator produces the finely sampled reference polylines used to score
//! the reconstruction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// M trajectories of S samples each.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    trajectories: Vec<Vec<Point>>,
    dims: u8,
    dt: Option<f64>,
}

impl Flow {
    pub fn new(trajectories: Vec<Vec<Point>>, dims: u8, dt: Option<f64>) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::invalid(format!("dims must be 2 or 3, got {dims}")));
        }
        let m = trajectories.len();
        if m == 0 {
            return Err(Error::invalid("a flow needs at least one trajectory"));
        }
        let s = trajectories[0].len();
        if s < 4 {
            return Err(Error::shape(format!(
                "trajectories need at least 4 samples, got {s}"
            )));
        }
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() != s {
                return Err(Error::shape(format!(
                    "ragged flow: trajectory {i} has {} samples, expected {s}",
                    traj.len()
                )));
            }
            for (j, p) in traj.iter().enumerate() {
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid(format!(
                        "non-finite coordinate in trajectory {i} sample {j}"
                    )));
                }
                if dims == 2 && p[2] != 0.0 {
                    return Err(Error::invalid(format!(
                        "2D flow has z != 0 in trajectory {i} sample {j}"
                    )));
                }
            }
        }
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample interval must be positive, got {dt}"
                )));
            }
        }
        Ok(Flow {
            trajectories,
            dims,
            dt,
        })
    }

    /// Number of trajectories.
    pub fn m(&self) -> usize {
        self.trajectories.len()
    }

    /// Samples per trajectory.
    pub fn s(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn dims(&self) -> u8 {
        self.dims
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    pub fn trajectory(&self, i: usize) -> &[Point] {
        &self.trajectories[i]
    }

    pub fn trajectories(&self) -> &[Vec<Point>] {
        &self.trajectories
    }

    /// Copy of trajectories `range`, used to build per-worker shards.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Flow> {
        if range.start >= range.end || range.end > self.m() {
            return Err(Error::invalid(format!(
                "trajectory range {range:?} outside 0..{}",
                self.m()
            )));
        }
        Ok(Flow {
            trajectories: self.trajectories[range].to_vec(),
            dims: self.dims,
            dt: self.dt,
        })
    }
}

/// Four consecutive samples and the power-basis coefficients of their
/// Bézier control polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOfFour {
    pub points: [Point; 4],
    /// Per dimension `[A, B, C, D]` with `b(s) = A s³ + B s² + C s + D`.
    pub bezier: [[f64; 4]; 3],
    pub group_index: usize,
}

impl GroupOfFour {
    pub fn new(points: [Point; 4], group_index: usize) -> Self {
        let mut bezier = [[0.0; 4]; 3];
        for (d, coeffs) in bezier.iter_mut().enumerate() {
            *coeffs = bezier_power_coeffs(points[0][d], points[1][d], points[2][d], points[3][d]);
        }
        GroupOfFour {
            points,
            bezier,
            group_index,
        }
    }

    /// Evaluate the group Bézier at `s ∈ [0, 1]` from its power form.
    pub fn bezier_at(&self, s: f64) -> Point {
        let mut out = [0.0; 3];
        for (d, o) in out.iter_mut().enumerate() {
            let [a, b, c, dd] = self.bezier[d];
            *o = ((a * s + b) * s + c) * s + dd;
        }
        out
    }
}

/// Power-basis coefficients `(A, B, C, D)` of the cubic Bézier with control
/// values `p1..p4`.
pub fn bezier_power_coeffs(p1: f64, p2: f64, p3: f64, p4: f64) -> [f64; 4] {
    [
        -p1 + 3.0 * p2 - 3.0 * p3 + p4,
        3.0 * p1 - 6.0 * p2 + 3.0 * p3,
        -3.0 * p1 + 3.0 * p2,
        p1,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupingMode {
    /// Reject trajectories whose length is not `3N + 1`.
    #[default]
    Strict,
    /// Drop trailing samples that do not complete a group.
    Relaxed,
}

/// Split a trajectory into `N = (S - 1) / 3` groups sharing their boundary
/// samples.
pub fn group_points(trajectory: &[Point], mode: GroupingMode) -> Result<Vec<GroupOfFour>> {
    let s = trajectory.len();
    if s < 4 {
        return Err(Error::shape(format!(
            "need at least 4 samples to form a group, got {s}"
        )));
    }
    let extra = (s - 1) % 3;
    if extra != 0 {
        match mode {
            GroupingMode::Strict => {
                return Err(Error::shape(format!(
                    "trajectory length {s} is not of the form 3N+1 ((S-1) mod 3 = {extra})"
                )))
            }
            GroupingMode::Relaxed => {
                log::warn!("trajectory length {s} is not 3N+1; dropping {extra} trailing sample(s)")
            }
        }
    }
    let n = (s - 1) / 3;
    Ok((0..n)
        .map(|g| {
            let i = 3 * g;
            GroupOfFour::new(
                [
                    trajectory[i],
                    trajectory[i + 1],
                    trajectory[i + 2],
                    trajectory[i + 3],
                ],
                g,
            )
        })
        .collect())
}

/// Inverse of [`group_points`]: the first `3N + 1` samples.
pub fn flatten_groups(groups: &[GroupOfFour]) -> Vec<Point> {
    let mut out = Vec::with_capacity(3 * groups.len() + 1);
    for (g, group) in groups.iter().enumerate() {
        let skip = usize::from(g > 0);
        out.extend_from_slice(&group.points[skip..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Constant velocity along `direction`.
    Uniform,
    /// Rigid rotation about the z axis, optionally with axial drift.
    Vortex,
    /// Planar flow deflected over a Gaussian bump at the origin.
    Hill,
}

impl std::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(FieldKind::Uniform),
            "vortex" => Ok(FieldKind::Vortex),
            "hill" => Ok(FieldKind::Hill),
            other => Err(Error::invalid(format!("unknown field kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldKind::Uniform => "uniform",
            FieldKind::Vortex => "vortex",
            FieldKind::Hill => "hill",
        })
    }
}

/// Analytic velocity field used as a stand-in trajectory source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub kind: FieldKind,
    /// Scalar flow speed `s` in cm/sec. For the vortex this is the tangential
    /// speed at `radius`, so the angular speed is `speed / radius`.
    pub speed: f64,
    /// Unit direction of the uniform field.
    pub direction: [f64; 3],
    /// Vortex seed radius (cm).
    pub radius: f64,
    /// Vortex drift along z (cm/sec); nonzero values make the flow 3D.
    pub axial_speed: f64,
    /// Hill height (cm).
    pub height: f64,
    /// Hill half-width and vertical decay length (cm).
    pub width: f64,
    /// Distance between neighbouring seed points (cm).
    pub spacing: f64,
    /// Amplitude of the seeded random perturbation of seed points (cm).
    pub jitter: f64,
    /// Upper bound on the internal RK4 step (sec).
    pub max_step: f64,
    pub seed: u64,
}

impl FlowField {
    fn base(kind: FieldKind, speed: f64) -> Self {
        FlowField {
            kind,
            speed,
            direction: [1.0, 0.0, 0.0],
            radius: 1.0,
            axial_speed: 0.0,
            height: 1.0,
            width: 2.0,
            spacing: 1.0,
            jitter: 0.0,
            max_step: 1e-2,
            seed: 0,
        }
    }

    pub fn uniform(speed: f64) -> Self {
        Self::base(FieldKind::Uniform, speed)
    }

    /// Rigid vortex with angular speed `speed / radius`.
    pub fn vortex(speed: f64, radius: f64) -> Self {
        FlowField {
            radius,
            ..Self::base(FieldKind::Vortex, speed)
        }
    }

    pub fn hill(speed: f64, height: f64, width: f64) -> Self {
        FlowField {
            height,
            width,
            ..Self::base(FieldKind::Hill, speed)
        }
    }

    pub fn with_kind(kind: FieldKind, speed: f64) -> Self {
        Self::base(kind, speed)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("speed", self.speed)?;
        positive("max_step", self.max_step)?;
        positive("spacing", self.spacing)?;
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid(format!(
                "jitter must be >= 0, got {}",
                self.jitter
            )));
        }
        match self.kind {
            FieldKind::Uniform => {
                let norm = self.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::invalid("uniform direction must be a nonzero vector"));
                }
            }
            FieldKind::Vortex => {
                positive("radius", self.radius)?;
                if !self.axial_speed.is_finite() {
                    return Err(Error::invalid("axial_speed must be finite"));
                }
            }
            FieldKind::Hill => {
                positive("width", self.width)?;
                if !self.height.is_finite() {
                    return Err(Error::invalid("height must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Spatial dimensionality of trajectories produced by this field.
    pub fn dims(&self) -> u8 {
        let planar = match self.kind {
            FieldKind::Uniform => self.direction[2] == 0.0,
            FieldKind::Vortex => self.axial_speed == 0.0,
            FieldKind::Hill => true,
        };
        if planar {
            2
        } else {
            3
        }
    }

    /// Vortex angular speed in rad/sec.
    pub fn angular_speed(&self) -> f64 {
        self.speed / self.radius
    }

    pub fn velocity(&self, p: Point) -> Point {
        match self.kind {
            FieldKind::Uniform => {
                let [dx, dy, dz] = self.direction;
                let norm = (dx * dx + dy * dy + dz * dz).sqrt();
                let k = self.speed / norm;
                [k * dx, k * dy, k * dz]
            }
            FieldKind::Vortex => {
                let w = self.angular_speed();
                [-w * p[1], w * p[0], self.axial_speed]
            }
            FieldKind::Hill => {
                // Stream function psi = s (y - f(x) g(y)), f Gaussian bump, g exponential decay.
                let w = self.width;
                let f = self.height * (-(p[0] / w).powi(2)).exp();
                let df = -2.0 * p[0] / (w * w) * f;
                let g = (-p[1].max(0.0) / w).exp();
                [self.speed * (1.0 + f * g / w), self.speed * df * g, 0.0]
            }
        }
    }

    /// Seed point of trajectory `i` out of `m`, before jitter.
    fn lattice_seed(&self, i: usize, m: usize) -> Point {
        match self.kind {
            FieldKind::Uniform => [0.0, i as f64 * self.spacing, 0.0],
            FieldKind::Vortex => {
                let theta = std::f64::consts::TAU * i as f64 / m as f64;
                [self.radius * theta.cos(), self.radius * theta.sin(), 0.0]
            }
            FieldKind::Hill => [-3.0 * self.width, (i + 1) as f64 * self.spacing, 0.0],
        }
    }

    /// Seed points for `m` trajectories, perturbed reproducibly by `seed`.
    pub fn seed_points(&self, m: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let planar = self.dims() == 2;
        (0..m)
            .map(|i| {
                let mut p = self.lattice_seed(i, m);
                if self.jitter > 0.0 {
                    p[0] += rng.gen_range(-self.jitter..=self.jitter);
                    p[1] += rng.gen_range(-self.jitter..=self.jitter);
                    if !planar {
                        p[2] += rng.gen_range(-self.jitter..=self.jitter);
                    }
                }
                p
            })
            .collect()
    }

    fn rk4_step(&self, p: Point, h: f64) -> Point {
        let add = |a: Point, b: Point, k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
        let k1 = self.velocity(p);
        let k2 = self.velocity(add(p, k1, 0.5 * h));
        let k3 = self.velocity(add(p, k2, 0.5 * h));
        let k4 = self.velocity(add(p, k3, h));
        let mut out = p;
        for d in 0..3 {
            out[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out
    }

    /// Advance `p` by `duration` in equal RK4 steps no longer than `max_step`.
    pub fn advance(&self, p: Point, duration: f64) -> Point {
        if self.kind == FieldKind::Uniform {
            // Closed form; RK4 substeps would only add rounding drift.
            let v = self.velocity(p);
            return [0, 1, 2].map(|d| p[d] + v[d] * duration);
        }
        let steps = (duration / self.max_step).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        (0..steps).fold(p, |q, _| self.rk4_step(q, h))
    }
}

/// Advect `m` seed particles and sample each path every `coarse_dt` seconds.
pub fn generate_flow(field: &FlowField, m: usize, s: usize, coarse_dt: f64) -> Result<Flow> {
    field.validate()?;
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if s < 4 {
        return Err(Error::invalid(format!("S must be at least 4, got {s}")));
    }
    if !(coarse_dt > 0.0 && coarse_dt.is_finite()) {
        return Err(Error::invalid(format!(
            "coarse_dt must be positive, got {coarse_dt}"
        )));
    }
    let trajectories = field
        .seed_points(m)
        .into_iter()
        .map(|seed| {
            let mut traj = Vec::with_capacity(s);
            traj.push(seed);
            for _ in 1..s {
                let last = *traj.last().unwrap();
                traj.push(field.advance(last, coarse_dt));
            }
            traj
        })
        .collect();
    Flow::new(trajectories, field.dims(), Some(coarse_dt))
}

/// Finely sampled reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub polyline: Vec<Point>,
    pub fine_dt: f64,
}

/// Integrate from `start` for `duration`, recording a sample every `fine_dt`.
/// When `duration` is not a multiple of `fine_dt` the last interval is short.
pub fn ground_truth(
    field: &FlowField,
    start: Point,
    duration: f64,
    fine_dt: f64,
) -> Result<GroundTruth> {
    field.validate()?;
    if !(fine_dt > 0.0 && fine_dt.is_finite()) {
        return Err(Error::invalid(format!(
            "fine_dt must be positive, got {fine_dt}"
        )));
    }
    if !(duration.is_finite() && fine_dt <= duration) {
        return Err(Error::invalid(format!(
            "need fine_dt <= duration, got fine_dt={fine_dt} duration={duration}"
        )));
    }
    let ratio = duration / fine_dt;
    let whole = ratio.round();
    let (full, tail) = if (ratio - whole).abs() <= 1e-9 * ratio.max(1.0) {
        (whole as usize, 0.0)
    } else {
        let full = ratio.floor() as usize;
        (full, duration - full as f64 * fine_dt)
    };
    let mut polyline = Vec::with_capacity(full + 2);
    polyline.push(start);
    for _ in 0..full {
        let last = *polyline.last().unwrap();
        polyline.push(field.advance(last, fine_dt));
    }
    if tail > 0.0 {
        let last = *polyline.last().unwrap();
        polyline.push(field.advance(last, tail));
    }
    Ok(GroundTruth { polyline, fine_dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Point, b: Point, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uniform_flow_advects_along_x() {
        let flow = generate_flow(&FlowField::uniform(1.0), 1, 4, 1.0).unwrap();
        let expected = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
        ];
        for (p, e) in flow.trajectory(0).iter().zip(expected) {
            assert_eq!(*p, e);
        }
        assert_eq!(flow.dims(), 2);
        assert_eq!(flow.dt(), Some(1.0));
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let mut field = FlowField::vortex(1.0, 1.0);
        field.jitter = 0.05;
        field.seed = 42;
        let a = generate_flow(&field, 5, 10, 0.3).unwrap();
        let b = generate_flow(&field, 5, 10, 0.3).unwrap();
        assert_eq!(a, b);
        field.seed = 43;
        let c = generate_flow(&field, 5, 10, 0.3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vortex_samples_lie_on_circle_quarter_turns() {
        let flow = generate_flow(&FlowField::vortex(1.0, 1.0), 1, 4, FRAC_PI_2).unwrap();
        for (j, p) in flow.trajectory(0).iter().enumerate() {
            let theta = FRAC_PI_2 * j as f64;
            assert!(
                close(*p, [theta.cos(), theta.sin(), 0.0], 1e-9),
                "{j}: {p:?}"
            );
        }
    }

    #[test]
    fn generate_rejects_bad_arguments() {
        let f = FlowField::uniform(1.0);
        assert!(matches!(
            generate_flow(&f, 0, 4, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_flow(&f, 1, 3, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_flow(&f, 1, 4, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_flow(&f, 1, 4, -1.0),
            Err(Error::InvalidArgument(_))
        ));
        let bad = FlowField::uniform(-1.0);
        assert!(matches!(
            generate_flow(&bad, 1, 4, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ground_truth_point_counts() {
        let f = FlowField::uniform(1.0);
        let gt = ground_truth(&f, [0.0; 3], 3.0, 1.0).unwrap();
        assert_eq!(gt.polyline.len(), 4);
        for (j, p) in gt.polyline.iter().enumerate() {
            assert!(close(*p, [j as f64, 0.0, 0.0], 1e-12));
        }
        let gt = ground_truth(&f, [0.0; 3], 2.5, 2.5).unwrap();
        assert_eq!(gt.polyline.len(), 2);
        let gt = ground_truth(&f, [0.0; 3], 2.5, 1.0).unwrap();
        assert_eq!(gt.polyline.len(), 4);
        assert!(close(gt.polyline[3], [2.5, 0.0, 0.0], 1e-12));
        assert!(ground_truth(&f, [0.0; 3], 1.0, 2.0).is_err());
        assert!(ground_truth(&f, [0.0; 3], 1.0, 0.0).is_err());
    }

    #[test]
    fn ground_truth_passes_through_coarse_samples() {
        let field = FlowField::vortex(1.0, 1.0);
        let coarse_dt = FRAC_PI_2;
        let flow = generate_flow(&field, 1, 7, coarse_dt).unwrap();
        let duration = 6.0 * coarse_dt;
        let gt = ground_truth(&field, flow.trajectory(0)[0], duration, coarse_dt / 10.0).unwrap();
        assert_eq!(gt.polyline.len(), 61);
        for (j, p) in flow.trajectory(0).iter().enumerate() {
            assert!(close(gt.polyline[10 * j], *p, 1e-9), "sample {j}");
        }
        let last = gt.polyline.last().unwrap();
        assert!(close(
            *last,
            [(3.0 * PI).cos(), (3.0 * PI).sin(), 0.0],
            1e-9
        ));
    }

    #[test]
    fn bezier_power_coeffs_examples() {
        assert_eq!(
            bezier_power_coeffs(0.0, 1.0, 2.0, 3.0),
            [0.0, 0.0, 3.0, 0.0]
        );
        assert_eq!(
            bezier_power_coeffs(2.5, 2.5, 2.5, 2.5),
            [0.0, 0.0, 0.0, 2.5]
        );
        let c = bezier_power_coeffs(0.0, 1.0, 1.0, 0.0);
        assert_eq!(c, [0.0, -3.0, 3.0, 0.0]);
        assert_eq!(c.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn grouping_counts_and_shared_points() {
        let traj: Vec<Point> = (0..7).map(|i| [i as f64, 0.0, 0.0]).collect();
        let groups = group_points(&traj, GroupingMode::Strict).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].points[3], traj[3]);
        assert_eq!(groups[1].points[0], traj[3]);
        assert_eq!(groups[1].group_index, 1);
        assert_eq!(
            group_points(&traj[..4], GroupingMode::Strict)
                .unwrap()
                .len(),
            1
        );
        assert!(matches!(
            group_points(&traj[..6], GroupingMode::Strict),
            Err(Error::Shape(_))
        ));
        let relaxed = group_points(&traj[..6], GroupingMode::Relaxed).unwrap();
        assert_eq!(relaxed.len(), 1);
        assert_eq!(flatten_groups(&relaxed), traj[..4].to_vec());
    }

    #[test]
    fn flow_rejects_ragged_and_nonfinite() {
        let ok = vec![[0.0; 3]; 4];
        assert!(matches!(
            Flow::new(vec![ok.clone(), vec![[0.0; 3]; 5]], 2, None),
            Err(Error::Shape(_))
        ));
        let mut bad = ok.clone();
        bad[1][0] = f64::NAN;
        assert!(Flow::new(vec![bad], 2, None).is_err());
        let mut z = ok.clone();
        z[0][2] = 1.0;
        assert!(Flow::new(vec![z.clone()], 2, None).is_err());
        assert!(Flow::new(vec![z], 3, None).is_ok());
        assert!(Flow::new(vec![], 2, None).is_err());
    }

    #[test]
    fn helix_is_three_dimensional() {
        let mut f = FlowField::vortex(1.0, 2.0);
        f.axial_speed = 0.5;
        let flow = generate_flow(&f, 2, 4, 1.0).unwrap();
        assert_eq!(flow.dims(), 3);
        assert!((flow.trajectory(0)[3][2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn hill_deflects_streamlines_upward_over_bump() {
        let f = FlowField::hill(10.0, 1.0, 2.0);
        let flow = generate_flow(&f, 1, 13, 0.1).unwrap();
        let traj = flow.trajectory(0);
        let peak = traj.iter().map(|p| p[1]).fold(f64::MIN, f64::max);
        assert!(peak > traj[0][1]);
        assert!(traj.windows(2).all(|w| w[1][0] > w[0][0]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = Point> {
            prop::array::uniform3(-1e3..1e3f64)
        }

        proptest! {
            #[test]
            fn bezier_endpoints_reproduce_p1_p4(pts in prop::array::uniform4(point())) {
                let g = GroupOfFour::new(pts, 0);
                let scale = pts.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
                let b0 = g.bezier_at(0.0);
                let b1 = g.bezier_at(1.0);
                for d in 0..3 {
                    prop_assert_eq!(b0[d], pts[0][d]);
                    prop_assert!((b1[d] - pts[3][d]).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn flatten_inverts_grouping(
                traj in (1usize..6).prop_flat_map(|n| prop::collection::vec(point(), 3 * n + 1))
            ) {
                let groups = group_points(&traj, GroupingMode::Strict).unwrap();
                prop_assert_eq!(groups.len(), (traj.len() - 1) / 3);
                prop_assert_eq!(flatten_groups(&groups), traj);
            }
        }
    }
}
