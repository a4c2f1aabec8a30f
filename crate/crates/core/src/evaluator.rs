//! Batched evaluation of cubic segments at fixed parameter ticks.
//!
//! Evaluating a cubic at `t` is the dot product of `(a, b, c, d)` with
//! `(t³, t², t, 1)`, so all `M` trajectories of one segment plane are
//! evaluated at all `V + 1` ticks by the single product `C · T_ticks`.

use crate::batch_sparse::CoeffPlane;
use crate::error::{Error, Result};
use crate::pipeline::CoeffSet;
use crate::Point;

/// `4 × (V + 1)` matrix whose column `j` is `((j/V)³, (j/V)², j/V, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TickMatrix {
    v: usize,
    /// Row-major, 4 rows of `V + 1`.
    data: Vec<f64>,
}

pub fn tick_matrix(v: usize) -> Result<TickMatrix> {
    if v == 0 {
        return Err(Error::invalid("tick count V must be at least 1"));
    }
    let cols = v + 1;
    let mut data = vec![0.0; 4 * cols];
    for j in 0..cols {
        let t = j as f64 / v as f64;
        let t2 = t * t;
        data[j] = t2 * t;
        data[cols + j] = t2;
        data[2 * cols + j] = t;
        data[3 * cols + j] = 1.0;
    }
    Ok(TickMatrix { v, data })
}

impl TickMatrix {
    pub fn v(&self) -> usize {
        self.v
    }

    pub fn cols(&self) -> usize {
        self.v + 1
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[row * cols..(row + 1) * cols]
    }

    pub fn column(&self, col: usize) -> [f64; 4] {
        [0, 1, 2, 3].map(|r| self.get(r, col))
    }

    /// Parameter value of tick `j`.
    pub fn tick(&self, col: usize) -> f64 {
        self.get(2, col)
    }
}

/// `M × (V + 1)` evaluated positions for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ValueMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn eval_segment_batch(c: &CoeffPlane, ticks: &TickMatrix) -> Result<ValueMatrix> {
    let mut flops = 0;
    eval_rows_counted(&c.rows, ticks, &mut flops)
}

/// `C · T_ticks` for an `M × 4` coefficient block. Adds `8` flops per
/// output entry to `flops`.
pub fn eval_rows_counted(
    rows: &[[f64; 4]],
    ticks: &TickMatrix,
    flops: &mut u64,
) -> Result<ValueMatrix> {
    if rows.is_empty() {
        return Err(Error::shape("coefficient plane has no rows"));
    }
    let cols = ticks.cols();
    let mut data = vec![0.0; rows.len() * cols];
    let (t3, t2, t1, t0) = (ticks.row(0), ticks.row(1), ticks.row(2), ticks.row(3));
    for (out, &[a, b, c, d]) in data.chunks_exact_mut(cols).zip(rows) {
        for j in 0..cols {
            out[j] = a * t3[j] + b * t2[j] + c * t1[j] + d * t0[j];
        }
        *flops += 8 * cols as u64;
    }
    Ok(ValueMatrix {
        rows: rows.len(),
        cols,
        data,
    })
}

/// Fine polylines for every trajectory: `3N·V + 1` points each.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    m: usize,
    dims: u8,
    v: usize,
    n_groups: usize,
    points: Vec<Point>,
}

impl Snapshot {
    pub fn new(m: usize, dims: u8, v: usize, n_groups: usize, points: Vec<Point>) -> Result<Self> {
        let per = 3 * n_groups * v + 1;
        if m == 0 || v == 0 || n_groups == 0 || points.len() != m * per {
            return Err(Error::shape(format!(
                "snapshot with M={m}, N={n_groups}, V={v} needs {} points, got {}",
                m * per,
                points.len()
            )));
        }
        Ok(Snapshot {
            m,
            dims,
            v,
            n_groups,
            points,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> u8 {
        self.dims
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn points_per_trajectory(&self) -> usize {
        3 * self.n_groups * self.v + 1
    }

    pub fn trajectory(&self, i: usize) -> &[Point] {
        let per = self.points_per_trajectory();
        &self.points[i * per..(i + 1) * per]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Concatenate snapshots of consecutive trajectory shards.
    pub fn concat(parts: Vec<Snapshot>) -> Result<Snapshot> {
        let mut iter = parts.into_iter();
        let mut acc = iter
            .next()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        for part in iter {
            if part.v != acc.v || part.n_groups != acc.n_groups || part.dims != acc.dims {
                return Err(Error::shape("snapshot shards disagree on V, N or dims"));
            }
            acc.m += part.m;
            acc.points.extend(part.points);
        }
        Ok(acc)
    }
}

pub fn assemble_snapshot(coeffs: &CoeffSet, v: usize) -> Result<Snapshot> {
    let mut flops = 0;
    assemble_snapshot_counted(coeffs, v, &mut flops)
}

/// Evaluate all `3N · dims` planes and stitch each trajectory's segments,
/// dropping the leading tick of every segment after the first.
pub fn assemble_snapshot_counted(coeffs: &CoeffSet, v: usize, flops: &mut u64) -> Result<Snapshot> {
    let ticks = tick_matrix(v)?;
    let m = coeffs.m();
    let n = coeffs.n_groups();
    let per = 3 * n * v + 1;
    let mut points = vec![[0.0; 3]; m * per];
    for g in 0..n {
        for k in 1..=3u8 {
            let seg = 3 * g + (k as usize - 1);
            let first_col = usize::from(seg > 0);
            for d in 0..coeffs.dims() as usize {
                let values = eval_rows_counted(&coeffs.plane(g, k, d).rows, &ticks, flops)?;
                for i in 0..m {
                    let row = values.row(i);
                    let traj = &mut points[i * per..(i + 1) * per];
                    for j in first_col..=v {
                        traj[seg * v + j][d] = row[j];
                    }
                }
            }
        }
    }
    Snapshot::new(m, coeffs.dims(), v, n, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_model::{generate_flow, Flow, FlowField};
    use crate::pipeline::{fit_flow, FitOptions};
    use crate::spline_kernel::horner;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(rows: Vec<[f64; 4]>) -> CoeffPlane {
        CoeffPlane {
            group_index: 0,
            k: 1,
            dim: 0,
            rows,
        }
    }

    #[test]
    fn tick_matrix_examples() {
        let t1 = tick_matrix(1).unwrap();
        assert_eq!(t1.column(0), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(t1.column(1), [1.0; 4]);
        let t2 = tick_matrix(2).unwrap();
        assert_eq!(t2.row(0), &[0.0, 0.125, 1.0]);
        assert_eq!(t2.row(1), &[0.0, 0.25, 1.0]);
        assert_eq!(t2.row(2), &[0.0, 0.5, 1.0]);
        assert_eq!(t2.row(3), &[1.0, 1.0, 1.0]);
        let t10 = tick_matrix(10).unwrap();
        assert_eq!(t10.cols(), 11);
        assert_eq!(t10.column(10), [1.0; 4]);
        assert!(t10.row(3).iter().all(|&x| x == 1.0));
        assert!(matches!(tick_matrix(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn eval_examples() {
        let t = tick_matrix(2).unwrap();
        let vm = eval_segment_batch(&plane(vec![[0.0, 0.0, 0.0, 5.0]]), &t).unwrap();
        assert_eq!(vm.row(0), &[5.0, 5.0, 5.0]);
        let vm = eval_segment_batch(&plane(vec![[-1.0, 0.0, 2.0, 0.0]]), &t).unwrap();
        assert_eq!(vm.row(0), &[0.0, 0.875, 1.0]);
        assert!(matches!(
            eval_segment_batch(&plane(vec![]), &t),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn eval_matches_horner_and_counts_flops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<[f64; 4]> = (0..8)
            .map(|_| [0; 4].map(|_| rng.gen_range(-5.0..5.0)))
            .collect();
        let t = tick_matrix(7).unwrap();
        let mut flops = 0;
        let vm = eval_rows_counted(&rows, &t, &mut flops).unwrap();
        assert_eq!(flops, 8 * 8 * 8);
        for (i, r) in rows.iter().enumerate() {
            for j in 0..=7 {
                let expect = horner(*r, j as f64 / 7.0);
                assert!((vm.get(i, j) - expect).abs() <= 1e-12);
            }
            assert_eq!(vm.get(i, 0), r[3]);
        }
    }

    fn line_flow(n_groups: usize) -> Flow {
        generate_flow(&FlowField::uniform(2.0), 3, 3 * n_groups + 1, 0.5).unwrap()
    }

    #[test]
    fn snapshot_lengths() {
        let set = fit_flow(&line_flow(2), &FitOptions::default()).unwrap();
        let snap = assemble_snapshot(&set, 10).unwrap();
        assert_eq!(snap.points_per_trajectory(), 61);
        assert_eq!(snap.points().len(), 3 * 61);
    }

    #[test]
    fn single_group_v1_hits_data_endpoints() {
        let pts = vec![vec![
            [0.0, 0.0, 0.0],
            [1.0, 2.0, 0.0],
            [3.0, -1.0, 0.0],
            [4.0, 0.5, 0.0],
        ]];
        let flow = Flow::new(pts.clone(), 2, None).unwrap();
        let set = fit_flow(&flow, &FitOptions::default()).unwrap();
        let snap = assemble_snapshot(&set, 1).unwrap();
        let traj = snap.trajectory(0);
        assert_eq!(traj.len(), 4);
        assert_eq!(traj[0], pts[0][0]);
        // a + b + c + d rounds, so the group end is only ulp-close.
        for d in 0..2 {
            assert!((traj[3][d] - pts[0][3][d]).abs() <= 1e-12 * 4.0);
        }
        let g =
            crate::flow_model::GroupOfFour::new([pts[0][0], pts[0][1], pts[0][2], pts[0][3]], 0);
        for (j, p) in traj.iter().enumerate().take(3).skip(1) {
            let b = g.bezier_at(j as f64 / 3.0);
            for d in 0..2 {
                let expect = 0.5 * b[d] + 0.5 * pts[0][j][d];
                assert!((p[d] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_flow_snapshot_is_constant() {
        let c = [2.5, -1.25, 0.0];
        let flow = Flow::new(vec![vec![c; 7]; 2], 2, None).unwrap();
        let set = fit_flow(&flow, &FitOptions::default()).unwrap();
        let snap = assemble_snapshot(&set, 5).unwrap();
        assert!(snap.points().iter().all(|p| *p == c));
    }

    #[test]
    fn missing_v_rejected() {
        let set = fit_flow(&line_flow(1), &FitOptions::default()).unwrap();
        assert!(assemble_snapshot(&set, 0).is_err());
    }
}
