//! Whole-flow fitting: one batched product per (group, segment, dimension).

use crate::batch_sparse::{assemble_b, assemble_g, batched_coeffs_counted, CoeffPlane, GStorage};
use crate::error::{Error, Result};
use crate::flow_model::{group_points, Flow, GroupOfFour, GroupingMode};
use crate::spline_kernel::{reparam_bezier, BlendParams, FifthElement};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub convention: FifthElement,
    pub blend: BlendParams,
    /// Export the unblended spline `u` instead of `v = alpha·b + beta·u`.
    pub raw: bool,
    pub storage: GStorage,
    pub grouping: GroupingMode,
}

/// Every coefficient plane of a flow: `3N · dims` planes of `M × 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSet {
    m: usize,
    n_groups: usize,
    dims: u8,
    pub convention: FifthElement,
    pub blend: BlendParams,
    pub raw: bool,
    planes: Vec<CoeffPlane>,
}

impl CoeffSet {
    /// Build from planes in any order. Fails with an incomplete-input error
    /// if any (group, segment, dimension) plane is missing.
    pub fn from_planes(
        m: usize,
        n_groups: usize,
        dims: u8,
        convention: FifthElement,
        blend: BlendParams,
        raw: bool,
        planes: Vec<CoeffPlane>,
    ) -> Result<Self> {
        if m == 0 || n_groups == 0 {
            return Err(Error::invalid("coefficient set needs M >= 1 and N >= 1"));
        }
        if dims != 2 && dims != 3 {
            return Err(Error::invalid(format!("dims must be 2 or 3, got {dims}")));
        }
        let total = 3 * n_groups * dims as usize;
        let mut slots: Vec<Option<CoeffPlane>> = vec![None; total];
        for plane in planes {
            if plane.group_index >= n_groups
                || !(1..=3).contains(&plane.k)
                || plane.dim >= dims as usize
            {
                return Err(Error::shape(format!(
                    "plane (group {}, segment {}, dim {}) outside N={n_groups}, dims={dims}",
                    plane.group_index, plane.k, plane.dim
                )));
            }
            if plane.m() != m {
                return Err(Error::shape(format!(
                    "plane (group {}, segment {}, dim {}) has {} rows, expected {m}",
                    plane.group_index,
                    plane.k,
                    plane.dim,
                    plane.m()
                )));
            }
            let idx = Self::index(dims, plane.group_index, plane.k, plane.dim);
            slots[idx] = Some(plane);
        }
        let mut out = Vec::with_capacity(total);
        for (idx, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(p) => out.push(p),
                None => {
                    let d = idx % dims as usize;
                    let k = (idx / dims as usize) % 3 + 1;
                    let g = idx / (3 * dims as usize);
                    return Err(Error::IncompleteInput(format!(
                        "missing coefficient plane (group {g}, segment {k}, dim {d})"
                    )));
                }
            }
        }
        Ok(CoeffSet {
            m,
            n_groups,
            dims,
            convention,
            blend,
            raw,
            planes: out,
        })
    }

    fn index(dims: u8, g: usize, k: u8, d: usize) -> usize {
        (g * 3 + (k as usize - 1)) * dims as usize + d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn dims(&self) -> u8 {
        self.dims
    }

    pub fn plane(&self, g: usize, k: u8, d: usize) -> &CoeffPlane {
        &self.planes[Self::index(self.dims, g, k, d)]
    }

    /// Planes ordered by group, then segment, then dimension.
    pub fn planes(&self) -> &[CoeffPlane] {
        &self.planes
    }

    /// Rows `range` of every plane.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<CoeffSet> {
        if range.start >= range.end || range.end > self.m {
            return Err(Error::invalid(format!(
                "row range {range:?} outside 0..{}",
                self.m
            )));
        }
        let planes = self
            .planes
            .iter()
            .map(|p| CoeffPlane {
                rows: p.rows[range.clone()].to_vec(),
                ..*p
            })
            .collect();
        Ok(CoeffSet {
            m: range.len(),
            planes,
            ..*self
        })
    }

    /// Stack row blocks of sets fitted over consecutive trajectory shards.
    pub fn concat(parts: Vec<CoeffSet>) -> Result<CoeffSet> {
        let mut iter = parts.into_iter();
        let mut acc = iter
            .next()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        for part in iter {
            if part.n_groups != acc.n_groups || part.dims != acc.dims {
                return Err(Error::shape("coefficient shards disagree on N or dims"));
            }
            acc.m += part.m;
            for (dst, src) in acc.planes.iter_mut().zip(part.planes) {
                dst.rows.extend(src.rows);
            }
        }
        Ok(acc)
    }
}

pub fn group_flow(flow: &Flow, mode: GroupingMode) -> Result<Vec<Vec<GroupOfFour>>> {
    flow.trajectories()
        .iter()
        .map(|t| group_points(t, mode))
        .collect()
}

pub fn fit_flow(flow: &Flow, opts: &FitOptions) -> Result<CoeffSet> {
    let mut flops = 0;
    fit_flow_counted(flow, opts, &mut flops)
}

/// Fit every segment of every trajectory. `flops` accumulates the
/// instrumented count of the `G·b` products only.
pub fn fit_flow_counted(flow: &Flow, opts: &FitOptions, flops: &mut u64) -> Result<CoeffSet> {
    let groups = group_flow(flow, opts.grouping)?;
    fit_groups_counted(&groups, flow.dims(), opts, flops)
}

pub fn fit_groups_counted(
    groups: &[Vec<GroupOfFour>],
    dims: u8,
    opts: &FitOptions,
    flops: &mut u64,
) -> Result<CoeffSet> {
    let m = groups.len();
    let n = groups.first().map_or(0, Vec::len);
    let g = assemble_g(m, opts.storage)?;
    let mut planes = Vec::with_capacity(3 * n * dims as usize);
    for gi in 0..n {
        for k in 1..=3u8 {
            for b in assemble_b(groups, gi, k, opts.convention, dims as usize)? {
                let mut plane = batched_coeffs_counted(&g, &b, flops)?;
                if !opts.raw {
                    for (row, traj) in plane.rows.iter_mut().zip(groups) {
                        let bez = reparam_bezier(traj[gi].bezier[b.dim], k);
                        *row = opts.blend.combine(bez, *row);
                    }
                }
                planes.push(plane);
            }
        }
    }
    CoeffSet::from_planes(m, n, dims, opts.convention, opts.blend, opts.raw, planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_model::{generate_flow, FlowField};
    use crate::spline_kernel::{blend, segment_coeffs};

    fn vortex_flow(m: usize, s: usize) -> Flow {
        let mut f = FlowField::vortex(2.0, 3.0);
        f.jitter = 0.2;
        f.seed = 11;
        generate_flow(&f, m, s, 0.4).unwrap()
    }

    #[test]
    fn fit_matches_scalar_kernels() {
        let flow = vortex_flow(5, 10);
        let opts = FitOptions::default();
        let set = fit_flow(&flow, &opts).unwrap();
        assert_eq!(set.planes().len(), 3 * 3 * 2);
        let groups = group_flow(&flow, GroupingMode::Strict).unwrap();
        for (i, traj) in groups.iter().enumerate() {
            for grp in traj {
                for k in 1..=3 {
                    let u = segment_coeffs(grp, k, opts.convention).unwrap();
                    let v = blend(grp, k, &u, &opts.blend).unwrap();
                    for d in 0..2 {
                        assert_eq!(set.plane(grp.group_index, k, d).rows[i], v.coeffs[d]);
                    }
                }
            }
        }
    }

    #[test]
    fn raw_export_skips_blend() {
        let flow = vortex_flow(2, 4);
        let opts = FitOptions {
            raw: true,
            ..FitOptions::default()
        };
        let set = fit_flow(&flow, &opts).unwrap();
        let groups = group_flow(&flow, GroupingMode::Strict).unwrap();
        let u = segment_coeffs(&groups[1][0], 2, opts.convention).unwrap();
        assert_eq!(set.plane(0, 2, 1).rows[1], u.coeffs[1]);
    }

    #[test]
    fn fit_flop_count_is_sparse_actual() {
        let flow = vortex_flow(6, 13);
        let mut flops = 0;
        fit_flow_counted(&flow, &FitOptions::default(), &mut flops).unwrap();
        assert_eq!(flops, 2 * 11 * 6 * 3 * 4 * 2);
    }

    #[test]
    fn missing_plane_is_incomplete() {
        let flow = vortex_flow(2, 7);
        let set = fit_flow(&flow, &FitOptions::default()).unwrap();
        let mut planes = set.planes().to_vec();
        planes.remove(5);
        let err =
            CoeffSet::from_planes(2, 2, 2, set.convention, set.blend, set.raw, planes).unwrap_err();
        assert!(matches!(err, Error::IncompleteInput(_)));
    }

    #[test]
    fn slice_and_concat_round_trip() {
        let flow = vortex_flow(7, 7);
        let set = fit_flow(&flow, &FitOptions::default()).unwrap();
        let parts = vec![
            set.slice_rows(0..3).unwrap(),
            set.slice_rows(3..5).unwrap(),
            set.slice_rows(5..7).unwrap(),
        ];
        assert_eq!(CoeffSet::concat(parts).unwrap(), set);
    }
}
