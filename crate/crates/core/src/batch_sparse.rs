//! Block-diagonal batching of the segment coefficient product.
//!
//! `G` is the `4M × 5M` block-diagonal operator with `M` copies of the
//! constant matrix on its diagonal. Stacking the `M` input 5-tuples of one
//! (group, segment, dimension) triple into a single vector gives all `M`
//! coefficient rows with one product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_model::GroupOfFour;
use crate::spline_kernel::{check_segment, input_tuple, t_matrix, FifthElement};

/// Nonzero positions of the constant block, row-major.
const T_PATTERN: [(usize, usize); 11] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (1, 2),
    (1, 4),
    (2, 2),
    (2, 3),
    (2, 4),
    (3, 1),
];

/// Dense storage is refused beyond this many blocks (`M = 1024` is already
/// 160 MiB).
pub const MAX_DENSE_BLOCKS: usize = 1024;

const VALUE_BYTES: u128 = std::mem::size_of::<f64>() as u128;
const COL_INDEX_BYTES: u128 = std::mem::size_of::<u32>() as u128;
const ROW_OFFSET_BYTES: u128 = std::mem::size_of::<u64>() as u128;
const BLOCK_COUNT_BYTES: u128 = std::mem::size_of::<u64>() as u128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GStorage {
    /// The 11 block values stored once and applied blockwise.
    #[default]
    ConstantBlock,
    /// Compressed sparse rows with 32-bit column indices.
    Csr,
    /// Full row-major matrix. Only for small `M`.
    Dense,
}

impl std::str::FromStr for GStorage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant-block" | "constant_block" => Ok(GStorage::ConstantBlock),
            "csr" => Ok(GStorage::Csr),
            "dense" => Ok(GStorage::Dense),
            other => Err(Error::invalid(format!("unknown storage '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    ConstantBlock {
        values: [f64; 11],
    },
    Csr {
        row_ptr: Vec<u64>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    },
    Dense(Vec<f64>),
}

/// The global block-diagonal coefficient operator.
#[derive(Debug, Clone)]
pub struct BlockSparseG {
    blocks: usize,
    repr: Repr,
}

fn block_values() -> [f64; 11] {
    let t = t_matrix();
    T_PATTERN.map(|(r, c)| t.get(r, c))
}

pub fn assemble_g(m: usize, storage: GStorage) -> Result<BlockSparseG> {
    if m == 0 {
        return Err(Error::invalid("G needs at least one block"));
    }
    let values = block_values();
    let repr = match storage {
        GStorage::ConstantBlock => Repr::ConstantBlock { values },
        GStorage::Csr => {
            let ncols = 5 * m;
            if ncols > u32::MAX as usize {
                return Err(Error::invalid(format!(
                    "M={m} exceeds the 32-bit column index range"
                )));
            }
            let nnz = 11 * m;
            let mut row_ptr = Vec::with_capacity(4 * m + 1);
            let mut col_idx = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            row_ptr.push(0u64);
            for block in 0..m {
                for row in 0..4 {
                    for (&(r, c), &v) in T_PATTERN.iter().zip(&values) {
                        if r == row {
                            col_idx.push((5 * block + c) as u32);
                            vals.push(v);
                        }
                    }
                    row_ptr.push(col_idx.len() as u64);
                }
            }
            Repr::Csr {
                row_ptr,
                col_idx,
                values: vals,
            }
        }
        GStorage::Dense => {
            if m > MAX_DENSE_BLOCKS {
                return Err(Error::invalid(format!(
                    "dense G is limited to M <= {MAX_DENSE_BLOCKS}, got {m}"
                )));
            }
            let ncols = 5 * m;
            let mut dense = vec![0.0; 4 * m * ncols];
            for block in 0..m {
                for (&(r, c), &v) in T_PATTERN.iter().zip(&values) {
                    dense[(4 * block + r) * ncols + 5 * block + c] = v;
                }
            }
            Repr::Dense(dense)
        }
    };
    Ok(BlockSparseG { blocks: m, repr })
}

impl BlockSparseG {
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn storage(&self) -> GStorage {
        match self.repr {
            Repr::ConstantBlock { .. } => GStorage::ConstantBlock,
            Repr::Csr { .. } => GStorage::Csr,
            Repr::Dense(_) => GStorage::Dense,
        }
    }

    /// `(rows, cols) = (4M, 5M)`.
    pub fn shape(&self) -> (usize, usize) {
        (4 * self.blocks, 5 * self.blocks)
    }

    pub fn nnz(&self) -> usize {
        11 * self.blocks
    }

    pub fn density(&self) -> f64 {
        let (r, c) = self.shape();
        self.nnz() as f64 / (r as f64 * c as f64)
    }

    /// Density as the exact fraction `nnz / (rows·cols)`.
    pub fn density_fraction(&self) -> (u128, u128) {
        let (r, c) = self.shape();
        (self.nnz() as u128, r as u128 * c as u128)
    }

    /// `nnz / (rows·cols) < 1 / M`, decided in integer arithmetic.
    pub fn density_below_inverse_m(&self) -> bool {
        let (num, den) = self.density_fraction();
        num * (self.blocks as u128) < den
    }

    /// Entry `(row, col)` of the logical matrix.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (rows, cols) = self.shape();
        assert!(
            row < rows && col < cols,
            "index ({row}, {col}) out of bounds"
        );
        match &self.repr {
            Repr::ConstantBlock { values } => {
                if row / 4 != col / 5 {
                    return 0.0;
                }
                let (r, c) = (row % 4, col % 5);
                T_PATTERN
                    .iter()
                    .position(|&p| p == (r, c))
                    .map_or(0.0, |i| values[i])
            }
            Repr::Csr {
                row_ptr,
                col_idx,
                values,
            } => {
                let span = row_ptr[row] as usize..row_ptr[row + 1] as usize;
                col_idx[span.clone()]
                    .iter()
                    .position(|&j| j as usize == col)
                    .map_or(0.0, |i| values[span.start + i])
            }
            Repr::Dense(d) => d[row * cols + col],
        }
    }

    /// Bytes held by this instance's storage.
    pub fn stored_bytes(&self) -> u128 {
        let report = memory_report(self.blocks);
        match self.storage() {
            GStorage::ConstantBlock => report.constant_block_bytes,
            GStorage::Csr => report.csr_bytes,
            GStorage::Dense => report.dense_bytes,
        }
    }

    /// `y = G x`. Adds the executed flop count (two per multiply-add) to
    /// `flops`.
    pub fn apply(&self, x: &[f64], y: &mut [f64], flops: &mut u64) -> Result<()> {
        let (rows, cols) = self.shape();
        if x.len() != cols || y.len() != rows {
            return Err(Error::shape(format!(
                "G is {rows}x{cols} but got x of length {} and y of length {}",
                x.len(),
                y.len()
            )));
        }
        match &self.repr {
            Repr::ConstantBlock { values } => {
                for (xb, yb) in x.chunks_exact(5).zip(y.chunks_exact_mut(4)) {
                    yb.fill(0.0);
                    for (&(r, c), &v) in T_PATTERN.iter().zip(values) {
                        yb[r] += v * xb[c];
                    }
                }
                *flops += 2 * T_PATTERN.len() as u64 * self.blocks as u64;
            }
            Repr::Csr {
                row_ptr,
                col_idx,
                values,
            } => {
                for (row, yi) in y.iter_mut().enumerate() {
                    let span = row_ptr[row] as usize..row_ptr[row + 1] as usize;
                    let mut acc = 0.0;
                    for (&j, &v) in col_idx[span.clone()].iter().zip(&values[span.clone()]) {
                        acc += v * x[j as usize];
                    }
                    *yi = acc;
                    *flops += 2 * span.len() as u64;
                }
            }
            Repr::Dense(d) => {
                for (row, yi) in y.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (&g, &xv) in d[row * cols..(row + 1) * cols].iter().zip(x) {
                        acc += g * xv;
                    }
                    *yi = acc;
                }
                *flops += 2 * rows as u64 * cols as u64;
            }
        }
        Ok(())
    }
}

/// Storage cost of `G` for `M` blocks, in bytes, per representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryReport {
    pub m: usize,
    /// `20 M² × 8`.
    pub dense_bytes: u128,
    /// `nnz × (8 + 4) + (4M + 1) × 8`.
    pub csr_bytes: u128,
    /// 11 values plus the block count.
    pub constant_block_bytes: u128,
    pub value_width: u128,
    pub col_index_width: u128,
    pub row_offset_width: u128,
}

pub fn memory_report(m: usize) -> MemoryReport {
    let m128 = m as u128;
    let nnz = 11 * m128;
    MemoryReport {
        m,
        dense_bytes: 20 * m128 * m128 * VALUE_BYTES,
        csr_bytes: nnz * (VALUE_BYTES + COL_INDEX_BYTES) + (4 * m128 + 1) * ROW_OFFSET_BYTES,
        constant_block_bytes: T_PATTERN.len() as u128 * VALUE_BYTES + BLOCK_COUNT_BYTES,
        value_width: VALUE_BYTES,
        col_index_width: COL_INDEX_BYTES,
        row_offset_width: ROW_OFFSET_BYTES,
    }
}

/// `M` consecutive 5-tuples `(P_{k+1}, P_k, B_i, C_i, e_i)` for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedInput {
    pub group_index: usize,
    pub k: u8,
    pub dim: usize,
    pub convention: FifthElement,
    pub values: Vec<f64>,
}

impl StackedInput {
    pub fn blocks(&self) -> usize {
        self.values.len() / 5
    }
}

/// Stack the inputs of group `group_index`, segment `k` over all
/// trajectories; one [`StackedInput`] per dimension in `0..dims`.
pub fn assemble_b(
    groups: &[Vec<GroupOfFour>],
    group_index: usize,
    k: u8,
    conv: FifthElement,
    dims: usize,
) -> Result<Vec<StackedInput>> {
    check_segment(k)?;
    if groups.is_empty() {
        return Err(Error::invalid("no trajectories to stack"));
    }
    if !(1..=3).contains(&dims) {
        return Err(Error::invalid(format!("dims must be 1..=3, got {dims}")));
    }
    let n = groups[0].len();
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() != n) {
        return Err(Error::shape(format!(
            "ragged flow: trajectory {i} has {} groups, trajectory 0 has {n}",
            g.len()
        )));
    }
    if group_index >= n {
        return Err(Error::shape(format!(
            "group {group_index} requested but trajectories have {n} groups"
        )));
    }
    Ok((0..dims)
        .map(|dim| {
            let mut values = Vec::with_capacity(5 * groups.len());
            for traj in groups {
                values.extend_from_slice(&input_tuple(&traj[group_index], k, dim, conv));
            }
            StackedInput {
                group_index,
                k,
                dim,
                convention: conv,
                values,
            }
        })
        .collect())
}

/// `M × 4` cubic coefficients for one (group, segment, dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPlane {
    pub group_index: usize,
    pub k: u8,
    pub dim: usize,
    pub rows: Vec<[f64; 4]>,
}

impl CoeffPlane {
    pub fn m(&self) -> usize {
        self.rows.len()
    }
}

pub fn batched_coeffs(g: &BlockSparseG, b: &StackedInput) -> Result<CoeffPlane> {
    let mut flops = 0;
    batched_coeffs_counted(g, b, &mut flops)
}

pub fn batched_coeffs_counted(
    g: &BlockSparseG,
    b: &StackedInput,
    flops: &mut u64,
) -> Result<CoeffPlane> {
    if !b.values.len().is_multiple_of(5) || b.blocks() != g.blocks() {
        return Err(Error::shape(format!(
            "G has {} blocks but the stacked input has length {}",
            g.blocks(),
            b.values.len()
        )));
    }
    let mut y = vec![0.0; 4 * g.blocks()];
    g.apply(&b.values, &mut y, flops)?;
    let rows = y
        .chunks_exact(4)
        .map(|c| [c[0], c[1], c[2], c[3]])
        .collect();
    Ok(CoeffPlane {
        group_index: b.group_index,
        k: b.k,
        dim: b.dim,
        rows,
    })
}
