//! Per-segment cubic coefficients from the constant 4×5 matrix, the Bézier
//! blend, and scalar cubic evaluation.
//!
//! Each group of four samples yields three cubic segments `u_k`, `k = 1..=3`,
//! with `u_k(0) = P_k` and `u_k(1) = P_{k+1}`. The coefficients come from
//!
//! ```text
//! (a, b, c, d) = T · (P_{k+1}, P_k, B, C, e)
//! ```
//!
//! where `B`, `C` (and `A`) are the power-basis coefficients of the group's
//! Bézier curve and `e` is selected by [`FifthElement`]. The rendered curve is
//! `v = α·b_k + β·u_k`, with `b_k(t) = b((k - 1 + t) / 3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_model::GroupOfFour;
use crate::Point;

const T_ENTRIES: [[f64; 5]; 4] = [
    [1.0, -1.0, -3.0, -1.0, -6.0],
    [0.0, 0.0, 1.0, 0.0, 3.0],
    [0.0, 0.0, 2.0, 1.0, 3.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
];

/// The constant coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMatrix {
    entries: [[f64; 5]; 4],
}

impl TMatrix {
    pub fn entries(&self) -> &[[f64; 5]; 4] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.entries.iter().flatten().filter(|v| **v != 0.0).count()
    }

    /// Sum of the four rows.
    pub fn column_sums(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for row in &self.entries {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Dense product with a 5-vector, skipping structural zeros.
    #[inline]
    pub fn apply(&self, x: &[f64; 5]) -> [f64; 4] {
        let mut y = [0.0; 4];
        for (yi, row) in y.iter_mut().zip(&self.entries) {
            for (t, xv) in row.iter().zip(x) {
                if *t != 0.0 {
                    *yi += t * xv;
                }
            }
        }
        y
    }
}

pub fn t_matrix() -> TMatrix {
    TMatrix { entries: T_ENTRIES }
}

/// What multiplies the last column of [`TMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FifthElement {
    /// The literal constant `1`. Constant trajectories acquire spurious
    /// curvature under this convention.
    #[serde(rename = "paper-literal")]
    PaperLiteral,
    /// The Bézier cubic coefficient `A`, which makes `c = 3A + 2B + C` the
    /// Bézier slope at the group end.
    #[default]
    #[serde(rename = "bezier-A")]
    BezierA,
}

impl FifthElement {
    pub fn as_str(&self) -> &'static str {
        match self {
            FifthElement::PaperLiteral => "paper-literal",
            FifthElement::BezierA => "bezier-A",
        }
    }
}

impl std::fmt::Display for FifthElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FifthElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" | "paper_literal" => Ok(FifthElement::PaperLiteral),
            "bezier-A" | "bezier_A" | "bezier-a" => Ok(FifthElement::BezierA),
            other => Err(Error::invalid(format!("unknown convention '{other}'"))),
        }
    }
}

/// Cubic coefficients `(a, b, c, d)` per dimension for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentCoeffs {
    /// Segment index within the group, 1..=3.
    pub k: u8,
    pub coeffs: [[f64; 4]; 3],
}

impl SegmentCoeffs {
    pub fn eval(&self, t: f64) -> Result<Point> {
        eval_cubic(self, t)
    }
}

pub(crate) fn check_segment(k: u8) -> Result<()> {
    if (1..=3).contains(&k) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "segment index must be 1, 2 or 3, got {k}"
        )))
    }
}

/// The 5-vector `(P_{k+1}, P_k, B, C, e)` for one dimension.
#[inline]
pub fn input_tuple(group: &GroupOfFour, k: u8, dim: usize, conv: FifthElement) -> [f64; 5] {
    let k = k as usize;
    let [a, b, c, _] = group.bezier[dim];
    let e = match conv {
        FifthElement::PaperLiteral => 1.0,
        FifthElement::BezierA => a,
    };
    [group.points[k][dim], group.points[k - 1][dim], b, c, e]
}

pub fn segment_coeffs(group: &GroupOfFour, k: u8, conv: FifthElement) -> Result<SegmentCoeffs> {
    check_segment(k)?;
    let t = t_matrix();
    let mut coeffs = [[0.0; 4]; 3];
    for (d, c) in coeffs.iter_mut().enumerate() {
        *c = t.apply(&input_tuple(group, k, d, conv));
    }
    Ok(SegmentCoeffs { k, coeffs })
}

/// Power-basis coefficients in `t` of `b((k - 1 + t) / 3)`.
#[inline]
pub fn reparam_bezier(bezier: [f64; 4], k: u8) -> [f64; 4] {
    let [a, b, c, d] = bezier;
    let s0 = (k - 1) as f64 / 3.0;
    let h = 1.0 / 3.0;
    if k == 1 {
        return [a * h * h * h, b * h * h, c * h, d];
    }
    [
        a * h * h * h,
        (3.0 * a * s0 + b) * h * h,
        ((3.0 * a * s0 + 2.0 * b) * s0 + c) * h,
        ((a * s0 + b) * s0 + c) * s0 + d,
    ]
}

/// The group Bézier restricted to segment `k`, in segment-local parameter.
pub fn bezier_segment(group: &GroupOfFour, k: u8) -> Result<SegmentCoeffs> {
    check_segment(k)?;
    let mut coeffs = [[0.0; 4]; 3];
    for (d, c) in coeffs.iter_mut().enumerate() {
        *c = reparam_bezier(group.bezier[d], k);
    }
    Ok(SegmentCoeffs { k, coeffs })
}

/// Blend weights `v = alpha·b + beta·u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendParams {
    alpha: f64,
    beta: f64,
    unnormalized: bool,
}

impl Default for BlendParams {
    fn default() -> Self {
        BlendParams {
            alpha: 0.5,
            beta: 0.5,
            unnormalized: false,
        }
    }
}

impl BlendParams {
    /// Weights in (0, 1) with `alpha + beta = 1`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::validate_open(alpha, beta)?;
        if (alpha + beta - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "alpha + beta must equal 1 (got {alpha} + {beta}); use an explicit override otherwise"
            )));
        }
        Ok(BlendParams {
            alpha,
            beta,
            unnormalized: false,
        })
    }

    /// Weights in (0, 1) without the unit-sum constraint. The blended curve
    /// then no longer passes through the group boundary samples.
    pub fn unnormalized(alpha: f64, beta: f64) -> Result<Self> {
        Self::validate_open(alpha, beta)?;
        Ok(BlendParams {
            alpha,
            beta,
            unnormalized: true,
        })
    }

    fn validate_open(alpha: f64, beta: f64) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(open(alpha) && open(beta)) {
            return Err(Error::invalid(format!(
                "blend weights must lie strictly inside (0, 1), got alpha={alpha} beta={beta}"
            )));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_unnormalized(&self) -> bool {
        self.unnormalized
    }

    #[inline]
    pub fn combine(&self, bezier: [f64; 4], spline: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.alpha * bezier[i] + self.beta * spline[i];
        }
        out
    }
}

/// Blend segment `k` of the group Bézier with the spline segment `u`.
pub fn blend(
    group: &GroupOfFour,
    k: u8,
    u: &SegmentCoeffs,
    params: &BlendParams,
) -> Result<SegmentCoeffs> {
    check_segment(k)?;
    if u.k != k {
        return Err(Error::invalid(format!(
            "spline segment {} does not match requested segment {k}",
            u.k
        )));
    }
    for d in 0..3 {
        if u.coeffs[d][3] != group.points[k as usize - 1][d] {
            return Err(Error::invalid(format!(
                "spline segment does not start at P_{k} of group {}",
                group.group_index
            )));
        }
    }
    let bez = bezier_segment(group, k)?;
    let coeffs = [0, 1, 2].map(|d| params.combine(bez.coeffs[d], u.coeffs[d]));
    Ok(SegmentCoeffs { k, coeffs })
}

/// `a t³ + b t² + c t + d` in nested form.
#[inline]
pub fn horner(c: [f64; 4], t: f64) -> f64 {
    ((c[0] * t + c[1]) * t + c[2]) * t + c[3]
}

/// `(a, b, c, d) · (t³, t², t, 1)`.
#[inline]
pub fn dot_form(c: [f64; 4], t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    c[0] * t3 + c[1] * t2 + c[2] * t + c[3]
}

pub fn eval_cubic(coeffs: &SegmentCoeffs, t: f64) -> Result<Point> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("cubic parameter {t} outside [0, 1]")));
    }
    let mut out = [0.0; 3];
    for (d, o) in out.iter_mut().enumerate() {
        let c = coeffs.coeffs[d];
        let nested = horner(c, t);
        debug_assert!({
            let scale = c
                .iter()
                .map(|v| v.abs())
                .sum::<f64>()
                .max(f64::MIN_POSITIVE);
            (nested - dot_form(c, t)).abs() <= 1e-14 * scale
        });
        *o = nested;
    }
    Ok(out)
}
