//! Dense double-double matrices and the repeated-squaring kernel behind the
//! exact total-variation engine.
//!
//! Powers of the transition matrix are taken in probability space, where
//! every entry is a probability in `[0, 1]`: stationary masses of these
//! chains span hundreds of orders of magnitude, so similarity-transformed
//! (symmetrized) representations underflow, while probabilities never do —
//! an entry flushed below f64 range is truly negligible against any TV
//! tolerance.
//!
//! The engine works on the transpose `X = P^T` throughout: squaring commutes
//! with transposition, and both the row-times-matrix products of the TV
//! queries and the dot-product matmul kernels then touch contiguous rows.
//! Birth-death chains start tridiagonal, and `X^(2^j)` has bandwidth `2^j`,
//! which the kernel exploits by clamping the inner ranges. Storage is split
//! into `hi`/`lo` planes so the unrolled loops vectorize. Rows of the
//! implied stochastic matrix (columns of `X`) are renormalized after every
//! squaring and the drift audited against [`DRIFT_LIMIT`].

use crate::dd::{quick_two_sum, two_prod, two_sum, Dd};

/// Row-sum drift beyond this indicates precision loss in the ladder.
pub const DRIFT_LIMIT: f64 = 1e-9;

/// Dense square matrix of double-doubles, row-major, split hi/lo planes.
#[derive(Clone)]
pub struct DdMatrix {
    pub s: usize,
    pub hi: Vec<f64>,
    pub lo: Vec<f64>,
}

impl DdMatrix {
    pub fn zeros(s: usize) -> Self {
        DdMatrix { s, hi: vec![0.0; s * s], lo: vec![0.0; s * s] }
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> Dd {
        let idx = i * self.s + j;
        Dd { hi: self.hi[idx], lo: self.lo[idx] }
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: Dd) {
        let idx = i * self.s + j;
        self.hi[idx] = v.hi;
        self.lo[idx] = v.lo;
    }

    pub fn transpose(&self) -> DdMatrix {
        let s = self.s;
        let mut t = DdMatrix::zeros(s);
        for i in 0..s {
            for j in 0..s {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `X v` with band clamping (`X[i][k] = 0` for `|i-k| > band`).
    pub fn mul_vec(&self, v: &[Dd], band: usize) -> Vec<Dd> {
        let s = self.s;
        debug_assert_eq!(v.len(), s);
        let mut out = vec![Dd::ZERO; s];
        for i in 0..s {
            let lo_k = i.saturating_sub(band);
            let hi_k = (i + band + 1).min(s);
            let mut acc = Dd::ZERO;
            for k in lo_k..hi_k {
                acc = acc + self.get(i, k) * v[k];
            }
            out[i] = acc;
        }
        out
    }

}

/// One fused `acc += a*b` over four independent accumulator lanes; the lanes
/// break the add dependency chain so the loop pipelines and vectorizes.
struct Acc4 {
    hi: [f64; 4],
    lo: [f64; 4],
}

impl Acc4 {
    #[inline(always)]
    fn new() -> Self {
        Acc4 { hi: [0.0; 4], lo: [0.0; 4] }
    }

    #[inline(always)]
    fn fma(&mut self, lane: usize, ahi: f64, alo: f64, bhi: f64, blo: f64) {
        // two_prod + cross terms: p = a*b to dd
        let (p1, p2) = two_prod(ahi, bhi);
        let p2 = p2 + f64::mul_add(ahi, blo, alo * bhi);
        // accumulate (all addends nonnegative here, no cancellation)
        let (s1, s2) = two_sum(self.hi[lane], p1);
        let s2 = s2 + (self.lo[lane] + p2);
        let (h, l) = quick_two_sum(s1, s2);
        self.hi[lane] = h;
        self.lo[lane] = l;
    }

    #[inline(always)]
    fn reduce(self) -> Dd {
        let mut acc = Dd::ZERO;
        for lane in 0..4 {
            acc = acc + Dd { hi: self.hi[lane], lo: self.lo[lane] };
        }
        acc
    }
}

/// Dot product of two nonnegative dd vectors over `lo_k..hi_k`.
#[inline]
fn dot_range(
    ahi: &[f64],
    alo: &[f64],
    bhi: &[f64],
    blo: &[f64],
    lo_k: usize,
    hi_k: usize,
) -> Dd {
    let mut acc = Acc4::new();
    let mut k = lo_k;
    while k + 4 <= hi_k {
        acc.fma(0, ahi[k], alo[k], bhi[k], blo[k]);
        acc.fma(1, ahi[k + 1], alo[k + 1], bhi[k + 1], blo[k + 1]);
        acc.fma(2, ahi[k + 2], alo[k + 2], bhi[k + 2], blo[k + 2]);
        acc.fma(3, ahi[k + 3], alo[k + 3], bhi[k + 3], blo[k + 3]);
        k += 4;
    }
    while k < hi_k {
        acc.fma(0, ahi[k], alo[k], bhi[k], blo[k]);
        k += 1;
    }
    acc.reduce()
}

fn square_rows(a: &DdMatrix, at: &DdMatrix, band: usize, i: usize, rhi: &mut [f64], rlo: &mut [f64]) {
    let s = a.s;
    let arow_hi = &a.hi[i * s..(i + 1) * s];
    let arow_lo = &a.lo[i * s..(i + 1) * s];
    let new_band = (2 * band).min(s - 1);
    let j_lo = i.saturating_sub(new_band);
    let j_hi = (i + new_band).min(s - 1);
    for j in j_lo..=j_hi {
        let brow_hi = &at.hi[j * s..(j + 1) * s];
        let brow_lo = &at.lo[j * s..(j + 1) * s];
        // row i of A is supported on [i-band, i+band], column j on [j-band, j+band]
        let lo_k = i.max(j).saturating_sub(band);
        let hi_k = (i.min(j) + band + 1).min(s);
        let v = if lo_k < hi_k {
            dot_range(arow_hi, arow_lo, brow_hi, brow_lo, lo_k, hi_k)
        } else {
            Dd::ZERO
        };
        rhi[j] = v.hi;
        rlo[j] = v.lo;
    }
}

/// `C = A * A` for a banded matrix; returns `C` and its bandwidth
/// `min(2 band, s-1)`. The transpose of `A` is formed internally so both
/// operands are traversed row-wise.
pub fn square_banded(a: &DdMatrix, band: usize) -> (DdMatrix, usize) {
    let s = a.s;
    let band = band.min(s - 1);
    let new_band = (2 * band).min(s - 1);
    let at = a.transpose();
    let mut c = DdMatrix::zeros(s);

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        c.hi
            .par_chunks_mut(s)
            .zip(c.lo.par_chunks_mut(s))
            .enumerate()
            .for_each(|(i, (rhi, rlo))| square_rows(a, &at, band, i, rhi, rlo));
    }
    #[cfg(not(feature = "parallel"))]
    {
        square_rows_seq(a, &at, band, &mut c);
    }
    (c, new_band)
}

/// Always-sequential variant, used by the benches to compare scheduling.
pub fn square_banded_seq(a: &DdMatrix, band: usize) -> (DdMatrix, usize) {
    let s = a.s;
    let band = band.min(s - 1);
    let new_band = (2 * band).min(s - 1);
    let at = a.transpose();
    let mut c = DdMatrix::zeros(s);
    square_rows_seq(a, &at, band, &mut c);
    (c, new_band)
}

fn square_rows_seq(a: &DdMatrix, at: &DdMatrix, band: usize, c: &mut DdMatrix) {
    let s = a.s;
    for (i, (rhi, rlo)) in c.hi.chunks_mut(s).zip(c.lo.chunks_mut(s)).enumerate() {
        square_rows(a, at, band, i, rhi, rlo);
    }
}

/// Normalizes every column of `X = P^T` (a row of `P`) to sum exactly to 1,
/// returning the worst pre-normalization drift `max_j |sum_j - 1|`.
pub fn renormalize_columns(x: &mut DdMatrix) -> f64 {
    let s = x.s;
    let mut drift = 0.0f64;
    for j in 0..s {
        let mut sum = Dd::ZERO;
        for i in 0..s {
            sum = sum + x.get(i, j);
        }
        drift = drift.max((sum - Dd::ONE).abs().to_f64());
        let inv = sum.recip();
        for i in 0..s {
            let v = x.get(i, j) * inv;
            x.set(i, j, v);
        }
    }
    drift
}
