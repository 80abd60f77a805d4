//! Projected chains of the interchange process, built exactly from rational
//! one-step rates, plus the machinery for exact total-variation profiles:
//! repeated squaring in double-double precision, strict first-passage mixing
//! times, spectral gaps by Sturm bisection, and expected hitting times.
//!
//! Every chain here is a birth-death chain on an ordered state list (the
//! two-state single-particle projection, the three-state pair projection, the
//! Bernoulli–Laplace count chain, and the three-state half-symmetrized
//! projection), so the transition structure is stored as exact `up`/`down`
//! rational probabilities and the symmetrized matrix is tridiagonal.

use crate::dd::Dd;
use crate::matrix::{renormalize_columns, square_banded, DdMatrix, DRIFT_LIMIT};
use crate::rational::{ratio, ratio_to_dd, Ratio};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    SingleParticle,
    Pair,
    BernoulliLaplace,
    GPrimeSingleParticle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainMeta {
    pub n: u64,
    pub m: u64,
    /// Edge mass `|E|`; rational because the exclusion count projection runs
    /// at a non-integer mass.
    pub e_mass_num: u128,
    pub e_mass_den: u128,
    pub kind: ChainKind,
}

#[derive(Debug, Error)]
pub enum LumpedError {
    #[error("chain needs {what}, got n={n}, m={m}")]
    BadParams { what: &'static str, n: u64, m: u64 },
    #[error("bracketing cap 2^{cap} exceeded: chain has not mixed below eps={eps}")]
    Unmixed { cap: u32, eps: f64 },
    #[error("row-sum drift {drift:e} exceeded {limit:e} during repeated squaring")]
    PrecisionDrift { drift: f64, limit: f64 },
    #[error("eps={eps} out of range (0, {max})")]
    BadEps { eps: f64, max: f64 },
}

/// A reversible birth-death chain with exact rational one-step probabilities.
#[derive(Clone)]
pub struct LumpedChain {
    pub states: Vec<String>,
    /// `up[i] = P(i -> i+1)`; the last entry is zero.
    up: Vec<Ratio>,
    /// `down[i] = P(i -> i-1)`; the first entry is zero.
    down: Vec<Ratio>,
    pi: Vec<Dd>,
    pub meta: ChainMeta,
}

impl LumpedChain {
    fn from_rates(
        states: Vec<String>,
        up: Vec<Ratio>,
        down: Vec<Ratio>,
        meta: ChainMeta,
    ) -> Self {
        let s = states.len();
        assert_eq!(up.len(), s);
        assert_eq!(down.len(), s);
        for i in 0..s {
            assert!(up[i] + down[i] <= ratio(1, 1), "rates exceed 1 at state {i}");
        }
        // stationary law from the detailed-balance recursion
        let mut pi = vec![Dd::ONE; s];
        for i in 0..s - 1 {
            let r = ratio_to_dd(&up[i]) / ratio_to_dd(&down[i + 1]);
            pi[i + 1] = pi[i] * r;
        }
        let mut total = Dd::ZERO;
        for p in &pi {
            total = total + *p;
        }
        for p in pi.iter_mut() {
            *p = *p / total;
        }
        LumpedChain { states, up, down, pi, meta }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn up_rate(&self, i: usize) -> Ratio {
        self.up[i]
    }

    pub fn down_rate(&self, i: usize) -> Ratio {
        self.down[i]
    }

    /// One-step transition probability as a double-double.
    pub fn p_dd(&self, i: usize, j: usize) -> Dd {
        let s = self.num_states();
        assert!(i < s && j < s);
        if j == i + 1 {
            ratio_to_dd(&self.up[i])
        } else if i == j + 1 {
            ratio_to_dd(&self.down[i])
        } else if i == j {
            ratio_to_dd(&(ratio(1, 1) - self.up[i] - self.down[i]))
        } else {
            Dd::ZERO
        }
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p_dd(i, j).to_f64()
    }

    pub fn pi_dd(&self) -> &[Dd] {
        &self.pi
    }

    pub fn pi(&self) -> Vec<f64> {
        self.pi.iter().map(|p| p.to_f64()).collect()
    }

    /// The transposed transition matrix `X = P^T` in double-double; the
    /// representation the power ladder squares (stationary masses of these
    /// chains underflow any similarity-transformed basis, while transition
    /// probabilities always stay in range).
    pub fn transition_transposed(&self) -> DdMatrix {
        let s = self.num_states();
        let mut m = DdMatrix::zeros(s);
        for i in 0..s {
            for j in i.saturating_sub(1)..(i + 2).min(s) {
                m.set(j, i, self.p_dd(i, j));
            }
        }
        m
    }

    /// Symmetric tridiagonal form of `I - P` as (diag, off-diag) in dd.
    fn laplacian_tridiag(&self) -> (Vec<Dd>, Vec<Dd>) {
        let s = self.num_states();
        let diag: Vec<Dd> = (0..s)
            .map(|i| ratio_to_dd(&(self.up[i] + self.down[i])))
            .collect();
        let off: Vec<Dd> = (0..s - 1)
            .map(|i| (ratio_to_dd(&self.up[i]) * ratio_to_dd(&self.down[i + 1])).sqrt())
            .collect();
        (diag, off)
    }
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

fn meta(n: u64, m: u64, e_mass: Ratio, kind: ChainKind) -> ChainMeta {
    ChainMeta { n, m, e_mass_num: *e_mass.numer(), e_mass_den: *e_mass.denom(), kind }
}

fn e_mass_ratio(meta: &ChainMeta) -> Ratio {
    ratio(meta.e_mass_num, meta.e_mass_den)
}

/// Probability `num / (den_factor * 2 |E|)` as an exact rational.
fn over_2e(e_mass: Ratio, num: u128, den_factor: u128) -> Ratio {
    ratio(num, 2 * den_factor) / e_mass
}

/// Two-state projection following one particle between the cliques:
/// `P(K1->K2) = 1/(2|E|n)`, `P(K2->K1) = 1/(2|E|m)`.
pub fn single_particle_chain(n: u64, m: u64, e_mass: Ratio) -> Result<LumpedChain, LumpedError> {
    if m < 1 || n < 1 {
        return Err(LumpedError::BadParams { what: "n, m >= 1", n, m });
    }
    let up = vec![over_2e(e_mass, 1, n as u128), ratio(0, 1)];
    let down = vec![ratio(0, 1), over_2e(e_mass, 1, m as u128)];
    Ok(LumpedChain::from_rates(
        vec!["K1".into(), "K2".into()],
        up,
        down,
        meta(n, m, e_mass, ChainKind::SingleParticle),
    ))
}

/// Three-state projection of a pair of particles (both in K1 / split / both
/// in K2) with the transition matrix
///
/// ```text
/// 1 - 1/(|E|n)        1/(|E|n)              0
/// (n-1)/(2|E|mn)      1 - (m+n-2)/(2|E|mn)  (m-1)/(2|E|mn)
/// 0                   1/(|E|m)              1 - 1/(|E|m)
/// ```
pub fn pair_chain(n: u64, m: u64, e_mass: Ratio) -> Result<LumpedChain, LumpedError> {
    if n < 2 || m < 2 {
        return Err(LumpedError::BadParams { what: "n, m >= 2", n, m });
    }
    let (nu, mu) = (n as u128, m as u128);
    let up = vec![
        over_2e(e_mass, 2, nu),             // 1/(|E|n)
        over_2e(e_mass, mu - 1, mu * nu),   // (m-1)/(2|E|mn)
        ratio(0, 1),
    ];
    let down = vec![
        ratio(0, 1),
        over_2e(e_mass, nu - 1, mu * nu),   // (n-1)/(2|E|mn)
        over_2e(e_mass, 2, mu),             // 1/(|E|m)
    ];
    Ok(LumpedChain::from_rates(
        vec!["both-K1".into(), "split".into(), "both-K2".into()],
        up,
        down,
        meta(n, m, e_mass, ChainKind::Pair),
    ))
}

/// Bernoulli–Laplace birth-death chain on `k in {n-m, ..., n}`, the number of
/// K1-origin particles currently in K1, with
/// `P(k -> k+1) = (n-k)^2 / (2|E|nm)` and
/// `P(k -> k-1) = k(m-n+k) / (2|E|nm)`.
pub fn bernoulli_laplace_chain(n: u64, m: u64, e_mass: Ratio) -> Result<LumpedChain, LumpedError> {
    if m < 1 || m > n {
        return Err(LumpedError::BadParams { what: "1 <= m <= n", n, m });
    }
    let (nu, mu) = (n as u128, m as u128);
    let s = (m + 1) as usize;
    let mut up = Vec::with_capacity(s);
    let mut down = Vec::with_capacity(s);
    let mut states = Vec::with_capacity(s);
    for i in 0..s as u128 {
        let k = nu - mu + i; // actual count
        states.push(format!("k={k}"));
        up.push(over_2e(e_mass, (nu - k) * (nu - k), nu * mu));
        down.push(over_2e(e_mass, k * (mu + k - nu), nu * mu));
    }
    Ok(LumpedChain::from_rates(states, up, down, meta(n, m, e_mass, ChainKind::BernoulliLaplace)))
}

/// Three-state single-particle projection for the half-symmetrized graph:
/// states K1-block, bridge vertex `n+1`, rest of K2, with rates
/// `K1->mid = 1/(2|E|n)`, `mid->K1 = 1/(2|E|)`, `mid->rest = (m-1)/(2|E|)`,
/// `rest->mid = 1/(2|E|)`. Collapses to two states when `m = 1`.
pub fn g_prime_single_particle_chain(
    n: u64,
    m: u64,
    e_mass: Ratio,
) -> Result<LumpedChain, LumpedError> {
    if m < 1 || n < 1 {
        return Err(LumpedError::BadParams { what: "n >= 1, m >= 1", n, m });
    }
    let nu = n as u128;
    let mu = m as u128;
    if m == 1 {
        let up = vec![over_2e(e_mass, 1, nu), ratio(0, 1)];
        let down = vec![ratio(0, 1), over_2e(e_mass, 1, 1)];
        return Ok(LumpedChain::from_rates(
            vec!["K1".into(), format!("v{}", n + 1)],
            up,
            down,
            meta(n, m, e_mass, ChainKind::GPrimeSingleParticle),
        ));
    }
    let up = vec![over_2e(e_mass, 1, nu), over_2e(e_mass, mu - 1, 1), ratio(0, 1)];
    let down = vec![ratio(0, 1), over_2e(e_mass, 1, 1), over_2e(e_mass, 1, 1)];
    Ok(LumpedChain::from_rates(
        vec!["K1".into(), format!("v{}", n + 1), "K2-rest".into()],
        up,
        down,
        meta(n, m, e_mass, ChainKind::GPrimeSingleParticle),
    ))
}

/// Count projection of the `k`-particle exclusion process on `K_n`: the
/// number of particles currently on their starting site set, which is the
/// Bernoulli–Laplace chain with urns `(n-k, k)` run at bridge speed
/// `k(n-k) / (2 C(n,2))`, i.e. at edge mass `C(n,2) / (k(n-k))`.
pub fn exclusion_count_chain(n: u64, k: u64) -> Result<LumpedChain, LumpedError> {
    if k < 1 || k >= n {
        return Err(LumpedError::BadParams { what: "1 <= k < n", n, m: k });
    }
    // For k > n/2 track the n-k holes instead; the count chain is identical.
    let k_eff = k.min(n - k);
    let e_mass = ratio(
        crate::rational::choose2(n),
        k_eff as u128 * (n - k_eff) as u128,
    );
    bernoulli_laplace_chain(n - k_eff, k_eff, e_mass)
}

// ---------------------------------------------------------------------------
// Exact TV via repeated squaring
// ---------------------------------------------------------------------------

/// Bracketing cap for [`tmix_exact`]: beyond `2^60` steps the chain is
/// reported unmixed.
pub const TMIX_CAP_BITS: u32 = 60;

/// Ladder of matrix powers `(P^T)^(2^j)` for one chain, answering exact TV
/// queries at arbitrary `t` by binary decomposition. Building level `j`
/// costs one banded squaring; queries are cheap matrix-vector passes.
pub struct TvEvaluator {
    s: usize,
    pi: Vec<Dd>,
    ladder: Vec<DdMatrix>,
    bands: Vec<usize>,
    /// Worst row-sum drift seen across all squarings (audited, must stay
    /// below [`DRIFT_LIMIT`]).
    pub max_drift: f64,
}

impl TvEvaluator {
    pub fn new(chain: &LumpedChain) -> Self {
        let x0 = chain.transition_transposed();
        TvEvaluator {
            s: chain.num_states(),
            pi: chain.pi.clone(),
            ladder: vec![x0],
            bands: vec![1],
            max_drift: 0.0,
        }
    }

    /// Highest available level (can evaluate any `t < 2^(levels)`).
    pub fn levels(&self) -> usize {
        self.ladder.len()
    }

    fn grow_to(&mut self, levels: usize) -> Result<(), LumpedError> {
        while self.ladder.len() < levels {
            let top = self.ladder.last().unwrap();
            let band = *self.bands.last().unwrap();
            let (mut sq, new_band) = square_banded(top, band);
            let drift = renormalize_columns(&mut sq);
            self.max_drift = self.max_drift.max(drift);
            if drift > DRIFT_LIMIT {
                return Err(LumpedError::PrecisionDrift { drift, limit: DRIFT_LIMIT });
            }
            self.ladder.push(sq);
            self.bands.push(new_band);
        }
        Ok(())
    }

    /// Distribution after `t` steps from `start`, as a dd column vector.
    fn row_at(&mut self, start: usize, t: u64) -> Result<Vec<Dd>, LumpedError> {
        let bits_needed = 64 - t.leading_zeros() as usize;
        self.grow_to(bits_needed.max(1))?;
        let mut v = vec![Dd::ZERO; self.s];
        v[start] = Dd::ONE;
        for j in 0..bits_needed {
            if (t >> j) & 1 == 1 {
                v = self.ladder[j].mul_vec(&v, self.bands[j]);
            }
        }
        Ok(v)
    }

    fn unit_row(&self, start: usize) -> Vec<Dd> {
        let mut v = vec![Dd::ZERO; self.s];
        v[start] = Dd::ONE;
        v
    }

    /// Applies `(P^T)^(2^j)` to a distribution vector.
    fn apply_level(&mut self, v: &[Dd], j: usize) -> Result<Vec<Dd>, LumpedError> {
        self.grow_to(j + 1)?;
        Ok(self.ladder[j].mul_vec(v, self.bands[j]))
    }

    /// TV of a distribution vector against stationarity.
    fn tv_of_row(&self, _start: usize, v: &[Dd]) -> f64 {
        let mut acc = Dd::ZERO;
        for y in 0..self.s {
            acc = acc + (v[y] - self.pi[y]).abs();
        }
        (acc.mul_f64(0.5)).to_f64().clamp(0.0, 1.0)
    }

    /// Exact `|| P^t(start, .) - pi ||_TV`.
    pub fn tv(&mut self, start: usize, t: u64) -> Result<f64, LumpedError> {
        if t == 0 {
            return Ok((Dd::ONE - self.pi[start]).to_f64());
        }
        let v = self.row_at(start, t)?;
        Ok(self.tv_of_row(start, &v))
    }

    /// The full distribution row `P^t(start, .)` as f64s.
    pub fn row(&mut self, start: usize, t: u64) -> Result<Vec<f64>, LumpedError> {
        if t == 0 {
            let mut r = vec![0.0; self.s];
            r[start] = 1.0;
            return Ok(r);
        }
        let v = self.row_at(start, t)?;
        Ok(v.iter().map(|x| x.to_f64()).collect())
    }
}

/// Exact TV at a single time; `O(s^3 log t)` via repeated squaring.
pub fn matrix_power_tv(chain: &LumpedChain, start: usize, t: u64) -> Result<f64, LumpedError> {
    TvEvaluator::new(chain).tv(start, t)
}

/// Smallest `t` with `TV(start, t) <= eps` (strict first passage, valid
/// because TV from a fixed start is non-increasing in `t`). Uses exponential
/// bracketing then binary search on the shared power ladder.
pub fn tmix_exact(chain: &LumpedChain, start: usize, eps: f64) -> Result<u64, LumpedError> {
    let mut ev = TvEvaluator::new(chain);
    tmix_exact_with(&mut ev, start, eps)
}

/// Same as [`tmix_exact`] but reusing a ladder across calls (multiple eps or
/// starts on one chain).
pub fn tmix_exact_with(
    ev: &mut TvEvaluator,
    start: usize,
    eps: f64,
) -> Result<u64, LumpedError> {
    tmix_exact_capped(ev, start, eps, TMIX_CAP_BITS)
}

/// First-passage mixing time with an explicit bracketing cap (in bits).
///
/// After exponential bracketing finds the first power of two at or below
/// `eps`, the exact first passage is located by fixing the bits of the
/// largest not-yet-mixed time from the top down; each bit costs a single
/// vector pass against one ladder level (TV from a fixed start is
/// non-increasing, so "still above eps" is downward closed).
pub fn tmix_exact_capped(
    ev: &mut TvEvaluator,
    start: usize,
    eps: f64,
    cap_bits: u32,
) -> Result<u64, LumpedError> {
    assert!(cap_bits <= 63);
    if !(0.0..1.0).contains(&eps) || eps <= 0.0 {
        return Err(LumpedError::BadEps { eps, max: 1.0 });
    }
    if ev.tv(start, 0)? <= eps {
        return Ok(0);
    }
    // bracket: each probe at t = 2^j is one pass with ladder level j
    let mut bracket = None;
    for j in 0..=cap_bits {
        let unit = ev.unit_row(start);
        let row = ev.apply_level(&unit, j as usize)?;
        if ev.tv_of_row(start, &row) <= eps {
            bracket = Some(j);
            break;
        }
    }
    let j = match bracket {
        None => return Err(LumpedError::Unmixed { cap: cap_bits, eps }),
        Some(0) => return Ok(1),
        Some(j) => j,
    };
    // descend: maintain the largest t known to satisfy tv(t) > eps and its row
    let mut t_base = 1u64 << (j - 1);
    if j >= 2 {
        let unit = ev.unit_row(start);
        let mut row = ev.apply_level(&unit, (j - 1) as usize)?;
        for jj in (0..=(j - 2)).rev() {
            let cand = ev.apply_level(&row, jj as usize)?;
            if ev.tv_of_row(start, &cand) > eps {
                row = cand;
                t_base += 1u64 << jj;
            }
        }
    }
    Ok(t_base + 1)
}

// ---------------------------------------------------------------------------
// Spectral gap and hitting times
// ---------------------------------------------------------------------------

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` strictly
/// below `x`, by Sturm sequence.
fn sturm_count(diag: &[Dd], off: &[Dd], x: Dd) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d.is_sign_negative() {
        count += 1;
    }
    for i in 1..diag.len() {
        let mut prev = d;
        if prev.hi == 0.0 && prev.lo == 0.0 {
            prev = Dd::from_f64(1e-300);
        }
        d = diag[i] - x - (off[i - 1] * off[i - 1]) / prev;
        if d.is_sign_negative() {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-indexed) of the symmetric tridiagonal
/// `I - P`, by bisection to double-double resolution.
fn laplacian_eigenvalue(chain: &LumpedChain, k: usize) -> Dd {
    let (diag, off) = chain.laplacian_tridiag();
    let mut lo = Dd::from_f64(-1e-25);
    let mut hi = Dd::from_f64(2.0);
    // eigenvalue_k < x  iff  count(x) >= k+1
    for _ in 0..220 {
        let mid = (lo + hi).mul_f64(0.5);
        if sturm_count(&diag, &off, mid) >= k + 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs().to_f64() < 1e-40 {
            break;
        }
    }
    (lo + hi).mul_f64(0.5)
}

/// All eigenvalues of `I - P`, ascending (the first is 0 up to rounding).
pub fn laplacian_spectrum(chain: &LumpedChain) -> Vec<Dd> {
    (0..chain.num_states()).map(|k| laplacian_eigenvalue(chain, k)).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralGap {
    /// `1 - lambda_2` from the numeric (Sturm bisection) eigensolve.
    pub gap: f64,
    /// Closed-form value when the family has one (2- and 3-state chains).
    pub closed_form: Option<f64>,
}

/// Spectral gap `1 - lambda_2` via the symmetrized eigensolve, with the
/// closed form attached for the families that have one.
pub fn spectral_gap(chain: &LumpedChain) -> SpectralGap {
    let gap = laplacian_eigenvalue(chain, 1).to_f64();
    let e = e_mass_ratio(&chain.meta);
    let (n, m) = (chain.meta.n as u128, chain.meta.m as u128);
    let closed_form = match chain.meta.kind {
        ChainKind::SingleParticle | ChainKind::BernoulliLaplace => {
            // (n+m) / (2|E|nm); for Bernoulli-Laplace this is the smallest
            // nonzero Laplacian eigenvalue as well.
            Some(ratio_to_dd(&(ratio(n + m, 2 * n * m) / e)).to_f64())
        }
        ChainKind::Pair => Some(ratio_to_dd(&(ratio(n + m, 2 * n * m) / e)).to_f64()),
        ChainKind::GPrimeSingleParticle => None,
    };
    SpectralGap { gap, closed_form }
}

/// Expected hitting time of `target` from `start`, by the exact tridiagonal
/// linear solve (Thomas algorithm in double-double).
pub fn expected_hitting_time(chain: &LumpedChain, start: usize, target: usize) -> f64 {
    if start == target {
        return 0.0;
    }
    let s = chain.num_states();
    // transient states: all but target; solve (up+down) h_i - up h_{i+1} - down h_{i-1} = 1
    // with h_target = 0 and reflecting boundaries elsewhere.
    let idx: Vec<usize> = (0..s).filter(|&i| i != target).collect();
    let n_t = idx.len();
    let mut a = vec![Dd::ZERO; n_t]; // sub-diagonal
    let mut b = vec![Dd::ZERO; n_t]; // diagonal
    let mut c = vec![Dd::ZERO; n_t]; // super-diagonal
    let mut rhs = vec![Dd::ONE; n_t];
    for (row, &i) in idx.iter().enumerate() {
        let up = ratio_to_dd(&chain.up[i]);
        let down = ratio_to_dd(&chain.down[i]);
        b[row] = up + down;
        // neighbor i+1 if transient and within range
        if i + 1 < s && i + 1 != target {
            c[row] = -up;
        }
        if i > 0 && i - 1 != target {
            a[row] = -down;
        }
    }
    // Thomas sweep
    for row in 1..n_t {
        let w = a[row] / b[row - 1];
        b[row] = b[row] - w * c[row - 1];
        rhs[row] = rhs[row] - w * rhs[row - 1];
    }
    let mut h = vec![Dd::ZERO; n_t];
    h[n_t - 1] = rhs[n_t - 1] / b[n_t - 1];
    for row in (0..n_t - 1).rev() {
        h[row] = (rhs[row] - c[row] * h[row + 1]) / b[row];
    }
    let pos = idx.iter().position(|&i| i == start).unwrap();
    h[pos].to_f64()
}
