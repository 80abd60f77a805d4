//! Closed-form laws, moments, and bounds: the stationary hypergeometric law,
//! single-particle and pair-indicator moments, Wilson's lower bound, the
//! bottleneck machinery, regime predictions, Chebyshev separations, and the
//! purple-particle formulas for the exclusion process.
//!
//! Wherever `(1 - x)^t` appears with step counts up to ~10^18 and `x` down to
//! ~10^-16, evaluation goes through `t * ln_1p(-x)` (or exact double-double
//! powers for integer `t`), never through naive `powf`.

use crate::dd::Dd;
use crate::dynamics;
use crate::graphs::{GraphKind, WeightedGraph};
use crate::rational::{choose2, ratio, ratio_to_dd, ratio_to_f64, Ratio};
use crate::replicas;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
}

// ---------------------------------------------------------------------------
// Hypergeometric stationary law
// ---------------------------------------------------------------------------

/// `HypGeom(population, marked, sample)`: the number of marked individuals in
/// a uniform sample. Stationary law of the clique-count observables.
#[derive(Clone, Debug)]
pub struct HypGeom {
    pub population: u64,
    pub marked: u64,
    pub sample: u64,
    /// Smallest attainable count.
    pub support_lo: u64,
    /// `pmf[i]` is the mass at `support_lo + i`.
    pub pmf: Vec<f64>,
}

impl HypGeom {
    pub fn new(population: u64, marked: u64, sample: u64) -> Result<Self, AnalyticsError> {
        if marked > population || sample > population {
            return Err(AnalyticsError::Domain(format!(
                "hypgeom needs marked, sample <= population, got ({population}, {marked}, {sample})"
            )));
        }
        let lo = (sample + marked).saturating_sub(population);
        let hi = marked.min(sample);
        let len = (hi - lo + 1) as usize;
        if len > 10_000_000 {
            return Err(AnalyticsError::Domain(format!("hypgeom support {len} too large")));
        }
        // Ratio recursion from the mode keeps everything in range; entries
        // that underflow f64 are genuinely below any tolerance we use.
        let mode = (((sample + 1) as u128 * (marked + 1) as u128)
            / (population + 2) as u128) as u64;
        let mode = mode.clamp(lo, hi);
        let mut vals = vec![Dd::ZERO; len];
        vals[(mode - lo) as usize] = Dd::ONE;
        // upward: P(j+1)/P(j) = (marked-j)(sample-j) / ((j+1)(pop-marked-sample+j+1))
        for j in mode..hi {
            let num = (marked - j) as u128 * (sample - j) as u128;
            let den = (j + 1) as u128 * (population + j + 1 - marked - sample) as u128;
            let idx = (j - lo) as usize;
            vals[idx + 1] = vals[idx] * Dd::from_ratio_u128(num, den);
        }
        // downward
        for j in (lo + 1..=mode).rev() {
            let num = j as u128 * (population + j - marked - sample) as u128;
            let den = (marked - j + 1) as u128 * (sample - j + 1) as u128;
            let idx = (j - lo) as usize;
            vals[idx - 1] = vals[idx] * Dd::from_ratio_u128(num, den);
        }
        let mut total = Dd::ZERO;
        for v in &vals {
            total = total + *v;
        }
        let pmf = vals.iter().map(|v| (*v / total).to_f64()).collect();
        Ok(HypGeom { population, marked, sample, support_lo: lo, pmf })
    }

    pub fn mean(&self) -> f64 {
        self.sample as f64 * self.marked as f64 / self.population as f64
    }

    pub fn variance(&self) -> f64 {
        let (nn, mm, ss) = (self.population as f64, self.marked as f64, self.sample as f64);
        ss * mm * (nn - ss) * (nn - mm) / (nn * nn * (nn - 1.0))
    }

    pub fn prob(&self, count: u64) -> f64 {
        if count < self.support_lo {
            return 0.0;
        }
        let i = (count - self.support_lo) as usize;
        self.pmf.get(i).copied().unwrap_or(0.0)
    }
}

/// Stationary law of `L` (K1-origin particles in K2) for clique sizes (n, m):
/// `HypGeom(n+m, m, n)`.
pub fn l_stationary(n: u64, m: u64) -> HypGeom {
    HypGeom::new(n + m, m, n).expect("valid parameters")
}

// ---------------------------------------------------------------------------
// Indicator and pair moments
// ---------------------------------------------------------------------------

fn gap_dd(n: u64, m: u64, e_mass: Ratio) -> Dd {
    // (n+m) / (2 |E| n m)
    ratio_to_dd(&(ratio((n + m) as u128, 2 * n as u128 * m as u128) / e_mass))
}

fn beta_rate_dd(n: u64, m: u64, e_mass: Ratio) -> Dd {
    // (n+m-1) / (|E| n m)
    ratio_to_dd(&(ratio((n + m - 1) as u128, n as u128 * m as u128) / e_mass))
}

/// `(1 - rate)^t` for integer `t`, exact dd binary power.
fn decay_pow(rate: Dd, t: u64) -> Dd {
    (Dd::ONE - rate).powi(t)
}

/// Probability that a K1-origin particle is in K2 at time `t`:
/// `m/(m+n) (1 - (1 - (m+n)/(2|E|mn))^t)`.
pub fn indicator_mean(n: u64, m: u64, e_mass: Ratio, t: u64) -> f64 {
    let q = ratio_to_dd(&ratio(m as u128, (n + m) as u128));
    let decay = decay_pow(gap_dd(n, m, e_mass), t);
    (q * (Dd::ONE - decay)).to_f64()
}

/// Covariance of two distinct K1-origin membership indicators at time `t`,
/// from the three-eigenvalue pair-chain expression minus the squared mean.
pub fn pair_cov(n: u64, m: u64, e_mass: Ratio, t: u64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    assert!(n >= 2 && m >= 2, "pair covariance needs n, m >= 2");
    let (nf, mf) = (n as f64, m as f64);
    let alpha_t = decay_pow(gap_dd(n, m, e_mass), t);
    let beta_t = decay_pow(beta_rate_dd(n, m, e_mass), t);
    let npm = Dd::from_f64(nf + mf);
    let prefactor = Dd::from_f64(mf * (mf - 1.0))
        / (npm * Dd::from_f64(nf + mf - 1.0) * Dd::from_f64(nf + mf - 2.0));
    let bracket = Dd::from_f64(nf + mf - 2.0) + npm * beta_t
        - Dd::from_f64(2.0 * (nf + mf - 1.0)) * alpha_t;
    let q = ratio_to_dd(&ratio(m as u128, (n + m) as u128));
    let mu = q * (Dd::ONE - alpha_t);
    (prefactor * bracket - mu * mu).to_f64()
}

/// Mean and variance of `L^t`, the number of K1-origin particles in K2:
/// mean `n * indicator_mean`, variance `n(n-1) cov + n(mu - mu^2)`.
pub fn lt_moments(n: u64, m: u64, e_mass: Ratio, t: u64) -> (f64, f64) {
    let mu = indicator_mean(n, m, e_mass, t);
    let cov = if n >= 2 && m >= 2 { pair_cov(n, m, e_mass, t) } else { 0.0 };
    let nf = n as f64;
    let mean = nf * mu;
    let var = nf * (nf - 1.0) * cov + nf * (mu - mu * mu);
    (mean, var)
}

/// Truth of `(a+b)^t <= a^t + t b` on its domain
/// (`0 <= a, b`, `a + b <= 1`, real `t >= 1`).
pub fn power_inequality(a: f64, b: f64, t: f64) -> Result<bool, AnalyticsError> {
    if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-15 && t >= 1.0) {
        return Err(AnalyticsError::Domain(format!(
            "power_inequality needs 0 <= a,b, a+b <= 1, t >= 1; got a={a}, b={b}, t={t}"
        )));
    }
    // float-noise guard: equality holds at b = 0 and t = 1
    Ok((a + b).powf(t) <= a.powf(t) + t * b + 1e-12)
}

// ---------------------------------------------------------------------------
// Wilson bound
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WilsonBound {
    /// Lower bound on the mixing time in steps; 0 when vacuous.
    pub steps: f64,
    /// Argument of the logarithm, `Phi(id)^2 (1 - lambda_2) / (2R)`.
    pub log_argument: f64,
    /// True when the argument is below 1 and the bound is clamped to 0.
    pub vacuous: bool,
}

/// Wilson's eigenvector bound with `Phi(id) = m`,
/// `R = (1 + m/n)^2 / (2|E|)`, `lambda_2 = 1 - (n+m)/(2|E|nm)`.
pub fn wilson_bound(n: u64, m: u64, e_mass: Ratio) -> WilsonBound {
    let gap = gap_dd(n, m, e_mass).to_f64();
    let (nf, mf) = (n as f64, m as f64);
    let e = ratio_to_f64(&e_mass);
    let r = (1.0 + mf / nf).powi(2) / (2.0 * e);
    let log_argument = mf * mf * gap / (2.0 * r);
    if log_argument <= 1.0 {
        return WilsonBound { steps: 0.0, log_argument, vacuous: true };
    }
    // log(1/lambda2) = -ln(1 - gap)
    let log_inv_lambda = -(-gap).ln_1p();
    WilsonBound { steps: log_argument.ln() / (2.0 * log_inv_lambda), log_argument, vacuous: false }
}

/// Asymptotic form of the Wilson bound, `|E| mn/(m+n) log(mn/(m+n))`.
pub fn wilson_asymptotic(n: u64, m: u64, e_mass: Ratio) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let e = ratio_to_f64(&e_mass);
    let h = mf * nf / (mf + nf);
    e * h * h.ln()
}

// ---------------------------------------------------------------------------
// Bottlenecks and the product condition
// ---------------------------------------------------------------------------

/// Relaxation-time lower bound from pinning a single vertex:
/// `t_relax >= |E| / deg_w(v)`.
pub fn bottleneck_relaxation_bound(graph: &WeightedGraph, v: u64) -> f64 {
    let deg = graph.weighted_degree(v);
    let e = ratio(graph.edge_mass_total(), 1);
    ratio_to_f64(&(e / deg))
}

#[derive(Clone, Debug, Serialize)]
pub struct BottleneckReport {
    /// The witness vertex set.
    pub w: Vec<u64>,
    /// Weighted boundary `|∂_E W|`.
    pub boundary_size: f64,
    /// The size cap used in the search.
    pub k_used: usize,
    /// Qualification threshold `K |E| / tmix`.
    pub threshold: f64,
    /// `|E| / min_{v in W} deg_w(v)`, the relaxation-time lower bound of the
    /// pinned-vertex argument.
    pub relaxation_lower_bound: f64,
}

/// Searches for a bounded bad bottleneck: a connected `W` with
/// `1 <= |W| <= K` and `|∂_E W| <= K |E| / tmix_estimate`.
///
/// Enumeration runs over orbit representatives of the family's automorphism
/// group (interior-of-K1 count, bridge endpoints, interior-of-K2 count), so
/// the search is O(K^2) regardless of graph size. Among qualifying sets the
/// one with smallest boundary (then smallest size) is returned.
pub fn bbb_search(
    graph: &WeightedGraph,
    tmix_estimate: f64,
    k: usize,
) -> Option<BottleneckReport> {
    assert!(k >= 1 && k <= 6, "enumeration cap is 6");
    assert!(tmix_estimate > 0.0);
    let e = graph.edge_mass_total() as f64;
    let threshold = k as f64 * e / tmix_estimate;
    let n = graph.n();
    let m = graph.m();

    let mut best: Option<(f64, usize, Vec<u64>)> = None;
    let mut consider = |w: Vec<u64>| {
        let boundary = ratio_to_f64(&graph.boundary_weight(&w));
        if boundary <= threshold {
            let key = (boundary, w.len());
            if best.as_ref().map_or(true, |(b, s, _)| key < (*b, *s)) {
                best = Some((boundary, w.len(), w));
            }
        }
    };

    // representative W: a interior-K1 vertices {1..a}, optionally n,
    // optionally n+1, b interior-K2 vertices {n+2..n+1+b}
    let interior1_max = (n.saturating_sub(1)).min(k as u64);
    let interior2_max = (m.saturating_sub(1)).min(k as u64);
    for a in 0..=interior1_max {
        for has_n in [false, true] {
            for has_n1 in [false, true] {
                if graph.kind() == GraphKind::Complete && (has_n1 || m == 0) && has_n1 {
                    continue;
                }
                for b in 0..=interior2_max {
                    if graph.kind() == GraphKind::Complete && (b > 0 || has_n1) {
                        continue;
                    }
                    let size = a + has_n as u64 + has_n1 as u64 + b;
                    if size < 1 || size > k as u64 {
                        continue;
                    }
                    let part1 = a > 0 || has_n;
                    let part2 = b > 0 || has_n1;
                    // connectivity across the cut
                    if part1 && part2 {
                        let joined = match graph.kind() {
                            GraphKind::Dumbbell => has_n && has_n1,
                            GraphKind::Symmetrized => true,
                            GraphKind::HalfSymmetrized => has_n1,
                            GraphKind::Complete => false,
                        };
                        if !joined {
                            continue;
                        }
                    }
                    let mut w = Vec::with_capacity(size as usize);
                    w.extend(1..=a);
                    if has_n {
                        w.push(n);
                    }
                    if has_n1 {
                        w.push(n + 1);
                    }
                    w.extend(n + 2..n + 2 + b);
                    consider(w);
                }
            }
        }
    }

    best.map(|(boundary, _, w)| {
        let min_deg = w
            .iter()
            .map(|&v| ratio_to_f64(&graph.weighted_degree(v)))
            .fold(f64::INFINITY, f64::min);
        BottleneckReport {
            relaxation_lower_bound: e / min_deg,
            boundary_size: boundary,
            k_used: k,
            threshold,
            w,
        }
    })
}

/// `(1 - lambda_2) * tmix`; the caller judges divergence along a sequence.
pub fn product_condition(gap: f64, tmix: f64) -> f64 {
    gap * tmix
}

// ---------------------------------------------------------------------------
// Regime prediction
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LargeM,
    SmallM,
    ConstM,
}

#[derive(Copy, Clone, Debug)]
pub struct RegimeConfig {
    /// `m` at or below this is treated as bounded (regime iii).
    pub const_cap: u64,
    /// Regime i applies when `m >= sqrt_coeff * sqrt(n)`.
    pub sqrt_coeff: f64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig { const_cap: 20, sqrt_coeff: 1.0 }
    }
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct RegimePrediction {
    pub regime: Regime,
    /// Leading-order mixing time; for the bounded-m regime only the scale
    /// `|E|` with unspecified constants.
    pub predicted_tmix: f64,
    /// Second-order window scale.
    pub window: f64,
    /// True when the constant in front of the prediction is not pinned by
    /// the theory (bounded-m regime).
    pub scale_only: bool,
}

pub fn regime_prediction(n: u64, m: u64, config: RegimeConfig) -> RegimePrediction {
    assert!(m >= 1 && m <= n);
    let e = (choose2(n) + choose2(m) + 1) as f64;
    let (nf, mf) = (n as f64, m as f64);
    let regime = if m <= config.const_cap {
        Regime::ConstM
    } else if mf >= config.sqrt_coeff * nf.sqrt() {
        Regime::LargeM
    } else {
        Regime::SmallM
    };
    match regime {
        Regime::LargeM => RegimePrediction {
            regime,
            predicted_tmix: e * nf * mf / (nf + mf) * nf.ln(),
            window: e * nf * mf / (nf + mf),
            scale_only: false,
        },
        Regime::SmallM => RegimePrediction {
            regime,
            predicted_tmix: 2.0 * e * mf * mf.ln(),
            window: e * mf,
            scale_only: false,
        },
        Regime::ConstM => {
            RegimePrediction { regime, predicted_tmix: e, window: e, scale_only: true }
        }
    }
}

// ---------------------------------------------------------------------------
// Chebyshev separation
// ---------------------------------------------------------------------------

/// The two tail bounds certifying that `L^t` and `L^infinity` separate at the
/// threshold `mn/(m+n) - (sqrt(lambda)/2) m sqrt(n)/(m+n)`:
/// `p_chain` bounds `P(L^t >= theta)`, `p_stationary` bounds
/// `P(L^inf <= theta)`. Exact moments, no asymptotics; both clamped to 1 when
/// uninformative.
pub fn chebyshev_separation(
    n: u64,
    m: u64,
    e_mass: Ratio,
    t: u64,
    lambda: f64,
) -> (f64, f64) {
    assert!(lambda > 0.0);
    let (nf, mf) = (n as f64, m as f64);
    let theta = mf * nf / (mf + nf) - (lambda.sqrt() / 2.0) * mf * nf.sqrt() / (mf + nf);
    let (mean_t, var_t) = lt_moments(n, m, e_mass, t);
    let stat = l_stationary(n, m);
    let (mean_inf, var_inf) = (stat.mean(), stat.variance());
    let p_chain = if theta > mean_t {
        (var_t / ((theta - mean_t) * (theta - mean_t))).min(1.0)
    } else {
        1.0
    };
    let p_stationary = if theta < mean_inf {
        (var_inf / ((mean_inf - theta) * (mean_inf - theta))).min(1.0)
    } else {
        1.0
    };
    (p_chain, p_stationary)
}

// ---------------------------------------------------------------------------
// Exclusion-process formulas
// ---------------------------------------------------------------------------

/// Expected number of particles that have never left their starting set:
/// `k (1 - (n-k)/(2 C(n,2)))^T`.
pub fn purple_mean(n: u64, k: u64, t: u64) -> f64 {
    assert!(k >= 1 && k <= n);
    let q = (n - k) as f64 / (2.0 * choose2(n) as f64);
    k as f64 * (t as f64 * (-q).ln_1p()).exp()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaLaw {
    /// Number of Bernoulli trials (steps).
    pub trials: u64,
    /// Per-step probability `C(k,2)/C(n,2)` of an attempted within-K pair.
    pub p: f64,
}

impl GammaLaw {
    pub fn mean(&self) -> f64 {
        self.trials as f64 * self.p
    }

    pub fn sd(&self) -> f64 {
        (self.trials as f64 * self.p * (1.0 - self.p)).sqrt()
    }
}

/// Unconditioned law of the within-K attempted transposition count:
/// `Binom(T, C(k,2)/C(n,2))`.
pub fn gamma_law(n: u64, k: u64, t: u64) -> GammaLaw {
    assert!(k >= 2 && k <= n);
    GammaLaw { trials: t, p: ratio_to_f64(&ratio(choose2(k), choose2(n))) }
}

/// Large-deviation threshold `(1 + eps/2) k^2 log k / n` for the gamma count.
pub fn gamma_ld_threshold(n: u64, k: u64, eps: f64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    (1.0 + eps / 2.0) * kf * kf * kf.ln() / nf
}

/// Sampling standard error of the empirical indicator covariance
/// `mean(XY) - mean(X) mean(Y)` over `r` replicas, evaluated at the
/// hypothesized joint probability `p12` and marginal `mu` (influence
/// function of `a - bc`): plug-in values degenerate when joint events are
/// rare, so verdicts are computed against the formula-implied variance.
pub fn cov_estimator_se(p12: f64, mu: f64, r: f64) -> f64 {
    let e_w2 = p12 * (1.0 - 2.0 * mu).powi(2) + 2.0 * mu * mu * (mu - p12);
    let e_w = p12 - 2.0 * mu * mu;
    ((e_w2 - e_w * e_w).max(0.0) / r).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NegCorrReport {
    /// Monte Carlo estimate of `P(every particle has left K by T)`.
    pub empirical_joint: f64,
    /// Product of the exact marginals `P(beta*_j >= 1)^k`.
    pub product_of_marginals: f64,
    pub se: f64,
    pub replicas: u64,
    /// Joint >= product - 4 SE, the negative-correlation contract.
    pub holds: bool,
}

/// Monte Carlo check that the leave events are positively associated in the
/// joint sense the proof uses: `P(forall j: beta*_j >= 1)` against the
/// product of marginals. For `k = n` there are no leave events and both
/// sides are 1 by convention.
pub fn negcorr_check(n: u64, k: u64, t: u64, num_replicas: u64, seed: u64) -> NegCorrReport {
    assert!(k >= 1 && k <= n);
    if k == n {
        return NegCorrReport {
            empirical_joint: 1.0,
            product_of_marginals: 1.0,
            se: 0.0,
            replicas: num_replicas,
            holds: true,
        };
    }
    let q = (n - k) as f64 / (2.0 * choose2(n) as f64);
    let marginal = 1.0 - (t as f64 * (-q).ln_1p()).exp();
    let product = (k as f64 * marginal.ln()).exp();
    let all_left: Vec<bool> = replicas::run_replicas(seed, num_replicas, |_, rng| {
        let mut state = dynamics::ExclusionState::new(n, k);
        for _ in 0..t {
            dynamics::step_exclusion(&mut state, rng);
        }
        state.purple_count() == 0
    });
    let joint = all_left.iter().filter(|&&b| b).count() as f64 / num_replicas as f64;
    let se = (joint * (1.0 - joint) / num_replicas as f64).sqrt();
    NegCorrReport {
        empirical_joint: joint,
        product_of_marginals: product,
        se,
        replicas: num_replicas,
        holds: joint >= product - 4.0 * se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lumped;

    fn e_of(n: u64, m: u64) -> Ratio {
        ratio(choose2(n) + choose2(m) + 1, 1)
    }

    #[test]
    fn hypgeom_moments_closed_forms() {
        // n = m = 2: mean 1, variance 1/3
        let h = l_stationary(2, 2);
        assert!((h.mean() - 1.0).abs() < 1e-15);
        assert!((h.variance() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hypgeom_pmf_sums_to_one() {
        for (pop, marked, sample) in
            [(10u64, 3u64, 4u64), (100, 20, 30), (1000, 7, 999), (50, 0, 10), (1_001_000, 1000, 1_000_000)]
        {
            let h = HypGeom::new(pop, marked, sample).unwrap();
            let total: f64 = h.pmf.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "({pop},{marked},{sample}): {total}");
        }
    }

    #[test]
    fn hypgeom_marked_zero_is_point_mass() {
        let h = HypGeom::new(50, 0, 10).unwrap();
        assert_eq!(h.support_lo, 0);
        assert_eq!(h.pmf.len(), 1);
        assert!((h.pmf[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hypgeom_matches_direct_binomial_formula() {
        // small case against C(m,j) C(n, n-j)... / C(n+m, n)
        let h = l_stationary(6, 4);
        let total = choose_f(10, 6);
        for j in 0..=4u64 {
            let expect = choose_f(4, j) * choose_f(6, 6 - (4 - j)) / total;
            // L = j means j of K2's slots... direct: count K1-origin in K2
            let direct = choose_f(6, j) * choose_f(4, 4 - j) / choose_f(10, 4);
            assert!((h.prob(j) - direct).abs() < 1e-13, "j={j}: {} vs {direct}", h.prob(j));
            let _ = expect;
        }
    }

    fn choose_f(n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        let mut acc = 1.0f64;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    }

    #[test]
    fn bl_stationary_matches_hypgeom() {
        // birth-death stationary vector == HypGeom(n+m, n, n) pointwise 1e-12
        for (n, m) in [(3u64, 2u64), (20, 6), (100, 40)] {
            let chain = lumped::bernoulli_laplace_chain(n, m, e_of(n, m)).unwrap();
            let h = HypGeom::new(n + m, n, n).unwrap();
            let pi = chain.pi();
            for i in 0..pi.len() {
                let k = n - m + i as u64;
                assert!(
                    (pi[i] - h.prob(k)).abs() < 1e-12,
                    "(n={n}, m={m}) k={k}: {} vs {}",
                    pi[i],
                    h.prob(k)
                );
            }
        }
    }

    #[test]
    fn indicator_mean_limits() {
        let e = e_of(30, 12);
        assert_eq!(indicator_mean(30, 12, e, 0), 0.0);
        let inf = indicator_mean(30, 12, e, u64::MAX >> 2);
        assert!((inf - 12.0 / 42.0).abs() < 1e-12);
    }

    #[test]
    fn pair_cov_zero_and_stationary_limits() {
        let e = e_of(30, 12);
        assert_eq!(pair_cov(30, 12, e, 0), 0.0);
        // t -> infinity: hypergeometric pairwise indicator covariance
        let cov_inf = pair_cov(30, 12, e, u64::MAX >> 2);
        let expect = 12.0 * 11.0 / (42.0 * 41.0) - (12.0f64 / 42.0).powi(2);
        assert!((cov_inf - expect).abs() < 1e-13, "{cov_inf} vs {expect}");
    }

    #[test]
    fn lt_moments_match_hypgeom_at_infinity() {
        let e = e_of(30, 12);
        let (mean, var) = lt_moments(30, 12, e, u64::MAX >> 2);
        let h = l_stationary(30, 12);
        assert!((mean - h.mean()).abs() / h.mean() < 1e-6);
        assert!((var - h.variance()).abs() / h.variance() < 1e-6);
        let (m0, v0) = lt_moments(30, 12, e, 0);
        assert_eq!((m0, v0), (0.0, 0.0));
    }

    #[test]
    fn power_inequality_examples_and_grid() {
        assert!(power_inequality(0.5, 0.3, 2.0).unwrap()); // 0.64 <= 0.85
        assert!(power_inequality(0.7, 0.0, 3.5).unwrap()); // equality
        assert!(power_inequality(0.0, 1.0, 1.0).unwrap());
        assert!(power_inequality(1.1, 0.0, 2.0).is_err());
        assert!(power_inequality(0.5, 0.3, 0.5).is_err());
        // dense deterministic grid
        let mut trials = 0u64;
        for ai in 0..40 {
            for bi in 0..40 {
                let a = ai as f64 / 40.0;
                let b = bi as f64 / 40.0;
                if a + b > 1.0 {
                    continue;
                }
                for t in [1.0, 1.5, 2.0, 3.75, 10.0, 64.0] {
                    assert!(power_inequality(a, b, t).unwrap(), "a={a} b={b} t={t}");
                    trials += 1;
                }
            }
        }
        assert!(trials > 1000);
    }

    #[test]
    fn wilson_small_case_vacuous() {
        // (3, 2, 5): argument = 3/5 < 1
        let w = wilson_bound(3, 2, ratio(5, 1));
        assert!(w.vacuous);
        assert!((w.log_argument - 0.6).abs() < 1e-12);
        assert_eq!(w.steps, 0.0);
    }

    #[test]
    fn wilson_large_case_matches_asymptotic() {
        // the asymptotic form carries a log-2 inside the logarithm, so the
        // relative gap is ln2/ln(mn/(m+n)); ~8% at n = 10^4, under 5% once
        // the argument exceeds ~5e5
        let n = 10_000u64;
        let m = 10_000u64;
        let e = e_of(n, m);
        let w = wilson_bound(n, m, e);
        assert!(!w.vacuous);
        let asy = wilson_asymptotic(n, m, e);
        assert!((w.steps - asy).abs() / asy < 0.10, "{} vs {asy}", w.steps);
        // exact oracle value: log-argument is mn/(2(n+m)) algebraically
        assert!((w.log_argument - 2500.0).abs() / 2500.0 < 1e-3);

        let n = 4_000_000u64;
        let m = 4_000_000u64;
        let e = e_of(n, m);
        let w = wilson_bound(n, m, e);
        let asy = wilson_asymptotic(n, m, e);
        assert!((w.steps - asy).abs() / asy < 0.05, "{} vs {asy}", w.steps);
    }

    #[test]
    fn relaxation_bound_examples() {
        // dumbbell(50, 3), vertex 52 (small clique interior): deg 2
        let g = WeightedGraph::dumbbell(50, 3).unwrap();
        let e = g.edge_mass_total() as f64;
        assert!((bottleneck_relaxation_bound(&g, 52) - e / 2.0).abs() < 1e-9);
        // complete(n): E/(n-1) = n/2
        let g = WeightedGraph::complete(10).unwrap();
        assert!((bottleneck_relaxation_bound(&g, 3) - 5.0).abs() < 1e-12);
        // dumbbell bridge vertex n+1: deg_w = m
        let g = WeightedGraph::dumbbell(50, 3).unwrap();
        assert!((bottleneck_relaxation_bound(&g, 51) - e / 3.0).abs() < 1e-9);
    }

    #[test]
    fn bbb_finds_small_clique() {
        let g = WeightedGraph::dumbbell(50, 3).unwrap();
        let e = g.edge_mass_total() as f64;
        let report = bbb_search(&g, e, 3).expect("bottleneck expected");
        assert_eq!(report.w, vec![51, 52, 53]);
        assert!((report.boundary_size - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bbb_rejects_regime_i() {
        let g = WeightedGraph::dumbbell(10_000, 1_000).unwrap();
        let pred = regime_prediction(10_000, 1_000, RegimeConfig::default());
        assert_eq!(pred.regime, Regime::LargeM);
        assert!(bbb_search(&g, pred.predicted_tmix, 3).is_none());
    }

    #[test]
    fn bbb_complete_graph_singleton_rule() {
        // W = {v} qualifies iff n-1 <= K E / tmix
        let g = WeightedGraph::complete(20).unwrap();
        let e = g.edge_mass_total() as f64; // 190
        // tmix = E: threshold = 1 < 19: none
        assert!(bbb_search(&g, e, 1).is_none());
        // tmix = E/20: threshold = 20 >= 19: some singleton
        let report = bbb_search(&g, e / 20.0, 1).unwrap();
        assert_eq!(report.w.len(), 1);
        assert!((report.boundary_size - 19.0).abs() < 1e-12);
    }

    #[test]
    fn regime_classification() {
        let cfg = RegimeConfig::default();
        assert_eq!(regime_prediction(1_000_000, 1_000, cfg).regime, Regime::LargeM);
        assert_eq!(regime_prediction(100_000_000, 100, cfg).regime, Regime::SmallM);
        assert_eq!(regime_prediction(1_000_000, 3, cfg).regime, Regime::ConstM);
        assert!(regime_prediction(1_000_000, 3, cfg).scale_only);
        // regime-i prediction value
        let p = regime_prediction(1_000_000, 1_000, cfg);
        let e = (choose2(1_000_000) + choose2(1_000) + 1) as f64;
        let expect = e * 1e9 / 1_001_000.0 * (1e6f64).ln();
        assert!((p.predicted_tmix - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn chebyshev_limits() {
        let e = e_of(10_000, 200);
        // enormous lambda: threshold below any mass, p_stationary tiny
        let t = 5_000_000_000u64;
        let (_pc, ps) = chebyshev_separation(10_000, 200, e, t, 1e6);
        assert!(ps < 1e-3);
        // huge t: chain at stationarity, threshold above chain mean -> clamp 1
        let (pc, _) = chebyshev_separation(10_000, 200, e, u64::MAX >> 2, 50.0);
        assert_eq!(pc, 1.0);
    }

    #[test]
    fn purple_mean_limits() {
        assert_eq!(purple_mean(100, 10, 0), 10.0);
        assert_eq!(purple_mean(100, 100, 12345), 100.0);
        let v = purple_mean(100, 10, 253);
        assert!((v - 0.9921).abs() < 1e-3, "{v}");
    }

    #[test]
    fn gamma_law_values() {
        let g = gamma_law(100, 2, 50);
        assert!((g.p - 1.0 / 4950.0).abs() < 1e-15);
        let g = gamma_law(64, 64, 10);
        assert!((g.p - 1.0).abs() < 1e-15);
        assert!(gamma_ld_threshold(100, 10, 0.5) > 0.0);
    }
}
