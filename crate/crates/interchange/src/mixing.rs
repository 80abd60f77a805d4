//! Mixing-time experiment drivers: exact profiles from lumped chains,
//! statistic-based TV lower bounds from simulation, cutoff-ratio scans,
//! the exclusion-process experiment, and the rigorous Chebyshev certificate.

use crate::analytics::{
    chebyshev_separation, l_stationary, purple_mean, regime_prediction, RegimeConfig,
    RegimePrediction,
};
use crate::dynamics;
use crate::graphs::{GraphKind, WeightedGraph};
use crate::lumped::{self, LumpedError, TvEvaluator};
use crate::rational::{choose2, ratio, Ratio};
use crate::replicas;
use rand::Rng;
use serde::Serialize;

fn e_mass_of(n: u64, m: u64) -> Ratio {
    ratio(choose2(n) + choose2(m) + 1, 1)
}

/// Exact or estimated mixing profile of one instance.
#[derive(Clone, Debug, Serialize)]
pub struct MixingProfile {
    pub n: u64,
    pub m: u64,
    /// Sampled time grid for the d(t) curve (empty when not requested).
    pub times: Vec<u64>,
    /// Exact TV values from the worse endpoint along `times`.
    pub d_exact: Vec<f64>,
    /// `eps -> t_mix(eps)`, max over the two endpoint starts.
    pub tmix: Vec<(f64, u64)>,
    /// Per-endpoint values behind the max.
    pub tmix_low_endpoint: Vec<u64>,
    pub tmix_high_endpoint: Vec<u64>,
    pub prediction: RegimePrediction,
    /// `tmix(eps) / predicted_tmix` for each requested eps.
    pub observed_over_predicted: Vec<f64>,
}

/// Exact Bernoulli–Laplace mixing profile. `tmix` is computed from both
/// endpoint starts and the max reported; the optional `times` grid is
/// geometric (x1.25) around the regime prediction.
pub fn exact_profile(
    n: u64,
    m: u64,
    eps_list: &[f64],
    with_curve: bool,
) -> Result<MixingProfile, LumpedError> {
    let chain = lumped::bernoulli_laplace_chain(n, m, e_mass_of(n, m))?;
    let mut ev = TvEvaluator::new(&chain);
    let s = chain.num_states();
    let prediction = regime_prediction(n, m, RegimeConfig::default());
    let mut tmix = Vec::new();
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    let mut ratios = Vec::new();
    for &eps in eps_list {
        let t_low = lumped::tmix_exact_capped(&mut ev, 0, eps, 63)?;
        let t_high = lumped::tmix_exact_capped(&mut ev, s - 1, eps, 63)?;
        let t = t_low.max(t_high);
        lows.push(t_low);
        highs.push(t_high);
        tmix.push((eps, t));
        ratios.push(t as f64 / prediction.predicted_tmix);
    }
    let mut times = Vec::new();
    let mut d_exact = Vec::new();
    if with_curve {
        let worse = if lows.first() >= highs.first() { 0 } else { s - 1 };
        let center = tmix.first().map(|&(_, t)| t).unwrap_or(1).max(2);
        for t in geometric_grid(center / 8, center.saturating_mul(3), 1.25) {
            times.push(t);
            d_exact.push(ev.tv(worse, t)?);
        }
    }
    Ok(MixingProfile {
        n,
        m,
        times,
        d_exact,
        tmix,
        tmix_low_endpoint: lows,
        tmix_high_endpoint: highs,
        prediction,
        observed_over_predicted: ratios,
    })
}

/// Strictly increasing geometric grid of integers from `lo` to exactly `hi`.
pub fn geometric_grid(lo: u64, hi: u64, factor: f64) -> Vec<u64> {
    assert!(factor > 1.0);
    let hi = hi.max(1);
    let mut out = Vec::new();
    let mut x = lo.clamp(1, hi) as f64;
    loop {
        let t = (x.round() as u64).min(hi);
        if out.last().map_or(true, |&l| t > l) {
            out.push(t);
        }
        if t >= hi {
            break;
        }
        x *= factor;
    }
    out
}

// ---------------------------------------------------------------------------
// Statistic-based TV lower bounds
// ---------------------------------------------------------------------------

/// Observable whose exact stationary law is known, making the statistic's
/// empirical TV a lower bound on full-process TV (data processing).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// K1-origin particles in K2; stationary law hypergeometric.
    LCount,
    /// K1 particles at their own starting vertex; stationary law is the
    /// fixed-point count of a uniform permutation.
    FixedPointsK1,
}

/// How trajectories are generated.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SimMode {
    /// Step-by-step simulation of the full interchange process.
    FullSteps,
    /// Event-driven jumps of the L-count between bridge events; exact in law
    /// for `Statistic::LCount` on the symmetrized graph, where every bridge
    /// transposition exchanges an independent uniform cross pair.
    BridgeEvents,
}

#[derive(Clone, Debug, Serialize)]
pub struct TvLowerPoint {
    pub t: u64,
    pub estimate: f64,
    pub se: f64,
    /// Raised when the replica budget cannot resolve the requested value.
    pub low_resolution: bool,
}

/// Empirical TV between the statistic's time-t law and its exact stationary
/// law, for every t in `t_grid`, with bootstrap standard errors. A lower
/// bound on the full-process TV at each t.
pub fn statistic_tv_lower(
    graph: &WeightedGraph,
    statistic: Statistic,
    mode: SimMode,
    t_grid: &[u64],
    num_replicas: u64,
    seed: u64,
) -> Vec<TvLowerPoint> {
    assert!(!t_grid.is_empty());
    assert!(t_grid.windows(2).all(|w| w[0] < w[1]));
    if mode == SimMode::BridgeEvents {
        assert_eq!(
            graph.kind(),
            GraphKind::Symmetrized,
            "event mode is exact only on the symmetrized graph"
        );
        assert_eq!(statistic, Statistic::LCount);
    }
    let n = graph.n();
    let m = graph.m();
    let t_max = *t_grid.last().unwrap();

    // per-replica statistic values along the grid
    let samples: Vec<Vec<u64>> = replicas::run_replicas(seed, num_replicas, |_, rng| match mode {
        SimMode::FullSteps => {
            let mut config = dynamics::Configuration::identity(graph.num_vertices());
            let mut obs = dynamics::InterchangeObservables::new(graph);
            let mut out = Vec::with_capacity(t_grid.len());
            let mut gi = 0usize;
            for t in 0..=t_max {
                while gi < t_grid.len() && t_grid[gi] == t {
                    out.push(read_statistic(statistic, &obs));
                    gi += 1;
                }
                if t < t_max {
                    dynamics::step_interchange(&mut config, graph, rng, &mut obs);
                }
            }
            while gi < t_grid.len() {
                out.push(read_statistic(statistic, &obs));
                gi += 1;
            }
            out
        }
        SimMode::BridgeEvents => simulate_l_by_events(n, m, t_grid, rng),
    });

    // stationary law
    let (support_lo, pi) = stationary_law(statistic, n, m);

    t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let values: Vec<u64> = samples.iter().map(|row| row[i]).collect();
            let (estimate, se) = plug_in_tv(&values, support_lo, &pi, seed ^ (i as u64) << 32);
            let low_resolution = se > 0.05;
            TvLowerPoint { t, estimate, se, low_resolution }
        })
        .collect()
}

fn read_statistic(statistic: Statistic, obs: &dynamics::InterchangeObservables) -> u64 {
    match statistic {
        Statistic::LCount => obs.l(),
        Statistic::FixedPointsK1 => obs.row().fixed_points,
    }
}

/// Event-driven exact simulation of the L-count on the symmetrized graph:
/// L changes only at applied bridge transpositions whose endpoints hold
/// differing origins; between those it is constant. From state `l` the
/// per-step change rates are `up = (n-l)(m-l)/(2|E|nm)` and
/// `down = l^2/(2|E|nm)`.
fn simulate_l_by_events<R: Rng + ?Sized>(
    n: u64,
    m: u64,
    t_grid: &[u64],
    rng: &mut R,
) -> Vec<u64> {
    let e = (choose2(n) + choose2(m) + 1) as f64;
    let denom = 2.0 * e * n as f64 * m as f64;
    let mut l = 0u64;
    let mut t = 0u64;
    let mut out = Vec::with_capacity(t_grid.len());
    let mut gi = 0usize;
    let t_max = *t_grid.last().unwrap();
    while t < t_max {
        let up = ((n - l) * (m - l)) as f64 / denom;
        let down = (l * l) as f64 / denom;
        let q = up + down;
        let gap = if q > 0.0 {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / (1.0 - q).ln()).floor() as u64 + 1
        } else {
            u64::MAX
        };
        let t_next = t.saturating_add(gap);
        while gi < t_grid.len() && t_grid[gi] < t_next {
            out.push(l);
            gi += 1;
        }
        if t_next > t_max {
            break;
        }
        t = t_next;
        if rng.gen::<f64>() < up / q {
            l += 1;
        } else {
            l -= 1;
        }
        while gi < t_grid.len() && t_grid[gi] == t {
            out.push(l);
            gi += 1;
        }
    }
    while gi < t_grid.len() {
        out.push(l);
        gi += 1;
    }
    out
}

fn stationary_law(statistic: Statistic, n: u64, m: u64) -> (u64, Vec<f64>) {
    match statistic {
        Statistic::LCount => {
            let h = l_stationary(n, m);
            (h.support_lo, h.pmf)
        }
        Statistic::FixedPointsK1 => (0, fixed_point_law_designated(n, n + m)),
    }
}

/// Law of the number of fixed points among `n` designated positions of a
/// uniform permutation of `big_n` items:
/// `P(F = f) = C(n,f) sum_{i=0}^{n-f} (-1)^i C(n-f,i) / (N)_{f+i}`
/// with `(N)_k` the falling factorial. Reduces to the classical derangement
/// series at `n = N`.
pub fn fixed_point_law_designated(n: u64, big_n: u64) -> Vec<f64> {
    assert!(n <= big_n);
    let mut pmf = Vec::with_capacity(n as usize + 1);
    // lead(f) = C(n,f) / (N)_f, built up recursively
    let mut lead = 1.0f64;
    for f in 0..=n {
        if f > 0 {
            lead *= (n - f + 1) as f64 / (f as f64 * (big_n - f + 1) as f64);
        }
        // alternating tail: T_0 = lead; T_{i+1} = -T_i (n-f-i) / ((i+1)(N-f-i))
        let mut term = lead;
        let mut total = term;
        let upper = n - f;
        for i in 0..upper {
            term *= -((upper - i) as f64) / ((i + 1) as f64 * (big_n - f - i) as f64);
            total += term;
            if term.abs() < 1e-18 * total.abs().max(1e-300) && i > 3 {
                break;
            }
        }
        pmf.push(total.max(0.0));
    }
    pmf
}

/// Plug-in TV between an empirical sample and an exact pmf, with a
/// multinomial-bootstrap standard error.
fn plug_in_tv(values: &[u64], support_lo: u64, pi: &[f64], seed: u64) -> (f64, f64) {
    let r = values.len();
    let max_v = values.iter().max().copied().unwrap_or(0);
    let hi = (support_lo + pi.len() as u64 - 1).max(max_v);
    let len = (hi - support_lo + 1) as usize;
    let mut counts = vec![0u64; len.max(1)];
    for &v in values {
        let idx = v.saturating_sub(support_lo) as usize;
        counts[idx.min(len - 1)] += 1;
    }
    let tv_of = |counts: &[u64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..len {
            let p_hat = counts[i] as f64 / r as f64;
            let p = pi.get(i).copied().unwrap_or(0.0);
            acc += (p_hat - p).abs();
        }
        0.5 * acc
    };
    let estimate = tv_of(&counts);
    // bootstrap
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let b = 64;
    let mut boot = Vec::with_capacity(b);
    // cumulative table over the empirical distribution
    let mut cum = Vec::with_capacity(len);
    let mut acc = 0u64;
    for &c in &counts {
        acc += c;
        cum.push(acc);
    }
    for _ in 0..b {
        let mut resampled = vec![0u64; len];
        for _ in 0..r {
            let x = rng.gen_range(0..r as u64);
            let idx = cum.partition_point(|&c| c <= x);
            resampled[idx] += 1;
        }
        boot.push(tv_of(&resampled));
    }
    let mean = boot.iter().sum::<f64>() / b as f64;
    let var = boot.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b as f64 - 1.0);
    (estimate, var.sqrt())
}

// ---------------------------------------------------------------------------
// Cutoff scans
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub n: u64,
    pub m: u64,
    pub tmix_small_eps: u64,
    pub tmix_large_eps: u64,
    pub ratio: f64,
}

/// Exact cutoff-ratio scan over a family sequence:
/// `tmix(eps_small) / tmix(eps_large)` from the exact BL chain.
pub fn cutoff_scan_exact(
    family: &[(u64, u64)],
    eps_pair: (f64, f64),
) -> Result<Vec<ScanPoint>, LumpedError> {
    let (eps_small, eps_large) = eps_pair;
    assert!(eps_small <= eps_large);
    let mut out = Vec::new();
    for &(n, m) in family {
        let profile = exact_profile(n, m, &[eps_small, eps_large], false)?;
        let t_small = profile.tmix[0].1;
        let t_large = profile.tmix[1].1;
        out.push(ScanPoint {
            n,
            m,
            tmix_small_eps: t_small,
            tmix_large_eps: t_large,
            ratio: t_small as f64 / t_large as f64,
        });
    }
    Ok(out)
}

/// Simulation-based cutoff-ratio scan on the half-symmetrized process with
/// the L statistic: thresholds are read off the empirical TV curve along a
/// geometric grid.
pub fn cutoff_scan_simulated(
    family: &[(u64, u64)],
    eps_pair: (f64, f64),
    num_replicas: u64,
    seed: u64,
) -> Vec<ScanPoint> {
    let (eps_small, eps_large) = eps_pair;
    assert!(eps_small <= eps_large);
    let mut out = Vec::new();
    for (i, &(n, m)) in family.iter().enumerate() {
        let g = WeightedGraph::half_symmetrized(n, m).unwrap();
        let e = g.edge_mass_total() as f64;
        // d(t) falls on the scale of a few |E| for bounded m; the 0.1
        // crossing sits near 16|E| at m = 2
        let grid = geometric_grid((e / 50.0) as u64 + 1, (24.0 * e) as u64, 1.12);
        let points = statistic_tv_lower(
            &g,
            Statistic::LCount,
            SimMode::FullSteps,
            &grid,
            num_replicas,
            seed ^ ((i as u64) << 40),
        );
        let crossing = |eps: f64| -> u64 {
            points
                .iter()
                .find(|p| p.estimate <= eps)
                .map(|p| p.t)
                .unwrap_or_else(|| *grid.last().unwrap())
        };
        let t_small = crossing(eps_small);
        let t_large = crossing(eps_large);
        out.push(ScanPoint {
            n,
            m,
            tmix_small_eps: t_small,
            tmix_large_eps: t_large,
            ratio: t_small as f64 / t_large.max(1) as f64,
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Exclusion experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PurpleCheck {
    pub t: u64,
    pub mc_mean: f64,
    pub se: f64,
    pub formula: f64,
    pub within_3_se: bool,
}

/// Monte Carlo purple-count mean at time `t` against the closed form.
pub fn purple_check(n: u64, k: u64, t: u64, num_replicas: u64, seed: u64) -> PurpleCheck {
    let counts: Vec<f64> = replicas::run_replicas(seed, num_replicas, |_, rng| {
        let mut s = dynamics::ExclusionState::new(n, k);
        for _ in 0..t {
            dynamics::step_exclusion(&mut s, rng);
        }
        s.purple_count() as f64
    });
    let r = num_replicas as f64;
    let mean = counts.iter().sum::<f64>() / r;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (r - 1.0);
    let se = (var / r).sqrt();
    let formula = purple_mean(n, k, t);
    PurpleCheck { t, mc_mean: mean, se, formula, within_3_se: (mean - formula).abs() <= 3.0 * se }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExclusionReport {
    pub n: u64,
    pub k: u64,
    pub eps: f64,
    /// Exact mixing time of the count projection (None when k = n, where the
    /// projection is a single state and the report defers to the fixed-point
    /// statistic).
    pub count_projection_tmix: Option<u64>,
    /// `(1/2) n log n`, the reference scale.
    pub half_n_log_n: f64,
    pub tmix_over_reference: Option<f64>,
    pub purple: PurpleCheck,
    pub degenerate_projection: bool,
}

/// Desk-scale exclusion experiment: exact count-projection mixing time,
/// purple-count Monte Carlo check at `T = (1+eps) n log k`, and the verdict
/// against `(1/2) n log n`.
pub fn exclusion_mixing_experiment(
    n: u64,
    k: u64,
    eps: f64,
    num_replicas: u64,
    seed: u64,
) -> Result<ExclusionReport, LumpedError> {
    assert!(k >= 2 && k <= n);
    let half_n_log_n = 0.5 * n as f64 * (n as f64).ln();
    let t_purple = ((1.0 + eps) * n as f64 * (k as f64).ln()).round() as u64;
    let purple = purple_check(n, k, t_purple, num_replicas, seed);
    if k == n {
        return Ok(ExclusionReport {
            n,
            k,
            eps,
            count_projection_tmix: None,
            half_n_log_n,
            tmix_over_reference: None,
            purple,
            degenerate_projection: true,
        });
    }
    let chain = lumped::exclusion_count_chain(n, k)?;
    let mut ev = TvEvaluator::new(&chain);
    let s = chain.num_states();
    let t0 = lumped::tmix_exact_capped(&mut ev, 0, eps, 63)?;
    let t1 = lumped::tmix_exact_capped(&mut ev, s - 1, eps, 63)?;
    let tmix = t0.max(t1);
    Ok(ExclusionReport {
        n,
        k,
        eps,
        count_projection_tmix: Some(tmix),
        half_n_log_n,
        tmix_over_reference: Some(tmix as f64 / half_n_log_n),
        purple,
        degenerate_projection: false,
    })
}

// ---------------------------------------------------------------------------
// Lower-bound certificate
// ---------------------------------------------------------------------------

/// Rigorous TV lower bound at time `t` from the Chebyshev separation:
/// `TV >= 1 - p_chain - p_stationary`, clamped to `[0, 1]`.
pub fn lower_bound_certificate(n: u64, m: u64, e_mass: Ratio, t: u64, lambda: f64) -> f64 {
    let (p_chain, p_stationary) = chebyshev_separation(n, m, e_mass, t, lambda);
    (1.0 - p_chain - p_stationary).clamp(0.0, 1.0)
}

/// Time parametrization `t_{n,lambda} = |E| nm/(n+m) (log n - log lambda)`
/// used by the separation certificates.
pub fn t_n_lambda(n: u64, m: u64, e_mass: Ratio, lambda: f64) -> u64 {
    let e = crate::rational::ratio_to_f64(&e_mass);
    let (nf, mf) = (n as f64, m as f64);
    (e * nf * mf / (nf + mf) * (nf.ln() - lambda.ln())).round().max(0.0) as u64
}

// ---------------------------------------------------------------------------
// Process comparison (G vs symmetrized / half-symmetrized)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ComparePoint {
    pub t: u64,
    /// Plug-in TV between the two empirical statistic laws.
    pub distance: f64,
    pub se: f64,
}

/// Runs two graph processes with the same statistic and compares the
/// empirical laws at each grid time; the observable stand-in for the
/// couplings relating G to its symmetrized variants.
pub fn compare_processes(
    a: &WeightedGraph,
    b: &WeightedGraph,
    statistic: Statistic,
    t_grid: &[u64],
    num_replicas: u64,
    seed: u64,
) -> Vec<ComparePoint> {
    let run = |g: &WeightedGraph, phase: u64| -> Vec<Vec<u64>> {
        let t_max = *t_grid.last().unwrap();
        replicas::run_replicas(replicas::phase_seed(seed, phase), num_replicas, |_, rng| {
            let mut config = dynamics::Configuration::identity(g.num_vertices());
            let mut obs = dynamics::InterchangeObservables::new(g);
            let mut out = Vec::with_capacity(t_grid.len());
            let mut gi = 0usize;
            for t in 0..=t_max {
                while gi < t_grid.len() && t_grid[gi] == t {
                    out.push(read_statistic(statistic, &obs));
                    gi += 1;
                }
                if t < t_max {
                    dynamics::step_interchange(&mut config, g, rng, &mut obs);
                }
            }
            out
        })
    };
    let sa = run(a, 1);
    let sb = run(b, 2);
    t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let va: Vec<u64> = sa.iter().map(|row| row[i]).collect();
            let vb: Vec<u64> = sb.iter().map(|row| row[i]).collect();
            let max_v = va.iter().chain(vb.iter()).max().copied().unwrap_or(0) as usize;
            let mut ha = vec![0f64; max_v + 1];
            let mut hb = vec![0f64; max_v + 1];
            for &v in &va {
                ha[v as usize] += 1.0;
            }
            for &v in &vb {
                hb[v as usize] += 1.0;
            }
            let r = num_replicas as f64;
            let distance =
                0.5 * ha.iter().zip(&hb).map(|(x, y)| (x / r - y / r).abs()).sum::<f64>();
            // crude binomial-scale SE for a TV between two empirical laws
            let se = ((max_v as f64 + 1.0) / r).sqrt() * 0.5;
            ComparePoint { t, distance, se }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lumped::matrix_power_tv;

    #[test]
    fn geometric_grid_is_increasing() {
        let g = geometric_grid(10, 1000, 1.25);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.first().unwrap() >= 10);
        assert!(*g.last().unwrap() >= 1000);
    }

    #[test]
    fn exact_profile_small_instance() {
        let p = exact_profile(50, 10, &[0.45, 0.55], true).unwrap();
        // tmix monotone in eps
        assert!(p.tmix[0].1 >= p.tmix[1].1);
        // curve non-increasing
        for w in p.d_exact.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // degenerate eps pair gives ratio exactly 1
        let scan = cutoff_scan_exact(&[(50, 10)], (0.5, 0.5)).unwrap();
        assert_eq!(scan[0].ratio, 1.0);
    }

    #[test]
    fn statistic_tv_t0_is_large() {
        // at t = 0 the L statistic is a point mass at 0, TV ~ 1
        let g = WeightedGraph::symmetrized(30, 6).unwrap();
        let pts =
            statistic_tv_lower(&g, Statistic::LCount, SimMode::FullSteps, &[0, 50], 400, 11);
        assert!(pts[0].estimate > 0.95, "{}", pts[0].estimate);
    }

    #[test]
    fn event_mode_matches_full_steps_in_law() {
        // L-law on the symmetrized graph: event-driven vs full simulation
        let g = WeightedGraph::symmetrized(12, 5).unwrap();
        let grid = [40u64, 160, 640, 2560];
        let a = statistic_tv_lower(&g, Statistic::LCount, SimMode::FullSteps, &grid, 6000, 3);
        let b = statistic_tv_lower(&g, Statistic::LCount, SimMode::BridgeEvents, &grid, 6000, 4);
        for (pa, pb) in a.iter().zip(&b) {
            let tol = 4.0 * (pa.se + pb.se).max(0.01);
            assert!(
                (pa.estimate - pb.estimate).abs() < tol,
                "t={}: {} vs {}",
                pa.t,
                pa.estimate,
                pb.estimate
            );
        }
    }

    #[test]
    fn statistic_tv_is_lower_bound_for_lumped_tv() {
        // on the symmetrized graph the L statistic is exactly the BL count
        // projection, so its TV should match the lumped chain within MC error
        // and in particular never exceed it by more than noise
        let n = 12u64;
        let m = 5u64;
        let g = WeightedGraph::symmetrized(n, m).unwrap();
        let chain =
            lumped::bernoulli_laplace_chain(n, m, e_mass_of(n, m)).unwrap();
        let grid = [100u64, 400, 1600];
        let pts =
            statistic_tv_lower(&g, Statistic::LCount, SimMode::BridgeEvents, &grid, 20_000, 7);
        for p in &pts {
            // identity start = all K1-origin home = top state of the chain
            let exact = matrix_power_tv(&chain, chain.num_states() - 1, p.t).unwrap();
            assert!(
                p.estimate <= exact + 3.0 * p.se.max(0.004),
                "t={}: {} vs exact {}",
                p.t,
                p.estimate,
                exact
            );
        }
    }

    #[test]
    fn fixed_point_law_reduces_to_derangements() {
        // n = N: the classical rencontres law
        let law = fixed_point_law_designated(6, 6);
        let total: f64 = law.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // D_6 / 6! = 265/720
        assert!((law[0] - 265.0 / 720.0).abs() < 1e-12);
        // designated-subset case against brute force over S_4, n = 2
        let law = fixed_point_law_designated(2, 4);
        let mut brute = [0.0f64; 3];
        let perms = permutations(4);
        for p in &perms {
            let f = (0..2).filter(|&i| p[i] == i).count();
            brute[f] += 1.0 / perms.len() as f64;
        }
        for f in 0..3 {
            assert!((law[f] - brute[f]).abs() < 1e-12, "f={f}: {} vs {}", law[f], brute[f]);
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let smaller = permutations(n - 1);
        let mut out = Vec::new();
        for p in smaller {
            for pos in 0..=p.len() {
                let mut q: Vec<usize> = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn fixed_point_statistic_reaches_stationarity() {
        // long run on a small dumbbell: empirical K1 fixed-point TV vs the
        // designated-set law falls to noise level
        let g = WeightedGraph::dumbbell(5, 3).unwrap();
        let pts = statistic_tv_lower(
            &g,
            Statistic::FixedPointsK1,
            SimMode::FullSteps,
            &[4000],
            20_000,
            37,
        );
        assert!(pts[0].estimate < 4.0 * pts[0].se.max(0.005), "{}", pts[0].estimate);
    }

    #[test]
    fn purple_check_small() {
        let c = purple_check(60, 6, 300, 4000, 19);
        assert!(c.within_3_se, "mc {} vs formula {} (se {})", c.mc_mean, c.formula, c.se);
    }

    #[test]
    fn exclusion_experiment_shapes() {
        let rep = exclusion_mixing_experiment(40, 8, 0.25, 500, 23).unwrap();
        assert!(!rep.degenerate_projection);
        assert!(rep.count_projection_tmix.unwrap() > 0);
        let rep = exclusion_mixing_experiment(12, 12, 0.25, 200, 29).unwrap();
        assert!(rep.degenerate_projection);
        assert!(rep.count_projection_tmix.is_none());
    }

    #[test]
    fn certificate_never_exceeds_exact_tv_small() {
        // soundness on a small grid, where exact TV is cheap
        let n = 400u64;
        let m = 40u64;
        let e = e_mass_of(n, m);
        let chain = lumped::bernoulli_laplace_chain(n, m, e).unwrap();
        let mut ev = TvEvaluator::new(&chain);
        let s = chain.num_states();
        for lambda in [5.0, 20.0, 80.0] {
            let t = t_n_lambda(n, m, e, lambda);
            if t == 0 {
                continue;
            }
            let cert = lower_bound_certificate(n, m, e, t, lambda);
            let exact = ev.tv(s - 1, t).unwrap();
            assert!(cert <= exact + 1e-9, "lambda={lambda}: cert {cert} > exact {exact}");
        }
    }

    #[test]
    fn compare_same_kind_is_near_zero() {
        let a = WeightedGraph::symmetrized(10, 4).unwrap();
        let pts = compare_processes(&a, &a, Statistic::LCount, &[50, 200], 4000, 31);
        for p in pts {
            assert!(p.distance < 5.0 * p.se + 0.05, "t={}: {}", p.t, p.distance);
        }
    }
}
