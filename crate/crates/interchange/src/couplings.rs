//! The three-layer coupling for the Bernoulli–Laplace upper bound: a
//! coin-toss coupled pair `(X_t, Y_t)` whose difference `D_t` shrinks in
//! expectation, a symmetrized walk `S_t` dominating `D_t`, and a lazy
//! copycat walk `L_t` that replays S's moves at the fixed rate `m/(|E|n)`,
//! giving `tau_D <= tau_S <= tau_L` pathwise.
//!
//! Per step: a fair coin picks which marginal attempts a move (at doubled
//! rates, so each marginal alone is exactly the Bernoulli–Laplace chain);
//! S moves exactly when D moves, re-randomized to symmetric increments; when
//! S moves, L moves with the thinning probability `(m/(|E|n)) / (2 p_{x,y})`
//! and replays the oldest not-yet-copied S direction. Once X and Y have met
//! they move together, S is driven by fresh symmetric increments at rate
//! `2 p_{x,x}`, and after S first hits zero it freezes while its move clock
//! keeps ticking for L's thinning.
//!
//! The thinning probability stays below 1 iff `p_{x,y} >= m/(2|E|n)` at every
//! visited state. That inequality holds for all reachable states when
//! `n >= 3m` (the rate parabola's minimum then sits at the boundary state
//! `x = y = n-m` where equality is attained); it is asserted at runtime
//! rather than assumed.

use crate::rational::{ratio_to_f64, Ratio};
use rand::Rng;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

/// Queue cap for S-moves not yet replayed by L; growth beyond this indicates
/// a bug, not a long run.
pub const PENDING_CAP: usize = 100_000_000;

#[derive(Debug, Error)]
pub enum CouplingViolation {
    #[error("thinning probability {q} > 1 at (x={x}, y={y}): p_xy = {p} < m/(2|E|n) = {rate}")]
    ThinningOverflow { x: u64, y: u64, p: f64, q: f64, rate: f64 },
    #[error("pending-move queue exceeded {PENDING_CAP}")]
    QueueOverflow,
    #[error("pathwise ordering broken: d={d} > s={s} at t={t}")]
    OrderingBroken { d: i64, s: i64, t: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct CouplingParams {
    pub n: u64,
    pub m: u64,
    /// `1 / (2|E|nm)`, the common rate denominator, as f64.
    rate_unit: f64,
    /// Copycat move rate `m/(|E|n)` per step.
    pub copycat_rate: f64,
}

impl CouplingParams {
    pub fn new(n: u64, m: u64, e_mass: Ratio) -> Self {
        let e = ratio_to_f64(&e_mass);
        let (nf, mf) = (n as f64, m as f64);
        CouplingParams {
            n,
            m,
            rate_unit: 1.0 / (2.0 * e * nf * mf),
            copycat_rate: mf / (e * nf),
        }
    }

    /// `P(k -> k+1)` of the Bernoulli–Laplace chain.
    #[inline]
    pub fn up(&self, k: u64) -> f64 {
        let d = (self.n - k) as f64;
        d * d * self.rate_unit
    }

    /// `P(k -> k-1)`.
    #[inline]
    pub fn down(&self, k: u64) -> f64 {
        (k as f64) * ((self.m + k - self.n) as f64) * self.rate_unit
    }

    /// Exact conditional drift `E[D_{t+1} - D_t | x, y] = -(x-y)(n+m)/(2|E|nm)`.
    pub fn drift(&self, x: u64, y: u64) -> f64 {
        -((x - y) as f64) * ((self.n + self.m) as f64) * self.rate_unit
    }

    /// `p_{x,y} = (P[D+1] + P[D-1]) / 2`.
    #[inline]
    pub fn p_xy(&self, x: u64, y: u64) -> f64 {
        0.5 * (self.up(x) + self.down(y) + self.up(y) + self.down(x))
    }
}

/// Full state of the D/S/L coupling.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub x: u64,
    pub y: u64,
    pub s: i64,
    pub l: i64,
    pub t: u64,
    pub tau_d: Option<u64>,
    pub tau_s: Option<u64>,
    pub tau_l: Option<u64>,
    pending: VecDeque<i8>,
    s_moves: u64,
    l_moves: u64,
    /// What D did in the current step (set by the pair layer, read by S).
    last_d_move: i8,
    /// Whether S moved in the current step (read by the copycat layer).
    last_s_moved: bool,
    /// `p_{x,y}` evaluated at the step's pre-move state.
    last_p_xy: f64,
    /// `P[D_{t+1} = D_t - 1]` at the pre-move state.
    last_p_d_down: f64,
}

impl CoupledState {
    /// Coupled start with `x0 >= y0`; S and L start at `D_0 = x0 - y0`.
    pub fn new(x0: u64, y0: u64) -> Self {
        assert!(x0 >= y0);
        let d0 = (x0 - y0) as i64;
        CoupledState {
            x: x0,
            y: y0,
            s: d0,
            l: d0,
            t: 0,
            tau_d: if d0 == 0 { Some(0) } else { None },
            tau_s: if d0 == 0 { Some(0) } else { None },
            tau_l: if d0 == 0 { Some(0) } else { None },
            pending: VecDeque::new(),
            s_moves: 0,
            l_moves: 0,
            last_d_move: 0,
            last_s_moved: false,
            last_p_xy: 0.0,
            last_p_d_down: 0.0,
        }
    }

    #[inline]
    pub fn d(&self) -> i64 {
        (self.x - self.y) as i64
    }

    pub fn s_moves(&self) -> u64 {
        self.s_moves
    }

    pub fn l_moves(&self) -> u64 {
        self.l_moves
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    fn coalesced(&self) -> bool {
        self.x == self.y
    }

    fn s_absorbed(&self) -> bool {
        self.tau_s.is_some()
    }

    fn check_invariants(&self) -> Result<(), CouplingViolation> {
        if self.d() > self.s && !self.s_absorbed() {
            return Err(CouplingViolation::OrderingBroken { d: self.d(), s: self.s, t: self.t });
        }
        if self.pending.len() > PENDING_CAP {
            return Err(CouplingViolation::QueueOverflow);
        }
        Ok(())
    }
}

/// Pair layer: fair coin selects the marginal, which attempts a doubled-rate
/// move, so each of X and Y is marginally the exact Bernoulli–Laplace chain.
/// Records D's move for the S layer. After coalescence the chains move as
/// one.
pub fn step_coupled_bl<R: Rng + ?Sized>(
    state: &mut CoupledState,
    params: &CouplingParams,
    rng: &mut R,
) {
    state.t += 1;
    state.last_d_move = 0;
    state.last_p_xy = params.p_xy(state.x, state.y);
    state.last_p_d_down = params.up(state.y) + params.down(state.x);
    if !state.coalesced() {
        let heads = rng.gen_bool(0.5);
        let u: f64 = rng.gen();
        if heads {
            // attempt to move X at doubled rates
            if u < 2.0 * params.up(state.x) {
                state.x += 1;
                state.last_d_move = 1;
            } else if u < 2.0 * (params.up(state.x) + params.down(state.x)) {
                state.x -= 1;
                state.last_d_move = -1;
            }
        } else if u < 2.0 * params.up(state.y) {
            state.y += 1;
            state.last_d_move = -1;
        } else if u < 2.0 * (params.up(state.y) + params.down(state.y)) {
            state.y -= 1;
            state.last_d_move = 1;
        }
        if state.x == state.y && state.tau_d.is_none() {
            state.tau_d = Some(state.t);
        }
    } else {
        // merged: one move applied to both
        let u: f64 = rng.gen();
        if u < params.up(state.x) {
            state.x += 1;
            state.y += 1;
        } else if u < params.up(state.x) + params.down(state.x) {
            state.x -= 1;
            state.y -= 1;
        }
    }
}

/// Symmetrized layer: S moves exactly when D moves (same laziness); a D-down
/// is re-randomized to keep S's increments symmetric, preserving `D <= S`.
/// After coalescence S runs on fresh randomness at rate `p_{x,x}` per
/// direction; after first hitting 0 it freezes but its move clock still
/// ticks (`last_s_moved`) to drive the copycat layer.
pub fn step_symmetrized<R: Rng + ?Sized>(
    state: &mut CoupledState,
    _params: &CouplingParams,
    rng: &mut R,
) {
    state.last_s_moved = false;
    let started_coalesced = state.tau_d.map_or(false, |td| td < state.t);
    let dir: Option<i8> = if state.last_d_move != 0 {
        // pre-coalescence driving: S moves exactly when D moves, with a
        // D-down re-randomized to keep the increments symmetric
        if state.last_d_move == 1 {
            Some(1)
        } else if rng.gen::<f64>() < state.last_p_xy / state.last_p_d_down {
            Some(-1)
        } else {
            Some(1)
        }
    } else if started_coalesced {
        // fresh symmetric increments at rate p_{x,x} per direction
        let p = state.last_p_xy;
        let u: f64 = rng.gen();
        if u < p {
            Some(1)
        } else if u < 2.0 * p {
            Some(-1)
        } else {
            None
        }
    } else {
        None
    };
    if let Some(dir) = dir {
        state.last_s_moved = true;
        state.s_moves += 1;
        state.pending.push_back(dir);
        if !state.s_absorbed() {
            state.s += dir as i64;
            if state.s == 0 {
                state.tau_s = Some(state.t);
            }
        }
    }
}

/// Copycat layer: when S's clock ticks, L moves with probability
/// `copycat_rate / (2 p_{x,y})` (so its unconditional move rate is exactly
/// `m/(|E|n)` per step), replaying the oldest unreplayed S direction.
pub fn step_copycat<R: Rng + ?Sized>(
    state: &mut CoupledState,
    params: &CouplingParams,
    rng: &mut R,
) -> Result<(), CouplingViolation> {
    if !state.last_s_moved || state.tau_l.is_some() {
        return Ok(());
    }
    let p = state.last_p_xy;
    let q = params.copycat_rate / (2.0 * p);
    // equality q = 1 is attained at the boundary state x = y = n-m; allow
    // only rounding noise beyond it
    if q > 1.0 + 1e-9 {
        return Err(CouplingViolation::ThinningOverflow {
            x: state.x.max(state.y),
            y: state.x.min(state.y),
            p,
            q,
            rate: params.copycat_rate / 2.0,
        });
    }
    let q = q.min(1.0);
    if rng.gen::<f64>() < q {
        let dir = state.pending.pop_front().expect("L replays only existing moves");
        state.l += dir as i64;
        state.l_moves += 1;
        if state.l == 0 && state.tau_l.is_none() {
            state.tau_l = Some(state.t);
        }
    }
    Ok(())
}

/// One full step of the triple coupling with invariant checks.
pub fn step_triple<R: Rng + ?Sized>(
    state: &mut CoupledState,
    params: &CouplingParams,
    rng: &mut R,
) -> Result<(), CouplingViolation> {
    step_coupled_bl(state, params, rng);
    step_symmetrized(state, params, rng);
    step_copycat(state, params, rng)?;
    state.check_invariants()
}

// ---------------------------------------------------------------------------
// Event-driven runner
// ---------------------------------------------------------------------------

/// Geometric skip: number of steps until the next success at rate `q`,
/// inclusive (support 1, 2, ...).
#[inline]
fn geometric_skip<R: Rng + ?Sized>(rng: &mut R, q: f64) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    (u.ln() / (1.0 - q).ln()).floor() as u64 + 1
}

/// Advances the coupling to the step at which the next relevant event lands
/// and applies it; equivalent in law to stepping one step at a time (nothing
/// observable changes between events since all three walks hold). Returns
/// the violation check of the applied event.
pub fn advance_to_next_event<R: Rng + ?Sized>(
    state: &mut CoupledState,
    params: &CouplingParams,
    rng: &mut R,
) -> Result<(), CouplingViolation> {
    if !state.coalesced() {
        // event = D (and S) moves; probability 2 p_{x,y} per step
        let p_d_up = params.up(state.x) + params.down(state.y);
        let p_d_down = params.up(state.y) + params.down(state.x);
        let two_p = p_d_up + p_d_down;
        state.t += geometric_skip(rng, two_p);
        // classify D's direction
        let d_dir = if rng.gen::<f64>() < p_d_up / two_p { 1i8 } else { -1 };
        if d_dir == 1 {
            // attribute: X up or Y down
            if rng.gen::<f64>() < params.up(state.x) / p_d_up {
                state.x += 1;
            } else {
                state.y -= 1;
            }
        } else if rng.gen::<f64>() < params.up(state.y) / p_d_down {
            state.y += 1;
        } else {
            state.x -= 1;
        }
        // pre-move rates were computed before the move was applied
        let p = 0.5 * two_p;
        let s_dir = if d_dir == 1 {
            1i8
        } else if rng.gen::<f64>() < p / p_d_down {
            -1
        } else {
            1
        };
        state.s_moves += 1;
        state.pending.push_back(s_dir);
        if !state.s_absorbed() {
            state.s += s_dir as i64;
            if state.s == 0 {
                state.tau_s = Some(state.t);
            }
        }
        if state.x == state.y && state.tau_d.is_none() {
            state.tau_d = Some(state.t);
        }
        copycat_on_tick(state, params, p, rng)?;
        state.check_invariants()
    } else {
        // events: merged move (rate g) and S tick (rate 2g), independent
        let g = params.up(state.x) + params.down(state.x);
        let q_event = 1.0 - (1.0 - g) * (1.0 - 2.0 * g);
        state.t += geometric_skip(rng, q_event);
        let u: f64 = rng.gen::<f64>() * q_event;
        let p_move_only = g * (1.0 - 2.0 * g);
        let p_tick_only = 2.0 * g * (1.0 - g);
        let (do_move, do_tick) = if u < p_move_only {
            (true, false)
        } else if u < p_move_only + p_tick_only {
            (false, true)
        } else {
            (true, true)
        };
        let p_pre = g; // p_{x,x} at the pre-event state
        if do_move {
            if rng.gen::<f64>() < params.up(state.x) / g {
                state.x += 1;
                state.y += 1;
            } else {
                state.x -= 1;
                state.y -= 1;
            }
        }
        if do_tick {
            let dir: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            state.s_moves += 1;
            state.pending.push_back(dir);
            if !state.s_absorbed() {
                state.s += dir as i64;
                if state.s == 0 {
                    state.tau_s = Some(state.t);
                }
            }
            copycat_on_tick(state, params, p_pre, rng)?;
        }
        state.check_invariants()
    }
}

fn copycat_on_tick<R: Rng + ?Sized>(
    state: &mut CoupledState,
    params: &CouplingParams,
    p: f64,
    rng: &mut R,
) -> Result<(), CouplingViolation> {
    if state.tau_l.is_some() {
        return Ok(());
    }
    let q = params.copycat_rate / (2.0 * p);
    if q > 1.0 + 1e-9 {
        return Err(CouplingViolation::ThinningOverflow {
            x: state.x.max(state.y),
            y: state.x.min(state.y),
            p,
            q,
            rate: params.copycat_rate / 2.0,
        });
    }
    if rng.gen::<f64>() < q.min(1.0) {
        let dir = state.pending.pop_front().expect("L replays only existing moves");
        state.l += dir as i64;
        state.l_moves += 1;
        if state.l == 0 {
            state.tau_l = Some(state.t);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Replicated coalescence experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CoalescenceReport {
    pub t_grid: Vec<u64>,
    pub mean_d: Vec<f64>,
    pub p_tau_d_gt: Vec<f64>,
    pub p_tau_l_gt: Vec<f64>,
    /// `(1 - (n+m)/(2|E|nm))^t * (x0 - y0)`, the drift-iteration bound on
    /// `E[D_t]`.
    pub bound: Vec<f64>,
    /// Standard errors of `mean_d`.
    pub se_d: Vec<f64>,
    /// Count of grid points where `mean_d > bound + 3 se`; must be 0.
    pub bound_violations: u64,
    pub replicas: u64,
    pub horizon: u64,
}

/// Runs the triple coupling over independent replicas, recording D along a
/// time grid and the hitting-time tails. Event-driven, so cost scales with
/// the number of moves rather than the horizon.
pub fn coalescence_tail(
    params: &CouplingParams,
    x0: u64,
    y0: u64,
    horizon: u64,
    num_replicas: u64,
    t_grid: &[u64],
    seed: u64,
) -> Result<CoalescenceReport, CouplingViolation> {
    assert!(x0 >= y0 && x0 <= params.n && y0 >= params.n - params.m);
    assert!(t_grid.windows(2).all(|w| w[0] < w[1]), "grid must be increasing");
    assert!(t_grid.last().map_or(true, |&t| t <= horizon), "grid exceeds horizon");
    struct ReplicaOut {
        d_at: Vec<u64>,
        tau_d: Option<u64>,
        tau_l: Option<u64>,
    }
    let outs: Vec<Result<ReplicaOut, CouplingViolation>> =
        crate::replicas::run_replicas(seed, num_replicas, |_, rng| {
            let mut st = CoupledState::new(x0, y0);
            let mut d_at = Vec::with_capacity(t_grid.len());
            let mut gi = 0usize;
            while st.tau_l.is_none() && st.t < horizon {
                let d_prev = st.d() as u64;
                advance_to_next_event(&mut st, params, rng)?;
                while gi < t_grid.len() && t_grid[gi] < st.t {
                    // grid point passed inside the skip: D held its old value
                    d_at.push(d_prev);
                    gi += 1;
                }
                while gi < t_grid.len() && t_grid[gi] == st.t {
                    d_at.push(st.d() as u64);
                    gi += 1;
                }
            }
            // after tau_L the pair has long coalesced, D stays 0; if the
            // horizon cut the run short the remaining grid points keep the
            // final value
            while gi < t_grid.len() {
                d_at.push(st.d() as u64);
                gi += 1;
            }
            Ok(ReplicaOut { d_at, tau_d: st.tau_d, tau_l: st.tau_l })
        });
    let outs: Vec<ReplicaOut> = outs.into_iter().collect::<Result<_, _>>()?;

    let r = num_replicas as f64;
    let mut mean_d = vec![0.0; t_grid.len()];
    let mut var_d = vec![0.0; t_grid.len()];
    for o in &outs {
        for (i, &d) in o.d_at.iter().enumerate() {
            mean_d[i] += d as f64;
        }
    }
    for v in mean_d.iter_mut() {
        *v /= r;
    }
    for o in &outs {
        for (i, &d) in o.d_at.iter().enumerate() {
            var_d[i] += (d as f64 - mean_d[i]).powi(2);
        }
    }
    let se_d: Vec<f64> = var_d.iter().map(|v| (v / (r * (r - 1.0).max(1.0))).sqrt()).collect();

    let gap = (params.n + params.m) as f64 * params.rate_unit;
    let d0 = (x0 - y0) as f64;
    let bound: Vec<f64> =
        t_grid.iter().map(|&t| d0 * (t as f64 * (-gap).ln_1p()).exp()).collect();
    let mut bound_violations = 0u64;
    for i in 0..t_grid.len() {
        if mean_d[i] > bound[i] + 3.0 * se_d[i] {
            bound_violations += 1;
        }
    }

    let tail_gt = |taus: Vec<Option<u64>>, t: u64| -> f64 {
        taus.iter().filter(|tau| tau.map_or(true, |v| v > t)).count() as f64 / r
    };
    let p_tau_d_gt: Vec<f64> = t_grid
        .iter()
        .map(|&t| tail_gt(outs.iter().map(|o| o.tau_d).collect(), t))
        .collect();
    let p_tau_l_gt: Vec<f64> = t_grid
        .iter()
        .map(|&t| tail_gt(outs.iter().map(|o| o.tau_l).collect(), t))
        .collect();

    Ok(CoalescenceReport {
        t_grid: t_grid.to_vec(),
        mean_d,
        p_tau_d_gt,
        p_tau_l_gt,
        bound,
        se_d,
        bound_violations,
        replicas: num_replicas,
        horizon,
    })
}

/// Least-squares slope of `log P(tau_L > u M)` against `log u` over a
/// geometric grid of `u`; the copycat hitting-tail exponent (expected
/// near -1/2).
pub fn fit_tail_exponent(report: &CoalescenceReport, m_scale: f64, u_lo: f64, u_hi: f64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in report.t_grid.iter().enumerate() {
        let u = t as f64 / m_scale;
        let p = report.p_tau_l_gt[i];
        if u >= u_lo && u <= u_hi && p > 0.0 && p < 1.0 {
            xs.push(u.ln());
            ys.push(p.ln());
        }
    }
    assert!(xs.len() >= 3, "not enough tail points to fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    num / den
}

/// Empirical one-step drift at a fixed pair state, per-step construction.
pub fn empirical_drift<R: Rng + ?Sized>(
    params: &CouplingParams,
    x: u64,
    y: u64,
    samples: u64,
    rng: &mut R,
) -> (f64, f64) {
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..samples {
        let mut st = CoupledState::new(x, y);
        step_coupled_bl(&mut st, params, rng);
        let delta = st.d() as f64 - (x - y) as f64;
        sum += delta;
        sumsq += delta * delta;
    }
    let mean = sum / samples as f64;
    let var = (sumsq / samples as f64 - mean * mean).max(0.0);
    (mean, (var / samples as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{choose2, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: u64, m: u64) -> CouplingParams {
        CouplingParams::new(n, m, ratio(choose2(n) + choose2(m) + 1, 1))
    }

    #[test]
    fn drift_zero_at_equal_states() {
        let p = params(40, 10);
        assert_eq!(p.drift(35, 35), 0.0);
    }

    #[test]
    fn empirical_drift_matches_formula() {
        let p = params(200, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(x, y) in &[(200u64, 150u64), (190, 170), (175, 160)] {
            let (mean, se) = empirical_drift(&p, x, y, 2_000_000, &mut rng);
            let expect = p.drift(x, y);
            assert!(
                (mean - expect).abs() < 4.0 * se,
                "(x={x},y={y}): {mean} vs {expect} (se {se})"
            );
        }
    }

    #[test]
    fn marginal_is_exact_bl_chain() {
        // X under the coupling vs the standalone chain: occupation at fixed t
        let p = params(30, 10);
        let t_end = 40_000u64;
        let reps = 30_000u64;
        let coupled: Vec<u64> = crate::replicas::run_replicas(5, reps, |_, rng| {
            let mut st = CoupledState::new(30, 20);
            for _ in 0..t_end {
                step_triple(&mut st, &p, rng).unwrap();
            }
            st.x
        });
        let standalone: Vec<u64> = crate::replicas::run_replicas(6, reps, |_, rng| {
            let mut k = 30u64;
            for _ in 0..t_end {
                let u: f64 = rng.gen();
                if u < p.up(k) {
                    k += 1;
                } else if u < p.up(k) + p.down(k) {
                    k -= 1;
                }
            }
            k
        });
        // two-sample chi-square over the count histogram
        let mut h1 = [0f64; 11];
        let mut h2 = [0f64; 11];
        for v in coupled {
            h1[(v - 20) as usize] += 1.0;
        }
        for v in standalone {
            h2[(v - 20) as usize] += 1.0;
        }
        let mut chi2 = 0.0;
        let mut df = 0;
        for i in 0..11 {
            let tot = h1[i] + h2[i];
            if tot < 10.0 {
                continue;
            }
            chi2 += (h1[i] - h2[i]).powi(2) / tot;
            df += 1;
        }
        // 0.999 quantile of chi-square at df <= 10 is below 29.6
        assert!(chi2 < 29.6, "chi2 = {chi2} (df = {df})");
    }

    #[test]
    fn pathwise_ordering_and_prefix_hold() {
        let p = params(60, 15); // n = 4m: thinning valid
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let mut st = CoupledState::new(60, 45);
            for _ in 0..20_000 {
                step_triple(&mut st, &p, &mut rng).unwrap();
                assert!(st.d() <= st.s.max(0) || st.tau_s.is_some());
                assert!(st.l_moves() <= st.s_moves());
            }
        }
    }

    #[test]
    fn taus_are_ordered() {
        let p = params(40, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut done = 0;
        for _ in 0..500 {
            let mut st = CoupledState::new(40, 33);
            while st.tau_l.is_none() && st.t < 50_000_000 {
                advance_to_next_event(&mut st, &p, &mut rng).unwrap();
            }
            if let (Some(td), Some(ts), Some(tl)) = (st.tau_d, st.tau_s, st.tau_l) {
                assert!(td <= ts && ts <= tl, "{td} {ts} {tl}");
                done += 1;
            }
        }
        assert!(done >= 450, "only {done} replicas coalesced");
    }

    #[test]
    fn event_driven_matches_stepwise_in_law() {
        // distribution of (x, y) at a fixed time under both runners
        let p = params(25, 8);
        let t_end = 30_000u64;
        let reps = 20_000u64;
        let a: Vec<(u64, u64)> = crate::replicas::run_replicas(41, reps, |_, rng| {
            let mut st = CoupledState::new(25, 17);
            for _ in 0..t_end {
                step_triple(&mut st, &p, rng).unwrap();
            }
            (st.x, st.y)
        });
        let b: Vec<(u64, u64)> = crate::replicas::run_replicas(42, reps, |_, rng| {
            let mut st = CoupledState::new(25, 17);
            loop {
                let frozen = (st.x, st.y);
                advance_to_next_event(&mut st, &p, rng).unwrap();
                if st.t > t_end {
                    // the event landed after t_end; state at t_end was frozen
                    return frozen;
                }
                if st.t == t_end {
                    return (st.x, st.y);
                }
            }
        });
        // compare E[x] and E[d]
        let mean = |v: &[(u64, u64)], f: &dyn Fn(&(u64, u64)) -> f64| {
            v.iter().map(f).sum::<f64>() / v.len() as f64
        };
        let mx_a = mean(&a, &|p| p.0 as f64);
        let mx_b = mean(&b, &|p| p.0 as f64);
        let md_a = mean(&a, &|p| (p.0 - p.1) as f64);
        let md_b = mean(&b, &|p| (p.0 - p.1) as f64);
        assert!((mx_a - mx_b).abs() < 0.1, "{mx_a} vs {mx_b}");
        assert!((md_a - md_b).abs() < 0.12, "{md_a} vs {md_b}");
    }

    #[test]
    fn copycat_unconditional_rate() {
        let p = params(60, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let t_end = 4_000_000u64;
        let mut st = CoupledState::new(60, 45);
        while st.t < t_end && st.tau_l.is_none() {
            advance_to_next_event(&mut st, &p, &mut rng).unwrap();
        }
        if st.tau_l.is_none() {
            let rate = st.l_moves() as f64 / st.t as f64;
            let expect = p.copycat_rate;
            let se = (expect / t_end as f64).sqrt();
            assert!((rate - expect).abs() < 5.0 * se, "{rate} vs {expect}");
        }
    }

    #[test]
    fn thinning_violation_detected_below_3m() {
        // for n < 3m the rate parabola dips below the copycat rate at mid
        // states and the runtime assertion must fire
        let p = params(20, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = CoupledState::new(20, 5);
        let mut seen = false;
        for _ in 0..100_000 {
            if let Err(CouplingViolation::ThinningOverflow { q, .. }) =
                advance_to_next_event(&mut st, &p, &mut rng)
            {
                assert!(q > 1.0);
                seen = true;
                break;
            }
        }
        assert!(seen, "expected a thinning violation at n < 3m");
    }

    #[test]
    fn coalescence_report_bound_holds() {
        let p = params(200, 50);
        let grid: Vec<u64> = (0..20).map(|i| 1u64 << (i + 10)).collect();
        let report =
            coalescence_tail(&p, 200, 150, 1 << 32, 3_000, &grid, 99).expect("no violations");
        assert_eq!(report.bound_violations, 0);
        // trivial coalescence: x0 = y0
        let r2 = coalescence_tail(&p, 180, 180, 1000, 10, &[5, 10], 7).unwrap();
        assert!(r2.p_tau_d_gt.iter().all(|&v| v == 0.0));
    }
}
