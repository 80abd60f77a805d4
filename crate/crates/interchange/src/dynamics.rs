//! Monte Carlo simulation of the ½-lazy interchange process and the labelled
//! exclusion process on the complete graph, with incrementally maintained
//! observables so a step costs O(1) regardless of system size.
//!
//! Conventions: particles and vertices are labelled `1..=N`; particle `p`
//! starts at vertex `p`. A step always counts as one attempted transposition
//! (lazy steps included). A particle is *purple* while it has never left the
//! clique (or, for exclusion, the site set) it started in.

use crate::graphs::WeightedGraph;
use crate::rational::choose2;
use rand::Rng;

/// Permutation state of the interchange process: particle positions and the
/// inverse map, kept mutually consistent. Index 0 is unused.
#[derive(Clone, Debug)]
pub struct Configuration {
    pos: Vec<u32>,
    site: Vec<u32>,
}

impl Configuration {
    /// Identity configuration: particle `p` at vertex `p`.
    pub fn identity(num_vertices: u64) -> Self {
        let v: Vec<u32> = (0..=num_vertices as u32).collect();
        Configuration { pos: v.clone(), site: v }
    }

    pub fn num_vertices(&self) -> u64 {
        self.pos.len() as u64 - 1
    }

    pub fn position_of(&self, particle: u64) -> u64 {
        self.pos[particle as usize] as u64
    }

    pub fn particle_at(&self, vertex: u64) -> u64 {
        self.site[vertex as usize] as u64
    }

    /// Swaps the contents of vertices `u` and `v`.
    pub fn apply_transposition(&mut self, u: u64, v: u64) {
        let (u, v) = (u as usize, v as usize);
        let a = self.site[u];
        let b = self.site[v];
        self.site[u] = b;
        self.site[v] = a;
        self.pos[a as usize] = v as u32;
        self.pos[b as usize] = u as u32;
    }

    /// Full consistency check of the two maps; `O(N)`, used on a sampling
    /// schedule during long runs and after every step in debug builds.
    pub fn is_valid_bijection(&self) -> bool {
        (1..self.pos.len()).all(|p| self.site[self.pos[p] as usize] as usize == p)
    }
}

/// Number of clique particles currently at their starting vertex, for a
/// clique occupying the label range `lo..=hi`.
pub fn within_clique_fixed_point_statistic(config: &Configuration, lo: u64, hi: u64) -> u64 {
    (lo..=hi).filter(|&p| config.position_of(p) == p).count() as u64
}

/// One sampled row of trajectory observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryRow {
    pub t: u64,
    /// K1-origin particles currently in K2.
    pub l: u64,
    /// Applied bridge transpositions so far.
    pub bridge_count: u64,
    /// Particles that have never left their origin clique.
    pub purple_count: u64,
    /// K1 particles currently at their starting vertex.
    pub fixed_points: u64,
}

/// Incrementally maintained observables for an interchange run.
#[derive(Clone, Debug)]
pub struct InterchangeObservables {
    n: u64,
    t: u64,
    l: u64,
    bridge_count: u64,
    purple: Vec<bool>,
    purple_count: u64,
    fixed_points: u64,
}

impl InterchangeObservables {
    pub fn new(graph: &WeightedGraph) -> Self {
        let nv = graph.num_vertices();
        InterchangeObservables {
            n: graph.n(),
            t: 0,
            l: 0,
            bridge_count: 0,
            purple: vec![true; nv as usize + 1],
            purple_count: nv,
            fixed_points: graph.n(),
        }
    }

    pub fn row(&self) -> TrajectoryRow {
        TrajectoryRow {
            t: self.t,
            l: self.l,
            bridge_count: self.bridge_count,
            purple_count: self.purple_count,
            fixed_points: self.fixed_points,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    fn clique_of(&self, v: u64) -> u8 {
        if v <= self.n {
            1
        } else {
            2
        }
    }

    fn on_move(&mut self, particle: u64, from: u64, to: u64) {
        let origin = self.clique_of(particle);
        let c_from = self.clique_of(from);
        let c_to = self.clique_of(to);
        if c_from != c_to {
            // L counts K1-origin particles in K2
            if particle <= self.n {
                if c_to == 2 {
                    self.l += 1;
                } else {
                    self.l -= 1;
                }
            }
            if c_to != origin && self.purple[particle as usize] {
                self.purple[particle as usize] = false;
                self.purple_count -= 1;
            }
        }
        if particle <= self.n {
            if from == particle {
                self.fixed_points -= 1;
            }
            if to == particle {
                self.fixed_points += 1;
            }
        }
    }
}

/// One step of the ½-lazy interchange process: an edge is attempted from the
/// weighted law and applied with probability ½; the attempted-transposition
/// counter advances either way.
#[inline]
pub fn step_interchange<R: Rng + ?Sized>(
    config: &mut Configuration,
    graph: &WeightedGraph,
    rng: &mut R,
    obs: &mut InterchangeObservables,
) {
    obs.t += 1;
    if let Some((u, v)) = graph.sample_step(rng) {
        apply_swap(config, graph, u, v, obs);
    }
}

/// Applies the transposition `{u, v}` unconditionally (used by tests that
/// force specific edges and by the stepper).
pub fn apply_swap(
    config: &mut Configuration,
    graph: &WeightedGraph,
    u: u64,
    v: u64,
    obs: &mut InterchangeObservables,
) {
    let a = config.particle_at(u);
    let b = config.particle_at(v);
    config.apply_transposition(u, v);
    obs.on_move(a, u, v);
    obs.on_move(b, v, u);
    if graph.is_bridge(u, v) {
        obs.bridge_count += 1;
    }
}

/// Runs `t_max` steps from the identity, recording a row every `stride`
/// steps (plus `t = 0` and the final step). Deterministic in the rng stream.
pub fn run_trajectory<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    t_max: u64,
    stride: u64,
    rng: &mut R,
) -> Vec<TrajectoryRow> {
    let stride = stride.max(1);
    let mut config = Configuration::identity(graph.num_vertices());
    let mut obs = InterchangeObservables::new(graph);
    let mut rows = Vec::with_capacity((t_max / stride + 2) as usize);
    rows.push(obs.row());
    for t in 1..=t_max {
        step_interchange(&mut config, graph, rng, &mut obs);
        debug_assert!(config.is_valid_bijection());
        if t % stride == 0 || t == t_max {
            rows.push(obs.row());
        }
        // sampled consistency audit on long runs
        if t % (1 << 24) == 0 {
            assert!(config.is_valid_bijection(), "bijection lost at step {t}");
        }
    }
    rows
}

/// Runs `t_max` steps and returns the final state (for statistics that read
/// the configuration directly).
pub fn run_to<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    t_max: u64,
    rng: &mut R,
) -> (Configuration, InterchangeObservables) {
    let mut config = Configuration::identity(graph.num_vertices());
    let mut obs = InterchangeObservables::new(graph);
    for t in 1..=t_max {
        step_interchange(&mut config, graph, rng, &mut obs);
        if t % (1 << 24) == 0 {
            assert!(config.is_valid_bijection(), "bijection lost at step {t}");
        }
    }
    (config, obs)
}

// ---------------------------------------------------------------------------
// Labelled exclusion process on the complete graph
// ---------------------------------------------------------------------------

/// `k` labelled particles on the `n` sites of the complete graph, starting
/// on sites `1..=k` (the set `K`). Both particle→site and site→particle maps
/// are kept so a swap and an occupancy query are O(1).
#[derive(Clone, Debug)]
pub struct ExclusionState {
    n: u64,
    k: u64,
    pos: Vec<u32>,
    occupant: Vec<u32>, // 0 = empty
    purple: Vec<bool>,
    purple_count: u64,
    in_k: u64,
    t: u64,
    attempted_within_k: u64,
    applied_within_k: u64,
    applied_crossing: u64,
    fixed_points: u64,
}

impl ExclusionState {
    pub fn new(n: u64, k: u64) -> Self {
        assert!(k >= 1 && k <= n);
        let mut pos = vec![0u32; k as usize + 1];
        let mut occupant = vec![0u32; n as usize + 1];
        for p in 1..=k {
            pos[p as usize] = p as u32;
            occupant[p as usize] = p as u32;
        }
        ExclusionState {
            n,
            k,
            pos,
            occupant,
            purple: vec![true; k as usize + 1],
            purple_count: k,
            in_k: k,
            t: 0,
            attempted_within_k: 0,
            applied_within_k: 0,
            applied_crossing: 0,
            fixed_points: k,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn purple_count(&self) -> u64 {
        self.purple_count
    }

    pub fn in_k(&self) -> u64 {
        self.in_k
    }

    /// Attempted transpositions with both sites in `K` (the gamma count).
    pub fn attempted_within_k(&self) -> u64 {
        self.attempted_within_k
    }

    /// Applied transpositions with both sites in `K` (gamma-star).
    pub fn applied_within_k(&self) -> u64 {
        self.applied_within_k
    }

    /// Applied transpositions with one site in `K` and one outside.
    pub fn applied_crossing(&self) -> u64 {
        self.applied_crossing
    }

    pub fn fixed_points(&self) -> u64 {
        self.fixed_points
    }

    pub fn position_of(&self, particle: u64) -> u64 {
        self.pos[particle as usize] as u64
    }

    pub fn is_purple(&self, particle: u64) -> bool {
        self.purple[particle as usize]
    }

    pub fn is_valid(&self) -> bool {
        (1..=self.k).all(|p| self.occupant[self.pos[p as usize] as usize] as u64 == p)
            && self.occupant.iter().filter(|&&o| o != 0).count() as u64 == self.k
    }

    fn move_particle(&mut self, p: u64, from: u64, to: u64) {
        self.pos[p as usize] = to as u32;
        let was_in = from <= self.k;
        let is_in = to <= self.k;
        if was_in != is_in {
            if is_in {
                self.in_k += 1;
            } else {
                self.in_k -= 1;
                if self.purple[p as usize] {
                    self.purple[p as usize] = false;
                    self.purple_count -= 1;
                }
            }
        }
        if from == p {
            self.fixed_points -= 1;
        }
        if to == p {
            self.fixed_points += 1;
        }
    }
}

/// One ½-lazy exclusion step: a uniform site pair is attempted;
/// occupied/occupied swaps labels, occupied/empty moves the particle,
/// empty/empty does nothing (but still counts as applied when the coin says
/// so, which is what the gamma-star statistic measures).
pub fn step_exclusion<R: Rng + ?Sized>(state: &mut ExclusionState, rng: &mut R) {
    state.t += 1;
    let n = state.n;
    let i = rng.gen_range(1..=n);
    let mut j = rng.gen_range(1..=n - 1);
    if j >= i {
        j += 1;
    }
    let within = i <= state.k && j <= state.k;
    if within {
        state.attempted_within_k += 1;
    }
    if !rng.gen_bool(0.5) {
        return;
    }
    if within {
        state.applied_within_k += 1;
    } else if (i <= state.k) != (j <= state.k) {
        state.applied_crossing += 1;
    }
    let a = state.occupant[i as usize];
    let b = state.occupant[j as usize];
    if a == 0 && b == 0 {
        return;
    }
    state.occupant[i as usize] = b;
    state.occupant[j as usize] = a;
    if a != 0 {
        state.move_particle(a as u64, i, j);
    }
    if b != 0 {
        state.move_particle(b as u64, j, i);
    }
}

/// Per-step probability that a given particle in `K` exits `K`:
/// `(n-k) / (2 C(n,2))`. Exact for purple-survival accounting.
pub fn exclusion_exit_rate(n: u64, k: u64) -> f64 {
    (n - k) as f64 / (2.0 * choose2(n) as f64)
}
