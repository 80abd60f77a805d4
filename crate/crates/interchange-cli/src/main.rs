//! `interchange` — experiments on the lazy interchange process, its lumped
//! chains, and the complete-graph exclusion process.
//!
//! Every subcommand is deterministic given its config and seed, writes
//! outputs atomically under the output directory (flag `--out`, overridable
//! with `INTERCHANGE_OUT_DIR`), and stamps them with a config hash. Exit
//! codes: 0 success, 2 invalid arguments, 3 invariant violation during
//! compute.

mod output;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use interchange::analytics::{
    self, bbb_search, bottleneck_relaxation_bound, chebyshev_separation, gamma_law,
    negcorr_check, product_condition, regime_prediction, wilson_bound, RegimeConfig,
};
use interchange::couplings::{self, CouplingParams};
use interchange::dynamics;
use interchange::graphs::{GraphKind, GraphSpec, WeightedGraph};
use interchange::lumped::{self, TvEvaluator};
use interchange::mixing::{self, Statistic};
use interchange::rational::{choose2, ratio, ratio_to_f64, Ratio};
use interchange::replicas;
use output::{fmt_f64, Provenance};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "interchange", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Serialize, Deserialize)]
#[serde(default)]
struct Common {
    /// Base seed; replica i uses stream seed ^ i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (env INTERCHANGE_OUT_DIR overrides).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for data-parallel sections (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Load parameters from a JSON config file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Default for Common {
    fn default() -> Self {
        Common { seed: 0, out: PathBuf::from("out"), workers: None, config: None }
    }
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Build and validate a graph family instance; emit its JSON spec.
    Graph(GraphArgs),
    /// Simulate trajectories and stream observables as CSV.
    Simulate(SimulateArgs),
    /// Exact lumped-chain profiles: tmix, spectral gap, d(t) curves.
    Lumped(LumpedArgs),
    /// Closed-form moments with optional Monte Carlo cross-check.
    Moments(MomentsArgs),
    /// Wilson bound, bottleneck bounds, Chebyshev certificate.
    Bounds(BoundsArgs),
    /// Three-layer coupling experiment: drift, coalescence, copycat tails.
    Couple(CoupleArgs),
    /// Mixing profiles and cutoff-ratio scans.
    Profile(ProfileArgs),
    /// Exclusion-process experiment (count projection, purple checks).
    Exclusion(ExclusionArgs),
    /// Bounded-bad-bottleneck search.
    Bbb(BbbArgs),
    /// Compare matched statistics between two graph processes.
    Compare(CompareArgs),
}

fn parse_kind(s: &str) -> Result<GraphKind> {
    Ok(match s {
        "dumbbell" => GraphKind::Dumbbell,
        "symmetrized" => GraphKind::Symmetrized,
        "half-symmetrized" | "half_symmetrized" => GraphKind::HalfSymmetrized,
        "complete" => GraphKind::Complete,
        other => bail!("unknown graph kind '{other}'"),
    })
}

fn build_graph(kind: &str, n: u64, m: u64) -> Result<WeightedGraph> {
    let kind = parse_kind(kind)?;
    WeightedGraph::from_spec(GraphSpec { kind, n, m }).map_err(|e| anyhow!("{e}"))
}

fn e_mass(n: u64, m: u64) -> Ratio {
    ratio(choose2(n) + choose2(m) + 1, 1)
}

/// When `--config` is given it replaces the experiment parameters wholesale;
/// runtime options (seed, out, workers) always come from the command line.
fn load_config<T: for<'de> Deserialize<'de> + Clone + HasCommon>(
    common: &Common,
    flags: &T,
) -> Result<T> {
    let mut loaded = match &common.config {
        None => flags.clone(),
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&body).with_context(|| "parsing config JSON")?
        }
    };
    *loaded.common_mut() = common.clone();
    Ok(loaded)
}

trait HasCommon {
    fn common_mut(&mut self) -> &mut Common;
}

macro_rules! has_common {
    ($($ty:ty),*) => {
        $(impl HasCommon for $ty {
            fn common_mut(&mut self) -> &mut Common {
                &mut self.common
            }
        })*
    };
}

has_common!(
    GraphArgs, SimulateArgs, LumpedArgs, MomentsArgs, BoundsArgs, CoupleArgs, ProfileArgs,
    ExclusionArgs, BbbArgs, CompareArgs
);

fn out_dir(common: &Common) -> PathBuf {
    std::env::var_os("INTERCHANGE_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| common.out.clone())
}

fn install_pool<F: FnOnce() -> Result<()> + Send>(workers: Option<usize>, f: F) -> Result<()> {
    match workers {
        None => f(),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| anyhow!("building worker pool: {e}"))?;
            pool.install(f)
        }
    }
}

// ---------------------------------------------------------------------------
// graph
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct GraphArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, default_value = "dumbbell")]
    kind: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Also list edges (small graphs only).
    #[arg(long, default_value_t = false)]
    edges: bool,
}

fn cmd_graph(args: &GraphArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let g = build_graph(&p.kind, p.n, p.m)?;
    #[derive(Serialize)]
    struct Out {
        spec: GraphSpec,
        edge_mass_total: String,
        edge_count: String,
        num_vertices: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<(u64, u64, String)>>,
    }
    let edges = if p.edges {
        Some(
            g.enumerate_edges()
                .into_iter()
                .map(|(u, v, w)| (u, v, format!("{}/{}", w.numer(), w.denom())))
                .collect(),
        )
    } else {
        None
    };
    let result = Out {
        spec: g.spec(),
        edge_mass_total: g.edge_mass_total().to_string(),
        edge_count: g.edge_count().to_string(),
        num_vertices: g.num_vertices(),
        edges,
    };
    let prov = Provenance::new("graph", &p, p.common.seed)?;
    let path = output::write_json(&out_dir(&p.common), "graph.json", &prov, &result)?;
    println!("graph {:?} n={} m={} mass={} -> {}", g.kind(), g.n(), g.m(), g.edge_mass_total(), path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// interchange | exclusion
    #[arg(long, default_value = "interchange")]
    process: String,
    #[arg(long, default_value = "dumbbell")]
    kind: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Labelled particles (exclusion only).
    #[arg(long, default_value_t = 0)]
    k: u64,
    #[arg(long)]
    t: u64,
    #[arg(long, default_value_t = 1)]
    stride: u64,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let seed = p.common.seed;
    let prov = Provenance::new("simulate", &p, seed)?;
    let mut rows_out: Vec<String> = Vec::new();
    match p.process.as_str() {
        "interchange" => {
            let g = build_graph(&p.kind, p.n, p.m)?;
            let per: Vec<Vec<dynamics::TrajectoryRow>> =
                replicas::run_replicas(seed, p.replicas, |_, rng| {
                    dynamics::run_trajectory(&g, p.t, p.stride, rng)
                });
            for (i, rows) in per.iter().enumerate() {
                for r in rows {
                    rows_out.push(format!(
                        "{i},{},{},{},{},{}",
                        r.t, r.l, r.bridge_count, r.purple_count, r.fixed_points
                    ));
                }
            }
        }
        "exclusion" => {
            if p.k < 1 || p.k > p.n {
                bail!("exclusion needs 1 <= k <= n");
            }
            let per: Vec<Vec<String>> = replicas::run_replicas(seed, p.replicas, |i, rng| {
                let mut s = dynamics::ExclusionState::new(p.n, p.k);
                let mut rows = Vec::new();
                let mut push = |s: &dynamics::ExclusionState| {
                    rows.push(format!(
                        "{i},{},{},{},{},{}",
                        s.t(),
                        p.k - s.in_k(),
                        s.applied_crossing(),
                        s.purple_count(),
                        s.fixed_points()
                    ));
                };
                push(&s);
                for t in 1..=p.t {
                    dynamics::step_exclusion(&mut s, rng);
                    if t % p.stride.max(1) == 0 || t == p.t {
                        push(&s);
                    }
                }
                rows
            });
            for rows in per {
                rows_out.extend(rows);
            }
        }
        other => bail!("unknown process '{other}'"),
    }
    let path = output::write_csv(
        &out_dir(&p.common),
        "trajectory.csv",
        "trajectory.v1",
        &prov,
        "replica,t,l,bridge_count,purple_count,fixed_points",
        &rows_out,
    )?;
    println!("simulate {} rows -> {}", rows_out.len(), path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// lumped
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct LumpedArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// single | pair | bl | gprime | exclusion-count
    #[arg(long, default_value = "bl")]
    chain: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Particles for the exclusion count projection.
    #[arg(long, default_value_t = 0)]
    k: u64,
    /// Comma-separated eps thresholds.
    #[arg(long, default_value = "0.25", value_delimiter = ',')]
    eps: Vec<f64>,
    /// Also emit the exact d(t) CSV curve (and SVG).
    #[arg(long, default_value_t = false)]
    curve: bool,
}

fn build_chain(p: &LumpedArgs) -> Result<lumped::LumpedChain> {
    let e = e_mass(p.n, p.m);
    let chain = match p.chain.as_str() {
        "single" => lumped::single_particle_chain(p.n, p.m, e),
        "pair" => lumped::pair_chain(p.n, p.m, e),
        "bl" => lumped::bernoulli_laplace_chain(p.n, p.m, e),
        "gprime" => lumped::g_prime_single_particle_chain(p.n, p.m, e),
        "exclusion-count" => lumped::exclusion_count_chain(p.n, p.k),
        other => bail!("unknown chain '{other}'"),
    };
    chain.map_err(|e| anyhow!("{e}"))
}

fn cmd_lumped(args: &LumpedArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let chain = build_chain(&p)?;
    let mut ev = TvEvaluator::new(&chain);
    let s = chain.num_states();
    let gap = lumped::spectral_gap(&chain);

    #[derive(Serialize)]
    struct TmixEntry {
        eps: f64,
        t: u64,
        low_endpoint: u64,
        high_endpoint: u64,
        observed_over_predicted: f64,
    }
    #[derive(Serialize)]
    struct Out {
        chain: String,
        states: usize,
        n: u64,
        m: u64,
        k: u64,
        gap: f64,
        lambda2: f64,
        gap_closed_form: Option<f64>,
        tmix: Vec<TmixEntry>,
        prediction: analytics::RegimePrediction,
        max_drift: f64,
    }

    let pred = regime_prediction(p.n, p.m.max(1).min(p.n), RegimeConfig::default());
    let mut entries = Vec::new();
    for &eps in &p.eps {
        let lo = lumped::tmix_exact_capped(&mut ev, 0, eps, 63).map_err(Invariant::wrap_lumped)?;
        let hi = lumped::tmix_exact_capped(&mut ev, s - 1, eps, 63).map_err(Invariant::wrap_lumped)?;
        let t = lo.max(hi);
        entries.push(TmixEntry {
            eps,
            t,
            low_endpoint: lo,
            high_endpoint: hi,
            observed_over_predicted: t as f64 / pred.predicted_tmix,
        });
    }
    let dir = out_dir(&p.common);
    let prov = Provenance::new("lumped", &p, p.common.seed)?;
    if p.curve {
        let center = entries.first().map(|e| e.t).unwrap_or(2).max(2);
        let worse = if entries.first().map(|e| e.low_endpoint >= e.high_endpoint).unwrap_or(true)
        {
            0
        } else {
            s - 1
        };
        let mut rows = Vec::new();
        let mut pts = Vec::new();
        for t in mixing::geometric_grid(center / 8, center.saturating_mul(3), 1.25) {
            let d = ev.tv(worse, t).map_err(Invariant::wrap_lumped)?;
            rows.push(format!("{t},{}", fmt_f64(d)));
            pts.push((t as f64, d));
        }
        output::write_csv(&dir, "dcurve.csv", "dcurve.v1", &prov, "t,d", &rows)?;
        output::write_svg_curve(
            &dir,
            "dcurve.svg",
            &pts,
            pred.predicted_tmix,
            &format!("exact d(t), {} chain n={} m={}", p.chain, p.n, p.m),
        )?;
    }
    let result = Out {
        chain: p.chain.clone(),
        states: s,
        n: p.n,
        m: p.m,
        k: p.k,
        gap: gap.gap,
        lambda2: 1.0 - gap.gap,
        gap_closed_form: gap.closed_form,
        tmix: entries,
        prediction: pred,
        max_drift: ev.max_drift,
    };
    let path = output::write_json(&dir, "lumped.json", &prov, &result)?;
    println!(
        "lumped {} n={} m={}: tmix={:?} -> {}",
        p.chain,
        p.n,
        p.m,
        result.tmix.iter().map(|e| e.t).collect::<Vec<_>>(),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct MomentsArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    t: u64,
    /// Monte Carlo replicas on the symmetrized graph (0 = formulas only).
    #[arg(long, default_value_t = 0)]
    replicas: u64,
}

fn cmd_moments(args: &MomentsArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let e = e_mass(p.n, p.m);
    let mu = analytics::indicator_mean(p.n, p.m, e, p.t);
    let cov = analytics::pair_cov(p.n, p.m, e, p.t);
    let (l_mean, l_var) = analytics::lt_moments(p.n, p.m, e, p.t);

    struct McRow {
        quantity: &'static str,
        formula: f64,
        mc: Option<f64>,
        se: Option<f64>,
    }
    let mut rows = vec![
        McRow { quantity: "indicator_mean", formula: mu, mc: None, se: None },
        McRow { quantity: "pair_cov", formula: cov, mc: None, se: None },
        McRow { quantity: "l_mean", formula: l_mean, mc: None, se: None },
        McRow { quantity: "l_var", formula: l_var, mc: None, se: None },
    ];

    if p.replicas > 0 {
        let g = WeightedGraph::symmetrized(p.n, p.m).map_err(|e| anyhow!("{e}"))?;
        // per replica: indicators of particles 1 and 2, and L
        let data: Vec<(f64, f64, f64)> =
            replicas::run_replicas(p.common.seed, p.replicas, |_, rng| {
                let (config, obs) = dynamics::run_to(&g, p.t, rng);
                let i1 = (config.position_of(1) > p.n) as u8 as f64;
                let i2 = (config.position_of(2) > p.n) as u8 as f64;
                (i1, i2, obs.l() as f64)
            });
        let r = p.replicas as f64;
        let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| data.iter().map(f).sum::<f64>() / r;
        let m1 = mean(&|d| d.0);
        let m2 = mean(&|d| d.1);
        let m12 = mean(&|d| d.0 * d.1);
        let ml = mean(&|d| d.2);
        let ml2 = mean(&|d| d.2 * d.2);
        let cov_hat = m12 - m1 * m2;
        let var_hat = (ml2 - ml * ml) * r / (r - 1.0);
        // standard errors: binomial for means; moment-based for cov and var
        let se_mu = (mu * (1.0 - mu) / r).sqrt();
        let se_cov = analytics::cov_estimator_se(cov + mu * mu, mu, r);
        let m4 = mean(&|d| (d.2 - ml).powi(4));
        let se_var = ((m4 - var_hat * var_hat).max(0.0) / r).sqrt();
        let se_l = (var_hat / r).sqrt();
        rows[0].mc = Some(m1);
        rows[0].se = Some(se_mu);
        rows[1].mc = Some(cov_hat);
        rows[1].se = Some(se_cov);
        rows[2].mc = Some(ml);
        rows[2].se = Some(se_l);
        rows[3].mc = Some(var_hat);
        rows[3].se = Some(se_var);
    }

    let prov = Provenance::new("moments", &p, p.common.seed)?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.quantity,
                fmt_f64(r.formula),
                r.mc.map(fmt_f64).unwrap_or_default(),
                r.se.map(fmt_f64).unwrap_or_default(),
                match (r.mc, r.se) {
                    (Some(mc), Some(se)) if se > 0.0 => fmt_f64((mc - r.formula) / se),
                    _ => String::new(),
                }
            )
        })
        .collect();
    let dir = out_dir(&p.common);
    let path = output::write_csv(
        &dir,
        "moments.csv",
        "moments.v1",
        &prov,
        "quantity,formula,mc,se,z",
        &csv_rows,
    )?;
    #[derive(Serialize)]
    struct Out {
        n: u64,
        m: u64,
        t: u64,
        replicas: u64,
        indicator_mean: f64,
        pair_cov: f64,
        l_mean: f64,
        l_var: f64,
    }
    output::write_json(
        &dir,
        "moments.json",
        &prov,
        &Out {
            n: p.n,
            m: p.m,
            t: p.t,
            replicas: p.replicas,
            indicator_mean: mu,
            pair_cov: cov,
            l_mean,
            l_var,
        },
    )?;
    println!("moments n={} m={} t={} -> {}", p.n, p.m, p.t, path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct BoundsArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    /// Chebyshev lambda for the certificate.
    #[arg(long, default_value_t = 50.0)]
    lambda: f64,
    /// Time for the certificate; defaults to t_{n,lambda}.
    #[arg(long)]
    t: Option<u64>,
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let e = e_mass(p.n, p.m);
    let t = p.t.unwrap_or_else(|| mixing::t_n_lambda(p.n, p.m, e, p.lambda));
    let (p_chain, p_stat) = chebyshev_separation(p.n, p.m, e, t, p.lambda);
    let cert = mixing::lower_bound_certificate(p.n, p.m, e, t, p.lambda);
    let g = WeightedGraph::dumbbell(p.n, p.m).map_err(|e| anyhow!("{e}"))?;
    #[derive(Serialize)]
    struct Out {
        n: u64,
        m: u64,
        lambda: f64,
        t: u64,
        wilson: analytics::WilsonBound,
        wilson_asymptotic: f64,
        prediction: analytics::RegimePrediction,
        p_chain: f64,
        p_stationary: f64,
        certificate: f64,
        relax_bound_bridge_vertex: f64,
        relax_bound_small_clique_vertex: Option<f64>,
        product_condition_at_prediction: f64,
    }
    let pred = regime_prediction(p.n, p.m, RegimeConfig::default());
    let gap = ratio_to_f64(&(ratio((p.n + p.m) as u128, 2 * p.n as u128 * p.m as u128) / e));
    let result = Out {
        n: p.n,
        m: p.m,
        lambda: p.lambda,
        t,
        wilson: wilson_bound(p.n, p.m, e),
        wilson_asymptotic: analytics::wilson_asymptotic(p.n, p.m, e),
        prediction: pred,
        p_chain,
        p_stationary: p_stat,
        certificate: cert,
        relax_bound_bridge_vertex: bottleneck_relaxation_bound(&g, p.n + 1),
        relax_bound_small_clique_vertex: (p.m >= 2)
            .then(|| bottleneck_relaxation_bound(&g, p.n + 2)),
        product_condition_at_prediction: product_condition(gap, pred.predicted_tmix),
    };
    let prov = Provenance::new("bounds", &p, p.common.seed)?;
    let path = output::write_json(&out_dir(&p.common), "bounds.json", &prov, &result)?;
    println!(
        "bounds n={} m={}: certificate={:.4} wilson_steps={:.3e} -> {}",
        p.n,
        p.m,
        cert,
        result.wilson.steps,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// couple
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct CoupleArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    /// Start of chain X (default n).
    #[arg(long)]
    x0: Option<u64>,
    /// Start of chain Y (default n - m).
    #[arg(long)]
    y0: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    replicas: u64,
    /// Horizon in steps (default: 1e3 * |E| n / m, enough for tail fits).
    #[arg(long)]
    horizon: Option<u64>,
    /// Number of drift states sampled for the conditional-drift check.
    #[arg(long, default_value_t = 20)]
    drift_states: u64,
    #[arg(long, default_value_t = 1_000_000)]
    drift_samples: u64,
}

fn cmd_couple(args: &CoupleArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let e = e_mass(p.n, p.m);
    let params = CouplingParams::new(p.n, p.m, e);
    let x0 = p.x0.unwrap_or(p.n);
    let y0 = p.y0.unwrap_or(p.n - p.m);
    if !(y0 <= x0 && x0 <= p.n && y0 >= p.n - p.m) {
        bail!("need n-m <= y0 <= x0 <= n");
    }
    let m_scale = ratio_to_f64(&e) * p.n as f64 / p.m as f64;
    let horizon = p.horizon.unwrap_or((2e3 * m_scale) as u64);
    let grid = mixing::geometric_grid((m_scale / 4.0) as u64 + 1, horizon, 1.3);
    let report =
        couplings::coalescence_tail(&params, x0, y0, horizon, p.replicas, &grid, p.common.seed)
            .map_err(|e| Invariant::wrap(anyhow!("{e}")))?;

    // conditional drift at sampled states
    #[derive(Serialize)]
    struct DriftPoint {
        x: u64,
        y: u64,
        empirical: f64,
        se: f64,
        exact: f64,
        within_4se: bool,
    }
    let mut drift_points = Vec::new();
    {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(p.common.seed ^ 0xd41f);
        for i in 0..p.drift_states {
            let x = p.n - (i * 3) % (p.m + 1);
            let y = (p.n - p.m) + (i * 7919) % (x - (p.n - p.m) + 1);
            let (x, y) = (x.max(y), x.min(y));
            let (emp, se) = couplings::empirical_drift(&params, x, y, p.drift_samples, &mut rng);
            let exact = params.drift(x, y);
            drift_points.push(DriftPoint {
                x,
                y,
                empirical: emp,
                se,
                exact,
                within_4se: (emp - exact).abs() <= 4.0 * se,
            });
        }
    }

    let exponent = couplings::fit_tail_exponent(&report, m_scale, 10.0, 1e3);
    #[derive(Serialize)]
    struct Out<'a> {
        n: u64,
        m: u64,
        x0: u64,
        y0: u64,
        m_scale: f64,
        fitted_tail_exponent: f64,
        bound_violations: u64,
        drift: &'a [DriftPoint],
    }
    let prov = Provenance::new("couple", &p, p.common.seed)?;
    let dir = out_dir(&p.common);
    let rows: Vec<String> = report
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            format!(
                "{t},{},{},{},{}",
                fmt_f64(report.mean_d[i]),
                fmt_f64(report.bound[i]),
                fmt_f64(report.p_tau_d_gt[i]),
                fmt_f64(report.p_tau_l_gt[i])
            )
        })
        .collect();
    output::write_csv(
        &dir,
        "couple.csv",
        "couple.v1",
        &prov,
        "t,mean_d,bound,p_tau_d_gt,p_tau_l_gt",
        &rows,
    )?;
    let result = Out {
        n: p.n,
        m: p.m,
        x0,
        y0,
        m_scale,
        fitted_tail_exponent: exponent,
        bound_violations: report.bound_violations,
        drift: &drift_points,
    };
    let path = output::write_json(&dir, "couple.json", &prov, &result)?;
    if report.bound_violations > 0 {
        return Err(Invariant::wrap(anyhow!(
            "E[D_t] exceeded the drift bound at {} grid points",
            report.bound_violations
        )));
    }
    println!(
        "couple n={} m={}: tail exponent {:.3}, bound violations {} -> {}",
        p.n,
        p.m,
        exponent,
        report.bound_violations,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct ProfileArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Single-instance mode: clique sizes.
    #[arg(long, default_value_t = 0)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    #[arg(long, default_value = "0.25", value_delimiter = ',')]
    eps: Vec<f64>,
    /// Scan mode: sequence like "1000:10,9000:30" of n:m pairs.
    #[arg(long)]
    scan: Option<String>,
    /// eps pair for cutoff ratios, as "0.1,0.9".
    #[arg(long, default_value = "0.1,0.9")]
    eps_pair: String,
    /// Scan the half-symmetrized process by simulation instead of the exact
    /// chain.
    #[arg(long, default_value_t = false)]
    mc: bool,
    #[arg(long, default_value_t = 4_000)]
    replicas: u64,
    /// Emit d(t) curve CSV + SVG (single-instance mode).
    #[arg(long, default_value_t = false)]
    curve: bool,
}

fn cmd_profile(args: &ProfileArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let prov = Provenance::new("profile", &p, p.common.seed)?;
    let dir = out_dir(&p.common);
    if let Some(scan) = &p.scan {
        let family: Vec<(u64, u64)> = scan
            .split(',')
            .map(|s| {
                let (n, m) = s.split_once(':').ok_or_else(|| anyhow!("bad scan entry '{s}'"))?;
                Ok((n.trim().parse()?, m.trim().parse()?))
            })
            .collect::<Result<_>>()?;
        let (a, b) = p
            .eps_pair
            .split_once(',')
            .ok_or_else(|| anyhow!("bad eps-pair"))?;
        let pair: (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        let points = if p.mc {
            mixing::cutoff_scan_simulated(&family, pair, p.replicas, p.common.seed)
        } else {
            mixing::cutoff_scan_exact(&family, pair).map_err(Invariant::wrap_lumped)?
        };
        let rows: Vec<String> = points
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{}",
                    s.n,
                    s.m,
                    s.tmix_small_eps,
                    s.tmix_large_eps,
                    fmt_f64(s.ratio)
                )
            })
            .collect();
        output::write_csv(
            &dir,
            "cutoff_scan.csv",
            "cutoff_scan.v1",
            &prov,
            "n,m,tmix_small_eps,tmix_large_eps,ratio",
            &rows,
        )?;
        let path = output::write_json(&dir, "cutoff_scan.json", &prov, &points)?;
        println!(
            "profile scan ({} points, mc={}) ratios {:?} -> {}",
            points.len(),
            p.mc,
            points.iter().map(|s| (s.ratio * 1e4).round() / 1e4).collect::<Vec<_>>(),
            path.display()
        );
        return Ok(());
    }
    if p.n == 0 || p.m == 0 {
        bail!("provide --n and --m (or --scan)");
    }
    let profile = mixing::exact_profile(p.n, p.m, &p.eps, p.curve).map_err(Invariant::wrap_lumped)?;
    if p.curve {
        let rows: Vec<String> = profile
            .times
            .iter()
            .zip(&profile.d_exact)
            .map(|(t, d)| format!("{t},{}", fmt_f64(*d)))
            .collect();
        output::write_csv(&dir, "profile_curve.csv", "dcurve.v1", &prov, "t,d", &rows)?;
        let pts: Vec<(f64, f64)> = profile
            .times
            .iter()
            .zip(&profile.d_exact)
            .map(|(t, d)| (*t as f64, *d))
            .collect();
        output::write_svg_curve(
            &dir,
            "profile_curve.svg",
            &pts,
            profile.prediction.predicted_tmix,
            &format!("exact d(t), BL chain n={} m={}", p.n, p.m),
        )?;
    }
    let path = output::write_json(&dir, "profile.json", &prov, &profile)?;
    println!(
        "profile n={} m={}: tmix {:?} obs/pred {:?} -> {}",
        p.n,
        p.m,
        profile.tmix,
        profile
            .observed_over_predicted
            .iter()
            .map(|r| (r * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// exclusion
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct ExclusionArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    replicas: u64,
    /// Also run the negative-correlation check with T = 1.2 n log k.
    #[arg(long, default_value_t = false)]
    negcorr: bool,
}

fn cmd_exclusion(args: &ExclusionArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let report = mixing::exclusion_mixing_experiment(p.n, p.k, p.eps, p.replicas, p.common.seed)
        .map_err(Invariant::wrap_lumped)?;
    #[derive(Serialize)]
    struct Out {
        report: mixing::ExclusionReport,
        gamma: analytics::GammaLaw,
        #[serde(skip_serializing_if = "Option::is_none")]
        negcorr: Option<analytics::NegCorrReport>,
    }
    let t_gamma = (1.2 * p.n as f64 * (p.k as f64).ln()).round() as u64;
    let negcorr = p.negcorr.then(|| {
        negcorr_check(p.n, p.k, t_gamma, p.replicas, interchange::replicas::phase_seed(p.common.seed, 3))
    });
    let result = Out { gamma: gamma_law(p.n, p.k, t_gamma), report, negcorr };
    let prov = Provenance::new("exclusion", &p, p.common.seed)?;
    let path = output::write_json(&out_dir(&p.common), "exclusion.json", &prov, &result)?;
    println!(
        "exclusion n={} k={}: count tmix {:?} purple ok={} -> {}",
        p.n,
        p.k,
        result.report.count_projection_tmix,
        result.report.purple.within_3_se,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bbb
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct BbbArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, default_value = "dumbbell")]
    kind: String,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    m: u64,
    /// Subset-size cap K (at most 6).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Mixing-time estimate; defaults to the regime prediction.
    #[arg(long)]
    tmix: Option<f64>,
}

fn cmd_bbb(args: &BbbArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    if p.k < 1 || p.k > 6 {
        bail!("K must be in 1..=6");
    }
    let g = build_graph(&p.kind, p.n, p.m)?;
    let tmix = p.tmix.unwrap_or_else(|| {
        if g.m() >= 1 {
            regime_prediction(g.n(), g.m(), RegimeConfig::default()).predicted_tmix
        } else {
            g.edge_mass_total() as f64
        }
    });
    let report = bbb_search(&g, tmix, p.k);
    #[derive(Serialize)]
    struct Out {
        spec: GraphSpec,
        tmix_estimate: f64,
        k: usize,
        found: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        report: Option<analytics::BottleneckReport>,
    }
    let result =
        Out { spec: g.spec(), tmix_estimate: tmix, k: p.k, found: report.is_some(), report };
    let prov = Provenance::new("bbb", &p, p.common.seed)?;
    let path = output::write_json(&out_dir(&p.common), "bbb.json", &prov, &result)?;
    match &result.report {
        Some(r) => println!(
            "bbb {:?} n={} m={}: W={:?} boundary={} -> {}",
            g.kind(),
            g.n(),
            g.m(),
            r.w,
            r.boundary_size,
            path.display()
        ),
        None => println!(
            "bbb {:?} n={} m={}: no bounded bad bottleneck -> {}",
            g.kind(),
            g.n(),
            g.m(),
            path.display()
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Args, Clone, Serialize, Deserialize)]
struct CompareArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, default_value = "dumbbell")]
    kind_a: String,
    #[arg(long, default_value = "symmetrized")]
    kind_b: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    /// l | fixed-points
    #[arg(long, default_value = "l")]
    statistic: String,
    #[arg(long)]
    t_max: u64,
    #[arg(long, default_value_t = 16)]
    grid_points: u64,
    #[arg(long, default_value_t = 4_000)]
    replicas: u64,
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let p = load_config(&args.common, args)?;
    let a = build_graph(&p.kind_a, p.n, p.m)?;
    let b = build_graph(&p.kind_b, p.n, p.m)?;
    let stat = match p.statistic.as_str() {
        "l" => Statistic::LCount,
        "fixed-points" | "fixed_points" => Statistic::FixedPointsK1,
        other => bail!("unknown statistic '{other}'"),
    };
    let step = (p.t_max / p.grid_points.max(1)).max(1);
    let grid: Vec<u64> = (1..=p.grid_points).map(|i| i * step).collect();
    let points = mixing::compare_processes(&a, &b, stat, &grid, p.replicas, p.common.seed);
    let prov = Provenance::new("compare", &p, p.common.seed)?;
    let dir = out_dir(&p.common);
    let rows: Vec<String> = points
        .iter()
        .map(|c| format!("{},{},{}", c.t, fmt_f64(c.distance), fmt_f64(c.se)))
        .collect();
    output::write_csv(&dir, "compare.csv", "compare.v1", &prov, "t,distance,se", &rows)?;
    let path = output::write_json(&dir, "compare.json", &prov, &points)?;
    let max_d = points.iter().map(|c| c.distance).fold(0.0, f64::max);
    println!(
        "compare {} vs {} n={} m={}: max distance {:.4} -> {}",
        p.kind_a,
        p.kind_b,
        p.n,
        p.m,
        max_d,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// error-to-exit-code plumbing
// ---------------------------------------------------------------------------

/// Marker for invariant violations during compute (exit code 3, as opposed
/// to validation failures which exit 2).
#[derive(Debug)]
struct Invariant;

impl Invariant {
    fn wrap(e: anyhow::Error) -> anyhow::Error {
        e.context(Invariant)
    }

    fn wrap_lumped(e: lumped::LumpedError) -> anyhow::Error {
        anyhow!("{e}").context(Invariant)
    }
}

impl std::fmt::Display for Invariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant violation")
    }
}

impl std::error::Error for Invariant {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Graph(a) => a.common.clone(),
        Command::Simulate(a) => a.common.clone(),
        Command::Lumped(a) => a.common.clone(),
        Command::Moments(a) => a.common.clone(),
        Command::Bounds(a) => a.common.clone(),
        Command::Couple(a) => a.common.clone(),
        Command::Profile(a) => a.common.clone(),
        Command::Exclusion(a) => a.common.clone(),
        Command::Bbb(a) => a.common.clone(),
        Command::Compare(a) => a.common.clone(),
    };
    let run = || match &cli.command {
        Command::Graph(a) => cmd_graph(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Lumped(a) => cmd_lumped(a),
        Command::Moments(a) => cmd_moments(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Couple(a) => cmd_couple(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Exclusion(a) => cmd_exclusion(a),
        Command::Bbb(a) => cmd_bbb(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match install_pool(common.workers, run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invariant>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
