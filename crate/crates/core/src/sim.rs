//! Monte-Carlo evaluation of online policies against the LP bound.
//!
//! Replication `r` of an experiment seeded with `seed` draws from ChaCha8
//! stream `r` of the generator keyed by `seed`, so results do not depend on
//! how replications are spread over worker threads. Aggregates are reduced in
//! replication order.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::solve_opt;
use crate::mnl::{outcome_for_qualities, quality_for_target_revenue, Assortment, EquilibriumOutcome};
use crate::policies::{InventoryState, OnlineInstance, PolicyKind};

/// Independent generator for one replication.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Draw the buyer's choice from an equilibrium outcome using one uniform variate.
///
/// Returns the purchased catalog item, or `None` for no purchase.
pub fn sample_choice<R: Rng + ?Sized>(outcome: &EquilibriumOutcome, rng: &mut R) -> Option<usize> {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (&i, &q) in outcome.members.iter().zip(&outcome.demands) {
        acc += q;
        if u < acc {
            return Some(i);
        }
    }
    None
}

/// Thread-safe memo of equilibrium outcomes keyed by assortment.
#[derive(Debug)]
pub struct OutcomeCache {
    qualities: Vec<f64>,
    outcomes: RwLock<HashMap<Assortment, Arc<EquilibriumOutcome>>>,
}

impl OutcomeCache {
    pub fn new(qualities: &[f64]) -> Self {
        Self { qualities: qualities.to_vec(), outcomes: RwLock::new(HashMap::new()) }
    }

    pub fn get(&self, s: &Assortment) -> Result<Arc<EquilibriumOutcome>> {
        if let Some(hit) = self.outcomes.read().expect("cache lock poisoned").get(s) {
            return Ok(Arc::clone(hit));
        }
        let out = Arc::new(outcome_for_qualities(&self.qualities, s.members())?);
        self.outcomes
            .write()
            .expect("cache lock poisoned")
            .entry(s.clone())
            .or_insert_with(|| Arc::clone(&out));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub assortment: Assortment,
    pub purchased: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub revenue: f64,
    pub sold_units: Vec<u32>,
    /// Empty unless the episode was run with path recording.
    pub path: Vec<Step>,
}

/// One pass of `instance.buyers()` buyers under `policy`, with a private cache.
pub fn run_episode<R: Rng + ?Sized>(policy: PolicyKind, instance: &OnlineInstance, rng: &mut R) -> Result<EpisodeResult> {
    let cache = OutcomeCache::new(instance.catalog().qualities());
    run_episode_cached(policy, instance, &cache, rng, true)
}

/// Each purchase earns the equilibrium price of the item within the offered assortment.
pub fn run_episode_cached<R: Rng + ?Sized>(
    policy: PolicyKind,
    instance: &OnlineInstance,
    cache: &OutcomeCache,
    rng: &mut R,
    record_path: bool,
) -> Result<EpisodeResult> {
    let mut state = InventoryState::full(instance.catalog());
    let mut revenue = 0.0;
    let mut path = Vec::new();
    while state.t < instance.buyers() {
        let decision = policy.decide(instance, &state);
        debug_assert!(decision.assortment.members().iter().all(|&i| state.is_available(i)));
        let outcome = cache.get(&decision.assortment)?;
        let purchased = sample_choice(&outcome, rng);
        if let Some(i) = purchased {
            state.remaining[i] -= 1;
            revenue += outcome.price_of(i).expect("purchased item is a member");
        }
        if record_path {
            path.push(Step { assortment: decision.assortment, purchased });
        }
        state.t += 1;
    }
    let sold_units = instance
        .catalog()
        .inventories()
        .iter()
        .zip(&state.remaining)
        .map(|(c, r)| c - r)
        .collect();
    Ok(EpisodeResult { revenue, sold_units, path })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

impl RevenueEstimate {
    /// Mean and standard error of `samples`, summed in order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, replications: n }
    }
}

/// Expected revenue of `policy` from `replications` independent episodes.
///
/// Runs on the current rayon pool.
pub fn estimate_revenue(
    policy: PolicyKind,
    instance: &OnlineInstance,
    cache: &OutcomeCache,
    replications: usize,
    seed: u64,
) -> Result<RevenueEstimate> {
    if replications == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    let samples = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            run_episode_cached(policy, instance, cache, &mut rng, false).map(|e| e.revenue)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RevenueEstimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub mean_revenue: f64,
    pub std_error: f64,
    pub opt: f64,
    pub ratio: f64,
    pub replications: usize,
}

impl RatioEstimate {
    pub fn new(revenue: RevenueEstimate, opt: f64) -> Self {
        Self {
            mean_revenue: revenue.mean,
            std_error: revenue.std_error,
            opt,
            ratio: revenue.mean / opt,
            replications: revenue.replications,
        }
    }

    pub fn ratio_std_error(&self) -> f64 {
        self.std_error / self.opt
    }
}

/// Empirical `E[revenue] / OPT` for one policy on one instance.
pub fn estimate_ratio(
    policy: PolicyKind,
    instance: &OnlineInstance,
    replications: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    let opt = solve_opt(instance.catalog(), instance.buyers())?.objective;
    let cache = OutcomeCache::new(instance.catalog().qualities());
    let revenue = estimate_revenue(policy, instance, &cache, replications, seed)?;
    Ok(RatioEstimate::new(revenue, opt))
}

/// `f(lambda) = max{1 + ((1 - lambda)/lambda)^2, 1/lambda}`.
pub fn heaviness_factor(lambda: f64) -> f64 {
    let r = (1.0 - lambda) / lambda;
    (1.0 + r * r).max(1.0 / lambda)
}

/// The worst-case ratio bound of the hybrid rule at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GCurvePoint {
    pub lambda: f64,
    pub f: f64,
    /// Bound when heavy stock exceeds the number of buyers.
    pub closed_branch: f64,
    /// Bound when it does not, computed numerically.
    pub numeric_branch: f64,
    pub g: f64,
}

const COARSE_STEP: f64 = 1e-3;
const FINE_STEP: f64 = 1e-5;

/// Grid search on `[a, b]` at `COARSE_STEP`, refined at `FINE_STEP` around the best point.
fn grid_search(a: f64, b: f64, maximize: bool, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let better = |v: f64, best: f64| if maximize { v > best } else { v < best };
    let scan = |lo: f64, hi: f64, step: f64, seed: (f64, f64)| {
        let k = ((hi - lo) / step).ceil().max(1.0) as usize;
        (0..=k).fold(seed, |(bx, bv), j| {
            let x = if j == k { hi } else { lo + step * j as f64 };
            let v = f(x);
            if better(v, bv) { (x, v) } else { (bx, bv) }
        })
    };
    if b <= a {
        return (a, f(a));
    }
    let start = (a, f(a));
    let (x, v) = scan(a, b, COARSE_STEP, start);
    scan((x - COARSE_STEP).max(a), (x + COARSE_STEP).min(b), FINE_STEP, (x, v))
}

pub fn closed_branch(lambda: f64) -> f64 {
    let f = heaviness_factor(lambda);
    let num = ((1.0 - lambda) * (lambda + f)).sqrt() - f.sqrt();
    let den = (f * (lambda + f)).sqrt() - (1.0 - lambda).sqrt();
    (num / den).powi(2)
}

pub fn numeric_branch(lambda: f64) -> f64 {
    let f = heaviness_factor(lambda);
    let objective = |x: f64, y: f64| {
        (1.0 - y / lambda) * ((1.0 - lambda) / 2.0 - x / (f + x)) + (y - x) * x / ((f + x) * (1.0 - x))
    };
    grid_search(0.0, lambda, false, |y| grid_search(0.0, y, true, |x| objective(x, y)).1).1
}

pub fn g_curve(lambda: f64) -> Result<GCurvePoint> {
    if !(0.5..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("threshold must lie in [0.5, 1), got {lambda}")));
    }
    let closed = closed_branch(lambda);
    let numeric = numeric_branch(lambda);
    Ok(GCurvePoint {
        lambda,
        f: heaviness_factor(lambda),
        closed_branch: closed,
        numeric_branch: numeric,
        g: closed.min(numeric),
    })
}

/// Evaluate `g` on `lo, lo + step, ...` up to `hi` (inclusive when it lands on the grid).
pub fn g_curve_table(lo: f64, hi: f64, step: f64) -> Result<Vec<GCurvePoint>> {
    if step.is_nan() || step <= 0.0 || lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::Domain(format!("bad range [{lo}, {hi}] with step {step}")));
    }
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=k).into_par_iter().map(|j| g_curve(lo + step * j as f64)).collect()
}

/// Single-item heterogeneous-buyer instance whose buyer `t` yields revenue `M^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneousInstance {
    pub base: f64,
    pub horizon: usize,
    /// Quality seen by buyers `1..=horizon`.
    pub qualities: Vec<f64>,
    pub revenues: Vec<f64>,
    pub demands: Vec<f64>,
}

pub fn adversarial_instance(base: f64, horizon: usize) -> Result<HeterogeneousInstance> {
    if !(base.is_finite() && base > 1.0) {
        return Err(Error::Domain(format!("growth base must exceed 1, got {base}")));
    }
    if horizon as f64 * base.log10() > 300.0 {
        return Err(Error::Overflow(format!("{base}^{horizon} exceeds 1e300")));
    }
    let revenues: Vec<f64> = (1..=horizon).map(|t| base.powi(t as i32)).collect();
    let qualities = revenues.iter().map(|&r| quality_for_target_revenue(r)).collect::<Result<_>>()?;
    let demands = revenues.iter().map(|r| r / (1.0 + r)).collect();
    Ok(HeterogeneousInstance { base, horizon, qualities, revenues, demands })
}

impl HeterogeneousInstance {
    /// Expected revenue of offering the item to every buyer from `start` (1-based)
    /// up to `horizon`, divided by `M^horizon`, the revenue of selling to the last buyer.
    pub fn wait_then_offer_ratio(&self, start: usize, horizon: usize) -> f64 {
        let horizon = horizon.min(self.horizon);
        let mut unsold = 1.0;
        let mut expected = 0.0;
        for t in start.max(1)..=horizon {
            expected += unsold * self.revenues[t - 1];
            unsold *= 1.0 - self.demands[t - 1];
        }
        expected / self.revenues[horizon - 1]
    }
}
