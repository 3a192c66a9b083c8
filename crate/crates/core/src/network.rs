//! The multi-buyer Bertrand game on a bipartite visibility graph.
//!
//! Buyer `k` chooses among the sellers it can see with MNL probabilities
//! `q_ik = e^{θ_ik − p_i} / (1 + Σ_j e^{θ_jk − p_j})`, and seller `i` earns
//! `p_i · min(Σ_k q_ik, c_i)`. Against fixed rival prices each buyer acts
//! like a single-seller buyer with an effective quality
//! `a_k = θ_ik − ln(1 + Σ_{j≠i} e^{θ_jk − p_j})`, which is how best
//! responses are computed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest per-pair purchase probability under which the game is well behaved.
pub const CONSISTENCY_LIMIT: f64 = 0.91;

const GRID_POINTS: usize = 512;
const CAPACITY_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteMarket {
    buyers: usize,
    sellers: usize,
    /// Row-major `buyers × sellers`.
    theta: Vec<f64>,
    visible: Vec<bool>,
    capacities: Vec<u32>,
}

impl BipartiteMarket {
    /// `theta[k][i]` is buyer `k`'s quality for seller `i`; visibility defaults to complete.
    pub fn new(theta: Vec<Vec<f64>>, visibility: Option<Vec<Vec<bool>>>, capacities: Vec<u32>) -> Result<Self> {
        let buyers = theta.len();
        let sellers = capacities.len();
        if buyers == 0 || sellers == 0 {
            return Err(Error::InvalidMarket("a market needs at least one buyer and one seller".into()));
        }
        if let Some(k) = theta.iter().position(|row| row.len() != sellers) {
            return Err(Error::InvalidMarket(format!("buyer {k} has {} qualities for {sellers} sellers", theta[k].len())));
        }
        if theta.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::InvalidMarket("qualities must be finite".into()));
        }
        if let Some(i) = capacities.iter().position(|&c| c == 0) {
            return Err(Error::InvalidMarket(format!("seller {i} has zero capacity")));
        }
        let visible = match visibility {
            None => vec![true; buyers * sellers],
            Some(v) => {
                if v.len() != buyers || v.iter().any(|row| row.len() != sellers) {
                    return Err(Error::InvalidMarket("visibility mask must match the quality matrix".into()));
                }
                v.into_iter().flatten().collect()
            }
        };
        Ok(Self { buyers, sellers, theta: theta.into_iter().flatten().collect(), visible, capacities })
    }

    pub fn buyers(&self) -> usize {
        self.buyers
    }

    pub fn sellers(&self) -> usize {
        self.sellers
    }

    pub fn theta(&self, k: usize, i: usize) -> f64 {
        self.theta[k * self.sellers + i]
    }

    pub fn is_visible(&self, k: usize, i: usize) -> bool {
        self.visible[k * self.sellers + i]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn capacity(&self, i: usize) -> u32 {
        self.capacities[i]
    }

    /// Visible pairs `(k, i)` in buyer-major order.
    pub fn visible_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.buyers)
            .flat_map(move |k| (0..self.sellers).map(move |i| (k, i)))
            .filter(|&(k, i)| self.is_visible(k, i))
    }

    /// Largest `|θ_ik|` over visible pairs.
    pub fn quality_cap(&self) -> f64 {
        self.visible_pairs().map(|(k, i)| self.theta(k, i).abs()).fold(0.0, f64::max)
    }

    /// `max{12, θ + ln(m − 1)}` with `θ` the quality cap; the `ln` arm is dropped when `m = 1`.
    pub fn price_bound(&self) -> f64 {
        let log_arm = if self.buyers > 1 { self.quality_cap() + ((self.buyers - 1) as f64).ln() } else { 0.0 };
        12f64.max(log_arm)
    }

    /// Upper end of the best-response search interval.
    pub fn price_ceiling(&self) -> f64 {
        self.price_bound().max(self.quality_cap()) + 1.0
    }

    /// One seller facing only `buyers`, with its capacity.
    pub fn single_seller(&self, seller: usize, buyers: &[usize]) -> Result<Self> {
        let theta = buyers.iter().map(|&k| vec![self.theta(k, seller)]).collect();
        let vis = buyers.iter().map(|&k| vec![self.is_visible(k, seller)]).collect();
        Self::new(theta, Some(vis), vec![self.capacity(seller)])
    }
}

/// Seller prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile(pub Vec<f64>);

impl PriceProfile {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Domain(format!("price {p} must be finite and nonnegative")));
        }
        Ok(Self(prices))
    }

    pub fn uniform(sellers: usize, price: f64) -> Self {
        Self(vec![price; sellers])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_profile(market: &BipartiteMarket, prices: &PriceProfile) -> Result<()> {
    if prices.0.len() != market.sellers {
        return Err(Error::Domain(format!("{} prices for {} sellers", prices.0.len(), market.sellers)));
    }
    Ok(())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + Σ e^{z})`, shifted by the largest exponent.
fn ln_one_plus_sum_exp(zs: impl Iterator<Item = f64> + Clone) -> f64 {
    let shift = zs.clone().fold(0.0, f64::max);
    let sum = (-shift).exp() + zs.map(|z| (z - shift).exp()).sum::<f64>();
    shift + sum.ln()
}

/// Demand matrix `q[k][i]`; invisible pairs are zero.
pub fn network_demand(market: &BipartiteMarket, prices: &PriceProfile) -> Result<Vec<Vec<f64>>> {
    check_profile(market, prices)?;
    let p = prices.as_slice();
    Ok((0..market.buyers)
        .map(|k| {
            let vis = (0..market.sellers).filter(|&i| market.is_visible(k, i));
            let ln_den = ln_one_plus_sum_exp(vis.map(|i| market.theta(k, i) - p[i]));
            (0..market.sellers)
                .map(|i| if market.is_visible(k, i) { (market.theta(k, i) - p[i] - ln_den).exp() } else { 0.0 })
                .collect()
        })
        .collect())
}

/// `Σ_k q_ik` for every seller.
pub fn seller_loads(demand: &[Vec<f64>], sellers: usize) -> Vec<f64> {
    (0..sellers).map(|i| demand.iter().map(|row| row[i]).sum()).collect()
}

pub fn seller_utility(market: &BipartiteMarket, prices: &PriceProfile, i: usize) -> Result<f64> {
    if i >= market.sellers {
        return Err(Error::Domain(format!("seller {i} out of range")));
    }
    let q = network_demand(market, prices)?;
    let load: f64 = q.iter().map(|row| row[i]).sum();
    Ok(prices.0[i] * load.min(market.capacity(i) as f64))
}

/// Seller `i`'s problem against fixed rival prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SellerProblem {
    /// Effective quality of each buyer that sees seller `i`.
    pub effective: Vec<f64>,
    pub capacity: f64,
}

impl SellerProblem {
    pub fn new(market: &BipartiteMarket, prices: &PriceProfile, i: usize) -> Result<Self> {
        check_profile(market, prices)?;
        if i >= market.sellers {
            return Err(Error::Domain(format!("seller {i} out of range")));
        }
        let p = prices.as_slice();
        let effective = (0..market.buyers)
            .filter(|&k| market.is_visible(k, i))
            .map(|k| {
                let rivals = (0..market.sellers).filter(|&j| j != i && market.is_visible(k, j));
                market.theta(k, i) - ln_one_plus_sum_exp(rivals.map(|j| market.theta(k, j) - p[j]))
            })
            .collect();
        Ok(Self { effective, capacity: market.capacity(i) as f64 })
    }

    pub fn demand(&self, p: f64) -> f64 {
        self.effective.iter().map(|&a| logistic(a - p)).sum()
    }

    pub fn utility(&self, p: f64) -> f64 {
        p * self.demand(p).min(self.capacity)
    }

    /// Derivative of the uncapped utility `p · Σ q_k(p)`.
    pub fn marginal(&self, p: f64) -> f64 {
        self.effective
            .iter()
            .map(|&a| {
                let q = logistic(a - p);
                q * (1.0 - p * logistic(p - a))
            })
            .sum()
    }

    /// Second derivative of the uncapped utility: `Σ (q² − q)(2 + 2pq − p)`.
    pub fn curvature(&self, p: f64) -> f64 {
        self.effective
            .iter()
            .map(|&a| {
                let q = logistic(a - p);
                (q * q - q) * (2.0 + 2.0 * p * q - p)
            })
            .sum()
    }

    /// Utility-maximizing price on `[0, ceiling]`.
    ///
    /// Candidates are the capacity-matching price and every local maximum of
    /// the uncapped utility where demand fits the capacity.
    pub fn best_response(&self, ceiling: f64, seller: usize) -> Result<f64> {
        if self.effective.is_empty() {
            return Ok(0.0);
        }
        let exhausted = || Error::SearchBoxExhausted { seller, ceiling };
        let floor = if self.demand(0.0) > self.capacity {
            if self.demand(ceiling) > self.capacity {
                return Err(exhausted());
            }
            Some(bisect(0.0, ceiling, |p| self.demand(p) > self.capacity))
        } else {
            None
        };
        let lo = floor.unwrap_or(0.0);
        if self.marginal(ceiling) > 0.0 {
            return Err(exhausted());
        }

        let mut candidates: Vec<f64> = floor.into_iter().collect();
        let step = (ceiling - lo) / GRID_POINTS as f64;
        let mut prev = (lo, self.marginal(lo));
        for j in 1..=GRID_POINTS {
            let x = if j == GRID_POINTS { ceiling } else { lo + step * j as f64 };
            let m = self.marginal(x);
            if prev.1 > 0.0 && m <= 0.0 {
                candidates.push(if m == 0.0 { x } else { bisect(prev.0, x, |p| self.marginal(p) > 0.0) });
            }
            prev = (x, m);
        }
        Ok(candidates
            .into_iter()
            .map(|p| (p, self.utility(p)))
            .fold(None, |best: Option<(f64, f64)>, (p, u)| match best {
                Some((_, bu)) if bu >= u => best,
                _ => Some((p, u)),
            })
            .map(|(p, _)| p)
            .unwrap_or(lo))
    }
}

/// Boundary of `pred` on `[lo, hi]`, given `pred(lo)` holds and `pred(hi)` does not.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best response of seller `i`; a seller no buyer sees keeps its price.
pub fn seller_best_response(market: &BipartiteMarket, prices: &PriceProfile, i: usize) -> Result<f64> {
    let problem = SellerProblem::new(market, prices, i)?;
    if problem.effective.is_empty() {
        return Ok(prices.0[i]);
    }
    problem.best_response(market.price_ceiling(), i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Sellers update in index order, each seeing the latest prices.
    #[default]
    GaussSeidel,
    /// All sellers update from the previous sweep's prices.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
    /// Defaults to every seller at price 1.
    pub start: Option<PriceProfile>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iters: 10_000, schedule: Schedule::GaussSeidel, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub prices: PriceProfile,
    pub demands: Vec<Vec<f64>>,
    pub utilities: Vec<f64>,
    /// Largest unilateral gain available to any seller.
    pub residual: f64,
    /// Completed best-response sweeps.
    pub iterations: usize,
    pub converged: bool,
    pub capacity_ok: bool,
    pub consistent: bool,
}

impl EquilibriumReport {
    pub fn total_revenue(&self) -> f64 {
        self.utilities.iter().sum()
    }
}

/// Iterated best responses until no price moves by more than the tolerance.
///
/// Running out of sweeps is not an error; the report carries `converged = false`.
pub fn solve_network_equilibrium(market: &BipartiteMarket, options: &SolveOptions) -> Result<EquilibriumReport> {
    let mut prices = match &options.start {
        Some(p) => {
            check_profile(market, p)?;
            p.clone()
        }
        None => PriceProfile::uniform(market.sellers, 1.0),
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iters {
        let before = prices.clone();
        for i in 0..market.sellers {
            let basis = match options.schedule {
                Schedule::GaussSeidel => &prices,
                Schedule::Jacobi => &before,
            };
            let p = seller_best_response(market, basis, i)?;
            prices.0[i] = p;
        }
        iterations += 1;
        let moved = prices.0.iter().zip(&before.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved <= options.tolerance {
            converged = true;
            break;
        }
    }
    report_at(market, prices, iterations, converged)
}

fn report_at(market: &BipartiteMarket, prices: PriceProfile, iterations: usize, converged: bool) -> Result<EquilibriumReport> {
    let demands = network_demand(market, &prices)?;
    let loads = seller_loads(&demands, market.sellers);
    let utilities: Vec<f64> = (0..market.sellers)
        .map(|i| prices.0[i] * loads[i].min(market.capacity(i) as f64))
        .collect();
    let residual = best_response_gains(market, &prices, &utilities)?.into_iter().fold(0.0, f64::max);
    let capacity_ok = loads.iter().zip(market.capacities()).all(|(l, &c)| *l <= c as f64 + CAPACITY_SLACK);
    Ok(EquilibriumReport {
        prices,
        demands,
        utilities,
        residual,
        iterations,
        converged,
        capacity_ok,
        consistent: check_consistency(market).consistent,
    })
}

fn best_response_gains(market: &BipartiteMarket, prices: &PriceProfile, utilities: &[f64]) -> Result<Vec<f64>> {
    (0..market.sellers)
        .map(|i| {
            let problem = SellerProblem::new(market, prices, i)?;
            if problem.effective.is_empty() {
                return Ok(0.0);
            }
            let br = problem.best_response(market.price_ceiling(), i)?;
            Ok((problem.utility(br) - utilities[i]).max(0.0))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    /// Largest `e^θ/(1+e^θ)` over visible pairs, the supremum of `q_ik` over prices.
    pub max_demand: f64,
    pub worst_pair: Option<(usize, usize)>,
}

pub fn check_consistency(market: &BipartiteMarket) -> ConsistencyReport {
    let worst = market
        .visible_pairs()
        .map(|(k, i)| ((k, i), logistic(market.theta(k, i))))
        .fold(None, |best: Option<((usize, usize), f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        });
    let max_demand = worst.map_or(0.0, |w| w.1);
    ConsistencyReport {
        consistent: max_demand <= CONSISTENCY_LIMIT,
        max_demand,
        worst_pair: worst.map(|w| w.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub gains: Vec<f64>,
    pub gain_ok: bool,
    pub loads: Vec<f64>,
    pub capacity_ok: bool,
    /// Second derivative of the uncapped utility at sellers sitting on an
    /// interior stationary point; `None` elsewhere.
    pub curvature: Vec<Option<f64>>,
    pub second_order_ok: bool,
}

impl EquilibriumCheck {
    pub fn passed(&self) -> bool {
        self.gain_ok && self.capacity_ok && self.second_order_ok
    }
}

/// Diagnose a price profile: unilateral gains, capacity, and curvature at stationary points.
pub fn verify_equilibrium(market: &BipartiteMarket, prices: &PriceProfile, epsilon: f64) -> Result<EquilibriumCheck> {
    let demands = network_demand(market, prices)?;
    let loads = seller_loads(&demands, market.sellers);
    let utilities: Vec<f64> = (0..market.sellers)
        .map(|i| prices.0[i] * loads[i].min(market.capacity(i) as f64))
        .collect();
    let gains = best_response_gains(market, prices, &utilities)?;
    let mut curvature = Vec::with_capacity(market.sellers);
    for (i, (&p, &load)) in prices.0.iter().zip(&loads).enumerate() {
        let problem = SellerProblem::new(market, prices, i)?;
        let interior = !problem.effective.is_empty() && p > 0.0 && load < problem.capacity - epsilon;
        let stationary = interior && problem.marginal(p).abs() <= 1e-6;
        curvature.push(stationary.then(|| problem.curvature(p)));
    }
    Ok(EquilibriumCheck {
        gain_ok: gains.iter().all(|&g| g <= epsilon),
        capacity_ok: loads.iter().zip(market.capacities()).all(|(l, &c)| *l <= c as f64 + epsilon),
        second_order_ok: curvature.iter().flatten().all(|&c| c <= 0.0),
        gains,
        loads,
        curvature,
    })
}
