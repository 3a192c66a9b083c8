//! Single-buyer Bertrand competition under multinomial-logit demand.
//!
//! When a set of sellers `S` is displayed to one buyer and every seller
//! prices to maximize its own expected revenue, the unique equilibrium is
//! characterized by the no-purchase share `q0`:
//!
//! * each member's demand is `q_i = V(q0 * e^(theta_i - 1))`, where `V(x)`
//!   solves `y * exp(y / (1 - y)) = x`;
//! * `q0` solves `sum_i V(q0 * e^(theta_i - 1)) = 1 - q0`;
//! * prices are `p_i = 1 / (1 - q_i)` and revenues `R_i = q_i / (1 - q_i)`.
//!
//! Internally every root is found in log space on the odds `u = y / (1 - y)`,
//! which is exactly the equilibrium revenue of the item. This keeps prices
//! and revenues accurate for very large qualities, where `1 - q` would
//! otherwise cancel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest target revenue accepted by [`quality_for_target_revenue`].
pub const MIN_TARGET_REVENUE: f64 = 1e-12;

const Q0_MAX_ITERS: usize = 200;

/// Sellers' side of the market: one item per seller.
///
/// Items are kept sorted by descending quality. Equal qualities keep their
/// input order, and the input position of every item is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemCatalog {
    qualities: Vec<f64>,
    inventories: Vec<u32>,
    costs: Option<Vec<f64>>,
    input_index: Vec<usize>,
}

impl ItemCatalog {
    pub fn new(qualities: Vec<f64>, inventories: Vec<u32>) -> Result<Self> {
        Self::build(qualities, inventories, None)
    }

    pub fn with_costs(qualities: Vec<f64>, inventories: Vec<u32>, costs: Vec<f64>) -> Result<Self> {
        Self::build(qualities, inventories, Some(costs))
    }

    /// Catalog with unit inventories, handy for one-shot equilibrium questions.
    pub fn from_qualities(qualities: &[f64]) -> Result<Self> {
        Self::new(qualities.to_vec(), vec![1; qualities.len()])
    }

    fn build(qualities: Vec<f64>, inventories: Vec<u32>, costs: Option<Vec<f64>>) -> Result<Self> {
        let n = qualities.len();
        if n == 0 {
            return Err(Error::InvalidCatalog("catalog must contain at least one item".into()));
        }
        if inventories.len() != n {
            return Err(Error::InvalidCatalog(format!(
                "{} qualities but {} inventories",
                n,
                inventories.len()
            )));
        }
        if let Some(c) = &costs {
            if c.len() != n {
                return Err(Error::InvalidCatalog(format!("{} qualities but {} costs", n, c.len())));
            }
            if let Some(bad) = c.iter().find(|b| !b.is_finite() || **b < 0.0) {
                return Err(Error::InvalidCatalog(format!("cost {bad} is not a nonnegative finite number")));
            }
        }
        if let Some(bad) = qualities.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidCatalog(format!("quality {bad} is not finite")));
        }
        if inventories.contains(&0) {
            return Err(Error::InvalidCatalog("inventories must be at least 1".into()));
        }

        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal qualities keep input order
        order.sort_by(|&a, &b| qualities[b].total_cmp(&qualities[a]));

        Ok(Self {
            qualities: order.iter().map(|&i| qualities[i]).collect(),
            inventories: order.iter().map(|&i| inventories[i]).collect(),
            costs: costs.map(|c| order.iter().map(|&i| c[i]).collect()),
            input_index: order,
        })
    }

    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }

    pub fn quality(&self, i: usize) -> f64 {
        self.qualities[i]
    }

    pub fn inventories(&self) -> &[u32] {
        &self.inventories
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    /// Production cost of item `i`, zero when the catalog carries no costs.
    pub fn cost(&self, i: usize) -> f64 {
        self.costs.as_ref().map_or(0.0, |c| c[i])
    }

    /// Position of sorted item `i` in the caller's original input.
    pub fn input_index(&self, i: usize) -> usize {
        self.input_index[i]
    }

    /// Sorted position of the item that was at `input` in the original input.
    pub fn sorted_position(&self, input: usize) -> Option<usize> {
        self.input_index.iter().position(|&j| j == input)
    }

    /// Same qualities and costs with a different inventory vector (sorted order).
    pub fn with_inventories(&self, inventories: Vec<u32>) -> Result<Self> {
        if inventories.len() != self.len() {
            return Err(Error::InvalidCatalog("inventory vector length mismatch".into()));
        }
        if inventories.contains(&0) {
            return Err(Error::InvalidCatalog("inventories must be at least 1".into()));
        }
        Ok(Self { inventories, ..self.clone() })
    }
}

/// The set of items displayed to a buyer. Members are kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assortment {
    members: Vec<usize>,
}

impl Assortment {
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidAssortment("duplicate item index".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidAssortment(format!("item {bad} out of range for {n} items")));
        }
        Ok(Self { members: ids })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        Self { members: (0..n).collect() }
    }

    pub fn singleton(i: usize) -> Self {
        Self { members: vec![i] }
    }

    /// Bit `i` of `mask` selects item `i`.
    pub fn from_mask(mask: u64) -> Self {
        Self {
            members: (0..64).filter(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// This assortment with item `j` added.
    pub fn with(&self, j: usize) -> Self {
        let mut members = self.members.clone();
        if let Err(pos) = members.binary_search(&j) {
            members.insert(pos, j);
        }
        Self { members }
    }

    fn check(&self, catalog: &ItemCatalog) -> Result<()> {
        match self.members.last() {
            Some(&i) if i >= catalog.len() => Err(Error::InvalidAssortment(format!(
                "item {i} out of range for {} items",
                catalog.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Equilibrium of the pricing game induced by one assortment.
///
/// Per-member vectors follow the order of `members`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub members: Vec<usize>,
    pub q0: f64,
    pub demands: Vec<f64>,
    pub prices: Vec<f64>,
    pub revenues: Vec<f64>,
    pub total_revenue: f64,
}

impl EquilibriumOutcome {
    fn no_purchase() -> Self {
        Self {
            members: Vec::new(),
            q0: 1.0,
            demands: Vec::new(),
            prices: Vec::new(),
            revenues: Vec::new(),
            total_revenue: 0.0,
        }
    }

    /// Demand of catalog item `i`, zero when `i` is not a member.
    pub fn demand_of(&self, i: usize) -> f64 {
        self.members.iter().position(|&j| j == i).map_or(0.0, |k| self.demands[k])
    }

    pub fn price_of(&self, i: usize) -> Option<f64> {
        self.members.iter().position(|&j| j == i).map(|k| self.prices[k])
    }

    pub fn revenue_of(&self, i: usize) -> f64 {
        self.members.iter().position(|&j| j == i).map_or(0.0, |k| self.revenues[k])
    }
}

/// Prices posted by the members of an assortment (no-purchase is priced at 0 implicitly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector(pub Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if let Some(bad) = prices.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain(format!("price {bad} is not a nonnegative finite number")));
        }
        Ok(Self(prices))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Odds `u = y / (1 - y)` of the solution `y = V(x)`, given `ln x`.
///
/// Solves `ln u - ln(1 + u) + u = ln x` on `s = ln u`: bracketed bisection
/// down to a width of 1e-6, then at most five safeguarded Newton steps.
pub(crate) fn odds_from_log(ln_x: f64) -> f64 {
    let g = |s: f64| {
        let u = s.exp();
        s - u.ln_1p() + u - ln_x
    };
    let mut lo = ln_x.min(0.0) - 1.0;
    let mut hi = (ln_x.max(0.0) + 2.0).ln();
    debug_assert!(g(lo) < 0.0 && g(hi) > 0.0);

    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..5 {
        let u = s.exp();
        let gs = g(s);
        if gs == 0.0 {
            break;
        }
        let step = gs / (1.0 / (1.0 + u) + u);
        let next = (s - step).clamp(lo, hi);
        if step.abs() <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
            s = next;
            break;
        }
        s = next;
    }
    s.exp()
}

/// Odds of a single item offered alone: solves `ln u + u = theta - 1`.
///
/// This is the item's solo equilibrium revenue `R_i({i})`.
pub fn solo_odds(theta: f64) -> f64 {
    // alone, q0 = 1 / (1 + u), so ln x = theta - 1 - ln(1 + u); fold that in
    let target = theta - 1.0;
    let g = |s: f64| s + s.exp() - target;
    let mut lo = target.min(0.0) - 1.0;
    let mut hi = target.max(0.0).max(1.0).ln() + 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..5 {
        let step = g(s) / (1.0 + s.exp());
        if step == 0.0 {
            break;
        }
        s = (s - step).clamp(lo, hi);
    }
    s.exp()
}

/// Solo equilibrium demand `q_i({i})` of an item with quality `theta`.
pub fn solo_demand(theta: f64) -> f64 {
    let u = solo_odds(theta);
    u / (1.0 + u)
}

/// `V(x)`: the unique `y` in `[0, 1)` with `y * exp(y / (1 - y)) = x`.
pub fn solve_v(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("V is defined for finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let u = odds_from_log(x.ln());
    Ok(u / (1.0 + u))
}

/// `sum_i V(exp(ln_q0 + theta_i - 1)) + q0 - 1`, increasing in `ln_q0`.
fn q0_residual(qualities: &[f64], members: &[usize], ln_q0: f64) -> f64 {
    let bought: f64 = members
        .iter()
        .map(|&i| {
            let u = odds_from_log(ln_q0 + qualities[i] - 1.0);
            u / (1.0 + u)
        })
        .sum();
    bought + ln_q0.exp() - 1.0
}

/// `ln q0(S)` by bisection; `None` for the empty assortment.
fn solve_ln_q0(qualities: &[f64], members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Ok(0.0);
    }
    let h = |s: f64| q0_residual(qualities, members, s);
    let mut hi = 0.0_f64;
    let mut lo = -1.0_f64;
    let mut widen = 0;
    while h(lo) >= 0.0 {
        lo *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(Error::NoConvergence { what: "no-purchase share bracket", iterations: widen });
        }
    }
    let mut iters = 0;
    while iters < Q0_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let s = if h(hi).abs() < h(lo).abs() { hi } else { lo };
    if h(s).abs() > 1e-10 {
        return Err(Error::NoConvergence { what: "no-purchase share", iterations: iters });
    }
    Ok(s)
}

/// No-purchase share `q0(S)` at the equilibrium of assortment `s`.
pub fn solve_q0(catalog: &ItemCatalog, s: &Assortment) -> Result<f64> {
    s.check(catalog)?;
    if s.is_empty() {
        return Ok(1.0);
    }
    Ok(solve_ln_q0(catalog.qualities(), s.members())?.exp())
}

/// Equilibrium demands, prices and revenues for members of `s`.
pub fn equilibrium_outcome(catalog: &ItemCatalog, s: &Assortment) -> Result<EquilibriumOutcome> {
    s.check(catalog)?;
    outcome_for_qualities(catalog.qualities(), s.members())
}

pub(crate) fn outcome_for_qualities(qualities: &[f64], members: &[usize]) -> Result<EquilibriumOutcome> {
    if members.is_empty() {
        return Ok(EquilibriumOutcome::no_purchase());
    }
    let ln_q0 = solve_ln_q0(qualities, members)?;
    let odds: Vec<f64> = members
        .iter()
        .map(|&i| odds_from_log(ln_q0 + qualities[i] - 1.0))
        .collect();
    let demands: Vec<f64> = odds.iter().map(|u| u / (1.0 + u)).collect();
    let prices: Vec<f64> = odds.iter().map(|u| 1.0 + u).collect();
    let total_revenue = odds.iter().sum();
    Ok(EquilibriumOutcome {
        members: members.to_vec(),
        q0: ln_q0.exp(),
        demands,
        prices,
        revenues: odds,
        total_revenue,
    })
}

/// Equilibrium when unsold items are lost at production cost `beta_i`.
///
/// Demands are unchanged; each price and revenue is shifted down by `beta_i`.
/// Revenues may be negative. A catalog without costs behaves as all-zero costs.
pub fn perishable_outcome(catalog: &ItemCatalog, s: &Assortment) -> Result<EquilibriumOutcome> {
    let mut out = equilibrium_outcome(catalog, s)?;
    for (k, &i) in out.members.iter().enumerate() {
        let beta = catalog.cost(i);
        out.prices[k] -= beta;
        out.revenues[k] -= beta;
    }
    out.total_revenue = out.revenues.iter().sum();
    Ok(out)
}

/// Quality at which a lone item earns equilibrium revenue `r`: `1 + r + ln r`.
pub fn quality_for_target_revenue(r: f64) -> Result<f64> {
    if !r.is_finite() || r < MIN_TARGET_REVENUE {
        return Err(Error::Domain(format!(
            "target revenue must be finite and at least {MIN_TARGET_REVENUE}, got {r}"
        )));
    }
    Ok(1.0 + r + r.ln())
}

/// `ln(1 + sum_j exp(z_j))` with a max shift.
fn log_one_plus_sum_exp(z: impl Iterator<Item = f64> + Clone) -> f64 {
    let shift = z.clone().fold(0.0_f64, f64::max);
    let sum: f64 = (-shift).exp() + z.map(|v| (v - shift).exp()).sum::<f64>();
    shift + sum.ln()
}

fn check_lengths(qualities: &[f64], prices: &PriceVector) -> Result<()> {
    if qualities.len() != prices.0.len() {
        return Err(Error::Domain(format!(
            "{} qualities but {} prices",
            qualities.len(),
            prices.0.len()
        )));
    }
    Ok(())
}

/// Raw MNL purchase probabilities at arbitrary posted prices.
pub fn mnl_demand(qualities: &[f64], prices: &PriceVector) -> Result<Vec<f64>> {
    Ok(mnl_shares(qualities, prices)?.1)
}

/// `(q0, q)` at arbitrary posted prices; exponents are max-shifted.
pub fn mnl_shares(qualities: &[f64], prices: &PriceVector) -> Result<(f64, Vec<f64>)> {
    check_lengths(qualities, prices)?;
    let z: Vec<f64> = qualities.iter().zip(&prices.0).map(|(t, p)| t - p).collect();
    let shift = z.iter().copied().fold(0.0_f64, f64::max);
    let w: Vec<f64> = z.iter().map(|v| (v - shift).exp()).collect();
    let w0 = (-shift).exp();
    let total = w0 + w.iter().sum::<f64>();
    Ok((w0 / total, w.iter().map(|x| x / total).collect()))
}

/// Natural log of the potential of the single-buyer pricing game.
///
/// `ln Phi(p) = sum_j (ln p_j + theta_j - p_j) - ln(1 + sum_j e^(theta_j - p_j))`.
pub fn log_potential(qualities: &[f64], prices: &PriceVector) -> Result<f64> {
    check_lengths(qualities, prices)?;
    if let Some(bad) = prices.0.iter().find(|&&p| p <= 0.0) {
        return Err(Error::Domain(format!("potential needs strictly positive prices, got {bad}")));
    }
    let z = qualities.iter().zip(&prices.0).map(|(t, p)| t - p);
    let numer: f64 = qualities
        .iter()
        .zip(&prices.0)
        .map(|(t, p)| p.ln() + t - p)
        .sum();
    Ok(numer - log_one_plus_sum_exp(z))
}

/// Potential `Phi(p)`; a unilateral change moves `ln Phi` by the mover's log-revenue change.
pub fn potential(qualities: &[f64], prices: &PriceVector) -> Result<f64> {
    let ln_phi = log_potential(qualities, prices)?;
    let phi = ln_phi.exp();
    if phi == 0.0 || !phi.is_finite() {
        return Err(Error::Overflow(format!("potential exp({ln_phi}) is not representable")));
    }
    Ok(phi)
}

/// Revenue `p_i * q_i(p)` of seller `i` at posted prices.
pub fn seller_revenue(qualities: &[f64], prices: &PriceVector, i: usize) -> Result<f64> {
    let q = mnl_demand(qualities, prices)?;
    Ok(prices.0[i] * q[i])
}

/// Price maximizing `p * q_i(p, p_-i)` over `[0, P_max]`, `P_max = max(20, max theta + 20)`.
///
/// Revenue is single-peaked: its derivative is `q_i (1 - p (1 - q_i))`,
/// and `p (1 - q_i(p))` is strictly increasing, so bisection on that factor
/// finds the optimum.
pub fn best_response_price(qualities: &[f64], prices: &PriceVector, i: usize) -> Result<f64> {
    check_lengths(qualities, prices)?;
    if i >= qualities.len() {
        return Err(Error::Domain(format!("item {i} out of range for {} items", qualities.len())));
    }
    let ln_rivals = log_one_plus_sum_exp(
        qualities
            .iter()
            .zip(&prices.0)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (t, p))| t - p),
    );
    let theta = qualities[i];
    // 1 - q_i(p) = logistic(ln_rivals + p - theta)
    let slope_factor = |p: f64| {
        let z = ln_rivals + p - theta;
        let miss = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
        1.0 - p * miss
    };
    let ceiling = 20.0_f64.max(qualities.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 20.0);
    if slope_factor(ceiling) >= 0.0 {
        return Ok(ceiling);
    }
    let (mut lo, mut hi) = (0.0_f64, ceiling);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope_factor(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if slope_factor(hi).abs() < slope_factor(lo).abs() { hi } else { lo })
}

/// Outcome of round-robin best-response dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseTrace {
    pub prices: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// `ln Phi` after every single-seller update.
    pub log_potentials: Vec<f64>,
}

/// Sellers take turns best-responding until no price moves by more than `tol`.
pub fn best_response_dynamics(
    qualities: &[f64],
    start: &PriceVector,
    tol: f64,
    max_sweeps: usize,
) -> Result<BestResponseTrace> {
    check_lengths(qualities, start)?;
    let mut prices = start.clone();
    let mut log_potentials = Vec::new();
    for sweep in 1..=max_sweeps {
        let mut moved = 0.0_f64;
        for i in 0..qualities.len() {
            let p = best_response_price(qualities, &prices, i)?;
            moved = moved.max((p - prices.0[i]).abs());
            prices.0[i] = p;
            log_potentials.push(log_potential(qualities, &prices)?);
        }
        if moved <= tol {
            return Ok(BestResponseTrace { prices: prices.0, sweeps: sweep, converged: true, log_potentials });
        }
    }
    Ok(BestResponseTrace { prices: prices.0, sweeps: max_sweeps, converged: false, log_potentials })
}
