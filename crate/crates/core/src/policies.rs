//! Online assortment rules for a stream of identical buyers.
//!
//! None of the rules look at the number of buyers or at initial inventories,
//! except the inventory-weighted variant which is allowed to see stock levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mnl::{quality_for_target_revenue, solo_demand, Assortment, ItemCatalog};

/// One online assortment problem: catalog, buyer count and heaviness threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineInstance {
    catalog: ItemCatalog,
    buyers: usize,
    lambda: f64,
    solo_demands: Vec<f64>,
    heavy: usize,
}

impl OnlineInstance {
    pub fn new(catalog: ItemCatalog, buyers: usize, lambda: f64) -> Result<Self> {
        let heavy = classify_heavy(&catalog, lambda)?.len();
        let solo_demands = catalog.qualities().iter().map(|&t| solo_demand(t)).collect();
        Ok(Self { catalog, buyers, lambda, solo_demands, heavy })
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn buyers(&self) -> usize {
        self.buyers
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `q_i({i})` for every item.
    pub fn solo_demands(&self) -> &[f64] {
        &self.solo_demands
    }

    /// Heavy items are exactly the first `heavy_count()` items.
    pub fn heavy_count(&self) -> usize {
        self.heavy
    }

    pub fn is_heavy(&self, i: usize) -> bool {
        i < self.heavy
    }

    pub fn with_buyers(&self, buyers: usize) -> Self {
        Self { buyers, ..self.clone() }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.5..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("heaviness threshold must lie in [0.5, 1), got {lambda}")));
    }
    Ok(())
}

/// Smallest quality whose solo demand reaches `lambda`.
///
/// `q_i({i}) >= lambda` is equivalent to the solo revenue reaching
/// `lambda / (1 - lambda)`, which happens exactly at `1 + l + ln l`.
pub fn heaviness_threshold(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    quality_for_target_revenue(lambda / (1.0 - lambda))
}

/// Items whose solo equilibrium demand is at least `lambda`; always a prefix.
pub fn classify_heavy(catalog: &ItemCatalog, lambda: f64) -> Result<Vec<usize>> {
    let cut = heaviness_threshold(lambda)?;
    Ok(catalog
        .qualities()
        .iter()
        .take_while(|&&t| t >= cut)
        .enumerate()
        .map(|(i, _)| i)
        .collect())
}

/// Remaining stock per item and the index of the next buyer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryState {
    pub remaining: Vec<u32>,
    pub t: usize,
}

impl InventoryState {
    pub fn full(catalog: &ItemCatalog) -> Self {
        Self { remaining: catalog.inventories().to_vec(), t: 0 }
    }

    pub fn is_available(&self, i: usize) -> bool {
        self.remaining[i] > 0
    }

    fn available(&self) -> impl Iterator<Item = usize> + '_ {
        self.remaining.iter().enumerate().filter(|(_, &r)| r > 0).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1,
    Phase2,
    Greedy,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub assortment: Assortment,
    pub phase: Phase,
}

/// Hybrid rule: heavy items alone in quality order, then all light items together.
pub fn hybrid_next(instance: &OnlineInstance, state: &InventoryState) -> PolicyDecision {
    if let Some(i) = (0..instance.heavy).find(|&i| state.is_available(i)) {
        return PolicyDecision { assortment: Assortment::singleton(i), phase: Phase::Phase1 };
    }
    let light = state.available().filter(|&i| i >= instance.heavy).collect();
    PolicyDecision { assortment: Assortment::from_sorted_unchecked(light), phase: Phase::Phase2 }
}

/// Offer every item that is still in stock.
pub fn greedy_all_next(state: &InventoryState) -> PolicyDecision {
    PolicyDecision {
        assortment: Assortment::from_sorted_unchecked(state.available().collect()),
        phase: Phase::Greedy,
    }
}

/// `Psi(x) = e/(e-1) * (1 - e^-x)` on `[0, 1]`, with `Psi(1) = 1` exactly.
pub fn psi_exponential(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("inventory fraction must lie in [0, 1], got {x}")));
    }
    Ok((-x).exp_m1() / (-1.0f64).exp_m1())
}

/// Inventory-weighted hybrid.
///
/// Each available item's solo demand is scaled by `Psi(remaining / initial)`.
/// Items whose scaled value still reaches `lambda` count as heavy and the
/// heaviest of them is offered alone; otherwise every available item is
/// offered together. At full stock the weight is 1 and the static heaviness
/// test applies unchanged.
pub fn modified_hybrid_next(instance: &OnlineInstance, state: &InventoryState) -> PolicyDecision {
    let initial = instance.catalog.inventories();
    let mut best: Option<(usize, f64)> = None;
    for i in state.available() {
        let (heavy, weight) = if state.remaining[i] == initial[i] {
            (instance.is_heavy(i), instance.solo_demands[i])
        } else {
            let frac = f64::from(state.remaining[i]) / f64::from(initial[i]);
            let w = psi_exponential(frac).expect("fraction in [0, 1]") * instance.solo_demands[i];
            (w >= instance.lambda, w)
        };
        if heavy && best.is_none_or(|(_, b)| weight > b) {
            best = Some((i, weight));
        }
    }
    let assortment = match best {
        Some((i, _)) => Assortment::singleton(i),
        None => Assortment::from_sorted_unchecked(state.available().collect()),
    };
    PolicyDecision { assortment, phase: Phase::Modified }
}

/// The online rules available to the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Hybrid,
    Greedy,
    Modified,
}

impl PolicyKind {
    pub fn decide(self, instance: &OnlineInstance, state: &InventoryState) -> PolicyDecision {
        match self {
            PolicyKind::Hybrid => hybrid_next(instance, state),
            PolicyKind::Greedy => greedy_all_next(state),
            PolicyKind::Modified => modified_hybrid_next(instance, state),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Hybrid => "hybrid",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Modified => "modified",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(PolicyKind::Hybrid),
            "greedy" => Ok(PolicyKind::Greedy),
            "modified" => Ok(PolicyKind::Modified),
            other => Err(Error::Domain(format!("unknown policy {other:?}"))),
        }
    }
}
