//! Market segmentation from a max-weight flow.
//!
//! Each seller with assigned buyers forms a pool in which it is the only
//! seller, and each pool settles at its own best-response price.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{build_flow_network, max_weight_flow, unit_price_weight, FlowAssignment};
use crate::network::{seller_best_response, solve_network_equilibrium, BipartiteMarket, PriceProfile, SolveOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub seller: usize,
    pub buyers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub pools: Vec<Pool>,
    pub pool_prices: Vec<f64>,
    pub pool_revenues: Vec<f64>,
    pub total_revenue: f64,
    pub flow_weight: f64,
    pub flow_units: i64,
    pub shortfall: bool,
    /// `units / (1 + e)`; present only when every visible quality is nonnegative.
    pub lower_bound: Option<f64>,
    pub upper_bound: f64,
}

/// One pool per seller with inflow, in seller order; buyers ascending.
pub fn pools_from_flow(assignment: &FlowAssignment, sellers: usize) -> Vec<Pool> {
    let mut members = vec![Vec::new(); sellers];
    for (k, s) in assignment.seller_of.iter().enumerate() {
        if let Some(i) = s {
            members[*i].push(k);
        }
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(seller, buyers)| Pool { seller, buyers })
        .collect()
}

/// Price and revenue of `pool.seller` facing only the pool's buyers.
pub fn equilibrate_pool(market: &BipartiteMarket, pool: &Pool) -> Result<(f64, f64)> {
    let sub = market.single_seller(pool.seller, &pool.buyers)?;
    let price = seller_best_response(&sub, &PriceProfile::uniform(1, 1.0), 0)?;
    let load: f64 = (0..sub.buyers())
        .filter(|&k| sub.is_visible(k, 0))
        .map(|k| unit_logistic(sub.theta(k, 0) - price))
        .sum();
    Ok((price, price * load.min(sub.capacity(0) as f64)))
}

fn unit_logistic(x: f64) -> f64 {
    unit_price_weight(x + 1.0)
}

/// Revenue at unit price of the pool's arcs.
pub fn pool_unit_weight(market: &BipartiteMarket, pool: &Pool) -> f64 {
    pool.buyers.iter().map(|&k| unit_price_weight(market.theta(k, pool.seller))).sum()
}

pub fn segment_market(market: &BipartiteMarket) -> Result<Segmentation> {
    let assignment = max_weight_flow(&build_flow_network(market));
    let pools = pools_from_flow(&assignment, market.sellers());
    let settled = pools
        .par_iter()
        .map(|pool| equilibrate_pool(market, pool))
        .collect::<Result<Vec<_>>>()?;
    let (pool_prices, pool_revenues): (Vec<f64>, Vec<f64>) = settled.into_iter().unzip();
    let total_revenue = pool_revenues.iter().sum();

    let units = assignment.units;
    let nonnegative = market.visible_pairs().all(|(k, i)| market.theta(k, i) >= 0.0);
    let lower_bound = nonnegative.then(|| units as f64 / (1.0 + std::f64::consts::E));
    let upper_bound = market.price_bound() * assignment.target as f64;
    Ok(Segmentation {
        pools,
        pool_prices,
        pool_revenues,
        total_revenue,
        flow_weight: assignment.weight(),
        flow_units: units,
        shortfall: assignment.shortfall(),
        lower_bound,
        upper_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationComparison {
    pub segmented: f64,
    pub whole: f64,
    pub whole_converged: bool,
    pub whole_residual: f64,
}

/// Segmented revenue next to the revenue of the unsegmented network equilibrium.
pub fn compare_segmented_vs_whole(market: &BipartiteMarket, options: &SolveOptions) -> Result<SegmentationComparison> {
    let seg = segment_market(market)?;
    let whole = solve_network_equilibrium(market, options)?;
    Ok(SegmentationComparison {
        segmented: seg.total_revenue,
        whole: whole.total_revenue(),
        whole_converged: whole.converged,
        whole_residual: whole.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(theta: Vec<Vec<f64>>, caps: Vec<u32>) -> BipartiteMarket {
        BipartiteMarket::new(theta, None, caps).unwrap()
    }

    #[test]
    fn pools_follow_the_assignment() {
        let a = FlowAssignment { seller_of: vec![Some(1), None, Some(1), Some(0)], weight_fixed: 0, units: 3, target: 3 };
        let pools = pools_from_flow(&a, 3);
        assert_eq!(pools, vec![Pool { seller: 0, buyers: vec![3] }, Pool { seller: 1, buyers: vec![0, 2] }]);
    }

    #[test]
    fn lone_buyer_pools() {
        let m = market(vec![vec![2.0], vec![0.0]], vec![2]);
        let (p, r) = equilibrate_pool(&m, &Pool { seller: 0, buyers: vec![0] }).unwrap();
        assert!((p - 2.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-9);
        let (_, r) = equilibrate_pool(&m, &Pool { seller: 0, buyers: vec![1] }).unwrap();
        assert!(r >= 1.0 / (1.0 + std::f64::consts::E));
        let (_, both) = equilibrate_pool(&market(vec![vec![2.0]; 2], vec![2]), &Pool { seller: 0, buyers: vec![0, 1] }).unwrap();
        assert!((both - 2.0).abs() < 1e-9);
    }

    #[test]
    fn one_by_one_market() {
        let seg = segment_market(&market(vec![vec![2.0]], vec![1])).unwrap();
        assert!((seg.total_revenue - 1.0).abs() < 1e-9);
        assert!((seg.lower_bound.unwrap() - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
        assert_eq!(seg.upper_bound, 12.0);
    }

    #[test]
    fn uniform_four_by_two() {
        let seg = segment_market(&market(vec![vec![1.0; 2]; 4], vec![2, 2])).unwrap();
        assert!((seg.flow_weight - 2.0).abs() < 1e-9);
        assert!(seg.total_revenue >= 2.0);
        assert_eq!(seg.pools.len(), 2);
        assert!(seg.pools.iter().all(|p| p.buyers.len() == 2));
    }

    #[test]
    fn negative_quality_drops_floor() {
        let seg = segment_market(&market(vec![vec![1.0, -0.5]], vec![1, 1])).unwrap();
        assert!(seg.lower_bound.is_none());
    }

    #[test]
    fn pools_dominate_unit_price() {
        let m = market(vec![vec![0.3, 2.0, 1.0], vec![1.2, 0.0, 2.2], vec![2.1, 0.4, 0.9], vec![0.5, 0.5, 0.5]], vec![1, 2, 1]);
        let seg = segment_market(&m).unwrap();
        for (pool, rev) in seg.pools.iter().zip(&seg.pool_revenues) {
            assert!(*rev >= pool_unit_weight(&m, pool) - 1e-9);
        }
        assert!(seg.total_revenue >= seg.flow_weight - 1e-6);
        assert!(seg.total_revenue <= seg.upper_bound);
    }
}
