use bertrand_mnl::flow::{build_flow_network, fixed_point_weight, max_weight_flow};
use bertrand_mnl::lp::{enumerate_columns, solve_opt_with_columns};
use bertrand_mnl::mnl::{equilibrium_outcome, mnl_shares, PriceVector};
use bertrand_mnl::network::{solve_network_equilibrium, BipartiteMarket, SolveOptions};
use bertrand_mnl::{Assortment, ItemCatalog};
use proptest::prelude::*;

fn catalog(qualities: Vec<f64>) -> ItemCatalog {
    let n = qualities.len();
    ItemCatalog::new(qualities, vec![1; n]).unwrap()
}

fn qualities(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..4.0, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shares_are_normalized(q in qualities(8), mask in 0u64..256) {
        let cat = catalog(q);
        let s = Assortment::from_mask(mask & ((1 << cat.len()) - 1));
        let out = equilibrium_outcome(&cat, &s).unwrap();
        let total = out.q0 + out.demands.iter().sum::<f64>();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(out.q0 > 0.0 && out.q0 <= 1.0);
    }

    #[test]
    fn prices_reproduce_demands(q in qualities(6)) {
        let cat = catalog(q);
        let s = Assortment::full(cat.len());
        let out = equilibrium_outcome(&cat, &s).unwrap();
        let thetas: Vec<f64> = out.members.iter().map(|&i| cat.quality(i)).collect();
        let (q0, demands) = mnl_shares(&thetas, &PriceVector::new(out.prices.clone()).unwrap()).unwrap();
        prop_assert!((q0 - out.q0).abs() < 1e-9);
        for (a, b) in demands.iter().zip(&out.demands) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for ((p, q), r) in out.prices.iter().zip(&out.demands).zip(&out.revenues) {
            prop_assert!((p * (1.0 - q) - 1.0).abs() < 1e-9);
            prop_assert!((p * q - r).abs() < 1e-9);
        }
    }

    #[test]
    fn adding_an_item_is_a_substitute(q in qualities(7), mask in 0u64..128, j in 0usize..7) {
        let cat = catalog(q);
        let n = cat.len();
        let j = j % n;
        let s = Assortment::from_mask(mask & ((1 << n) - 1));
        prop_assume!(!s.contains(j));
        let base = equilibrium_outcome(&cat, &s).unwrap();
        let grown = equilibrium_outcome(&cat, &s.with(j)).unwrap();
        prop_assert!(grown.q0 <= base.q0 + 1e-12);
        for &i in s.members() {
            prop_assert!(base.demand_of(i) >= grown.demand_of(i) - 1e-10);
            prop_assert!(base.revenue_of(i) >= grown.revenue_of(i) - 1e-10);
        }
    }

    #[test]
    fn better_items_sell_more_at_higher_prices(q in qualities(6)) {
        let cat = catalog(q);
        let out = equilibrium_outcome(&cat, &Assortment::full(cat.len())).unwrap();
        for a in 0..out.members.len() {
            for b in 0..out.members.len() {
                if cat.quality(out.members[a]) > cat.quality(out.members[b]) {
                    prop_assert!(out.demands[a] >= out.demands[b]);
                    prop_assert!(out.prices[a] >= out.prices[b]);
                }
            }
        }
    }

    #[test]
    fn opt_grows_with_buyers(q in qualities(5), inv in prop::collection::vec(1u32..4, 5), m in 1usize..20) {
        let n = q.len();
        let cat = ItemCatalog::new(q, inv[..n].to_vec()).unwrap();
        let cols = enumerate_columns(&cat).unwrap();
        let a = solve_opt_with_columns(&cols, cat.inventories(), m).unwrap().objective;
        let b = solve_opt_with_columns(&cols, cat.inventories(), m + 1).unwrap().objective;
        prop_assert!(b >= a - 1e-9);
        // One buyer can never be worth more than the best single assortment.
        let best = cols.columns.iter().map(|c| c.revenue).fold(0.0, f64::max);
        prop_assert!(a <= m as f64 * best + 1e-9);
    }
}

/// Best assignment by exhaustive search: most units first, then most weight.
fn brute_force(market: &BipartiteMarket) -> (usize, i64) {
    fn go(k: usize, market: &BipartiteMarket, load: &mut Vec<u32>, units: usize, weight: i64, best: &mut (usize, i64)) {
        if k == market.buyers() {
            if (units, weight) > *best {
                *best = (units, weight);
            }
            return;
        }
        go(k + 1, market, load, units, weight, best);
        for i in 0..market.sellers() {
            if market.is_visible(k, i) && load[i] < market.capacity(i) {
                load[i] += 1;
                go(k + 1, market, load, units + 1, weight + fixed_point_weight(market.theta(k, i)), best);
                load[i] -= 1;
            }
        }
    }
    let mut best = (0, 0);
    go(0, market, &mut vec![0; market.sellers()], 0, 0, &mut best);
    best
}

fn small_market() -> impl Strategy<Value = BipartiteMarket> {
    (1usize..=5, 1usize..=3).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..3.0, n), m),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.7), n), m),
            prop::collection::vec(1u32..=3, n),
        )
            .prop_map(|(theta, vis, caps)| BipartiteMarket::new(theta, Some(vis), caps).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flow_matches_exhaustive_assignment(market in small_market()) {
        let flow = max_weight_flow(&build_flow_network(&market));
        let (units, weight) = brute_force(&market);
        prop_assert_eq!(flow.units as usize, units);
        prop_assert_eq!(flow.weight_fixed, weight);
        let mut load = vec![0u32; market.sellers()];
        for (k, s) in flow.seller_of.iter().enumerate() {
            if let Some(i) = *s {
                prop_assert!(market.is_visible(k, i));
                load[i] += 1;
            }
        }
        for (i, l) in load.iter().enumerate() {
            prop_assert!(*l <= market.capacity(i));
        }
    }

    #[test]
    fn one_buyer_network_is_the_classic_game(theta in prop::collection::vec(-2.0f64..4.0, 1..=5)) {
        let n = theta.len();
        let market = BipartiteMarket::new(vec![theta.clone()], None, vec![1; n]).unwrap();
        let report = solve_network_equilibrium(&market, &SolveOptions::default()).unwrap();
        prop_assert!(report.converged);
        let cat = catalog(theta);
        let out = equilibrium_outcome(&cat, &Assortment::full(n)).unwrap();
        for (&i, &p) in out.members.iter().zip(&out.prices) {
            prop_assert!((report.prices.as_slice()[cat.input_index(i)] - p).abs() < 1e-6);
        }
    }
}
