//! Clairvoyant upper bound on any online assortment policy.
//!
//! The time-indexed LP offers each of `m` identical buyers a distribution over
//! assortments subject to expected inventory use. Because demands and
//! revenues do not depend on time, the per-period variables aggregate into
//! one mass `z(S)` per assortment with a single row `sum_S z(S) <= m`. That
//! leaves `n + 1` rows and `2^n - 1` columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mnl::{outcome_for_qualities, Assortment, ItemCatalog};
use crate::simplex::simplex_solve;

/// Largest catalog for which every assortment is materialized.
pub const MAX_COLUMN_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub assortment: Assortment,
    /// Equilibrium demand of every catalog item (zero for non-members).
    pub demands: Vec<f64>,
    /// Equilibrium revenue `R(S)`.
    pub revenue: f64,
}

impl Column {
    /// `sum_i r_i q_i(S)`: the column's value when item `i` is worth a fixed `r_i`.
    pub fn fixed_revenue(&self, r: &[f64]) -> f64 {
        self.demands.iter().zip(r).map(|(q, r)| q * r).sum()
    }
}

/// One column per nonempty assortment, ordered by bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSet {
    pub items: usize,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub objective: f64,
    /// `z(S)` aligned with `ColumnSet::columns`.
    pub column_mass: Vec<f64>,
    pub inventory_duals: Vec<f64>,
    pub buyer_dual: f64,
}

impl LpSolution {
    /// Columns carrying positive mass, with their mass.
    pub fn support<'a>(&'a self, columns: &'a ColumnSet) -> impl Iterator<Item = (&'a Column, f64)> + 'a {
        columns
            .columns
            .iter()
            .zip(&self.column_mass)
            .filter(|(_, z)| **z > 0.0)
            .map(|(c, z)| (c, *z))
    }
}

pub fn enumerate_columns(catalog: &ItemCatalog) -> Result<ColumnSet> {
    let n = catalog.len();
    if n > MAX_COLUMN_ITEMS {
        return Err(Error::TooManyItems { n, max: MAX_COLUMN_ITEMS });
    }
    let columns = (1u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let assortment = Assortment::from_mask(mask);
            let out = outcome_for_qualities(catalog.qualities(), assortment.members())?;
            let mut demands = vec![0.0; n];
            for (&i, &q) in out.members.iter().zip(&out.demands) {
                demands[i] = q;
            }
            Ok(Column { assortment, demands, revenue: out.total_revenue })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ColumnSet { items: n, columns })
}

/// Maximize `sum_S value(S) z(S)` under inventory rows and the buyer-mass row.
pub fn solve_collapsed(columns: &ColumnSet, inventories: &[u32], buyers: usize, values: &[f64]) -> Result<LpSolution> {
    let n = columns.items;
    if inventories.len() != n {
        return Err(Error::Domain(format!("{} inventories for {n} items", inventories.len())));
    }
    if values.len() != columns.columns.len() {
        return Err(Error::Domain("one objective value per column required".into()));
    }
    if buyers == 0 {
        return Err(Error::Domain("the number of buyers must be at least 1".into()));
    }
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| columns.columns.iter().map(|c| c.demands[i]).collect())
        .collect();
    rows.push(vec![1.0; columns.columns.len()]);
    let mut rhs: Vec<f64> = inventories.iter().map(|&c| c as f64).collect();
    rhs.push(buyers as f64);

    let sol = simplex_solve(&rows, &rhs, values)?;
    Ok(LpSolution {
        objective: sol.objective,
        column_mass: sol.x,
        inventory_duals: sol.duals[..n].to_vec(),
        buyer_dual: sol.duals[n],
    })
}

/// OPT: the collapsed clairvoyant LP with equilibrium revenues `R(S)`.
pub fn solve_opt(catalog: &ItemCatalog, buyers: usize) -> Result<LpSolution> {
    if buyers == 0 {
        return Err(Error::Domain("the number of buyers must be at least 1".into()));
    }
    let columns = enumerate_columns(catalog)?;
    solve_opt_with_columns(&columns, catalog.inventories(), buyers)
}

pub fn solve_opt_with_columns(columns: &ColumnSet, inventories: &[u32], buyers: usize) -> Result<LpSolution> {
    let values: Vec<f64> = columns.columns.iter().map(|c| c.revenue).collect();
    solve_collapsed(columns, inventories, buyers, &values)
}

/// OPT(r): the same LP when item `i` earns a fixed `r_i` per sale.
pub fn solve_opt_fixed_rev(catalog: &ItemCatalog, buyers: usize, r: &[f64]) -> Result<LpSolution> {
    if buyers == 0 {
        return Err(Error::Domain("the number of buyers must be at least 1".into()));
    }
    let columns = enumerate_columns(catalog)?;
    solve_fixed_rev_with_columns(&columns, catalog.inventories(), buyers, r)
}

pub fn solve_fixed_rev_with_columns(
    columns: &ColumnSet,
    inventories: &[u32],
    buyers: usize,
    r: &[f64],
) -> Result<LpSolution> {
    if r.len() != columns.items {
        return Err(Error::Domain(format!("{} fixed revenues for {} items", r.len(), columns.items)));
    }
    if let Some(bad) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("fixed revenue {bad} must be finite and nonnegative")));
    }
    let values: Vec<f64> = columns.columns.iter().map(|c| c.fixed_revenue(r)).collect();
    solve_collapsed(columns, inventories, buyers, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(thetas: &[f64], caps: &[u32]) -> ItemCatalog {
        ItemCatalog::new(thetas.to_vec(), caps.to_vec()).unwrap()
    }

    #[test]
    fn single_item_column() {
        let cols = enumerate_columns(&catalog(&[2.0], &[1])).unwrap();
        assert_eq!(cols.columns.len(), 1);
        assert!((cols.columns[0].demands[0] - 0.5).abs() < 1e-12);
        assert!((cols.columns[0].revenue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example_catalog_columns() {
        let cols = enumerate_columns(&catalog(&[1.0, 2.0], &[1, 1])).unwrap();
        let mut revs: Vec<f64> = cols.columns.iter().map(|c| c.revenue).collect();
        revs.sort_by(f64::total_cmp);
        for (got, want) in revs.iter().zip([0.567143, 1.0, 1.064005]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn column_cap() {
        let big = ItemCatalog::from_qualities(&[0.0; 21]).unwrap();
        assert_eq!(enumerate_columns(&big), Err(Error::TooManyItems { n: 21, max: 20 }));
    }

    #[test]
    fn opt_single_item() {
        let opt = solve_opt(&catalog(&[2.0], &[5]), 3).unwrap();
        assert!((opt.objective - 3.0).abs() < 1e-9);
        let opt = solve_opt(&catalog(&[2.0], &[1]), 10).unwrap();
        assert!((opt.objective - 2.0).abs() < 1e-9);
        assert!(solve_opt(&catalog(&[2.0], &[1]), 0).is_err());
    }

    #[test]
    fn fixed_revenue_examples() {
        let c = catalog(&[1.0, 2.0], &[100, 100]);
        let sol = solve_opt_fixed_rev(&c, 1, &[1.0, 1.0]).unwrap();
        assert!((sol.objective - (1.0 - 0.331487)).abs() < 1e-6);
        let cols = enumerate_columns(&c).unwrap();
        let (best, _) = sol.support(&cols).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.assortment, Assortment::full(2));

        let zero = solve_opt_fixed_rev(&c, 4, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.objective, 0.0);
    }

    #[test]
    fn price_weights_reproduce_revenue_on_full_column() {
        // r_i = 1/(1 - q_i(full)) makes the full column's fixed value equal R(full)
        let c = catalog(&[1.0, 2.0, -0.5], &[3, 3, 3]);
        let cols = enumerate_columns(&c).unwrap();
        let full = cols.columns.last().unwrap();
        let r: Vec<f64> = full.demands.iter().map(|q| 1.0 / (1.0 - q)).collect();
        assert!((full.fixed_revenue(&r) - full.revenue).abs() < 1e-12);
        for col in &cols.columns {
            // prices only fall as the assortment grows, so r_i undercuts p_i(S)
            assert!(col.fixed_revenue(&r) <= col.revenue + 1e-12);
        }
    }

    #[test]
    fn feasibility_and_duals() {
        let c = catalog(&[3.0, 1.0, 0.0, -1.0], &[2, 1, 4, 1]);
        let cols = enumerate_columns(&c).unwrap();
        let sol = solve_opt_with_columns(&cols, c.inventories(), 7).unwrap();
        let mass: f64 = sol.column_mass.iter().sum();
        assert!(mass <= 7.0 + 1e-8);
        for i in 0..4 {
            let used: f64 = cols.columns.iter().zip(&sol.column_mass).map(|(c, z)| c.demands[i] * z).sum();
            assert!(used <= c.inventories()[i] as f64 + 1e-8);
        }
        // strong duality
        let dual_obj: f64 = sol
            .inventory_duals
            .iter()
            .zip(c.inventories())
            .map(|(y, &ci)| y * ci as f64)
            .sum::<f64>()
            + sol.buyer_dual * 7.0;
        assert!((dual_obj - sol.objective).abs() < 1e-8);
    }
}
