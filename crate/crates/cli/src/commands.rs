use std::path::Path;

use bertrand_mnl::lp::{enumerate_columns, solve_fixed_rev_with_columns, solve_opt_with_columns, LpSolution};
use bertrand_mnl::mnl::{equilibrium_outcome, perishable_outcome};
use bertrand_mnl::network::{
    check_consistency, solve_network_equilibrium, verify_equilibrium, BipartiteMarket, ConsistencyReport,
    EquilibriumCheck, EquilibriumReport, Schedule, SolveOptions,
};
use bertrand_mnl::policies::OnlineInstance;
use bertrand_mnl::segmentation::{compare_segmented_vs_whole, segment_market, Segmentation, SegmentationComparison};
use bertrand_mnl::sim::{adversarial_instance, estimate_revenue, g_curve_table, GCurvePoint, OutcomeCache, RatioEstimate};
use bertrand_mnl::{Assortment, ItemCatalog};
use serde::{Deserialize, Serialize};

use crate::config::{load_catalog, load_market, load_simulate_config};
use crate::error::CliError;
use crate::format::{num, row};

/// Text written to the output plus lines for stderr.
pub struct Output {
    pub body: String,
    pub warnings: Vec<String>,
}

impl Output {
    fn new(body: String) -> Self {
        Self { body, warnings: Vec::new() }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses `"1,3"` into ids; blank input is the empty assortment.
pub fn parse_ids(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Config(format!("'{t}' is not an item id"))))
        .collect()
}

/// Maps 1-based input-order item ids onto catalog positions.
fn parse_assortment(catalog: &ItemCatalog, ids: Option<&[usize]>) -> Result<Assortment, CliError> {
    let Some(ids) = ids else {
        return Ok(Assortment::full(catalog.len()));
    };
    let sorted = ids
        .iter()
        .map(|&id| {
            id.checked_sub(1)
                .and_then(|input| catalog.sorted_position(input))
                .ok_or_else(|| CliError::Config(format!("item {id} is not in the catalog (ids run from 1 to {})", catalog.len())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Assortment::new(sorted, catalog.len()).map_err(CliError::from)
}

fn input_ids(catalog: &ItemCatalog, s: &Assortment) -> Vec<usize> {
    let mut ids: Vec<usize> = s.members().iter().map(|&i| catalog.input_index(i) + 1).collect();
    ids.sort_unstable();
    ids
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ItemReport {
    pub item: usize,
    pub quality: f64,
    pub demand: f64,
    pub price: f64,
    pub revenue: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EquilibriumOutput {
    pub assortment: Vec<usize>,
    pub q0: f64,
    pub items: Vec<ItemReport>,
    pub total_revenue: f64,
}

pub fn equilibrium(catalog_path: &Path, ids: Option<&[usize]>, perishable: bool) -> Result<Output, CliError> {
    let catalog = load_catalog(catalog_path)?;
    let s = parse_assortment(&catalog, ids)?;
    let out = if perishable { perishable_outcome(&catalog, &s)? } else { equilibrium_outcome(&catalog, &s)? };
    let mut items: Vec<ItemReport> = out
        .members
        .iter()
        .enumerate()
        .map(|(k, &i)| ItemReport {
            item: catalog.input_index(i) + 1,
            quality: catalog.quality(i),
            demand: out.demands[k],
            price: out.prices[k],
            revenue: out.revenues[k],
        })
        .collect();
    items.sort_by_key(|r| r.item);
    json(&EquilibriumOutput { assortment: input_ids(&catalog, &s), q0: out.q0, items, total_revenue: out.total_revenue })
        .map(Output::new)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SupportEntry {
    pub assortment: Vec<usize>,
    pub mass: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct OptOutput {
    pub buyers: usize,
    pub fixed_revenues: Option<Vec<f64>>,
    pub objective: f64,
    /// Per item, in input order.
    pub inventory_duals: Vec<f64>,
    pub buyer_dual: f64,
    pub support: Vec<SupportEntry>,
}

pub fn opt(catalog_path: &Path, buyers: usize, fixed: Option<&[f64]>) -> Result<Output, CliError> {
    let catalog = load_catalog(catalog_path)?;
    let columns = enumerate_columns(&catalog)?;
    let sol: LpSolution = match fixed {
        Some(r_input) => {
            if r_input.len() != catalog.len() {
                return Err(CliError::Config(format!("{} fixed revenues for {} items", r_input.len(), catalog.len())));
            }
            let r: Vec<f64> = (0..catalog.len()).map(|i| r_input[catalog.input_index(i)]).collect();
            solve_fixed_rev_with_columns(&columns, catalog.inventories(), buyers, &r)?
        }
        None => solve_opt_with_columns(&columns, catalog.inventories(), buyers)?,
    };
    let mut duals = vec![0.0; catalog.len()];
    for (i, d) in sol.inventory_duals.iter().enumerate() {
        duals[catalog.input_index(i)] = *d;
    }
    let support = sol
        .support(&columns)
        .map(|(c, mass)| SupportEntry { assortment: input_ids(&catalog, &c.assortment), mass })
        .collect();
    json(&OptOutput {
        buyers,
        fixed_revenues: fixed.map(<[f64]>::to_vec),
        objective: sol.objective,
        inventory_duals: duals,
        buyer_dual: sol.buyer_dual,
        support,
    })
    .map(Output::new)
}

/// Default replication count when neither the config nor the command line sets one.
pub const DEFAULT_REPLICATIONS: usize = 2000;

pub fn simulate(config_path: &Path, seed: Option<u64>, replications: Option<usize>) -> Result<Output, CliError> {
    let cfg = load_simulate_config(config_path)?;
    let policies = cfg.policy_kinds()?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let reps = replications.or(cfg.replications).unwrap_or(DEFAULT_REPLICATIONS);
    if reps == 0 {
        return Err(CliError::Config("replications must be positive".into()));
    }
    let base = ItemCatalog::new(cfg.qualities.clone(), cfg.inventories.clone())?;
    let columns = enumerate_columns(&base)?;
    let cache = OutcomeCache::new(base.qualities());

    let levels: Vec<Option<u32>> = match &cfg.inventory_sweep {
        Some(sweep) => sweep.levels.iter().map(|&l| Some(l)).collect(),
        None => vec![None],
    };
    let mut header = vec!["id".to_string(), "lambda".into(), "buyers".into()];
    if cfg.inventory_sweep.is_some() {
        header.push("inventory".into());
    }
    header.push("opt".into());
    for p in &policies {
        for col in ["mean", "se", "ratio", "ratio_se"] {
            header.push(format!("{p}_{col}"));
        }
    }
    let mut body = row(&header);

    for level in &levels {
        let catalog = match (level, &cfg.inventory_sweep) {
            (Some(l), Some(sweep)) => {
                let mut inv = cfg.inventories.clone();
                for &id in &sweep.items {
                    let slot = id
                        .checked_sub(1)
                        .and_then(|k| inv.get_mut(k))
                        .ok_or_else(|| CliError::Config(format!("inventory sweep item {id} is not in the catalog")))?;
                    *slot = *l;
                }
                let sorted: Vec<u32> = (0..base.len()).map(|i| inv[base.input_index(i)]).collect();
                base.with_inventories(sorted)?
            }
            _ => base.clone(),
        };
        for lambda in cfg.lambda.values() {
            for buyers in cfg.buyers.values() {
                let instance = OnlineInstance::new(catalog.clone(), buyers, lambda)?;
                let opt = solve_opt_with_columns(&columns, catalog.inventories(), buyers)?.objective;
                let mut fields = vec![cfg.id.clone(), num(lambda), buyers.to_string()];
                if let Some(l) = level {
                    fields.push(l.to_string());
                }
                fields.push(num(opt));
                for &p in &policies {
                    let est = RatioEstimate::new(estimate_revenue(p, &instance, &cache, reps, seed)?, opt);
                    fields.extend([num(est.mean_revenue), num(est.std_error), num(est.ratio), num(est.ratio_std_error())]);
                }
                body.push_str(&row(&fields));
            }
        }
    }
    Ok(Output::new(body))
}

pub fn gcurve(from: f64, to: f64, step: f64) -> Result<Output, CliError> {
    if !(0.5..1.0).contains(&from) || !(0.5..1.0).contains(&to) || from > to {
        return Err(CliError::Config(format!("threshold range [{from}, {to}] must lie within [0.5, 1)")));
    }
    if step.is_nan() || step <= 0.0 {
        return Err(CliError::Config(format!("step {step} must be positive")));
    }
    let table = g_curve_table(from, to, step)?;
    let point_row = |tag: &str, p: &GCurvePoint| {
        row([tag.to_string(), num(p.lambda), num(p.f), num(p.closed_branch), num(p.numeric_branch), num(p.g)])
    };
    let mut body = row(["row", "lambda", "f", "closed_branch", "numeric_branch", "g"]);
    for p in &table {
        body.push_str(&point_row("point", p));
    }
    let best = table
        .iter()
        .fold(None::<&GCurvePoint>, |b, p| match b {
            Some(b) if b.g >= p.g => Some(b),
            _ => Some(p),
        })
        .expect("nonempty table");
    body.push_str(&point_row("max", best));
    Ok(Output::new(body))
}

fn consistency_warning(c: &ConsistencyReport) -> Option<String> {
    (!c.consistent).then(|| {
        let (k, i) = c.worst_pair.expect("inconsistent market has a visible pair");
        format!(
            "warning: market violates the consistency bound: buyer {k} may buy from seller {i} with probability up to {}; proceeding",
            num(c.max_demand)
        )
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkOutput {
    pub consistency: ConsistencyReport,
    pub report: EquilibriumReport,
    pub verification: EquilibriumCheck,
}

pub fn network(market_path: &Path, options: &SolveOptions) -> Result<Output, CliError> {
    let market = load_market(market_path)?;
    let consistency = check_consistency(&market);
    let warning = consistency_warning(&consistency);
    let report = solve_network_equilibrium(&market, options)?;
    let verification = verify_equilibrium(&market, &report.prices, 1e-7)?;
    let mut out = Output::new(json(&NetworkOutput { consistency, report, verification })?);
    out.warnings.extend(warning);
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentOutput {
    pub consistency: ConsistencyReport,
    pub segmentation: Segmentation,
    pub comparison: Option<SegmentationComparison>,
}

/// Segmentation report, plus a per-pool CSV summary when requested.
pub fn segment(market_path: &Path, compare: bool, options: &SolveOptions) -> Result<(Output, String), CliError> {
    let market: BipartiteMarket = load_market(market_path)?;
    let consistency = check_consistency(&market);
    let warning = consistency_warning(&consistency);
    let segmentation = segment_market(&market)?;
    let comparison = if compare { Some(compare_segmented_vs_whole(&market, options)?) } else { None };

    let mut summary = row(["seller", "buyers", "price", "revenue"]);
    for ((pool, price), revenue) in segmentation.pools.iter().zip(&segmentation.pool_prices).zip(&segmentation.pool_revenues) {
        let buyers = pool.buyers.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        summary.push_str(&row([pool.seller.to_string(), buyers, num(*price), num(*revenue)]));
    }
    let mut out = Output::new(json(&SegmentOutput { consistency, segmentation, comparison })?);
    out.warnings.extend(warning);
    Ok((out, summary))
}

/// Offer-from-buyer-`k` ratios on the growing-revenue adversary, for every horizon.
pub fn adversary_demo(base: f64, horizon: usize, starts: &[usize]) -> Result<Output, CliError> {
    if horizon == 0 {
        return Err(CliError::Config("horizon must be at least 1".into()));
    }
    let inst = adversarial_instance(base, horizon)?;
    let mut header = vec!["horizon".to_string(), "theta".into(), "revenue".into(), "demand".into()];
    header.extend(starts.iter().map(|k| format!("ratio_from_{k}")));
    let mut body = row(&header);
    for t in 1..=horizon {
        let mut fields = vec![t.to_string(), num(inst.qualities[t - 1]), num(inst.revenues[t - 1]), num(inst.demands[t - 1])];
        fields.extend(starts.iter().map(|&k| num(inst.wait_then_offer_ratio(k, t))));
        body.push_str(&row(&fields));
    }
    Ok(Output::new(body))
}

pub fn solve_options(tolerance: f64, max_iters: usize, jacobi: bool) -> SolveOptions {
    SolveOptions {
        tolerance,
        max_iters,
        schedule: if jacobi { Schedule::Jacobi } else { Schedule::GaussSeidel },
        start: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_lists() {
        assert_eq!(parse_ids("1,3").unwrap(), vec![1, 3]);
        assert_eq!(parse_ids(" 2 , 1 ").unwrap(), vec![2, 1]);
        assert!(parse_ids("").unwrap().is_empty());
        assert!(matches!(parse_ids("1,x"), Err(CliError::Config(_))));
    }
}
