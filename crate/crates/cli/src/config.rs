//! Input files. Every document carries `"schema": 1` and rejects unknown fields.

use std::fs;
use std::path::Path;

use bertrand_mnl::network::BipartiteMarket;
use bertrand_mnl::policies::PolicyKind;
use bertrand_mnl::ItemCatalog;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn check_schema(schema: u32, path: &Path) -> Result<(), CliError> {
    if schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "{}: unsupported schema {schema}, expected {SCHEMA_VERSION}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema: u32,
    pub qualities: Vec<f64>,
    pub inventories: Vec<u32>,
    #[serde(default)]
    pub costs: Option<Vec<f64>>,
}

pub fn load_catalog(path: &Path) -> Result<ItemCatalog, CliError> {
    let file: CatalogFile = read_json(path)?;
    check_schema(file.schema, path)?;
    let catalog = match file.costs {
        Some(costs) => ItemCatalog::with_costs(file.qualities, file.inventories, costs),
        None => ItemCatalog::new(file.qualities, file.inventories),
    };
    catalog.map_err(CliError::from)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub schema: u32,
    pub theta: Vec<Vec<f64>>,
    #[serde(default)]
    pub visibility: Option<Vec<Vec<bool>>>,
    pub capacities: Vec<u32>,
}

pub fn load_market(path: &Path) -> Result<BipartiteMarket, CliError> {
    let file: MarketFile = read_json(path)?;
    check_schema(file.schema, path)?;
    BipartiteMarket::new(file.theta, file.visibility, file.capacities).map_err(CliError::from)
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Sets the stock of the listed items (1-based, input order) to each level in turn.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InventorySweep {
    pub items: Vec<usize>,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema: u32,
    pub id: String,
    pub qualities: Vec<f64>,
    pub inventories: Vec<u32>,
    pub policies: Vec<String>,
    pub lambda: OneOrMany<f64>,
    pub buyers: OneOrMany<usize>,
    #[serde(default)]
    pub inventory_sweep: Option<InventorySweep>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimulateConfig {
    pub fn policy_kinds(&self) -> Result<Vec<PolicyKind>, CliError> {
        if self.policies.is_empty() {
            return Err(CliError::Config("at least one policy is required".into()));
        }
        self.policies
            .iter()
            .map(|p| p.parse::<PolicyKind>().map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }
}

pub fn load_simulate_config(path: &Path) -> Result<SimulateConfig, CliError> {
    let cfg: SimulateConfig = read_json(path)?;
    check_schema(cfg.schema, path)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_or_list() {
        let one: OneOrMany<f64> = serde_json::from_str("0.5").unwrap();
        let many: OneOrMany<f64> = serde_json::from_str("[0.5, 0.6]").unwrap();
        assert_eq!(one.values(), vec![0.5]);
        assert_eq!(many.values(), vec![0.5, 0.6]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"schema":1,"qualities":[1],"inventories":[1],"colour":"red"}"#;
        assert!(serde_json::from_str::<CatalogFile>(bad).is_err());
        let good = r#"{"schema":1,"qualities":[1],"inventories":[1]}"#;
        assert!(serde_json::from_str::<CatalogFile>(good).is_ok());
    }
}
