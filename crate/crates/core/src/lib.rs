//! Bertrand price competition under multinomial-logit demand.
//!
//! * [`mnl`]: closed-form single-buyer equilibria and best-response machinery.
//! * [`lp`]: the clairvoyant LP upper bound and the dense simplex behind it.
//! * [`policies`]: online assortment rules (hybrid, greedy, inventory-weighted).
//! * [`sim`]: seeded Monte-Carlo episodes, competitive-ratio estimates, the
//!   worst-case ratio curve and the heterogeneous-buyer adversary.
//! * [`network`]: the multi-buyer game over a bipartite visibility graph.
//! * [`flow`] and [`segmentation`]: flow-based market segmentation.

pub mod error;
pub mod flow;
pub mod lp;
pub mod mnl;
pub mod network;
pub mod policies;
pub mod segmentation;
pub mod sim;
pub mod simplex;

pub use error::{Error, Result};
pub use mnl::{Assortment, EquilibriumOutcome, ItemCatalog, PriceVector};
