//! Experiment recipes: a seed, a local vantage and a list of workflows to
//! generate from a node pool.

use cloudforecast_core::workflow::{
    generate_random_workflow, WorkflowNode, WorkflowPattern, WorkflowSpec,
};
use cloudforecast_core::{Error, Result};
use serde::Deserialize;

use crate::config::LocalVantage;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeEntry {
    pub name: String,
    pub pattern: WorkflowPattern,
    pub nodes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub local: Option<LocalVantage>,
    /// Inline node pool; the bundled pool is used when absent.
    #[serde(default)]
    pub pool: Option<Vec<WorkflowNode>>,
    pub workflows: Vec<RecipeEntry>,
}

impl Recipe {
    pub fn parse(document: &str) -> Result<Self> {
        serde_json::from_str(document).map_err(|e| Error::Config(format!("recipe: {e}")))
    }

    /// Workflow `i` is generated with seed `seed + i`, so entries stay
    /// independent of each other.
    pub fn generate(&self, pool: &[WorkflowNode], seed: Option<u64>) -> Result<Vec<WorkflowSpec>> {
        let seed = seed.unwrap_or(self.seed);
        self.workflows
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                let mut spec = generate_random_workflow(
                    entry.pattern,
                    entry.nodes,
                    pool,
                    seed.wrapping_add(i as u64),
                )?;
                spec.name = entry.name.clone();
                Ok(spec)
            })
            .collect()
    }
}
