//! Black-box deciders consulted by the voting ensemble.

use std::collections::HashMap;

use crate::data::{Dataset, Instance, Label};
use crate::error::{Error, Result};
use crate::gbt::{GbtConfig, GbtModel};
use crate::scalar::Scalar;
use crate::tree::{train_tree, DecisionTree, TreeConfig};

pub trait Decider: Send + Sync {
    fn name(&self) -> &str;
    fn predict(&self, ds: &Dataset, inst: &Instance) -> Result<Label>;
}

/// Ground truth as a decider: answers with the stored label of each id.
#[derive(Clone, Debug, Default)]
pub struct OracleDecider {
    labels: HashMap<u64, Label>,
}

impl OracleDecider {
    pub fn new(labels: HashMap<u64, Label>) -> Self {
        OracleDecider { labels }
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let labels = ds
            .instances()
            .iter()
            .filter_map(|i| ds.label_of(i).map(|l| (i.id, l.clone())))
            .collect();
        OracleDecider { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Decider for OracleDecider {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, _ds: &Dataset, inst: &Instance) -> Result<Label> {
        self.labels.get(&inst.id).cloned().ok_or_else(|| Error::Lookup(format!("no label for instance {}", inst.id)))
    }
}

pub struct TreeDecider(pub DecisionTree);

impl TreeDecider {
    pub fn train(train: &Dataset, cfg: &TreeConfig) -> Result<Self> {
        Ok(TreeDecider(train_tree(train, cfg)?))
    }
}

impl Decider for TreeDecider {
    fn name(&self) -> &str {
        "tree"
    }

    fn predict(&self, _ds: &Dataset, inst: &Instance) -> Result<Label> {
        Ok(self.0.predict(inst).clone())
    }
}

impl<S: Scalar> Decider for GbtModel<S> {
    fn name(&self) -> &str {
        "gbt"
    }

    fn predict(&self, ds: &Dataset, inst: &Instance) -> Result<Label> {
        GbtModel::predict(self, ds, inst)
    }
}

/// Trains the default boosted decider.
pub fn train_gbt(train: &Dataset, cfg: &GbtConfig) -> Result<GbtModel<f64>> {
    GbtModel::train(train, cfg)
}
