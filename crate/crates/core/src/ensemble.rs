//! Named collections of registered shapes with optional per-shape covariates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::srvf::Srvf;

/// A scalar or categorical covariate value attached to a shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariate {
    Number(f64),
    Text(String),
}

impl Covariate {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Covariate::Number(x) => Some(*x),
            Covariate::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Covariate::Text(s) => Some(s),
            Covariate::Number(_) => None,
        }
    }
}

/// A collection of SRVFs sharing one sample count, with unique ids and
/// optional covariates per shape.
#[derive(Debug, Clone)]
pub struct ShapeEnsemble {
    shapes: Vec<Srvf>,
    ids: Vec<String>,
    covariates: Vec<BTreeMap<String, Covariate>>,
    m: usize,
}

impl ShapeEnsemble {
    pub fn new(entries: Vec<(String, Srvf)>) -> Result<Self> {
        let covariates = vec![BTreeMap::new(); entries.len()];
        Self::with_covariates(entries, covariates)
    }

    pub fn with_covariates(
        entries: Vec<(String, Srvf)>,
        covariates: Vec<BTreeMap<String, Covariate>>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble is empty".into()));
        }
        if covariates.len() != entries.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} covariate maps for {} shapes",
                covariates.len(),
                entries.len()
            )));
        }
        let m = entries[0].1.m();
        let mut ids = Vec::with_capacity(entries.len());
        let mut shapes = Vec::with_capacity(entries.len());
        for (id, q) in entries {
            if q.m() != m {
                return Err(Error::InvalidEnsemble(format!(
                    "shape '{id}' has {} samples, expected {m}",
                    q.m()
                )));
            }
            if ids.contains(&id) {
                return Err(Error::InvalidEnsemble(format!("duplicate id '{id}'")));
            }
            ids.push(id);
            shapes.push(q);
        }
        Ok(ShapeEnsemble {
            shapes,
            ids,
            covariates,
            m,
        })
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn shape(&self, i: usize) -> &Srvf {
        &self.shapes[i]
    }

    pub fn shapes(&self) -> &[Srvf] {
        &self.shapes
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn covariates(&self, i: usize) -> &BTreeMap<String, Covariate> {
        &self.covariates[i]
    }

    pub fn covariate(&self, i: usize, name: &str) -> Option<&Covariate> {
        self.covariates[i].get(name)
    }

    /// All covariate names present on at least one shape, sorted.
    pub fn covariate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .covariates
            .iter()
            .flat_map(|m| m.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Sub-ensemble of the given indices (covariates carried along).
    pub fn subset(&self, indices: &[usize]) -> Result<ShapeEnsemble> {
        let entries: Vec<(String, Srvf)> = indices
            .iter()
            .map(|&i| (self.ids[i].clone(), self.shapes[i].clone()))
            .collect();
        let covs: Vec<BTreeMap<String, Covariate>> = indices
            .iter()
            .map(|&i| self.covariates[i].clone())
            .collect();
        ShapeEnsemble::with_covariates(entries, covs)
    }

    /// Replace the shapes, keeping ids and covariates (used to swap in
    /// registered copies).
    pub(crate) fn with_shapes(&self, shapes: Vec<Srvf>) -> ShapeEnsemble {
        assert_eq!(shapes.len(), self.shapes.len());
        ShapeEnsemble {
            shapes,
            ids: self.ids.clone(),
            covariates: self.covariates.clone(),
            m: self.m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn rejects_mismatched_sample_counts() {
        let a = synthetic::random_srvf(1, 64).unwrap();
        let b = synthetic::random_srvf(2, 32).unwrap();
        let err = ShapeEnsemble::new(vec![("a".into(), a), ("b".into(), b)]);
        assert!(matches!(err, Err(Error::InvalidEnsemble(_))));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let a = synthetic::random_srvf(1, 64).unwrap();
        let b = synthetic::random_srvf(2, 64).unwrap();
        let err = ShapeEnsemble::new(vec![("a".into(), a), ("a".into(), b)]);
        assert!(matches!(err, Err(Error::InvalidEnsemble(_))));
    }

    #[test]
    fn subset_preserves_covariates() {
        let shapes: Vec<(String, Srvf)> = (0..3)
            .map(|i| {
                (
                    format!("s{i}"),
                    synthetic::random_srvf(i as u64, 48).unwrap(),
                )
            })
            .collect();
        let covs: Vec<BTreeMap<String, Covariate>> = (0..3)
            .map(|i| {
                let mut m = BTreeMap::new();
                m.insert("survival".into(), Covariate::Number(i as f64));
                m
            })
            .collect();
        let e = ShapeEnsemble::with_covariates(shapes, covs).unwrap();
        let sub = e.subset(&[2, 0]).unwrap();
        assert_eq!(sub.id(0), "s2");
        assert_eq!(sub.covariate(0, "survival"), Some(&Covariate::Number(2.0)));
    }
}
