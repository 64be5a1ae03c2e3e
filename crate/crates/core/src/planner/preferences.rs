use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::logs::BinSpec;

/// Preferred distribution P*(x_j) over the bins of each context variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    preferred: BTreeMap<String, Vec<f64>>,
}

impl PreferenceModel {
    pub fn new(preferred: BTreeMap<String, Vec<f64>>) -> Result<Self, PlannerError> {
        for (id, p) in &preferred {
            let sum: f64 = p.iter().sum();
            if p.is_empty() || p.iter().any(|&x| !(x > 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(PlannerError::InvalidPreference(id.clone()));
            }
        }
        Ok(PreferenceModel { preferred })
    }

    /// `nominal_mass` on each metric's healthy bin, the rest spread evenly.
    pub fn from_bins(bins: &BinSpec, nominal_mass: f64) -> Result<Self, PlannerError> {
        if !(nominal_mass > 0.0 && nominal_mass < 1.0) {
            return Err(PlannerError::InvalidConfig(format!("nominal mass {nominal_mass} outside (0, 1)")));
        }
        let preferred = bins
            .metrics
            .iter()
            .map(|m| {
                let r = m.arity();
                let p = if r == 1 {
                    vec![1.0]
                } else {
                    let rest = (1.0 - nominal_mass) / (r - 1) as f64;
                    let mut p = vec![rest; r];
                    p[m.nominal_bin() as usize] = nominal_mass;
                    p
                };
                (m.name.clone(), p)
            })
            .collect();
        Self::new(preferred)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.preferred.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.preferred.iter()
    }
}
