use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    InDomain,
    OutDomain,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::InDomain => 0,
            Split::OutDomain => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::InDomain),
            1 => Some(Split::OutDomain),
            _ => None,
        }
    }
}

/// How physical-parameter vectors are assigned to the out-of-domain side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum OodRule {
    /// Vectors equal (to 1e-12 relative) to one of `out` are out-of-domain.
    Explicit { out: Vec<Vec<f64>> },
    /// `δ[component] < threshold` is out-of-domain.
    Below { component: usize, threshold: f64 },
    /// `δ[component] > threshold` is out-of-domain.
    Above { component: usize, threshold: f64 },
    #[default]
    AllInDomain,
}

fn approx_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
}

impl OodRule {
    pub fn classify(&self, params: &[f64]) -> Result<Split> {
        let component_of = |c: usize| {
            params
                .get(c)
                .copied()
                .ok_or_else(|| SparkError::Config(format!("ood rule reads component {c} of a {}-vector", params.len())))
        };
        Ok(match self {
            OodRule::Explicit { out } => {
                if out.iter().any(|o| approx_eq(o, params)) {
                    Split::OutDomain
                } else {
                    Split::InDomain
                }
            }
            OodRule::Below { component, threshold } => {
                if component_of(*component)? < *threshold {
                    Split::OutDomain
                } else {
                    Split::InDomain
                }
            }
            OodRule::Above { component, threshold } => {
                if component_of(*component)? > *threshold {
                    Split::OutDomain
                } else {
                    Split::InDomain
                }
            }
            OodRule::AllInDomain => Split::InDomain,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamPartition {
    pub in_domain: Vec<Vec<f64>>,
    pub out_domain: Vec<Vec<f64>>,
}

/// Partition a parameter grid into in-domain and out-of-domain values.
pub fn make_ood_split(param_grid: &[Vec<f64>], rule: &OodRule) -> Result<ParamPartition> {
    if param_grid.is_empty() {
        return Err(SparkError::Config("parameter grid is empty".into()));
    }
    let mut part = ParamPartition {
        in_domain: Vec::new(),
        out_domain: Vec::new(),
    };
    for p in param_grid {
        match rule.classify(p)? {
            Split::InDomain => part.in_domain.push(p.clone()),
            Split::OutDomain => part.out_domain.push(p.clone()),
        }
    }
    if part.in_domain.is_empty() {
        return Err(SparkError::Config("ood rule leaves no in-domain parameters".into()));
    }
    if part.out_domain.is_empty() {
        log::warn!("ood rule leaves the out-of-domain set empty");
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_nu() -> Vec<Vec<f64>> {
        (1..=10).map(|e| vec![10f64.powi(-e)]).collect()
    }

    #[test]
    fn explicit_list_matches_navier_stokes_row() {
        let rule = OodRule::Explicit {
            out: vec![vec![1e-9], vec![1e-10]],
        };
        let part = make_ood_split(&table_nu(), &rule).unwrap();
        assert_eq!(part.in_domain.len(), 8);
        assert_eq!(part.out_domain, vec![vec![1e-9], vec![1e-10]]);
    }

    #[test]
    fn threshold_rule_reproduces_explicit_lists() {
        let explicit = make_ood_split(
            &table_nu(),
            &OodRule::Explicit {
                out: vec![vec![1e-9], vec![1e-10]],
            },
        )
        .unwrap();
        let threshold = make_ood_split(
            &table_nu(),
            &OodRule::Below {
                component: 0,
                threshold: 5e-9,
            },
        )
        .unwrap();
        assert_eq!(explicit, threshold);
    }

    #[test]
    fn all_in_domain_with_single_value() {
        let part = make_ood_split(&[vec![1e-3]], &OodRule::AllInDomain).unwrap();
        assert_eq!(part.in_domain.len(), 1);
        assert!(part.out_domain.is_empty());
    }

    #[test]
    fn empty_in_domain_is_an_error() {
        let rule = OodRule::Below {
            component: 0,
            threshold: 1.0,
        };
        assert!(make_ood_split(&[vec![0.1], vec![0.2]], &rule).is_err());
        assert!(make_ood_split(&[], &OodRule::AllInDomain).is_err());
    }
}
