//! Laminar families of vertex sets with their boundary capacities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CapGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminarFamily {
    pub sets: Vec<Vec<usize>>,
    pub delta: Vec<f64>,
    /// Smallest strictly larger set containing each set, if any.
    pub parent: Vec<Option<usize>>,
    /// Sets containing each vertex, innermost first.
    pub member_of: Vec<Vec<usize>>,
}

impl LaminarFamily {
    /// Builds the family over `g`, rejecting non-laminar input. Duplicate
    /// sets are dropped.
    pub fn new(g: &CapGraph, sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = g.n();
        let mut sets: Vec<Vec<usize>> = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .filter(|s| !s.is_empty())
            .collect();
        for s in &sets {
            if let Some(&v) = s.iter().find(|&&v| v >= n) {
                return Err(Error::Structure(format!("vertex {v} outside 0..{n}")));
            }
        }
        sets.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        sets.dedup();
        let mut owner = vec![usize::MAX; n];
        let mut parent = Vec::with_capacity(sets.len());
        for (i, s) in sets.iter().enumerate() {
            let p = owner[s[0]];
            if s.iter().any(|&v| owner[v] != p) {
                return Err(Error::Structure(format!("set {i} crosses another family set")));
            }
            parent.push((p != usize::MAX).then_some(p));
            for &v in s {
                owner[v] = i;
            }
        }
        let mut member_of = vec![Vec::new(); n];
        for (i, s) in sets.iter().enumerate().rev() {
            for &v in s {
                member_of[v].push(i);
            }
        }
        let delta = sets.iter().map(|s| g.cut_capacity(&g.set_mask(s))).collect();
        Ok(LaminarFamily { sets, delta, parent, member_of })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Total size z = Σ|C|.
    pub fn size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    /// `b(C)` for every set.
    pub fn sums(&self, b: &[f64]) -> Vec<f64> {
        self.sets.iter().map(|s| s.iter().map(|&v| b[v]).sum()).collect()
    }

    /// `max_C |b(C)|/δC`; a set with δC = 0 and b(C) ≠ 0 gives infinity.
    pub fn estimate(&self, b: &[f64]) -> f64 {
        let scale = b.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
        self.sums(b)
            .iter()
            .zip(&self.delta)
            .map(|(s, &d)| {
                if d > 0.0 {
                    s.abs() / d
                } else if s.abs() > 1e-9 * scale {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// First set violating `|b(C)| ≤ slack · δC`, if any.
    pub fn violation(&self, b: &[f64], slack: f64) -> Option<(usize, f64, f64)> {
        let scale = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        self.sums(b)
            .into_iter()
            .enumerate()
            .find(|&(i, s)| s.abs() > slack * self.delta[i] + 1e-9 * scale)
            .map(|(i, s)| (i, s, self.delta[i]))
    }
}

/// Checks pairwise laminarity directly (quadratic; used by tests).
pub fn is_laminar(sets: &[Vec<usize>]) -> bool {
    use std::collections::BTreeSet;
    let sets: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let inter = sets[i].intersection(&sets[j]).count();
            if inter != 0 && inter != sets[i].len() && inter != sets[j].len() {
                return false;
            }
        }
    }
    true
}
