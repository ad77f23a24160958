//! Product refinement for until formulas whose operands are themselves until
//! formulas.
//!
//! For an inner `xi = A U B` with per-state probability `x`, each state `s` is
//! split into `(s, true)` and `(s, false)`, weighted `x(s)` and `1 - x(s)`.
//! Where the truth of `xi` is decided at `s` (`s ∈ B` or `s ∉ A`) the copy
//! steps to `(t, w)` with weight `P(s,t)·q_t(w)`; where it is not
//! (`s ∈ A \ B`) it must keep its value and steps to `(t, v)` with weight
//! `P(s,t)·q_t(v)`. Rows are renormalised by their actual sum. On the refined
//! chain `xi` is the state set `{(s, true)}`, and for the starting split
//! `P_s(phi) = Σ_v q_s(v)·P_(s,v)(phi')`.

use std::sync::OnceLock;

use super::{dtmc, Chain, Solution, SolverOptions};
use crate::model::{Predecessors, StateSet};
use crate::scalar::Scalar;

/// A chain whose states are copies of the states of a root chain.
pub struct Refined<T> {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    preds: OnceLock<Predecessors>,
    /// Root-chain state each copy descends from.
    origin: Vec<u32>,
    /// Product of split weights from the root state to this copy.
    weight: Vec<T>,
}

impl<T: Scalar> Chain<T> for Refined<T> {
    fn num_states(&self) -> usize {
        self.origin.len()
    }

    fn row(&self, s: usize) -> (&[u32], &[T]) {
        let (lo, hi) = (self.row_ptr[s], self.row_ptr[s + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    fn predecessors(&self) -> &Predecessors {
        self.preds.get_or_init(|| {
            let n = self.num_states();
            let edges = (0..n).flat_map(move |s| {
                let (lo, hi) = (self.row_ptr[s], self.row_ptr[s + 1]);
                self.cols[lo..hi].iter().map(move |&d| (s, d as usize))
            });
            Predecessors::build(n, edges)
        })
    }
}

impl<T: Scalar> Refined<T> {
    /// Identity copy of `root`.
    pub fn root<C: Chain<T> + ?Sized>(root: &C) -> Self {
        let n = root.num_states();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for s in 0..n {
            let (c, v) = root.row(s);
            cols.extend_from_slice(c);
            vals.extend_from_slice(v);
            row_ptr.push(cols.len());
        }
        Refined {
            row_ptr,
            cols,
            vals,
            preds: OnceLock::new(),
            origin: (0..n as u32).collect(),
            weight: vec![T::one(); n],
        }
    }

    /// Splits every state on the truth of `a U b`. Returns the refined chain,
    /// the parent index of every copy, and the set of copies where it holds.
    pub fn split_on_until(&self, a: &StateSet, b: &StateSet, opts: &SolverOptions) -> (Refined<T>, Vec<u32>, StateSet, Solution<T>) {
        let n = self.num_states();
        let sol = dtmc::until(self, a, b, opts);
        let x = &sol.values;
        let q = |s: usize, v: bool| if v { x[s] } else { T::one() - x[s] };
        // copy index of (s, v) if it carries positive weight
        let mut idx = vec![[u32::MAX; 2]; n];
        let mut parent = Vec::with_capacity(2 * n);
        let mut holds = Vec::with_capacity(2 * n);
        for s in 0..n {
            for v in [true, false] {
                if q(s, v) > T::zero() {
                    idx[s][v as usize] = parent.len() as u32;
                    parent.push(s as u32);
                    holds.push(v);
                }
            }
        }
        let m = parent.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        row_ptr.push(0);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        let mut row: Vec<(u32, T)> = Vec::new();
        for k in 0..m {
            let s = parent[k] as usize;
            let v = holds[k];
            let decided = b.contains(s) || !a.contains(s);
            row.clear();
            let (rc, rv) = self.row(s);
            for (&t, &p) in rc.iter().zip(rv) {
                let t = t as usize;
                for w in [true, false] {
                    if (decided || w == v) && idx[t][w as usize] != u32::MAX {
                        let weight = p * q(t, w);
                        if weight > T::zero() {
                            row.push((idx[t][w as usize], weight));
                        }
                    }
                }
            }
            let sum: T = row.iter().map(|e| e.1).sum();
            if sum > T::zero() {
                for e in &mut row {
                    e.1 /= sum;
                }
            } else {
                // numerically invisible copy; any closed row keeps the chain stochastic
                row.push((k as u32, T::one()));
            }
            row.sort_by_key(|e| e.0);
            for &(c, p) in &row {
                cols.push(c);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        let origin = parent.iter().map(|&p| self.origin[p as usize]).collect();
        let weight = (0..m).map(|k| self.weight[parent[k] as usize] * q(parent[k] as usize, holds[k])).collect();
        let refined = Refined { row_ptr, cols, vals, preds: OnceLock::new(), origin, weight };
        (refined, parent, StateSet::from_bits(holds), sol)
    }

    /// Lifts a set over the root chain to the copies.
    pub fn lift(&self, root_set: &StateSet) -> StateSet {
        StateSet::from_bits(self.origin.iter().map(|&o| root_set.contains(o as usize)).collect())
    }

    /// Projects per-copy values back to the root: `Σ weight·value` per origin.
    pub fn aggregate(&self, values: &[T], root_states: usize) -> Vec<T> {
        let mut out = vec![T::zero(); root_states];
        for (k, v) in values.iter().enumerate() {
            out[self.origin[k] as usize] += self.weight[k] * *v;
        }
        out
    }
}

/// Pulls a set on a parent chain down to the copies of a refinement.
pub fn pull_back(set: &StateSet, parent: &[u32]) -> StateSet {
    StateSet::from_bits(parent.iter().map(|&p| set.contains(p as usize)).collect())
}
