//! Extremal reachability over MDPs by value iteration.

use std::collections::VecDeque;

use super::dtmc::bounded_steps;
use super::{Solution, SolverOptions};
use crate::model::{ExplicitMdp, StateSet};
use crate::pctl::StepBound;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    fn pick<T: Scalar>(self, best: Option<T>, v: T) -> T {
        match (self, best) {
            (_, None) => v,
            (Extremum::Max, Some(b)) => b.max(v),
            (Extremum::Min, Some(b)) => b.min(v),
        }
    }

    pub fn dual(self) -> Extremum {
        match self {
            Extremum::Max => Extremum::Min,
            Extremum::Min => Extremum::Max,
        }
    }
}

/// Prob0A: states where every scheduler reaches `phi2` with probability 0.
pub fn prob0_all<T: Scalar>(mdp: &ExplicitMdp<T>, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    let preds = mdp.predecessors();
    let mut seen = phi2.clone();
    let mut queue: VecDeque<usize> = phi2.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &s in preds.of(t) {
            let s = s as usize;
            if phi1.contains(s) && seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    seen.complement()
}

/// Prob0E: states where some scheduler reaches `phi2` with probability 0.
/// Its complement is the least set containing `phi2` and every `phi1`-state
/// all of whose choices can step into the set.
pub fn prob0_exists<T: Scalar>(mdp: &ExplicitMdp<T>, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    let n = mdp.num_states();
    let preds = mdp.predecessors();
    let mut positive = phi2.clone();
    let mut hit = vec![false; mdp.num_choices()];
    let mut remaining: Vec<usize> = (0..n).map(|s| mdp.choices(s).len()).collect();
    let mut queue: VecDeque<usize> = phi2.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &s in preds.of(t) {
            let s = s as usize;
            if positive.contains(s) || !phi1.contains(s) {
                continue;
            }
            for c in mdp.choices(s) {
                if !hit[c] && mdp.choice_slices(c).0.iter().any(|&d| d as usize == t) {
                    hit[c] = true;
                    remaining[s] -= 1;
                }
            }
            if remaining[s] == 0 && positive.insert(s) {
                queue.push_back(s);
            }
        }
    }
    positive.complement()
}

fn choice_value<T: Scalar>(mdp: &ExplicitMdp<T>, c: usize, x: &[T]) -> T {
    let (cols, vals) = mdp.choice_slices(c);
    let mut acc = T::zero();
    for (d, p) in cols.iter().zip(vals) {
        acc += *p * x[*d as usize];
    }
    acc
}

/// `Pmax`/`Pmin(phi1 U phi2)` by in-place value iteration from below.
pub fn until<T: Scalar>(
    mdp: &ExplicitMdp<T>,
    ext: Extremum,
    phi1: &StateSet,
    phi2: &StateSet,
    opts: &SolverOptions,
) -> Solution<T> {
    let n = mdp.num_states();
    let no = match ext {
        Extremum::Max => prob0_all(mdp, phi1, phi2),
        Extremum::Min => prob0_exists(mdp, phi1, phi2),
    };
    let mut x: Vec<T> = (0..n).map(|s| if phi2.contains(s) { T::one() } else { T::zero() }).collect();
    let maybe: Vec<usize> = phi2.union(&no).complement().iter().collect();
    if maybe.is_empty() {
        return Solution { values: x, iterations: 0, residual: 0.0, converged: true };
    }
    let tol = T::of(opts.tol);
    let mut iterations = 0u64;
    let mut residual = T::infinity();
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_rel = T::zero();
        for &s in &maybe {
            let mut best = None;
            for c in mdp.choices(s) {
                best = Some(ext.pick(best, choice_value(mdp, c, &x)));
            }
            let new = best.expect("every state has a choice");
            let diff = (new - x[s]).abs();
            let rel = if new > T::zero() { diff / new } else { diff };
            if rel > max_rel {
                max_rel = rel;
            }
            x[s] = new;
        }
        residual = max_rel;
        if max_rel <= tol {
            return Solution { values: x, iterations, residual: residual.as_f64(), converged: true };
        }
    }
    Solution { values: x, iterations, residual: residual.as_f64(), converged: false }
}

pub fn bounded_until<T: Scalar>(
    mdp: &ExplicitMdp<T>,
    ext: Extremum,
    phi1: &StateSet,
    phi2: &StateSet,
    bound: StepBound,
) -> Vec<T> {
    let n = mdp.num_states();
    let mut x: Vec<T> = (0..n).map(|s| if phi2.contains(s) { T::one() } else { T::zero() }).collect();
    let active: Vec<usize> = phi1.difference(phi2).iter().collect();
    let mut next = x.clone();
    for _ in 0..bounded_steps(bound) {
        let mut changed = false;
        for &s in &active {
            let mut best = None;
            for c in mdp.choices(s) {
                best = Some(ext.pick(best, choice_value(mdp, c, &x)));
            }
            let v = best.expect("every state has a choice");
            changed |= v != x[s];
            next[s] = v;
        }
        std::mem::swap(&mut x, &mut next);
        if !changed {
            break;
        }
    }
    x
}

pub fn prob_next<T: Scalar>(mdp: &ExplicitMdp<T>, ext: Extremum, phi: &StateSet) -> Vec<T> {
    let ind: Vec<T> = (0..mdp.num_states()).map(|s| if phi.contains(s) { T::one() } else { T::zero() }).collect();
    (0..mdp.num_states())
        .map(|s| {
            let mut best = None;
            for c in mdp.choices(s) {
                best = Some(ext.pick(best, choice_value(mdp, c, &ind)));
            }
            best.expect("every state has a choice")
        })
        .collect()
}

/// `Pmax(G phi) = 1 - Pmin(F !phi)` and dually.
pub fn prob_globally<T: Scalar>(mdp: &ExplicitMdp<T>, ext: Extremum, phi: &StateSet, opts: &SolverOptions) -> Solution<T> {
    let n = mdp.num_states();
    let mut sol = until(mdp, ext.dual(), &StateSet::full(n), &phi.complement(), opts);
    for v in &mut sol.values {
        *v = T::one() - *v;
    }
    sol
}
