//! Reachability kernels over row-stochastic chains.

use std::collections::VecDeque;

use super::{Chain, Solution, SolverOptions};
use crate::model::StateSet;
use crate::pctl::StepBound;
use crate::scalar::Scalar;

/// States that reach `phi2` with probability 0 along `phi1`-paths: the
/// complement of backward reachability from `phi2` through `phi1`.
pub fn prob0<T, C: Chain<T> + ?Sized>(chain: &C, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    let reach = backward_reach(chain, phi2, phi1);
    reach.complement()
}

/// States that reach `phi2` with probability 1 along `phi1`-paths: those that
/// cannot reach a prob0 state through `phi1 \ phi2`.
pub fn prob1<T, C: Chain<T> + ?Sized>(chain: &C, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    let no = prob0(chain, phi1, phi2);
    let through = phi1.difference(phi2);
    backward_reach(chain, &no, &through).complement()
}

/// `targets` plus every `via`-state with a path into `targets` through `via`-states.
fn backward_reach<T, C: Chain<T> + ?Sized>(chain: &C, targets: &StateSet, via: &StateSet) -> StateSet {
    let preds = chain.predecessors();
    let mut seen = targets.clone();
    let mut queue: VecDeque<usize> = targets.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &s in preds.of(t) {
            let s = s as usize;
            if via.contains(s) && seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Gauss-Seidel on `x = A x + b` over `maybe`, sweeping states in ascending
/// order. `yes` states are fixed at 1, all others outside `maybe` at 0.
pub fn solve_until<T: Scalar, C: Chain<T> + ?Sized>(
    chain: &C,
    yes: &StateSet,
    maybe: &StateSet,
    opts: &SolverOptions,
) -> Solution<T> {
    let n = chain.num_states();
    let mut x: Vec<T> = (0..n).map(|s| if yes.contains(s) { T::one() } else { T::zero() }).collect();
    let order: Vec<usize> = maybe.iter().collect();
    if order.is_empty() {
        return Solution { values: x, iterations: 0, residual: 0.0, converged: true };
    }
    // 1 / (1 - P(s,s)) per maybe state; the self-loop is solved in closed form.
    let scale: Vec<T> = order
        .iter()
        .map(|&s| {
            let (cols, vals) = chain.row(s);
            let mut stay = T::zero();
            for (c, p) in cols.iter().zip(vals) {
                if *c as usize == s {
                    stay += *p;
                }
            }
            T::one() / (T::one() - stay)
        })
        .collect();
    let tol = T::of(opts.tol);
    let mut iterations = 0u64;
    let mut residual = T::infinity();
    while iterations < opts.max_iter {
        iterations += 1;
        let mut max_rel = T::zero();
        for (k, &s) in order.iter().enumerate() {
            let (cols, vals) = chain.row(s);
            let mut acc = T::zero();
            for (c, p) in cols.iter().zip(vals) {
                let c = *c as usize;
                if c != s {
                    acc += *p * x[c];
                }
            }
            let new = acc * scale[k];
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

/// `P(phi1 U phi2)` per state, with qualitative precomputation.
pub fn until<T: Scalar, C: Chain<T> + ?Sized>(
    chain: &C,
    phi1: &StateSet,
    phi2: &StateSet,
    opts: &SolverOptions,
) -> Solution<T> {
    let no = prob0(chain, phi1, phi2);
    let yes = prob1(chain, phi1, phi2);
    let maybe = yes.union(&no).complement();
    solve_until(chain, &yes, &maybe, opts)
}

/// Number of backward-induction steps for a step bound; `< 0` and `<= 0` both
/// take none and yield the indicator of `phi2`.
pub fn bounded_steps(bound: StepBound) -> u64 {
    if bound.strict {
        bound.steps.saturating_sub(1)
    } else {
        bound.steps
    }
}

/// `P(phi1 U<=k phi2)` by `k` Jacobi steps from the indicator of `phi2`.
/// Stops early once an iterate repeats bit-for-bit.
pub fn bounded_until<T: Scalar, C: Chain<T> + ?Sized>(
    chain: &C,
    phi1: &StateSet,
    phi2: &StateSet,
    bound: StepBound,
) -> Vec<T> {
    let n = chain.num_states();
    let mut x: Vec<T> = (0..n).map(|s| if phi2.contains(s) { T::one() } else { T::zero() }).collect();
    let active: Vec<usize> = phi1.difference(phi2).iter().collect();
    let mut next = x.clone();
    for _ in 0..bounded_steps(bound) {
        let mut changed = false;
        for &s in &active {
            let (cols, vals) = chain.row(s);
            let mut acc = T::zero();
            for (c, p) in cols.iter().zip(vals) {
                acc += *p * x[*c as usize];
            }
            changed |= acc != x[s];
            next[s] = acc;
        }
        std::mem::swap(&mut x, &mut next);
        if !changed {
            break;
        }
    }
    x
}

/// `P(X phi)`: one matrix-vector product with the indicator of `phi`.
pub fn prob_next<T: Scalar, C: Chain<T> + ?Sized>(chain: &C, phi: &StateSet) -> Vec<T> {
    (0..chain.num_states())
        .map(|s| {
            let (cols, vals) = chain.row(s);
            let mut acc = T::zero();
            for (c, p) in cols.iter().zip(vals) {
                if phi.contains(*c as usize) {
                    acc += *p;
                }
            }
            acc
        })
        .collect()
}

/// `P(G phi) = 1 - P(F !phi)`.
pub fn prob_globally<T: Scalar, C: Chain<T> + ?Sized>(chain: &C, phi: &StateSet, opts: &SolverOptions) -> Solution<T> {
    let n = chain.num_states();
    let mut sol = until(chain, &StateSet::full(n), &phi.complement(), opts);
    for v in &mut sol.values {
        *v = T::one() - *v;
    }
    sol
}
