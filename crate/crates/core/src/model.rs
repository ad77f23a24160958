//! Factored states, distributions and the explicit-state MDP / DTMC structures
//! every other module builds or consumes.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::io::{self, Write};
use std::ops::Deref;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{format_g17, Scalar};

/// Tolerance for probability sums.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),
    #[error("state {state} has no enabled action and is not absorbing")]
    DeadlockState { state: String },
    #[error("policy selects action `{action}` which is not enabled in state {state}")]
    PolicySelectsDisabledAction { state: String, action: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("state index {index} out of range ({len} states)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Index into a model's action table. Declared actions are numbered in
/// declaration order; [`ActionId::SELF_LOOP`] is the implicit loop added to
/// terminal states that have no command of their own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionId(pub u32);

impl ActionId {
    pub const SELF_LOOP: ActionId = ActionId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_self_loop(self) -> bool {
        self == Self::SELF_LOOP
    }
}

/// Name used for the implicit terminal self-loop.
pub const SELF_LOOP_NAME: &str = "_loop";

/// Resolves an action id against a declared action table.
pub fn action_name(names: &[String], a: ActionId) -> &str {
    if a.is_self_loop() {
        SELF_LOOP_NAME
    } else {
        names.get(a.index()).map(String::as_str).unwrap_or("?")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub lo: i32,
    pub hi: i32,
}

/// Ordered, bounded integer features with one designated turn feature.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct FeatureSchema {
    features: Vec<Feature>,
    turn: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    features: Vec<Feature>,
    turn: String,
}

impl TryFrom<SchemaRepr> for FeatureSchema {
    type Error = ModelError;

    fn try_from(r: SchemaRepr) -> Result<Self, ModelError> {
        FeatureSchema::new(r.features, &r.turn)
    }
}

impl From<FeatureSchema> for SchemaRepr {
    fn from(s: FeatureSchema) -> Self {
        let turn = s.features[s.turn].name.clone();
        SchemaRepr { features: s.features, turn }
    }
}

impl PartialEq for FeatureSchema {
    fn eq(&self, other: &Self) -> bool {
        self.features == other.features && self.turn == other.turn
    }
}

impl Eq for FeatureSchema {}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>, turn: &str) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.name.is_empty() {
                return Err(ModelError::InvalidSchema("empty feature name".into()));
            }
            if f.lo > f.hi {
                return Err(ModelError::InvalidSchema(format!(
                    "feature `{}` has bounds [{}..{}]",
                    f.name, f.lo, f.hi
                )));
            }
            if index.insert(f.name.clone(), i).is_some() {
                return Err(ModelError::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    f.name
                )));
            }
        }
        let turn = *index
            .get(turn)
            .ok_or_else(|| ModelError::InvalidSchema(format!("no turn feature `{turn}`")))?;
        Ok(FeatureSchema { features, turn, index })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn turn_index(&self) -> usize {
        self.turn
    }

    pub fn turn_bounds(&self) -> (i32, i32) {
        let f = &self.features[self.turn];
        (f.lo, f.hi)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn validate(&self, s: &FactoredState) -> Result<(), ModelError> {
        if s.len() != self.len() {
            return Err(ModelError::InvalidSchema(format!(
                "state has {} features, schema has {}",
                s.len(),
                self.len()
            )));
        }
        for (f, &v) in self.features.iter().zip(s.iter()) {
            if v < f.lo || v > f.hi {
                return Err(ModelError::InvalidSchema(format!(
                    "feature `{}` = {} outside [{}..{}]",
                    f.name, v, f.lo, f.hi
                )));
            }
        }
        Ok(())
    }

    /// Renders a state as `(name=v,...)`.
    pub fn describe(&self, s: &FactoredState) -> String {
        let body: Vec<String> = self
            .features
            .iter()
            .zip(s.iter())
            .map(|(f, v)| format!("{}={}", f.name, v))
            .collect();
        format!("({})", body.join(","))
    }
}

/// Integer feature vector. Ordering is lexicographic over feature values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactoredState(Box<[i32]>);

impl FactoredState {
    pub fn new(values: impl Into<Box<[i32]>>) -> Self {
        FactoredState(values.into())
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    pub fn with(&self, feature: usize, value: i32) -> Self {
        let mut v = self.0.clone();
        v[feature] = value;
        FactoredState(v)
    }
}

impl Deref for FactoredState {
    type Target = [i32];

    fn deref(&self) -> &[i32] {
        &self.0
    }
}

impl From<Vec<i32>> for FactoredState {
    fn from(v: Vec<i32>) -> Self {
        FactoredState(v.into_boxed_slice())
    }
}

impl fmt::Display for FactoredState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Finite distribution over successors `S` with probabilities `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<S, T> {
    entries: Vec<(S, T)>,
}

impl<S: PartialEq + fmt::Debug, T: Scalar> Distribution<S, T> {
    /// Checks positivity, distinctness and normalization.
    pub fn new(entries: Vec<(S, T)>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::InvalidDistribution("empty support".into()));
        }
        let mut sum = 0.0;
        for (i, (s, p)) in entries.iter().enumerate() {
            let p = p.as_f64();
            if !(p > 0.0 && p <= 1.0 + STOCHASTIC_TOL) {
                return Err(ModelError::InvalidDistribution(format!(
                    "probability {p} for {s:?}"
                )));
            }
            if entries[..i].iter().any(|(t, _)| t == s) {
                return Err(ModelError::InvalidDistribution(format!(
                    "duplicate successor {s:?}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Distribution { entries })
    }

    pub fn dirac(s: S) -> Self {
        Distribution { entries: vec![(s, T::one())] }
    }
}

impl<S, T> Distribution<S, T> {
    pub fn entries(&self) -> &[(S, T)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(S, T)> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(S, T)> {
        self.entries.iter()
    }
}

/// Dense membership set over state indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet { bits: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        StateSet { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        StateSet { bits }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    #[inline]
    pub fn insert(&mut self, i: usize) -> bool {
        !std::mem::replace(&mut self.bits[i], true)
    }

    pub fn remove(&mut self, i: usize) {
        self.bits[i] = false;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn complement(&self) -> Self {
        StateSet { bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.bits.len(), other.bits.len(), "state set universes differ");
        StateSet {
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

pub type Labels = BTreeMap<String, StateSet>;

/// Predecessor lists in CSR form.
#[derive(Clone, Debug)]
pub struct Predecessors {
    offsets: Vec<usize>,
    sources: Vec<u32>,
}

impl Predecessors {
    pub(crate) fn build(n: usize, edges: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut counts = vec![0usize; n + 1];
        for (_, dst) in edges.clone() {
            counts[dst + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut sources = vec![0u32; counts[n]];
        for (src, dst) in edges {
            sources[fill[dst]] = src as u32;
            fill[dst] += 1;
        }
        // a state may appear twice when several of its actions lead to the same target
        let mut offsets = vec![0usize; n + 1];
        let mut dedup = Vec::with_capacity(sources.len());
        for t in 0..n {
            let row = &mut sources[counts[t]..counts[t + 1]];
            row.sort_unstable();
            let start = dedup.len();
            for &s in row.iter() {
                if dedup.len() == start || *dedup.last().unwrap() != s {
                    dedup.push(s);
                }
            }
            offsets[t + 1] = dedup.len();
        }
        Predecessors { offsets, sources: dedup }
    }

    pub fn of(&self, state: usize) -> &[u32] {
        &self.sources[self.offsets[state]..self.offsets[state + 1]]
    }
}

/// Row-stochastic sparse chain in CSR form.
#[derive(Debug)]
pub struct SparseDtmc<T> {
    schema: FeatureSchema,
    action_names: Vec<String>,
    states: Vec<FactoredState>,
    initial: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    chosen: Vec<ActionId>,
    labels: Labels,
    preds: OnceLock<Predecessors>,
}

impl<T: Clone> Clone for SparseDtmc<T> {
    fn clone(&self) -> Self {
        SparseDtmc {
            schema: self.schema.clone(),
            action_names: self.action_names.clone(),
            states: self.states.clone(),
            initial: self.initial,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.clone(),
            chosen: self.chosen.clone(),
            labels: self.labels.clone(),
            preds: OnceLock::new(),
        }
    }
}

/// Incremental row-by-row constructor for [`SparseDtmc`].
#[derive(Debug)]
pub struct DtmcBuilder<T> {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    chosen: Vec<ActionId>,
}

impl<T: Scalar> Default for DtmcBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> DtmcBuilder<T> {
    pub fn new() -> Self {
        DtmcBuilder { row_ptr: vec![0], cols: Vec::new(), vals: Vec::new(), chosen: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.chosen.len()
    }

    pub fn push_row(&mut self, action: ActionId, row: impl IntoIterator<Item = (usize, T)>) {
        for (c, p) in row {
            self.cols.push(c as u32);
            self.vals.push(p);
        }
        self.row_ptr.push(self.cols.len());
        self.chosen.push(action);
    }

    pub fn finish(
        self,
        schema: FeatureSchema,
        action_names: Vec<String>,
        states: Vec<FactoredState>,
        initial: usize,
        labels: Labels,
    ) -> Result<SparseDtmc<T>, ModelError> {
        let n = states.len();
        if self.chosen.len() != n {
            return Err(ModelError::InvalidDistribution(format!(
                "{} rows for {} states",
                self.chosen.len(),
                n
            )));
        }
        if initial >= n {
            return Err(ModelError::IndexOutOfRange { index: initial, len: n });
        }
        for row in 0..n {
            let (lo, hi) = (self.row_ptr[row], self.row_ptr[row + 1]);
            let mut sum = 0.0;
            for k in lo..hi {
                let c = self.cols[k] as usize;
                if c >= n {
                    return Err(ModelError::IndexOutOfRange { index: c, len: n });
                }
                sum += self.vals[k].as_f64();
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ModelError::NotStochastic { row, sum });
            }
        }
        for set in labels.values() {
            if set.universe() != n {
                return Err(ModelError::InvalidDistribution("label universe mismatch".into()));
            }
        }
        Ok(SparseDtmc {
            schema,
            action_names,
            states,
            initial,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
            chosen: self.chosen,
            labels,
            preds: OnceLock::new(),
        })
    }
}

impl<T: Scalar> SparseDtmc<T> {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.cols.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn states(&self) -> &[FactoredState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FactoredState {
        &self.states[i]
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&StateSet> {
        self.labels.get(name)
    }

    pub fn chosen_action(&self, i: usize) -> ActionId {
        self.chosen[i]
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    /// Successor indices and probabilities of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, &p)| (c as usize, p))
    }

    pub fn row_slices(&self, i: usize) -> (&[u32], &[T]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn predecessors(&self) -> &Predecessors {
        self.preds.get_or_init(|| {
            let n = self.num_states();
            let edges = (0..n).flat_map(move |s| {
                let (lo, hi) = (self.row_ptr[s], self.row_ptr[s + 1]);
                self.cols[lo..hi].iter().map(move |&c| (s, c as usize))
            });
            Predecessors::build(n, edges)
        })
    }

    /// Re-indexes states in lexicographic feature order; the initial state and
    /// labels follow their states. Used to compare chains built by different routes.
    pub fn canonical(&self) -> SparseDtmc<T> {
        let n = self.num_states();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.states[a].cmp(&self.states[b]));
        let mut new_index = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut b = DtmcBuilder::new();
        for &old in &order {
            let mut row: Vec<(usize, T)> = self.row(old).map(|(c, p)| (new_index[c], p)).collect();
            row.sort_by_key(|&(c, _)| c);
            b.push_row(self.chosen[old], row);
        }
        let states = order.iter().map(|&o| self.states[o].clone()).collect();
        let labels = self
            .labels
            .iter()
            .map(|(k, set)| (k.clone(), StateSet::from_indices(n, set.iter().map(|i| new_index[i]))))
            .collect();
        b.finish(
            self.schema.clone(),
            self.action_names.clone(),
            states,
            new_index[self.initial],
            labels,
        )
        .expect("reindexing preserves validity")
    }

    /// Plain-text triple list, see [`write_triples`].
    pub fn write_triples<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut lines = Vec::with_capacity(self.num_transitions());
        for s in 0..self.num_states() {
            let name = action_name(&self.action_names, self.chosen[s]);
            for (d, p) in self.row(s) {
                lines.push((s, name, d, p.as_f64()));
            }
        }
        write_triples(w, self.num_states(), self.initial, lines, &self.labels)
    }
}

/// Explicit MDP: per-state action choices, each with its own sparse row.
#[derive(Debug)]
pub struct ExplicitMdp<T> {
    schema: FeatureSchema,
    action_names: Vec<String>,
    states: Vec<FactoredState>,
    initial: usize,
    choice_ptr: Vec<usize>,
    choice_actions: Vec<ActionId>,
    trans_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    labels: Labels,
    preds: OnceLock<Predecessors>,
}

#[derive(Debug)]
pub struct MdpBuilder<T> {
    choice_ptr: Vec<usize>,
    choice_actions: Vec<ActionId>,
    trans_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Scalar> Default for MdpBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> MdpBuilder<T> {
    pub fn new() -> Self {
        MdpBuilder {
            choice_ptr: vec![0],
            choice_actions: Vec::new(),
            trans_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn push_choice(&mut self, action: ActionId, row: impl IntoIterator<Item = (usize, T)>) {
        for (c, p) in row {
            self.cols.push(c as u32);
            self.vals.push(p);
        }
        self.trans_ptr.push(self.cols.len());
        self.choice_actions.push(action);
    }

    /// Closes the current state's group of choices.
    pub fn end_state(&mut self) {
        self.choice_ptr.push(self.choice_actions.len());
    }

    pub fn states_closed(&self) -> usize {
        self.choice_ptr.len() - 1
    }

    pub fn finish(
        self,
        schema: FeatureSchema,
        action_names: Vec<String>,
        states: Vec<FactoredState>,
        initial: usize,
        labels: Labels,
    ) -> Result<ExplicitMdp<T>, ModelError> {
        let n = states.len();
        if self.choice_ptr.len() != n + 1 {
            return Err(ModelError::InvalidDistribution(format!(
                "{} choice groups for {} states",
                self.choice_ptr.len() - 1,
                n
            )));
        }
        if initial >= n {
            return Err(ModelError::IndexOutOfRange { index: initial, len: n });
        }
        for s in 0..n {
            if self.choice_ptr[s] == self.choice_ptr[s + 1] {
                return Err(ModelError::DeadlockState { state: schema.describe(&states[s]) });
            }
        }
        for c in 0..self.choice_actions.len() {
            let mut sum = 0.0;
            for k in self.trans_ptr[c]..self.trans_ptr[c + 1] {
                if self.cols[k] as usize >= n {
                    return Err(ModelError::IndexOutOfRange { index: self.cols[k] as usize, len: n });
                }
                sum += self.vals[k].as_f64();
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ModelError::NotStochastic { row: c, sum });
            }
        }
        Ok(ExplicitMdp {
            schema,
            action_names,
            states,
            initial,
            choice_ptr: self.choice_ptr,
            choice_actions: self.choice_actions,
            trans_ptr: self.trans_ptr,
            cols: self.cols,
            vals: self.vals,
            labels,
            preds: OnceLock::new(),
        })
    }
}

impl<T: Scalar> ExplicitMdp<T> {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choice_actions.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.cols.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn states(&self) -> &[FactoredState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FactoredState {
        &self.states[i]
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&StateSet> {
        self.labels.get(name)
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    /// Global choice indices belonging to state `s`.
    pub fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.choice_ptr[s]..self.choice_ptr[s + 1]
    }

    pub fn choice_action(&self, c: usize) -> ActionId {
        self.choice_actions[c]
    }

    /// Enabled actions of state `s` in declaration order.
    pub fn enabled_actions(&self, s: usize) -> Vec<ActionId> {
        self.choices(s).map(|c| self.choice_actions[c]).collect()
    }

    #[inline]
    pub fn choice_row(&self, c: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (lo, hi) = (self.trans_ptr[c], self.trans_ptr[c + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, &p)| (c as usize, p))
    }

    pub fn choice_slices(&self, c: usize) -> (&[u32], &[T]) {
        let (lo, hi) = (self.trans_ptr[c], self.trans_ptr[c + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    /// Choice of state `s` labelled with `a`, if enabled.
    pub fn choice_for(&self, s: usize, a: ActionId) -> Option<usize> {
        self.choices(s).find(|&c| self.choice_actions[c] == a)
    }

    pub fn predecessors(&self) -> &Predecessors {
        self.preds.get_or_init(|| {
            let n = self.num_states();
            let edges = (0..n).flat_map(move |s| {
                self.choices(s).flat_map(move |c| {
                    let (lo, hi) = (self.trans_ptr[c], self.trans_ptr[c + 1]);
                    self.cols[lo..hi].iter().map(move |&d| (s, d as usize))
                })
            });
            Predecessors::build(n, edges)
        })
    }

    pub fn write_triples<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let mut lines = Vec::with_capacity(self.num_transitions());
        for s in 0..self.num_states() {
            for c in self.choices(s) {
                let name = action_name(&self.action_names, self.choice_actions[c]);
                for (d, p) in self.choice_row(c) {
                    lines.push((s, name, d, p.as_f64()));
                }
            }
        }
        write_triples(w, self.num_states(), self.initial, lines, &self.labels)
    }
}

/// Applies a memoryless deterministic policy to an MDP and keeps only the part
/// reachable from the initial state. States are numbered in breadth-first
/// discovery order, successors visited in row order.
pub fn induce_dtmc_monolithic<T, F>(mdp: &ExplicitMdp<T>, mut policy: F) -> Result<SparseDtmc<T>, ModelError>
where
    T: Scalar,
    F: FnMut(usize, &FactoredState) -> ActionId,
{
    let n = mdp.num_states();
    let mut index: Vec<Option<usize>> = vec![None; n];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    index[mdp.initial()] = Some(0);
    order.push(mdp.initial());
    queue.push_back(mdp.initial());
    let mut rows: Vec<(ActionId, Vec<(usize, T)>)> = Vec::new();
    while let Some(s) = queue.pop_front() {
        let a = policy(s, mdp.state(s));
        let c = mdp.choice_for(s, a).ok_or_else(|| ModelError::PolicySelectsDisabledAction {
            state: mdp.schema().describe(mdp.state(s)),
            action: action_name(mdp.action_names(), a).to_string(),
        })?;
        let mut row = Vec::new();
        for (d, p) in mdp.choice_row(c) {
            let j = match index[d] {
                Some(j) => j,
                None => {
                    let j = order.len();
                    index[d] = Some(j);
                    order.push(d);
                    queue.push_back(d);
                    j
                }
            };
            row.push((j, p));
        }
        rows.push((a, row));
    }
    let m = order.len();
    let mut b = DtmcBuilder::new();
    for (a, row) in rows {
        b.push_row(a, row);
    }
    let states = order.iter().map(|&s| mdp.state(s).clone()).collect();
    let labels = mdp
        .labels()
        .iter()
        .map(|(k, set)| (k.clone(), StateSet::from_indices(m, order.iter().enumerate().filter(|(_, &s)| set.contains(s)).map(|(i, _)| i))))
        .collect();
    b.finish(mdp.schema().clone(), mdp.action_names().to_vec(), states, 0, labels)
}

/// Writes the triple-list export: header, `src action dst prob` lines sorted by
/// `(src, action, dst)` with probabilities at 17 significant digits, then one
/// `label NAME: i1 i2 ...` line per label.
pub fn write_triples<W: Write>(
    w: &mut W,
    num_states: usize,
    initial: usize,
    mut lines: Vec<(usize, &str, usize, f64)>,
    labels: &Labels,
) -> io::Result<()> {
    lines.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    writeln!(w, "states {} transitions {} initial {}", num_states, lines.len(), initial)?;
    for (s, a, d, p) in &lines {
        writeln!(w, "{s} {a} {d} {}", format_g17(*p))?;
    }
    for (name, set) in labels {
        write!(w, "label {name}:")?;
        for i in set.iter() {
            write!(w, " {i}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(n: usize) -> FeatureSchema {
        let mut f = vec![Feature { name: "turn".into(), lo: 1, hi: 1 }];
        f.push(Feature { name: "x".into(), lo: 0, hi: n as i32 });
        FeatureSchema::new(f, "turn").unwrap()
    }

    fn st(x: i32) -> FactoredState {
        FactoredState::from(vec![1, x])
    }

    /// s0 <-0.5- s1 -0.5-> s2, both ends absorbing.
    fn gambler_mdp() -> ExplicitMdp<f64> {
        let mut b = MdpBuilder::new();
        b.push_choice(ActionId(0), [(1, 0.5), (2, 0.5)]);
        b.end_state();
        b.push_choice(ActionId::SELF_LOOP, [(1, 1.0)]);
        b.end_state();
        b.push_choice(ActionId::SELF_LOOP, [(2, 1.0)]);
        b.end_state();
        let mut labels = Labels::new();
        labels.insert("s2".into(), StateSet::from_indices(3, [2]));
        b.finish(schema(2), vec!["a".into()], vec![st(1), st(0), st(2)], 0, labels).unwrap()
    }

    #[test]
    fn schema_rejects_bad_input() {
        let dup = vec![
            Feature { name: "turn".into(), lo: 1, hi: 2 },
            Feature { name: "turn".into(), lo: 0, hi: 1 },
        ];
        assert!(FeatureSchema::new(dup, "turn").is_err());
        let bad = vec![Feature { name: "turn".into(), lo: 2, hi: 1 }];
        assert!(FeatureSchema::new(bad, "turn").is_err());
        let no_turn = vec![Feature { name: "x".into(), lo: 0, hi: 1 }];
        assert!(FeatureSchema::new(no_turn, "turn").is_err());
    }

    #[test]
    fn schema_serde_round_trip() {
        let s = schema(3);
        let json = serde_json::to_string(&s).unwrap();
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.index_of("x"), Some(1));
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::<u32, f64>::new(vec![(0, 0.5), (1, 0.5)]).is_ok());
        assert!(Distribution::<u32, f64>::new(vec![(0, 0.5), (1, 0.6)]).is_err());
        assert!(Distribution::<u32, f64>::new(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(Distribution::<u32, f64>::new(vec![(0, 1.0), (1, 0.0)]).is_err());
    }

    #[test]
    fn single_state_self_loop_induces_itself() {
        let mut b = MdpBuilder::<f64>::new();
        b.push_choice(ActionId(0), [(0, 1.0)]);
        b.end_state();
        let mdp = b.finish(schema(0), vec!["a".into()], vec![st(0)], 0, Labels::new()).unwrap();
        let d = induce_dtmc_monolithic(&mdp, |_, _| ActionId(0)).unwrap();
        assert_eq!(d.num_states(), 1);
        assert_eq!(d.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
    }

    #[test]
    fn induced_gambler_chain() {
        let mdp = gambler_mdp();
        let d = induce_dtmc_monolithic(&mdp, |s, _| mdp.enabled_actions(s)[0]).unwrap();
        assert_eq!(d.num_states(), 3);
        assert_eq!(d.row(0).collect::<Vec<_>>(), vec![(1, 0.5), (2, 0.5)]);
        assert_eq!(d.label("s2").unwrap().iter().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn disabled_policy_action_is_an_error() {
        let mdp = gambler_mdp();
        let err = induce_dtmc_monolithic(&mdp, |_, _| ActionId(7)).unwrap_err();
        assert!(matches!(err, ModelError::PolicySelectsDisabledAction { .. }));
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        let mut b = DtmcBuilder::<f64>::new();
        b.push_row(ActionId(0), [(0, 0.7)]);
        let err = b.finish(schema(0), vec![], vec![st(0)], 0, Labels::new()).unwrap_err();
        assert!(matches!(err, ModelError::NotStochastic { .. }));
    }

    #[test]
    fn triple_export_format() {
        let mdp = gambler_mdp();
        let mut out = Vec::new();
        mdp.write_triples(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let expected = "states 3 transitions 4 initial 0\n\
                        0 a 1 0.5\n\
                        0 a 2 0.5\n\
                        1 _loop 1 1\n\
                        2 _loop 2 1\n\
                        label s2: 2\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let mdp = gambler_mdp();
        let d = induce_dtmc_monolithic(&mdp, |s, _| mdp.enabled_actions(s)[0]).unwrap();
        let c = d.canonical();
        let xs: Vec<i32> = c.states().iter().map(|s| s[1]).collect();
        assert_eq!(xs, vec![0, 1, 2]);
        assert_eq!(c.initial(), 1);
        assert_eq!(c.row(1).collect::<Vec<_>>(), vec![(0, 0.5), (2, 0.5)]);
    }

    #[test]
    fn predecessors_are_deduplicated() {
        let mut b = MdpBuilder::<f64>::new();
        b.push_choice(ActionId(0), [(1, 1.0)]);
        b.push_choice(ActionId(1), [(1, 0.5), (0, 0.5)]);
        b.end_state();
        b.push_choice(ActionId(0), [(1, 1.0)]);
        b.end_state();
        let mdp = b
            .finish(schema(1), vec!["a".into(), "b".into()], vec![st(0), st(1)], 0, Labels::new())
            .unwrap();
        assert_eq!(mdp.predecessors().of(1), &[0, 1]);
        assert_eq!(mdp.predecessors().of(0), &[0]);
    }
}
