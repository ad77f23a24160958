use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use super::mlp::{argmax, MinMax, Mlp};
use crate::gcl::{Expr, GclError, GuardedProgram, Ty};
use crate::model::{ActionId, FactoredState, FeatureSchema};
use crate::scalar::{format_g, Scalar};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy does not match the model: {0}")]
    SchemaMismatch(String),
    #[error("malformed policy file: {0}")]
    Format(String),
    #[error("scripted rule `{guard}`: {source}")]
    Rule { guard: String, source: GclError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug)]
pub struct NeuralPolicy<T> {
    schema: FeatureSchema,
    actions: Vec<String>,
    net: Mlp<T>,
    norm: MinMax<T>,
}

impl<T: Scalar> NeuralPolicy<T> {
    pub fn new(schema: FeatureSchema, actions: Vec<String>, net: Mlp<T>) -> Result<Self, PolicyError> {
        if net.inputs() != schema.len() || net.outputs() != actions.len() {
            return Err(PolicyError::SchemaMismatch(format!(
                "network {}→{} for {} features and {} actions",
                net.inputs(),
                net.outputs(),
                schema.len(),
                actions.len()
            )));
        }
        let norm = MinMax::new(&schema);
        Ok(NeuralPolicy { schema, actions, net, norm })
    }

    pub fn net(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn q_values(&self, s: &FactoredState) -> Vec<T> {
        self.net.forward(&self.norm.apply(s))
    }
}

#[derive(Clone, Debug)]
pub struct TabularPolicy {
    schema: FeatureSchema,
    actions: Vec<String>,
    table: HashMap<FactoredState, ActionId>,
}

impl TabularPolicy {
    pub fn new(schema: FeatureSchema, actions: Vec<String>, table: HashMap<FactoredState, ActionId>) -> Self {
        TabularPolicy { schema, actions, table }
    }

    pub fn table(&self) -> &HashMap<FactoredState, ActionId> {
        &self.table
    }
}

/// One `guard -> action` rule; the first rule whose guard holds decides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub guard: String,
    pub action: String,
}

impl Rule {
    pub fn new(guard: &str, action: &str) -> Self {
        Rule { guard: guard.into(), action: action.into() }
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    schema: FeatureSchema,
    actions: Vec<String>,
    rules: Vec<Rule>,
    compiled: Vec<(Expr, ActionId)>,
}

impl ScriptedPolicy {
    /// Compiles rule guards in the program's scope. States matching no rule get action 0.
    pub fn new(program: &GuardedProgram, rules: Vec<Rule>) -> Result<Self, PolicyError> {
        let mut compiled = Vec::with_capacity(rules.len());
        for r in &rules {
            let (e, ty) =
                program.parse_expr(&r.guard).map_err(|source| PolicyError::Rule { guard: r.guard.clone(), source })?;
            if ty != Ty::Bool {
                return Err(PolicyError::Rule {
                    guard: r.guard.clone(),
                    source: GclError::Type { line: 1, col: 1, message: "guard must be boolean".into() },
                });
            }
            let a = program
                .action_id(&r.action)
                .ok_or_else(|| PolicyError::Rule { guard: r.guard.clone(), source: GclError::UnknownAction(r.action.clone()) })?;
            compiled.push((e, a));
        }
        Ok(ScriptedPolicy { schema: program.schema().clone(), actions: program.actions().to_vec(), rules, compiled })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }
}

/// A deterministic per-agent policy.
#[derive(Clone, Debug)]
pub enum AgentPolicy<T> {
    Neural(NeuralPolicy<T>),
    Tabular(TabularPolicy),
    Scripted(ScriptedPolicy),
}

impl<T: Scalar> AgentPolicy<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentPolicy::Neural(_) => "neural",
            AgentPolicy::Tabular(_) => "tabular",
            AgentPolicy::Scripted(_) => "scripted",
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        match self {
            AgentPolicy::Neural(p) => &p.schema,
            AgentPolicy::Tabular(p) => &p.schema,
            AgentPolicy::Scripted(p) => &p.schema,
        }
    }

    pub fn actions(&self) -> &[String] {
        match self {
            AgentPolicy::Neural(p) => &p.actions,
            AgentPolicy::Tabular(p) => &p.actions,
            AgentPolicy::Scripted(p) => &p.actions,
        }
    }

    /// The policy's choice over the full action set, enabled or not.
    pub fn greedy_action(&self, s: &FactoredState) -> ActionId {
        match self {
            AgentPolicy::Neural(p) => ActionId(argmax(&p.q_values(s)) as u32),
            AgentPolicy::Tabular(p) => p.table.get(s).copied().unwrap_or(ActionId(0)),
            AgentPolicy::Scripted(p) => {
                for (guard, a) in &p.compiled {
                    if guard.eval_bool(s, None).unwrap_or(false) {
                        return *a;
                    }
                }
                ActionId(0)
            }
        }
    }

    /// The greedy action if enabled, else [`AgentPolicy::fallback`]; the flag
    /// reports a fallback. Neural policies evaluate the network once.
    pub fn select_enabled(&self, s: &FactoredState, enabled: &[ActionId]) -> (ActionId, bool) {
        if let AgentPolicy::Neural(p) = self {
            let q = p.q_values(s);
            let a = ActionId(argmax(&q) as u32);
            if enabled.contains(&a) {
                return (a, false);
            }
            let qs: Vec<T> = enabled.iter().map(|a| q[a.index()]).collect();
            return (enabled[argmax(&qs)], true);
        }
        let a = self.greedy_action(s);
        if enabled.contains(&a) {
            (a, false)
        } else {
            (self.fallback(s, enabled), true)
        }
    }

    /// Replacement when the greedy action is disabled: the enabled action with
    /// the highest Q-value for neural policies, otherwise the first enabled one.
    /// `enabled` must be non-empty and in declaration order.
    pub fn fallback(&self, s: &FactoredState, enabled: &[ActionId]) -> ActionId {
        match self {
            AgentPolicy::Neural(p) => {
                let q = p.q_values(s);
                let qs: Vec<T> = enabled.iter().map(|a| q[a.index()]).collect();
                enabled[argmax(&qs)]
            }
            _ => enabled[0],
        }
    }

    pub fn check_against(&self, program: &GuardedProgram) -> Result<(), PolicyError> {
        if self.schema() != program.schema() {
            return Err(PolicyError::SchemaMismatch(format!(
                "policy features [{}] differ from model features [{}]",
                self.schema().names().collect::<Vec<_>>().join(", "),
                program.schema().names().collect::<Vec<_>>().join(", ")
            )));
        }
        if self.actions() != program.actions() {
            return Err(PolicyError::SchemaMismatch(format!(
                "policy actions [{}] differ from model actions [{}]",
                self.actions().join(", "),
                program.actions().join(", ")
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut file = PolicyFileOut {
            schema: self.schema(),
            actions: self.actions(),
            kind: self.kind(),
            layers: None,
            weights: None,
            biases: None,
            normalization: None,
            table: None,
            rules: None,
        };
        match self {
            AgentPolicy::Neural(p) => {
                file.layers = Some(p.net.sizes().to_vec());
                file.weights = Some(p.net.weights().iter().map(|w| number_array(w)).collect());
                file.biases = Some(p.net.biases().iter().map(|b| number_array(b)).collect());
                file.normalization = Some("minmax");
            }
            AgentPolicy::Tabular(p) => {
                let mut rows: Vec<TableRow> = p
                    .table
                    .iter()
                    .map(|(s, a)| TableRow { state: s.values().to_vec(), action: p.actions[a.index()].clone() })
                    .collect();
                rows.sort_by(|a, b| a.state.cmp(&b.state));
                file.table = Some(rows);
            }
            AgentPolicy::Scripted(p) => file.rules = Some(p.rules.clone()),
        }
        serde_json::to_string_pretty(&file).expect("policy serialisation")
    }

    /// Parses a policy and validates it against `program`.
    pub fn from_json(text: &str, program: &GuardedProgram) -> Result<Self, PolicyError> {
        let file: PolicyFileIn = serde_json::from_str(text).map_err(|e| PolicyError::Format(e.to_string()))?;
        let schema = file.schema;
        let actions = file.actions;
        let policy = match file.kind.as_str() {
            "neural" => {
                if let Some(n) = file.normalization.as_deref() {
                    if n != "minmax" {
                        return Err(PolicyError::Format(format!("unknown normalization `{n}`")));
                    }
                }
                let missing = || PolicyError::Format("neural policy needs layers, weights and biases".into());
                let layers = file.layers.ok_or_else(missing)?;
                let cast = |v: Vec<Vec<f64>>| v.into_iter().map(|l| l.into_iter().map(T::of).collect()).collect();
                let net = Mlp::from_parts(
                    layers,
                    cast(file.weights.ok_or_else(missing)?),
                    cast(file.biases.ok_or_else(missing)?),
                )
                .map_err(PolicyError::Format)?;
                AgentPolicy::Neural(NeuralPolicy::new(schema, actions, net)?)
            }
            "tabular" => {
                let rows = file.table.ok_or_else(|| PolicyError::Format("tabular policy needs a table".into()))?;
                let mut table = HashMap::with_capacity(rows.len());
                for r in rows {
                    let a = actions
                        .iter()
                        .position(|x| *x == r.action)
                        .ok_or_else(|| PolicyError::Format(format!("unknown action `{}` in table", r.action)))?;
                    table.insert(FactoredState::from(r.state), ActionId(a as u32));
                }
                AgentPolicy::Tabular(TabularPolicy { schema, actions, table })
            }
            "scripted" => {
                let rules = file.rules.ok_or_else(|| PolicyError::Format("scripted policy needs rules".into()))?;
                let p = AgentPolicy::<T>::Scripted(ScriptedPolicy { schema, actions, rules: Vec::new(), compiled: Vec::new() });
                p.check_against(program)?;
                AgentPolicy::Scripted(ScriptedPolicy::new(program, rules)?)
            }
            other => return Err(PolicyError::Format(format!("unknown policy kind `{other}`"))),
        };
        policy.check_against(program)?;
        Ok(policy)
    }
}

pub fn save_policy<T: Scalar>(policy: &AgentPolicy<T>, path: &Path) -> Result<(), PolicyError> {
    std::fs::write(path, policy.to_json())
        .map_err(|source| PolicyError::Io { path: path.display().to_string(), source })
}

pub fn load_policy<T: Scalar>(path: &Path, program: &GuardedProgram) -> Result<AgentPolicy<T>, PolicyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| PolicyError::Io { path: path.display().to_string(), source })?;
    AgentPolicy::from_json(&text, program)
}

/// JSON array of numbers printed with enough digits to round-trip exactly.
fn number_array<T: Scalar>(xs: &[T]) -> Box<RawValue> {
    let mut s = String::with_capacity(xs.len() * 24 + 2);
    s.push('[');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let v = x.as_f64();
        assert!(v.is_finite(), "non-finite weight");
        let text = format_g(v, T::ROUND_TRIP_DIGITS);
        // JSON has no bare exponent-only or leading-dot forms; %g never emits them
        s.push_str(&text);
    }
    s.push(']');
    RawValue::from_string(s).expect("valid JSON number array")
}

#[derive(Serialize)]
struct PolicyFileOut<'a> {
    schema: &'a FeatureSchema,
    actions: &'a [String],
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Box<RawValue>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    biases: Option<Vec<Box<RawValue>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    normalization: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<TableRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rules: Option<Vec<Rule>>,
}

#[derive(Deserialize)]
struct PolicyFileIn {
    schema: FeatureSchema,
    actions: Vec<String>,
    kind: String,
    layers: Option<Vec<usize>>,
    weights: Option<Vec<Vec<f64>>>,
    biases: Option<Vec<Vec<f64>>>,
    normalization: Option<String>,
    table: Option<Vec<TableRow>>,
    rules: Option<Vec<Rule>>,
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    state: Vec<i32>,
    action: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcl::parse_program;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SRC: &str = "turn : [1..2] init 1; x : [0..9] init 0;\n\
        [inc] x<9 -> (x'=x+1)&(turn'=3-turn);\n[dec] x>0 -> (x'=x-1)&(turn'=3-turn);\n[stay] true -> (turn'=3-turn);";

    fn random_state(rng: &mut ChaCha8Rng) -> FactoredState {
        FactoredState::from(vec![rng.random_range(1..=2), rng.random_range(0..=9)])
    }

    #[test]
    fn neural_round_trip_is_bit_exact() {
        let p = parse_program(SRC).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::random(&[2, 16, 16, 3], &mut rng);
        let pol = AgentPolicy::Neural(NeuralPolicy::new(p.schema().clone(), p.actions().to_vec(), net).unwrap());
        let back = AgentPolicy::<f64>::from_json(&pol.to_json(), &p).unwrap();
        let (AgentPolicy::Neural(a), AgentPolicy::Neural(b)) = (&pol, &back) else { panic!("kind changed") };
        assert_eq!(a.net(), b.net());
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let (qa, qb) = (a.q_values(&s), b.q_values(&s));
            assert!(qa.iter().zip(&qb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn f32_round_trip_is_bit_exact() {
        let p = parse_program(SRC).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Mlp::<f32>::random(&[2, 8, 3], &mut rng);
        let pol = AgentPolicy::Neural(NeuralPolicy::new(p.schema().clone(), p.actions().to_vec(), net).unwrap());
        let back = AgentPolicy::<f32>::from_json(&pol.to_json(), &p).unwrap();
        let (AgentPolicy::Neural(a), AgentPolicy::Neural(b)) = (&pol, &back) else { panic!("kind changed") };
        assert_eq!(a.net(), b.net());
    }

    #[test]
    fn tabular_and_scripted_round_trip() {
        let p = parse_program(SRC).unwrap();
        let mut table = HashMap::new();
        table.insert(FactoredState::from(vec![1, 0]), ActionId(0));
        table.insert(FactoredState::from(vec![2, 5]), ActionId(2));
        let tab = AgentPolicy::<f64>::Tabular(TabularPolicy::new(p.schema().clone(), p.actions().to_vec(), table.clone()));
        let AgentPolicy::Tabular(back) = AgentPolicy::<f64>::from_json(&tab.to_json(), &p).unwrap() else { panic!() };
        assert_eq!(back.table(), &table);

        let rules = vec![Rule::new("x<5", "inc"), Rule::new("true", "dec")];
        let scr = AgentPolicy::<f64>::Scripted(ScriptedPolicy::new(&p, rules.clone()).unwrap());
        let back = AgentPolicy::<f64>::from_json(&scr.to_json(), &p).unwrap();
        assert_eq!(back.greedy_action(&FactoredState::from(vec![1, 2])), ActionId(0));
        assert_eq!(back.greedy_action(&FactoredState::from(vec![1, 7])), ActionId(1));
    }

    #[test]
    fn schema_mismatch_on_other_model() {
        let p = parse_program(SRC).unwrap();
        let other = parse_program("turn : [1..2] init 1; y : [0..9] init 0;\n[inc] true -> (turn'=3-turn);").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::random(&[2, 4, 3], &mut rng);
        let pol = AgentPolicy::Neural(NeuralPolicy::new(p.schema().clone(), p.actions().to_vec(), net).unwrap());
        assert!(matches!(AgentPolicy::<f64>::from_json(&pol.to_json(), &other), Err(PolicyError::SchemaMismatch(_))));
    }

    #[test]
    fn fallback_rules() {
        let p = parse_program(SRC).unwrap();
        let net = Mlp::from_parts(vec![2, 3], vec![vec![0.0; 6]], vec![vec![0.9, 0.5, 0.1]]).unwrap();
        let pol = AgentPolicy::Neural(NeuralPolicy::new(p.schema().clone(), p.actions().to_vec(), net).unwrap());
        let s = FactoredState::from(vec![1, 9]);
        assert_eq!(pol.greedy_action(&s), ActionId(0));
        assert_eq!(pol.fallback(&s, &[ActionId(1), ActionId(2)]), ActionId(1));
        let scr = AgentPolicy::<f64>::Scripted(ScriptedPolicy::new(&p, vec![Rule::new("true", "inc")]).unwrap());
        assert_eq!(scr.fallback(&s, &[ActionId(1), ActionId(2)]), ActionId(1));
        assert_eq!(pol.select_enabled(&s, &[ActionId(0), ActionId(2)]), (ActionId(0), false));
        assert_eq!(pol.select_enabled(&s, &[ActionId(1), ActionId(2)]), (ActionId(1), true));
    }
}
