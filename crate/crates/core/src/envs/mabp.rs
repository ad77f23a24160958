use std::fmt::Write;

use super::{get, Params};
use crate::agents::Rule;

pub fn agents(p: &Params) -> usize {
    get(p, "n") as usize
}

/// One round: each agent pulls once in turn order; `done` after the last.
pub fn source(p: &Params) -> String {
    let n = agents(p);
    let mut s = String::new();
    writeln!(s, "// Turn-based multi-armed bandit, {n} agents.").unwrap();
    writeln!(s, "// bandit_1 is safe; bandit_2 knocks the pulling agent out (HP 0) with probability 0.5.").unwrap();
    writeln!(s, "// Reward 1 to an agent still alive after its own pull.").unwrap();
    writeln!(s, "// One pull per agent per episode is a reconstruction.").unwrap();
    writeln!(s).unwrap();
    writeln!(s, "turn : [1..{n}] init 1;").unwrap();
    writeln!(s, "done : [0..1] init 0;").unwrap();
    for i in 1..=n {
        writeln!(s, "HP_{i} : [0..1] init 1;").unwrap();
    }
    writeln!(s).unwrap();
    let pass = |i: usize| if i < n { format!("(turn'={})", i + 1) } else { "(done'=1)".to_string() };
    for i in 1..=n {
        writeln!(s, "[bandit_1] done=0 & turn={i} -> {};", pass(i)).unwrap();
    }
    for i in 1..=n {
        writeln!(s, "[bandit_2] done=0 & turn={i} -> 0.5:(HP_{i}'=0)&{} + 0.5:{};", pass(i), pass(i)).unwrap();
    }
    writeln!(s).unwrap();
    for i in 1..=n {
        writeln!(s, "label \"lost_{i}\" = HP_{i}=0;").unwrap();
    }
    writeln!(s).unwrap();
    for i in 1..=n {
        writeln!(s, "rewards \"agent_{i}\" turn={i} & HP_{i}'=1 : 1; endrewards").unwrap();
    }
    s
}

/// Every agent pulls the safe arm.
pub fn rules(p: &Params) -> Vec<Vec<Rule>> {
    vec![vec![Rule::new("true", "bandit_1")]; agents(p)]
}
