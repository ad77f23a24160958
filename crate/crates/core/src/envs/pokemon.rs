use std::fmt::Write;

use super::{get, Params};
use crate::agents::Rule;

const ACTIONS: [&str; 5] = ["sleep", "tackle", "heal", "punch", "poison"];
const MULTIPLIERS: [f64; 4] = [0.85, 0.90, 0.95, 1.0];
const TACKLE: (i64, f64) = (10, 0.95);
const PUNCH: (i64, f64) = (20, 0.85);
const POISON_HIT: f64 = 0.75;
const SLEEP_HIT: f64 = 0.65;
const POISON_TICK: i64 = 5;
const POISON_TURNS: i64 = 3;
const SLEEP_TURNS: i64 = 2;
const HEAL: i64 = 50;
const MAX_HP: i64 = 100;

/// Damage outcomes `(damage, probability)` of an attack that lands with
/// `hit`, one per multiplier.
fn damage_branches(base: i64, hit: f64) -> Vec<(i64, f64)> {
    let p = hit / MULTIPLIERS.len() as f64;
    MULTIPLIERS.iter().map(|m| ((base as f64 * m).round() as i64, p)).collect()
}

pub fn source(p: &Params) -> String {
    let hp = get(p, "hp");
    let mut s = String::new();
    for line in [
        "// One-on-one Pokemon battle. Agent 1 (turn=1) owns the _1 variables, agent 2 the _0 ones.",
        "// Resource counts and HP are parameters (full game: HP 100, 3 heal pots, 5 punches, 2 sleeps, 2 poisons).",
        "// Reconstructed constants: tackle 10 damage at 0.95, punch 20 at 0.85, poison 0.75 for 5 damage on",
        "// each of the victim's next 3 turns, sleep 0.65 skipping the victim's next 2 turns, heal +50 capped at 100.",
        "// Damage is base times a multiplier uniform over {0.85, 0.90, 0.95, 1.0}, rounded half away from zero.",
        "// Poison ticks at the start of the victim's turn; a tick that would empty HP knocks the Pokemon out.",
    ] {
        writeln!(s, "{line}").unwrap();
    }
    writeln!(s).unwrap();
    for (k, key) in [("HP", "hp"), ("HEALPOTS", "healpots"), ("PUNCHES", "punches"), ("SLEEPS", "sleeps"), ("POISONS", "poisons")] {
        writeln!(s, "const int {k} = {};", if key == "hp" { hp } else { get(p, key) }).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "turn : [1..2] init 1;").unwrap();
    writeln!(s, "done : [0..1] init 0;").unwrap();
    for o in 0..2 {
        writeln!(s, "HP_{o} : [0..{MAX_HP}] init HP;").unwrap();
        writeln!(s, "sleeping_{o} : [0..{SLEEP_TURNS}] init 0;").unwrap();
        writeln!(s, "poisoned_{o} : [0..{POISON_TURNS}] init 0;").unwrap();
        writeln!(s, "healpots_{o} : [0..HEALPOTS] init HEALPOTS;").unwrap();
        writeln!(s, "sleeps_{o} : [0..SLEEPS] init SLEEPS;").unwrap();
        writeln!(s, "poisons_{o} : [0..POISONS] init POISONS;").unwrap();
        writeln!(s, "punches_{o} : [0..PUNCHES] init PUNCHES;").unwrap();
    }
    writeln!(s).unwrap();
    for o in 0..2 {
        writeln!(s, "formula faint_{o} = poisoned_{o}>0 & HP_{o}<={POISON_TICK};").unwrap();
        writeln!(s, "formula tick_{o} = poisoned_{o}>0 ? {POISON_TICK} : 0;").unwrap();
    }
    writeln!(s).unwrap();

    for a in ACTIONS {
        for t in 1..=2 {
            let o = if t == 1 { 1 } else { 0 };
            let e = 1 - o;
            let nt = 3 - t;
            let base = format!("done=0 & turn={t}");
            // own-turn bookkeeping: poison tick and turn hand-over
            let tail = |hp: &str| format!("(HP_{o}'={hp})&(poisoned_{o}'=max(poisoned_{o}-1,0))&(turn'={nt})");
            let ticked = format!("HP_{o}-tick_{o}");
            writeln!(s, "[{a}] {base} & faint_{o} -> (HP_{o}'=0)&(poisoned_{o}'=poisoned_{o}-1)&(done'=1);").unwrap();
            writeln!(s, "[{a}] {base} & !faint_{o} & sleeping_{o}>0 -> (sleeping_{o}'=sleeping_{o}-1)&{};", tail(&ticked)).unwrap();
            let awake = format!("{base} & !faint_{o} & sleeping_{o}=0");
            let body = match a {
                "tackle" | "punch" => {
                    let ((dmg, hit), guard, spend) = if a == "tackle" {
                        (TACKLE, String::new(), String::new())
                    } else {
                        (PUNCH, format!(" & punches_{o}>0"), format!("&(punches_{o}'=punches_{o}-1)"))
                    };
                    let mut branches: Vec<String> = damage_branches(dmg, hit)
                        .into_iter()
                        .map(|(d, p)| {
                            format!(
                                "{p}:(HP_{e}'=max(HP_{e}-{d},0))&(done'=HP_{e}<={d} ? 1 : 0){spend}&{}",
                                tail(&ticked)
                            )
                        })
                        .collect();
                    branches.push(format!("{}:{}{}", round(1.0 - hit), tail(&ticked), spend));
                    format!("{awake}{guard} -> {}", branches.join(" + "))
                }
                "poison" => format!(
                    "{awake} & poisons_{o}>0 -> {POISON_HIT}:(poisoned_{e}'={POISON_TURNS})&(poisons_{o}'=poisons_{o}-1)&{t1} + {}:(poisons_{o}'=poisons_{o}-1)&{t1}",
                    round(1.0 - POISON_HIT),
                    t1 = tail(&ticked)
                ),
                "sleep" => format!(
                    "{awake} & sleeps_{o}>0 -> {SLEEP_HIT}:(sleeping_{e}'={SLEEP_TURNS})&(sleeps_{o}'=sleeps_{o}-1)&{t1} + {}:(sleeps_{o}'=sleeps_{o}-1)&{t1}",
                    round(1.0 - SLEEP_HIT),
                    t1 = tail(&ticked)
                ),
                "heal" => format!(
                    "{awake} & healpots_{o}>0 -> (healpots_{o}'=healpots_{o}-1)&{}",
                    tail(&format!("min({ticked}+{HEAL},{MAX_HP})"))
                ),
                _ => unreachable!(),
            };
            writeln!(s, "[{a}] {body};").unwrap();
        }
    }
    writeln!(s).unwrap();
    writeln!(s, "label \"won_1\" = HP_0=0 & HP_1>0;").unwrap();
    writeln!(s, "label \"won_2\" = HP_1=0 & HP_0>0;").unwrap();
    writeln!(s, "label \"lost_1\" = HP_1=0;").unwrap();
    writeln!(s, "label \"lost_2\" = HP_0=0;").unwrap();
    writeln!(s).unwrap();
    for (i, own, opp) in [(1, 1, 0), (2, 0, 1)] {
        writeln!(
            s,
            "rewards \"agent_{i}\" turn={i} : max(100-HP_{opp}'-0.2*(100-HP_{own}'),0); turn={i} & HP_{opp}'=0 & HP_{own}'>0 : 5000; endrewards"
        )
        .unwrap();
    }
    s
}

/// Rounds away binary noise from complements such as `1 - 0.95`.
fn round(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Agent 1 punches while it can and otherwise tackles. Agent 2 poisons an
/// unpoisoned opponent while it has poison, and otherwise tackles.
pub fn rules(_: &Params) -> Vec<Vec<Rule>> {
    vec![
        vec![Rule::new("punches_1>0", "punch"), Rule::new("true", "tackle")],
        vec![Rule::new("poisons_0>0 & poisoned_1=0", "poison"), Rule::new("true", "tackle")],
    ]
}
