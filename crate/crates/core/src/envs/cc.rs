use std::fmt::Write;

use super::{get, Params};
use crate::agents::Rule;

const AGENTS: usize = 3;
const HIT: f64 = 0.4;
/// `(name, dx, dy)`.
const DIRS: [(&str, i64, i64); 4] = [("up", 0, 1), ("right", 1, 0), ("down", 0, -1), ("left", -1, 0)];

fn shifted(v: &str, d: i64) -> String {
    match d {
        0 => v.to_string(),
        d if d > 0 => format!("{v}+{d}"),
        d => format!("{v}-{}", -d),
    }
}

fn in_bounds(i: usize, dx: i64, dy: i64, n: i64) -> String {
    match (dx, dy) {
        (1, _) => format!("x_{i}<{}", n - 1),
        (-1, _) => format!("x_{i}>0"),
        (_, 1) => format!("y_{i}<{}", n - 1),
        _ => format!("y_{i}>0"),
    }
}

fn others(i: usize) -> impl Iterator<Item = usize> {
    (1..=AGENTS).filter(move |&j| j != i)
}

fn starts(n: i64) -> [(i64, i64); AGENTS] {
    [(0, 0), (n - 1, 0), (0, n - 1)]
}

pub fn source(p: &Params) -> String {
    let n = get(p, "size");
    let hp = get(p, "hp");
    let mut s = String::new();
    for line in [
        format!("// Coin collection: three agents on a {n}x{n} grid."),
        "// Moving onto another agent is a collision and ends the game. Moving onto the coin collects it,".into(),
        "// and the coin respawns uniformly over all cells. hit_* lowers an adjacent agent's hp by 1 with".into(),
        format!("// probability {HIT}. An agent with hp 0 can only pass. Reward 100 for a coin, else 1 while alive."),
        "// Start corners, respawn rule, starting hp and the pass action are reconstructions.".into(),
    ] {
        writeln!(s, "{line}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "const int HP = {hp};").unwrap();
    writeln!(s).unwrap();
    let st = starts(n);
    for i in 1..=AGENTS {
        let (x, y) = st[i - 1];
        writeln!(s, "x_{i} : [0..{}] init {x};", n - 1).unwrap();
        writeln!(s, "y_{i} : [0..{}] init {y};", n - 1).unwrap();
        writeln!(s, "hp_{i} : [0..HP] init HP;").unwrap();
    }
    writeln!(s, "coin_x : [0..{}] init {};", n - 1, n - 1).unwrap();
    writeln!(s, "coin_y : [0..{}] init {};", n - 1, n - 1).unwrap();
    writeln!(s, "done : [0..1] init 0;").unwrap();
    writeln!(s, "turn : [1..{AGENTS}] init 1;").unwrap();
    writeln!(s).unwrap();

    let next = |i: usize| i % AGENTS + 1;
    let prob = 1.0 / (n * n) as f64;
    for (dir, dx, dy) in DIRS {
        for i in 1..=AGENTS {
            let alive = format!("done=0 & turn={i} & hp_{i}>0");
            let (tx, ty) = (shifted(&format!("x_{i}"), dx), shifted(&format!("y_{i}"), dy));
            let occupied: Vec<String> = others(i).map(|j| format!("(x_{j}={tx} & y_{j}={ty})")).collect();
            let occupied = occupied.join(" | ");
            let coin = format!("coin_x={tx} & coin_y={ty}");
            let step = if dx != 0 { format!("(x_{i}'={tx})") } else { format!("(y_{i}'={ty})") };
            let guard = format!("{alive} & {}", in_bounds(i, dx, dy, n));
            writeln!(s, "[{dir}] {guard} & ({occupied}) -> {step}&(done'=1);").unwrap();
            let respawn: Vec<String> = (0..n)
                .flat_map(|cx| (0..n).map(move |cy| (cx, cy)))
                .map(|(cx, cy)| format!("{prob}:{step}&(coin_x'={cx})&(coin_y'={cy})&(turn'={})", next(i)))
                .collect();
            writeln!(s, "[{dir}] {guard} & !({occupied}) & {coin} -> {};", respawn.join(" + ")).unwrap();
            writeln!(s, "[{dir}] {guard} & !({occupied}) & !({coin}) -> {step}&(turn'={});", next(i)).unwrap();
        }
    }
    for (dir, dx, dy) in DIRS {
        for i in 1..=AGENTS {
            for j in others(i) {
                writeln!(
                    s,
                    "[hit_{dir}] done=0 & turn={i} & hp_{i}>0 & x_{j}={} & y_{j}={} & hp_{j}>0 -> {HIT}:(hp_{j}'=hp_{j}-1)&(turn'={nt}) + {}:(turn'={nt});",
                    shifted(&format!("x_{i}"), dx),
                    shifted(&format!("y_{i}"), dy),
                    ((1.0 - HIT) * 1e12).round() / 1e12,
                    nt = next(i)
                )
                .unwrap();
            }
        }
    }
    for i in 1..=AGENTS {
        writeln!(s, "[pass] done=0 & turn={i} & hp_{i}=0 -> (turn'={});", next(i)).unwrap();
    }
    writeln!(s).unwrap();
    for i in 1..=AGENTS {
        writeln!(s, "label \"player{i}_ko\" = hp_{i}=0;").unwrap();
    }
    writeln!(s, "label \"collision\" = done=1;").unwrap();
    writeln!(s).unwrap();
    for i in 1..=AGENTS {
        write!(s, "rewards \"agent_{i}\" turn={i} & hp_{i}>0 : 1;").unwrap();
        for (dir, dx, dy) in DIRS {
            let (tx, ty) = (shifted(&format!("x_{i}"), dx), shifted(&format!("y_{i}"), dy));
            write!(s, " [{dir}] turn={i} & coin_x={tx} & coin_y={ty} & done'=0 : 99;").unwrap();
        }
        writeln!(s, " endrewards").unwrap();
    }
    s
}

/// Pass when knocked out, hit an adjacent live agent if there is one, else
/// walk towards the coin, horizontally first.
pub fn rules(_: &Params) -> Vec<Vec<Rule>> {
    (1..=AGENTS)
        .map(|i| {
            let mut r = vec![Rule::new(&format!("hp_{i}=0"), "pass")];
            for (dir, dx, dy) in DIRS {
                let adj: Vec<String> = others(i)
                    .map(|j| {
                        format!(
                            "(x_{j}={} & y_{j}={} & hp_{j}>0)",
                            shifted(&format!("x_{i}"), dx),
                            shifted(&format!("y_{i}"), dy)
                        )
                    })
                    .collect();
                r.push(Rule { guard: adj.join(" | "), action: format!("hit_{dir}") });
            }
            r.push(Rule::new(&format!("coin_x>x_{i}"), "right"));
            r.push(Rule::new(&format!("coin_x<x_{i}"), "left"));
            r.push(Rule::new(&format!("coin_y>y_{i}"), "up"));
            r.push(Rule::new(&format!("coin_y<y_{i}"), "down"));
            r.push(Rule::new("true", "up"));
            r
        })
        .collect()
}
