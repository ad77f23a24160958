use std::fmt::Write;

use super::{get, Params};
use crate::agents::Rule;

fn cell(r: usize, c: usize) -> String {
    format!("cell_{r}{c}")
}

/// Rows, columns and both diagonals of an `n`×`n` board.
fn lines(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for r in 0..n {
        out.push((0..n).map(|c| (r, c)).collect());
    }
    for c in 0..n {
        out.push((0..n).map(|r| (r, c)).collect());
    }
    out.push((0..n).map(|i| (i, i)).collect());
    out.push((0..n).map(|i| (i, n - 1 - i)).collect());
    out
}

fn any_line(n: usize, player: &str, prime: &str) -> String {
    lines(n)
        .iter()
        .map(|l| {
            let all: Vec<String> = l.iter().map(|&(r, c)| format!("{}{prime}={player}", cell(r, c))).collect();
            format!("({})", all.join(" & "))
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

pub fn source(p: &Params) -> String {
    let n = get(p, "size") as usize;
    let mut s = String::new();
    writeln!(s, "// Tic-Tac-Toe on a {n}x{n} board. Cell value 0 is empty, 1 and 2 are the agents' marks.").unwrap();
    writeln!(s, "// A mark succeeds with probability 0.9; otherwise only the turn passes.").unwrap();
    writeln!(s, "// Marking an occupied cell passes the turn. A win or a full board sets done.").unwrap();
    writeln!(s, "// Reward 500 to the winner.").unwrap();
    writeln!(s).unwrap();
    writeln!(s, "turn : [1..2] init 1;").unwrap();
    writeln!(s, "done : [0..1] init 0;").unwrap();
    for r in 0..n {
        for c in 0..n {
            writeln!(s, "{} : [0..2] init 0;", cell(r, c)).unwrap();
        }
    }
    writeln!(s).unwrap();
    let lines = lines(n);
    for r in 0..n {
        for c in 0..n {
            let me = cell(r, c);
            let wins: Vec<String> = lines
                .iter()
                .filter(|l| l.contains(&(r, c)))
                .map(|l| {
                    let others: Vec<String> =
                        l.iter().filter(|&&x| x != (r, c)).map(|&(a, b)| format!("{}=turn", cell(a, b))).collect();
                    format!("({})", others.join(" & "))
                })
                .collect();
            let full: Vec<String> = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .filter(|&x| x != (r, c))
                .map(|(a, b)| format!("{}!=0", cell(a, b)))
                .collect();
            writeln!(
                s,
                "[mark_{r}{c}] done=0 & {me}=0 -> 0.9:({me}'=turn)&(turn'=3-turn)&(done'=({}) | ({}) ? 1 : 0) + 0.1:(turn'=3-turn);",
                wins.join(" | "),
                full.join(" & ")
            )
            .unwrap();
            writeln!(s, "[mark_{r}{c}] done=0 & {me}!=0 -> (turn'=3-turn);").unwrap();
        }
    }
    writeln!(s).unwrap();
    writeln!(s, "label \"won_1\" = {};", any_line(n, "1", "")).unwrap();
    writeln!(s, "label \"won_2\" = {};", any_line(n, "2", "")).unwrap();
    writeln!(s, "label \"draw\" = done=1 & !({}) & !({});", any_line(n, "1", ""), any_line(n, "2", "")).unwrap();
    writeln!(s).unwrap();
    for i in 1..=2 {
        writeln!(s, "rewards \"agent_{i}\" turn={i} & ({}) : 500; endrewards", any_line(n, &i.to_string(), "'")).unwrap();
    }
    s
}

/// Agent 1 insists on the top-left corner; agent 2 fills the middle row in
/// the order 10, 12, 11.
pub fn rules(p: &Params) -> Vec<Vec<Rule>> {
    let n = get(p, "size") as usize;
    let second = if n >= 3 {
        vec![
            Rule::new("cell_10=0", "mark_10"),
            Rule::new("cell_12=0", "mark_12"),
            Rule::new("cell_11=0", "mark_11"),
            Rule::new("true", "mark_10"),
        ]
    } else {
        vec![Rule::new("cell_10=0", "mark_10"), Rule::new("cell_11=0", "mark_11"), Rule::new("true", "mark_01")]
    };
    vec![vec![Rule::new("true", "mark_00")], second]
}
