//! The files under `models/` are the generators' output at default
//! parameters. Set `UPDATE_MODELS=1` to rewrite them.

mod common;

use std::path::PathBuf;

use tmarl_core::envs::BENCHMARKS;
use tmarl_core::gcl::parse_program;

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

#[test]
fn shipped_models_match_generators() {
    let update = std::env::var_os("UPDATE_MODELS").is_some();
    for b in BENCHMARKS {
        let path = models_dir().join(format!("{}.gcl", b.name));
        let fresh = b.source(&b.defaults()).unwrap();
        if update {
            std::fs::write(&path, &fresh).unwrap();
            continue;
        }
        let shipped = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(shipped == fresh, "{} is stale; rerun with UPDATE_MODELS=1", path.display());
    }
}

#[test]
fn shipped_models_parse() {
    eprintln!("{}", common::suite::shipped_models_parse(&models_dir()).unwrap());
}

#[test]
fn shipped_models_have_declared_queries() {
    for b in BENCHMARKS {
        let src = std::fs::read_to_string(models_dir().join(format!("{}.gcl", b.name))).unwrap();
        let p = parse_program(&src).unwrap();
        for (label, q) in b.queries {
            let f = tmarl_core::pctl::parse_property(q).unwrap();
            for l in f.labels() {
                assert!(p.label_expr(l).is_some(), "{}: {label} needs label {l}", b.name);
            }
        }
    }
}
