//! Replays the fuzz corpus and random input through every parser entry point.

use std::path::PathBuf;

use proptest::prelude::*;

use drxlab::config::ExperimentConfig;
use drxlab::lut::{self, LookupTable};
use drxlab::output::parse_csv;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect()
}

#[test]
fn config_corpus() {
    let results: Vec<bool> = corpus("config")
        .iter()
        .map(|(_, text)| ExperimentConfig::parse(text).is_ok())
        .collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn lut_corpus_round_trips() {
    for (path, text) in corpus("lut") {
        let entries = lut::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut table = LookupTable::in_memory();
        for (k, v) in entries {
            table.put(k, v).unwrap();
        }
        assert_eq!(lut::parse(&table.render()).unwrap().len(), table.len());
    }
}

#[test]
fn csv_corpus_parses() {
    for (path, text) in corpus("csv") {
        let t = parse_csv(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }
}

proptest! {
    #[test]
    fn parsers_never_panic(text in "(\\PC|\n|,|=|#|\\.){0,200}") {
        let _ = ExperimentConfig::parse(&text);
        let _ = lut::parse(&text);
        let _ = parse_csv(&text);
    }

    #[test]
    fn config_lines_never_panic(key in "(traffic|time|drx|sim|opt|sweep)\\.[a-z_]{1,20}", value in "[-0-9a-z.:, ]{0,20}") {
        let _ = ExperimentConfig::parse(&format!("{key} = {value}\n"));
    }
}
