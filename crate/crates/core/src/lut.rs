//! Persisted lookup table of optimized DRX configurations.
//!
//! The file is plain text: `#` comment lines, then one comma-separated record
//! per line in the column order of [`COLUMNS`]. Reals are written in Rust's
//! shortest round-trip form, so a value read back is bit-identical to the one
//! stored. Every update rewrites the file through a temporary file in the same
//! directory and renames it into place.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::drx::DrxParams;
use crate::error::{Error, Result};
use crate::optimizer::OptResult;

pub const COLUMNS: [&str; 15] = [
    "model",
    "lambda_pkt_s",
    "q",
    "tti_ms",
    "d_max_ms",
    "t_on",
    "t_i",
    "t_ss",
    "t_ls",
    "t_sc",
    "ps",
    "mean_delay_ms",
    "feasible",
    "evaluations",
    "evaluator",
];

const BANNER: &str = "# drxlab lookup table v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficModel {
    Poisson,
    Bursty,
}

impl TrafficModel {
    pub fn name(self) -> &'static str {
        match self {
            TrafficModel::Poisson => "poisson",
            TrafficModel::Bursty => "bursty",
        }
    }
}

impl FromStr for TrafficModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(TrafficModel::Poisson),
            "bursty" => Ok(TrafficModel::Bursty),
            other => Err(Error::invalid(format!("unknown traffic model `{other}`"))),
        }
    }
}

impl fmt::Display for TrafficModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Traffic statistics, TTI length and delay budget that an entry was
/// optimized for. Reals compare by bit pattern.
#[derive(Debug, Clone, Copy)]
pub struct LutKey {
    pub model: TrafficModel,
    pub lambda_pkt_s: f64,
    pub q: f64,
    pub tti_ms: f64,
    pub d_max_ms: f64,
}

impl LutKey {
    pub fn new(model: TrafficModel, lambda_pkt_s: f64, q: f64, tti_ms: f64, d_max_ms: f64) -> Result<Self> {
        let key = Self {
            model,
            lambda_pkt_s,
            q,
            tti_ms,
            d_max_ms,
        };
        key.validate()?;
        Ok(key)
    }

    fn validate(&self) -> Result<()> {
        if [self.lambda_pkt_s, self.q, self.tti_ms, self.d_max_ms]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("lookup-table key fields must be finite"));
        }
        Ok(())
    }

    fn bits(&self) -> (TrafficModel, u64, u64, u64, u64) {
        (
            self.model,
            self.lambda_pkt_s.to_bits(),
            self.q.to_bits(),
            self.tti_ms.to_bits(),
            self.d_max_ms.to_bits(),
        )
    }
}

impl PartialEq for LutKey {
    fn eq(&self, other: &Self) -> bool {
        self.bits() == other.bits()
    }
}

impl Eq for LutKey {}

impl PartialOrd for LutKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LutKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bits().cmp(&other.bits())
    }
}

/// In-memory table, optionally bound to a file.
#[derive(Debug, Clone, Default)]
pub struct LookupTable {
    path: Option<PathBuf>,
    entries: BTreeMap<LutKey, OptResult>,
}

impl LookupTable {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; otherwise starts empty. Later `put`s write
    /// to `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => parse(&text)?.into_iter().collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(Self {
            path: Some(path),
            entries,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &LutKey) -> Option<&OptResult> {
        self.entries.get(key)
    }

    /// Inserts or replaces an entry and persists the whole table.
    pub fn put(&mut self, key: LutKey, value: OptResult) -> Result<()> {
        key.validate()?;
        self.entries.insert(key, value);
        self.persist()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LutKey, &OptResult)> {
        self.entries.iter()
    }

    pub fn render(&self) -> String {
        render(self.entries.iter())
    }

    fn persist(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(self.render().as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }
}

fn render<'a>(entries: impl Iterator<Item = (&'a LutKey, &'a OptResult)>) -> String {
    let mut out = format!("{BANNER}\n# {}\n", COLUMNS.join(","));
    for (k, v) in entries {
        let p = &v.best;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            k.model,
            k.lambda_pkt_s,
            k.q,
            k.tti_ms,
            k.d_max_ms,
            p.t_on,
            p.t_i,
            p.t_ss,
            p.t_ls,
            p.t_sc,
            v.ps,
            v.mean_delay_ms,
            v.feasible,
            v.evaluations,
            v.evaluator_kind.name(),
        ));
    }
    out
}

/// Parses the text form of a table. Blank lines and `#` lines are skipped;
/// any malformed record is an error.
pub fn parse(text: &str) -> Result<Vec<(LutKey, OptResult)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_record(line).map_err(|msg| Error::Parse { line: i + 1, msg })?);
    }
    Ok(out)
}

fn parse_record(line: &str) -> std::result::Result<(LutKey, OptResult), String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), fields.len()));
    }
    fn num<T: FromStr>(fields: &[&str], i: usize) -> std::result::Result<T, String> {
        fields[i]
            .parse()
            .map_err(|_| format!("bad {} `{}`", COLUMNS[i], fields[i]))
    }
    let model: TrafficModel = fields[0].parse().map_err(|e: Error| e.to_string())?;
    let key = LutKey {
        model,
        lambda_pkt_s: num(&fields, 1)?,
        q: num(&fields, 2)?,
        tti_ms: num(&fields, 3)?,
        d_max_ms: num(&fields, 4)?,
    };
    key.validate().map_err(|e| e.to_string())?;
    let best = DrxParams {
        t_on: num(&fields, 5)?,
        t_i: num(&fields, 6)?,
        t_ss: num(&fields, 7)?,
        t_ls: num(&fields, 8)?,
        t_sc: num(&fields, 9)?,
    };
    best.validate(true).map_err(|e| e.to_string())?;
    let value = OptResult {
        best,
        ps: num(&fields, 10)?,
        mean_delay_ms: num(&fields, 11)?,
        feasible: num(&fields, 12)?,
        evaluations: num(&fields, 13)?,
        evaluator_kind: fields[14].parse().map_err(|e: Error| e.to_string())?,
    };
    Ok((key, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::EvaluatorKind;
    use proptest::prelude::*;

    fn value(ps: f64) -> OptResult {
        OptResult {
            best: DrxParams::new(8, 50, 48, 144, 4).unwrap(),
            ps,
            mean_delay_ms: 9.762417012865619,
            feasible: true,
            evaluations: 765,
            evaluator_kind: EvaluatorKind::Analytic,
        }
    }

    fn key(lambda: f64) -> LutKey {
        LutKey::new(TrafficModel::Poisson, lambda, 0.0, 1.0, 10.0).unwrap()
    }

    #[test]
    fn get_after_put() {
        let mut t = LookupTable::in_memory();
        assert!(t.get(&key(20.0)).is_none());
        t.put(key(20.0), value(0.3883182424968623)).unwrap();
        assert_eq!(t.get(&key(20.0)), Some(&value(0.3883182424968623)));
        assert!(t.get(&key(20.000000000000004)).is_none());
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lut.txt");
        let mut t = LookupTable::open(&path).unwrap();
        assert!(t.is_empty());
        t.put(key(20.0), value(0.1 + 0.2)).unwrap();
        t.put(key(5.0), value(1.0 / 3.0)).unwrap();
        let back = LookupTable::open(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get(&key(20.0)).unwrap().ps.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.render(), t.render());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(BANNER));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn rejects_non_finite_key() {
        assert!(LutKey::new(TrafficModel::Bursty, f64::NAN, 0.5, 1.0, 10.0).is_err());
        assert!(LutKey::new(TrafficModel::Bursty, 20.0, 0.5, f64::INFINITY, 10.0).is_err());
    }

    #[test]
    fn unwritable_path_surfaces_error() {
        let mut t = LookupTable {
            path: Some(PathBuf::from("/nonexistent-dir/sub/lut.txt")),
            entries: BTreeMap::new(),
        };
        assert!(matches!(t.put(key(1.0), value(0.5)), Err(Error::Io { .. })));
    }

    #[test]
    fn malformed_records() {
        assert!(parse("poisson,20,0,1,10\n").is_err());
        assert!(parse("gamma,20,0,1,10,8,50,48,144,4,0.5,9,true,765,analytic").is_err());
        assert!(parse("poisson,20,0,1,10,8,50,48,144,4,0.5,9,maybe,765,analytic").is_err());
        assert!(parse("poisson,20,0,1,10,8,50,144,48,4,0.5,9,true,765,analytic").is_err());
        match parse("# c\n\npoisson,x,0,1,10,8,50,48,144,4,0.5,9,true,765,analytic") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("# only comments\n").unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(lambda in 0.0..1e4f64, q in 0.0..1.0f64, ps in -2.0..1.0f64, d in 0.0..1e6f64) {
            let mut t = LookupTable::in_memory();
            let k = LutKey::new(TrafficModel::Bursty, lambda, q, 0.125, 10.0).unwrap();
            let v = OptResult { mean_delay_ms: d, ..value(ps) };
            t.put(k, v.clone()).unwrap();
            let back = parse(&t.render()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].0, k);
            prop_assert_eq!(back[0].1.ps.to_bits(), ps.to_bits());
            prop_assert_eq!(back[0].1.mean_delay_ms.to_bits(), d.to_bits());
        }
    }
}
