//! Experiment configuration: flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is optional
//! and defaults to the standard parameter table; unknown or repeated keys are
//! errors. Lists are comma separated.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use crate::drx::DrxParams;
use crate::error::{Error, Result};
use crate::lut::TrafficModel;
use crate::optimizer::{
    default_inactivity_timer, EvalContext, Evaluator, EvaluatorKind, GaConfig, IntRange, SearchSpace, TiChoice,
};
use crate::sim::{ItPolicy, PowerWeights, SimConfig};
use crate::traffic::{per_tti_rate, TimeBase, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exhaustive,
    Genetic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Genetic => "genetic",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Method::Exhaustive),
            "genetic" => Ok(Method::Genetic),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    Reduced,
    Full,
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(Grid::Reduced),
            "full" => Ok(Grid::Full),
            other => Err(Error::invalid(format!("unknown grid `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSection {
    pub model: TrafficModel,
    pub lambda_pkt_s: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrxSection {
    pub t_on: u32,
    /// `None` means `ceil(1 / lambda)` TTIs.
    pub t_i: Option<u32>,
    pub t_ss: u32,
    pub t_ls: u32,
    pub t_sc: u32,
    pub allow_equal_cycles: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSection {
    pub policy: ItPolicy,
    pub service_multiplier: f64,
    pub horizon_ttis: u64,
    pub runs: usize,
    pub seed: u64,
    pub power_weights: PowerWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptSection {
    pub d_max_ms: f64,
    pub method: Method,
    pub grid: Grid,
    pub evaluator: EvaluatorKind,
    pub t_ss_stride: Option<u32>,
    pub t_ls_stride: Option<u32>,
    pub t_sc_values: Option<Vec<u32>>,
    pub t_i_search: Option<IntRange>,
    pub ga: GaConfig,
    /// Monte Carlo runs and horizon per fitness evaluation when the
    /// simulated evaluator is selected.
    pub eval_runs: usize,
    pub eval_horizon_ttis: u64,
    /// Lookup table updated by `optimize`; relative paths resolve against
    /// the output file's directory.
    pub lut_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub lambdas_pkt_s: Vec<f64>,
    pub ttis_ms: Vec<f64>,
    pub policies: Vec<ItPolicy>,
    pub d_max_ms: Vec<f64>,
    pub cdf_policies: Vec<ItPolicy>,
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub traffic: TrafficSection,
    pub tti_ms: f64,
    pub drx: DrxSection,
    pub sim: SimSection,
    pub opt: OptSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            traffic: TrafficSection {
                model: TrafficModel::Poisson,
                lambda_pkt_s: 20.0,
                q: 0.5,
            },
            tti_ms: 1.0,
            drx: DrxSection {
                t_on: 8,
                t_i: None,
                t_ss: 32,
                t_ls: 128,
                t_sc: 4,
                allow_equal_cycles: false,
            },
            sim: SimSection {
                policy: ItPolicy::Standard,
                service_multiplier: 4.0,
                horizon_ttis: 200_000,
                runs: 250,
                seed: 1,
                power_weights: PowerWeights::default(),
            },
            opt: OptSection {
                d_max_ms: 10.0,
                method: Method::Genetic,
                grid: Grid::Reduced,
                evaluator: EvaluatorKind::Analytic,
                t_ss_stride: None,
                t_ls_stride: None,
                t_sc_values: None,
                t_i_search: None,
                ga: GaConfig::default(),
                eval_runs: 20,
                eval_horizon_ttis: 100_000,
                lut_path: "drx_lut.txt".into(),
            },
            sweep: SweepSection {
                lambdas_pkt_s: vec![5.0, 10.0, 20.0, 50.0],
                ttis_ms: TimeBase::STANDARD_TTIS_MS.to_vec(),
                policies: ItPolicy::ALL.to_vec(),
                d_max_ms: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0],
                cdf_policies: vec![ItPolicy::Standard, ItPolicy::Intelligent],
            },
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> std::result::Result<T, String> {
    raw.parse().map_err(|_| format!("bad value `{raw}` for `{key}`"))
}

fn list<T: FromStr>(key: &str, raw: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = raw
        .split(',')
        .map(|s| value(key, s.trim()))
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("`{key}` needs at least one value"));
    }
    Ok(items)
}

fn enum_value<T: FromStr<Err = Error>>(raw: &str) -> std::result::Result<T, String> {
    raw.parse().map_err(|e: Error| e.to_string())
}

fn enum_list<T: FromStr<Err = Error>>(key: &str, raw: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = raw
        .split(',')
        .map(|s| enum_value(s.trim()))
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("`{key}` needs at least one value"));
    }
    Ok(items)
}

impl ExperimentConfig {
    pub const MAX_POPULATION: usize = 100_000;
    pub const MAX_T_I_VALUES: usize = 10_000;

    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (key, val) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "expected `section.key = value`".into(),
            })?;
            let (key, val) = (key.trim(), val.trim());
            if !seen.insert(key.to_owned()) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, val).map_err(|msg| Error::Parse { line: lineno, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "traffic.model" => self.traffic.model = enum_value(v)?,
            "traffic.lambda_pkt_s" => self.traffic.lambda_pkt_s = value(key, v)?,
            "traffic.q" => self.traffic.q = value(key, v)?,
            "time.tti_ms" => self.tti_ms = value(key, v)?,
            "drx.t_on" => self.drx.t_on = value(key, v)?,
            "drx.t_i" => self.drx.t_i = if v == "auto" { None } else { Some(value(key, v)?) },
            "drx.t_ss" => self.drx.t_ss = value(key, v)?,
            "drx.t_ls" => self.drx.t_ls = value(key, v)?,
            "drx.t_sc" => self.drx.t_sc = value(key, v)?,
            "drx.allow_equal_cycles" => self.drx.allow_equal_cycles = value(key, v)?,
            "sim.policy" => self.sim.policy = enum_value(v)?,
            "sim.service_multiplier" => self.sim.service_multiplier = value(key, v)?,
            "sim.horizon_ttis" => self.sim.horizon_ttis = value(key, v)?,
            "sim.runs" => self.sim.runs = value(key, v)?,
            "sim.seed" => self.sim.seed = value(key, v)?,
            "sim.power_weights" => {
                let w: Vec<f64> = list(key, v)?;
                let [active, on, sleep] = w[..] else {
                    return Err(format!("`{key}` needs three weights"));
                };
                self.sim.power_weights = PowerWeights { active, on, sleep };
            }
            "opt.d_max_ms" => self.opt.d_max_ms = value(key, v)?,
            "opt.method" => self.opt.method = enum_value(v)?,
            "opt.grid" => self.opt.grid = enum_value(v)?,
            "opt.evaluator" => self.opt.evaluator = enum_value(v)?,
            "opt.t_ss_stride" => self.opt.t_ss_stride = Some(value(key, v)?),
            "opt.t_ls_stride" => self.opt.t_ls_stride = Some(value(key, v)?),
            "opt.t_sc_values" => self.opt.t_sc_values = Some(list(key, v)?),
            "opt.t_i_search" => {
                self.opt.t_i_search = if v == "off" {
                    None
                } else {
                    let parts: Vec<u32> = v
                        .split(':')
                        .map(|s| value(key, s.trim()))
                        .collect::<std::result::Result<_, _>>()?;
                    let [lo, hi, stride] = parts[..] else {
                        return Err(format!("`{key}` expects `lo:hi:stride` or `off`"));
                    };
                    Some(IntRange::new(lo, hi, stride).map_err(|e| e.to_string())?)
                }
            }
            "opt.generations" => self.opt.ga.generations = value(key, v)?,
            "opt.population" => self.opt.ga.population = value(key, v)?,
            "opt.mutation_rate" => self.opt.ga.mutation_rate = value(key, v)?,
            "opt.crossover_rate" => self.opt.ga.crossover_rate = value(key, v)?,
            "opt.tournament_size" => self.opt.ga.tournament_size = value(key, v)?,
            "opt.elitism" => self.opt.ga.elitism = value(key, v)?,
            "opt.stall_generations" => {
                let n: u32 = value(key, v)?;
                self.opt.ga.stall_generations = (n > 0).then_some(n);
            }
            "opt.eval_runs" => self.opt.eval_runs = value(key, v)?,
            "opt.eval_horizon_ttis" => self.opt.eval_horizon_ttis = value(key, v)?,
            "opt.lut_path" => self.opt.lut_path = v.to_owned(),
            "sweep.lambdas_pkt_s" => self.sweep.lambdas_pkt_s = list(key, v)?,
            "sweep.ttis_ms" => self.sweep.ttis_ms = list(key, v)?,
            "sweep.policies" => self.sweep.policies = enum_list(key, v)?,
            "sweep.d_max_ms" => self.sweep.d_max_ms = list(key, v)?,
            "sweep.cdf_policies" => self.sweep.cdf_policies = enum_list(key, v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Schema checks that span several keys.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !(self.traffic.lambda_pkt_s.is_finite() && self.traffic.lambda_pkt_s >= 0.0) {
            return bad("traffic.lambda_pkt_s must be a non-negative number".into());
        }
        if !(0.0..1.0).contains(&self.traffic.q) {
            return bad("traffic.q must lie in [0, 1)".into());
        }
        for &tti in std::iter::once(&self.tti_ms).chain(&self.sweep.ttis_ms) {
            if !finite_pos(tti) {
                return bad(format!("TTI length {tti} must be positive"));
            }
        }
        if self.sweep.lambdas_pkt_s.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("sweep.lambdas_pkt_s must be non-negative".into());
        }
        if self.sweep.d_max_ms.iter().chain([&self.opt.d_max_ms]).any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("delay budgets must be non-negative".into());
        }
        if self.sim.runs < 2 || self.opt.eval_runs < 2 {
            return bad("Monte Carlo needs at least two runs".into());
        }
        let d = &self.drx;
        if d.t_i == Some(0) {
            return bad("drx.t_i must be at least 1".into());
        }
        DrxParams {
            t_on: d.t_on,
            t_i: d.t_i.unwrap_or(1),
            t_ss: d.t_ss,
            t_ls: d.t_ls,
            t_sc: d.t_sc,
        }
        .validate(d.allow_equal_cycles)
        .map_err(|e| Error::Config(e.to_string()))?;
        if [self.opt.t_ss_stride, self.opt.t_ls_stride].contains(&Some(0)) {
            return bad("strides must be positive".into());
        }
        if self.opt.t_sc_values.as_ref().is_some_and(|v| v.contains(&0)) {
            return bad("opt.t_sc_values must be positive".into());
        }
        self.opt.ga.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.opt.ga.population > Self::MAX_POPULATION {
            return bad(format!("opt.population must not exceed {}", Self::MAX_POPULATION));
        }
        if self.opt.t_i_search.is_some_and(|r| r.len() > Self::MAX_T_I_VALUES) {
            return bad(format!("opt.t_i_search may list at most {} values", Self::MAX_T_I_VALUES));
        }
        if self.sim.horizon_ttis < SimConfig::MIN_HORIZON || self.opt.eval_horizon_ttis < SimConfig::MIN_HORIZON {
            return bad(format!("horizons must be at least {} TTIs", SimConfig::MIN_HORIZON));
        }
        // Reject simulator settings the runner would otherwise only discover
        // mid-experiment.
        let silent = TrafficSpec::Poisson { lambda_per_tti: 0.0 };
        self.sim_config(silent, self.drx_params(0.0), TimeBase::default(), self.sim.policy)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn time_base(&self, tti_ms: f64) -> Result<TimeBase> {
        TimeBase::new(tti_ms)
    }

    /// Traffic at `lambda_pkt_s` on a TTI of `tti_ms`, using the configured
    /// model and burstiness.
    pub fn traffic_spec(&self, lambda_pkt_s: f64, tti_ms: f64) -> Result<TrafficSpec> {
        let lambda = per_tti_rate(lambda_pkt_s, self.time_base(tti_ms)?)?;
        match self.traffic.model {
            TrafficModel::Poisson => TrafficSpec::poisson(lambda),
            TrafficModel::Bursty => TrafficSpec::bursty_matched(lambda, self.traffic.q),
        }
    }

    pub fn inactivity_timer(&self, lambda_per_tti: f64) -> u32 {
        self.drx.t_i.unwrap_or_else(|| default_inactivity_timer(lambda_per_tti))
    }

    /// The fixed DRX configuration from the `drx` section.
    pub fn drx_params(&self, lambda_per_tti: f64) -> DrxParams {
        DrxParams {
            t_on: self.drx.t_on,
            t_i: self.inactivity_timer(lambda_per_tti),
            t_ss: self.drx.t_ss,
            t_ls: self.drx.t_ls,
            t_sc: self.drx.t_sc,
        }
    }

    pub fn search_space(&self, lambda_per_tti: f64) -> SearchSpace {
        let t_i = match self.opt.t_i_search {
            Some(r) => TiChoice::Search(r),
            None => TiChoice::Fixed(self.inactivity_timer(lambda_per_tti)),
        };
        let mut space = match self.opt.grid {
            Grid::Reduced => SearchSpace::reduced(t_i),
            Grid::Full => SearchSpace::full(t_i),
        };
        space.t_on = self.drx.t_on;
        space.allow_equal_cycles = self.drx.allow_equal_cycles;
        if let Some(s) = self.opt.t_ss_stride {
            space.t_ss.stride = s;
        }
        if let Some(s) = self.opt.t_ls_stride {
            space.t_ls_stride = s;
        }
        if let Some(v) = &self.opt.t_sc_values {
            space.t_sc = v.clone();
        }
        space
    }

    pub fn sim_config(&self, traffic: TrafficSpec, params: DrxParams, time_base: TimeBase, policy: ItPolicy) -> SimConfig {
        let mut c = SimConfig::new(traffic, params, time_base).with_policy(policy);
        c.service_multiplier = self.sim.service_multiplier;
        c.horizon_ttis = self.sim.horizon_ttis;
        c.seed = self.sim.seed;
        c.power_weights = self.sim.power_weights;
        c
    }

    pub fn eval_context(&self, traffic: TrafficSpec, time_base: TimeBase) -> EvalContext {
        let evaluator = match self.opt.evaluator {
            EvaluatorKind::Analytic => Evaluator::Analytic,
            EvaluatorKind::Simulated => Evaluator::Simulated {
                policy: ItPolicy::Standard,
                runs: self.opt.eval_runs,
                horizon_ttis: self.opt.eval_horizon_ttis,
                service_multiplier: self.sim.service_multiplier,
                seed: self.sim.seed,
            },
        };
        let mut ctx = EvalContext::new(traffic, time_base, evaluator);
        ctx.allow_equal_cycles = self.drx.allow_equal_cycles;
        ctx
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.opt.d_max_ms, 10.0);
        assert_eq!(c.opt.ga.generations, 200);
        assert_eq!(c.opt.ga.population, 50);
        assert_eq!(c.traffic.q, 0.5);
        assert_eq!(c.drx.t_on, 8);
        assert_eq!(c.sim.runs, 250);
    }

    #[test]
    fn reads_every_section() {
        let c = ExperimentConfig::parse(
            "traffic.model = bursty\n\
             traffic.lambda_pkt_s = 50\n\
             time.tti_ms = 0.25\n\
             drx.t_i = 30\n\
             sim.policy = intelligent\n\
             sim.power_weights = 1, 0.8, 0.05\n\
             opt.method = exhaustive\n\
             opt.t_i_search = 10:100:10\n\
             opt.stall_generations = 30\n\
             sweep.ttis_ms = 1,0.5\n\
             sweep.cdf_policies = genie\n",
        )
        .unwrap();
        assert_eq!(c.traffic.model, TrafficModel::Bursty);
        assert_eq!(c.tti_ms, 0.25);
        assert_eq!(c.drx.t_i, Some(30));
        assert_eq!(c.sim.policy, ItPolicy::Intelligent);
        assert_eq!(c.sim.power_weights.on, 0.8);
        assert_eq!(c.opt.method, Method::Exhaustive);
        assert_eq!(c.opt.t_i_search, Some(IntRange::new(10, 100, 10).unwrap()));
        assert_eq!(c.opt.ga.stall_generations, Some(30));
        assert_eq!(c.sweep.ttis_ms, vec![1.0, 0.5]);
        assert_eq!(c.sweep.cdf_policies, vec![ItPolicy::Genie]);
    }

    #[test]
    fn schema_violations() {
        for doc in [
            "traffic.colour = red",
            "trafficmodel",
            "traffic.model = gamma",
            "traffic.q = 1",
            "time.tti_ms = 0",
            "drx.t_ss = 200\ndrx.t_ls = 100",
            "drx.t_i = 0",
            "sim.runs = 1",
            "sim.horizon_ttis = 10",
            "sim.service_multiplier = 1",
            "sim.power_weights = 1,1",
            "opt.population = 2",
            "opt.t_i_search = 5:1:1",
            "opt.t_i_search = 1:4294967295:1",
            "opt.population = 18446744073709551615",
            "drx.t_on = 4294967295",
            "drx.t_sc = 100000",
            "traffic.q = 0.1\ntraffic.q = 0.2",
            "sweep.lambdas_pkt_s = 5,,10",
        ] {
            assert!(ExperimentConfig::parse(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn auto_inactivity_timer() {
        let c = ExperimentConfig::default();
        let tr = c.traffic_spec(20.0, 1.0).unwrap();
        assert_eq!(c.drx_params(tr.mean_rate()).t_i, 50);
        let tr = c.traffic_spec(5.0, 0.125).unwrap();
        assert_eq!(c.drx_params(tr.mean_rate()).t_i, 1600);
    }

    #[test]
    fn grid_overrides() {
        let c = ExperimentConfig::parse("opt.grid = full\nopt.t_ss_stride = 64\nopt.t_sc_values = 2").unwrap();
        let s = c.search_space(0.02);
        assert_eq!(s.t_ss.stride, 64);
        assert_eq!(s.t_ls_stride, 1);
        assert_eq!(s.t_sc, vec![2]);
        assert_eq!(ExperimentConfig::default().search_space(0.02), SearchSpace::reduced(TiChoice::Fixed(50)));
    }
}
