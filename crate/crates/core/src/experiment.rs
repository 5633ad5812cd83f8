//! Experiment runner behind the `drxlab` binary.
//!
//! Each subcommand computes all of its rows, then writes one CSV file. Exit
//! codes: 0 success, 1 configuration error, 2 I/O error, 3 infeasible
//! optimization (`optimize` only; sweeps record feasibility per row).

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytic;
use crate::config::{ExperimentConfig, Method};
use crate::drx::DrxParams;
use crate::error::{Error, Result};
use crate::lut::{LookupTable, LutKey, TrafficModel};
use crate::optimizer::{exhaustive_search, genetic_search, OptResult};
use crate::output::{emit_csv, fmt_real, CsvRecord};
use crate::sim::{self, EmpiricalCdf, ItPolicy, MonteCarloSummary};
use crate::traffic::{TimeBase, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Analytic,
    Simulate,
    Optimize,
    Sweep,
    Cdf,
    DelaySweep,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Analytic,
        Subcommand::Simulate,
        Subcommand::Optimize,
        Subcommand::Sweep,
        Subcommand::Cdf,
        Subcommand::DelaySweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Analytic => "analytic",
            Subcommand::Simulate => "simulate",
            Subcommand::Optimize => "optimize",
            Subcommand::Sweep => "sweep",
            Subcommand::Cdf => "cdf",
            Subcommand::DelaySweep => "delay-sweep",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown subcommand `{s}`")))
    }
}

/// Result of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done { rows: usize },
    /// Output was written, but no configuration met the delay budget.
    Infeasible,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Done { .. }) => EXIT_OK,
        Ok(Outcome::Infeasible) => EXIT_INFEASIBLE,
        Err(Error::Io { .. } | Error::Csv(_)) => EXIT_IO,
        Err(_) => EXIT_CONFIG,
    }
}

/// Path of the pooled delay-sample file written next to `out`:
/// `runs.csv` becomes `runs.delays.csv`.
pub fn delays_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.delays.csv"))
}

/// Lookup-table path: relative paths resolve against the output directory.
pub fn lut_path(config: &ExperimentConfig, out: &Path) -> PathBuf {
    let p = PathBuf::from(&config.opt.lut_path);
    if p.is_absolute() {
        p
    } else {
        out.parent().unwrap_or(Path::new("")).join(p)
    }
}

/// Runs one subcommand and writes its CSV to `out`.
pub fn run_experiment(command: Subcommand, config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    config.validate()?;
    // Fail on an unwritable destination before any long computation.
    std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    match command {
        Subcommand::Analytic => run_analytic(config, out),
        Subcommand::Simulate => run_simulate(config, out),
        Subcommand::Optimize => run_optimize(config, out),
        Subcommand::Sweep => run_sweep(config, out),
        Subcommand::Cdf => run_cdf(config, out),
        Subcommand::DelaySweep => run_delay_sweep(config, out),
    }
}

/// One (lambda, TTI) operating point of the configured traffic model.
#[derive(Debug, Clone, Copy)]
struct Cell {
    lambda_pkt_s: f64,
    time_base: TimeBase,
    traffic: TrafficSpec,
}

impl Cell {
    fn new(config: &ExperimentConfig, lambda_pkt_s: f64, tti_ms: f64) -> Result<Self> {
        Ok(Self {
            lambda_pkt_s,
            time_base: config.time_base(tti_ms)?,
            traffic: config.traffic_spec(lambda_pkt_s, tti_ms)?,
        })
    }

    fn lambda_per_tti(&self) -> f64 {
        self.traffic.mean_rate()
    }

    fn q(&self, config: &ExperimentConfig) -> f64 {
        match config.traffic.model {
            TrafficModel::Poisson => 0.0,
            TrafficModel::Bursty => config.traffic.q,
        }
    }

    fn lut_key(&self, config: &ExperimentConfig, d_max_ms: f64) -> Result<LutKey> {
        LutKey::new(
            config.traffic.model,
            self.lambda_pkt_s,
            self.q(config),
            self.time_base.tti_ms(),
            d_max_ms,
        )
    }
}

fn optimize_cell(config: &ExperimentConfig, cell: &Cell, d_max_ms: f64) -> Result<OptResult> {
    let space = config.search_space(cell.lambda_per_tti());
    let ctx = config.eval_context(cell.traffic, cell.time_base);
    match config.opt.method {
        Method::Exhaustive => exhaustive_search(&space, d_max_ms, &ctx),
        Method::Genetic => genetic_search(&space, d_max_ms, &config.opt.ga, &ctx, config.sim.seed),
    }
}

fn simulate_cell(config: &ExperimentConfig, cell: &Cell, params: DrxParams, policy: ItPolicy) -> Result<MonteCarloSummary> {
    let sc = config.sim_config(cell.traffic, params, cell.time_base, policy);
    sim::monte_carlo(&sc, config.sim.runs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub model: TrafficModel,
    pub lambda_pkt_s: f64,
    pub q: f64,
    pub tti_ms: f64,
    pub params: DrxParams,
    pub ps: f64,
    pub ps_closed_form: f64,
    pub mean_delay_ttis: f64,
    pub mean_delay_ms: f64,
}

impl CsvRecord for AnalyticRow {
    fn header() -> &'static [&'static str] {
        &[
            "model", "lambda_pkt_s", "q", "tti_ms", "t_on", "t_i", "t_ss", "t_ls", "t_sc", "ps", "ps_closed_form",
            "mean_delay_ttis", "mean_delay_ms",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.model.to_string(),
            fmt_real(self.lambda_pkt_s),
            fmt_real(self.q),
            fmt_real(self.tti_ms),
        ];
        f.extend(param_fields(&self.params));
        f.extend([self.ps, self.ps_closed_form, self.mean_delay_ttis, self.mean_delay_ms].map(fmt_real));
        f
    }
}

fn param_fields(p: &DrxParams) -> [String; 5] {
    [p.t_on, p.t_i, p.t_ss, p.t_ls, p.t_sc].map(|v| v.to_string())
}

/// Optimizer output for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OptRow {
    pub model: TrafficModel,
    pub lambda_pkt_s: f64,
    pub q: f64,
    pub tti_ms: f64,
    pub d_max_ms: f64,
    pub method: Method,
    pub result: OptResult,
}

impl CsvRecord for OptRow {
    fn header() -> &'static [&'static str] {
        &[
            "model", "lambda_pkt_s", "q", "tti_ms", "d_max_ms", "method", "evaluator", "t_on", "t_i", "t_ss", "t_ls",
            "t_sc", "ps", "mean_delay_ms", "feasible", "evaluations",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let r = &self.result;
        let mut f = vec![
            self.model.to_string(),
            fmt_real(self.lambda_pkt_s),
            fmt_real(self.q),
            fmt_real(self.tti_ms),
            fmt_real(self.d_max_ms),
            self.method.name().to_owned(),
            r.evaluator_kind.name().to_owned(),
        ];
        f.extend(param_fields(&r.best));
        f.extend([
            fmt_real(r.ps),
            fmt_real(r.mean_delay_ms),
            r.feasible.to_string(),
            r.evaluations.to_string(),
        ]);
        f
    }
}

/// One simulated (lambda, TTI, policy, method) cell. `ps` and
/// `model_delay_ms` are the evaluator's predictions for the configuration;
/// the remaining metrics are Monte Carlo means with 95% half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: TrafficModel,
    pub lambda_pkt_s: f64,
    pub q: f64,
    pub tti_ms: f64,
    pub d_max_ms: f64,
    pub policy: ItPolicy,
    /// `exhaustive`, `genetic`, or `fixed` for the configured parameters.
    pub method: &'static str,
    pub params: DrxParams,
    pub ps: f64,
    pub model_delay_ms: f64,
    pub feasible: bool,
    pub evaluations: u64,
    pub runs: usize,
    pub sleep_fraction: f64,
    pub sleep_fraction_ci95: f64,
    pub power: f64,
    pub power_ci95: f64,
    pub mean_delay_ms: f64,
    pub mean_delay_ci95: f64,
    pub packets_delivered: u64,
    pub packets_undelivered: u64,
}

impl CsvRecord for ResultRow {
    fn header() -> &'static [&'static str] {
        &[
            "model", "lambda_pkt_s", "q", "tti_ms", "d_max_ms", "policy", "method", "t_on", "t_i", "t_ss", "t_ls",
            "t_sc", "ps", "model_delay_ms", "feasible", "evaluations", "runs", "sleep_fraction",
            "sleep_fraction_ci95", "power", "power_ci95", "mean_delay_ms", "mean_delay_ci95", "packets_delivered",
            "packets_undelivered",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.model.to_string(),
            fmt_real(self.lambda_pkt_s),
            fmt_real(self.q),
            fmt_real(self.tti_ms),
            fmt_real(self.d_max_ms),
            self.policy.name().to_owned(),
            self.method.to_owned(),
        ];
        f.extend(param_fields(&self.params));
        f.extend([
            fmt_real(self.ps),
            fmt_real(self.model_delay_ms),
            self.feasible.to_string(),
            self.evaluations.to_string(),
            self.runs.to_string(),
        ]);
        f.extend(
            [
                self.sleep_fraction,
                self.sleep_fraction_ci95,
                self.power,
                self.power_ci95,
                self.mean_delay_ms,
                self.mean_delay_ci95,
            ]
            .map(fmt_real),
        );
        f.extend([self.packets_delivered.to_string(), self.packets_undelivered.to_string()]);
        f
    }
}

struct RowInputs<'a> {
    config: &'a ExperimentConfig,
    cell: &'a Cell,
    d_max_ms: f64,
    method: &'static str,
    opt: &'a OptResult,
}

fn result_row(i: RowInputs<'_>, policy: ItPolicy, mc: &MonteCarloSummary) -> ResultRow {
    let sum = |f: fn(&sim::SimMetrics) -> u64| mc.per_run.iter().map(f).sum();
    ResultRow {
        model: i.config.traffic.model,
        lambda_pkt_s: i.cell.lambda_pkt_s,
        q: i.cell.q(i.config),
        tti_ms: i.cell.time_base.tti_ms(),
        d_max_ms: i.d_max_ms,
        policy,
        method: i.method,
        params: i.opt.best,
        ps: i.opt.ps,
        model_delay_ms: i.opt.mean_delay_ms,
        feasible: i.opt.feasible,
        evaluations: i.opt.evaluations,
        runs: mc.runs,
        sleep_fraction: mc.sleep_fraction.mean,
        sleep_fraction_ci95: mc.sleep_fraction.ci95,
        power: mc.power.mean,
        power_ci95: mc.power.ci95,
        mean_delay_ms: mc.mean_delay_ms.mean,
        mean_delay_ci95: mc.mean_delay_ms.ci95,
        packets_delivered: sum(|m| m.packets_delivered),
        packets_undelivered: sum(|m| m.packets_undelivered),
    }
}

/// Pooled delay samples, one per delivered packet.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySample {
    pub run: usize,
    pub delay_ms: f64,
}

impl CsvRecord for DelaySample {
    fn header() -> &'static [&'static str] {
        &["run", "delay_ms"]
    }

    fn fields(&self) -> Vec<String> {
        vec![self.run.to_string(), fmt_real(self.delay_ms)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfRow {
    pub policy: ItPolicy,
    pub params: DrxParams,
    pub delay_ms: f64,
    pub cdf: f64,
}

impl CsvRecord for CdfRow {
    fn header() -> &'static [&'static str] {
        &["policy", "t_on", "t_i", "t_ss", "t_ls", "t_sc", "delay_ms", "cdf"]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.policy.name().to_owned()];
        f.extend(param_fields(&self.params));
        f.extend([fmt_real(self.delay_ms), fmt_real(self.cdf)]);
        f
    }
}

/// Relative power of intelligent versus standard handling at one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySweepRow {
    pub d_max_ms: f64,
    pub params: DrxParams,
    pub ps: f64,
    pub model_delay_ms: f64,
    pub feasible: bool,
    pub power_standard: f64,
    pub power_standard_ci95: f64,
    pub power_intelligent: f64,
    pub power_intelligent_ci95: f64,
    /// `power_intelligent / power_standard`.
    pub relative_power: f64,
    pub delay_standard_ms: f64,
    pub delay_intelligent_ms: f64,
}

impl CsvRecord for DelaySweepRow {
    fn header() -> &'static [&'static str] {
        &[
            "d_max_ms", "t_on", "t_i", "t_ss", "t_ls", "t_sc", "ps", "model_delay_ms", "feasible", "power_standard",
            "power_standard_ci95", "power_intelligent", "power_intelligent_ci95", "relative_power",
            "delay_standard_ms", "delay_intelligent_ms",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![fmt_real(self.d_max_ms)];
        f.extend(param_fields(&self.params));
        f.extend([fmt_real(self.ps), fmt_real(self.model_delay_ms), self.feasible.to_string()]);
        f.extend(
            [
                self.power_standard,
                self.power_standard_ci95,
                self.power_intelligent,
                self.power_intelligent_ci95,
                self.relative_power,
                self.delay_standard_ms,
                self.delay_intelligent_ms,
            ]
            .map(fmt_real),
        );
        f
    }
}

fn run_analytic(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let cell = Cell::new(config, config.traffic.lambda_pkt_s, config.tti_ms)?;
    let params = config.drx_params(cell.lambda_per_tti());
    let report = analytic::analyze(&params, &cell.traffic, cell.time_base)?;
    let chain = analytic::build_chain(&params, &cell.traffic)?;
    let closed = analytic::closed_form_steady_state(&chain);
    let row = AnalyticRow {
        model: config.traffic.model,
        lambda_pkt_s: cell.lambda_pkt_s,
        q: cell.q(config),
        tti_ms: cell.time_base.tti_ms(),
        params,
        ps: report.ps,
        ps_closed_form: analytic::power_saving(&chain, &closed)?,
        mean_delay_ttis: report.mean_delay_ttis,
        mean_delay_ms: report.mean_delay_ms,
    };
    emit_csv(&[row], out)?;
    Ok(Outcome::Done { rows: 1 })
}

fn run_simulate(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let cell = Cell::new(config, config.traffic.lambda_pkt_s, config.tti_ms)?;
    let params = config.drx_params(cell.lambda_per_tti());
    params.validate(config.drx.allow_equal_cycles)?;
    let report = analytic::analyze(&params, &cell.traffic, cell.time_base)?;
    let d_max_ms = config.opt.d_max_ms;
    let fixed = OptResult {
        best: params,
        ps: report.ps,
        mean_delay_ms: report.mean_delay_ms,
        feasible: report.mean_delay_ms <= d_max_ms,
        evaluations: 0,
        evaluator_kind: crate::optimizer::EvaluatorKind::Analytic,
    };
    let mc = simulate_cell(config, &cell, params, config.sim.policy)?;
    let inputs = RowInputs {
        config,
        cell: &cell,
        d_max_ms,
        method: "fixed",
        opt: &fixed,
    };
    let row = result_row(inputs, config.sim.policy, &mc);
    let samples: Vec<DelaySample> = mc
        .per_run
        .iter()
        .enumerate()
        .flat_map(|(run, m)| m.delay_samples_ms.iter().map(move |&delay_ms| DelaySample { run, delay_ms }))
        .collect();
    emit_csv(&[row], out)?;
    emit_csv(&samples, &delays_path(out))?;
    Ok(Outcome::Done { rows: 1 })
}

fn run_optimize(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let cell = Cell::new(config, config.traffic.lambda_pkt_s, config.tti_ms)?;
    let d_max_ms = config.opt.d_max_ms;
    let result = optimize_cell(config, &cell, d_max_ms)?;
    let row = OptRow {
        model: config.traffic.model,
        lambda_pkt_s: cell.lambda_pkt_s,
        q: cell.q(config),
        tti_ms: cell.time_base.tti_ms(),
        d_max_ms,
        method: config.opt.method,
        result: result.clone(),
    };
    emit_csv(&[row], out)?;
    let mut lut = LookupTable::open(lut_path(config, out))?;
    lut.put(cell.lut_key(config, d_max_ms)?, result.clone())?;
    Ok(if result.feasible {
        Outcome::Done { rows: 1 }
    } else {
        Outcome::Infeasible
    })
}

fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let d_max_ms = config.opt.d_max_ms;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for &lambda in &config.sweep.lambdas_pkt_s {
        for &tti in &config.sweep.ttis_ms {
            let cell = Cell::new(config, lambda, tti)?;
            let opt = optimize_cell(config, &cell, d_max_ms)?;
            for &policy in &config.sweep.policies {
                let mc = simulate_cell(config, &cell, opt.best, policy)?;
                let inputs = RowInputs {
                    config,
                    cell: &cell,
                    d_max_ms,
                    method: config.opt.method.name(),
                    opt: &opt,
                };
                rows.push(result_row(inputs, policy, &mc));
            }
            entries.push((cell.lut_key(config, d_max_ms)?, opt));
        }
    }
    emit_csv(&rows, out)?;
    let mut lut = LookupTable::open(lut_path(config, out))?;
    for (k, v) in entries {
        lut.put(k, v)?;
    }
    Ok(Outcome::Done { rows: rows.len() })
}

fn run_cdf(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let cell = Cell::new(config, config.traffic.lambda_pkt_s, config.tti_ms)?;
    let opt = optimize_cell(config, &cell, config.opt.d_max_ms)?;
    let mut rows = Vec::new();
    for &policy in &config.sweep.cdf_policies {
        let mc = simulate_cell(config, &cell, opt.best, policy)?;
        let cdf = EmpiricalCdf::new(&mc.pooled_delays_ms)?;
        rows.extend(cdf.points().iter().map(|&(delay_ms, cdf)| CdfRow {
            policy,
            params: opt.best,
            delay_ms,
            cdf,
        }));
    }
    emit_csv(&rows, out)?;
    Ok(Outcome::Done { rows: rows.len() })
}

fn run_delay_sweep(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let cell = Cell::new(config, config.traffic.lambda_pkt_s, config.tti_ms)?;
    // Neighbouring budgets often share an optimum; simulate each once.
    let mut cache: HashMap<(DrxParams, ItPolicy), MonteCarloSummary> = HashMap::new();
    let mut rows = Vec::new();
    for &d_max_ms in &config.sweep.d_max_ms {
        let opt = optimize_cell(config, &cell, d_max_ms)?;
        let mut sim_policy = |policy| -> Result<(f64, f64, f64)> {
            let key = (opt.best, policy);
            if !cache.contains_key(&key) {
                cache.insert(key, simulate_cell(config, &cell, opt.best, policy)?);
            }
            let mc = &cache[&key];
            Ok((mc.power.mean, mc.power.ci95, mc.mean_delay_ms.mean))
        };
        let (ps_std, ci_std, d_std) = sim_policy(ItPolicy::Standard)?;
        let (ps_int, ci_int, d_int) = sim_policy(ItPolicy::Intelligent)?;
        rows.push(DelaySweepRow {
            d_max_ms,
            params: opt.best,
            ps: opt.ps,
            model_delay_ms: opt.mean_delay_ms,
            feasible: opt.feasible,
            power_standard: ps_std,
            power_standard_ci95: ci_std,
            power_intelligent: ps_int,
            power_intelligent_ci95: ci_int,
            relative_power: ps_int / ps_std,
            delay_standard_ms: d_std,
            delay_intelligent_ms: d_int,
        });
    }
    emit_csv(&rows, out)?;
    Ok(Outcome::Done { rows: rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(exit_code(&Ok(Outcome::Done { rows: 1 })), 0);
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 1);
        assert_eq!(exit_code(&Err(Error::Parse { line: 1, msg: "x".into() })), 1);
        assert_eq!(
            exit_code(&Err(Error::io("/x", std::io::Error::other("denied")))),
            2
        );
        assert_eq!(exit_code(&Ok(Outcome::Infeasible)), 3);
    }

    #[test]
    fn subcommand_names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(c.name().parse::<Subcommand>().unwrap(), c);
        }
        assert!("plot".parse::<Subcommand>().is_err());
    }

    #[test]
    fn side_file_paths() {
        assert_eq!(delays_path(Path::new("out/run.csv")), PathBuf::from("out/run.delays.csv"));
        let c = ExperimentConfig::default();
        assert_eq!(lut_path(&c, Path::new("out/run.csv")), PathBuf::from("out/drx_lut.txt"));
        assert_eq!(lut_path(&c, Path::new("run.csv")), PathBuf::from("drx_lut.txt"));
    }
}
