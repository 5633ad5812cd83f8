//! TTI-slotted co-simulation of the base-station buffer and one DRX device.
//!
//! Each TTI runs, in order:
//!
//! 1. arrivals are appended to the FIFO buffer;
//! 2. the token bucket accrues `service_multiplier * mean_rate` packets;
//! 3. if the device listens and the buffer is not empty, up to
//!    `floor(tokens)` packets are delivered; delay is
//!    `(delivery_tti - arrival_tti + 1) * tti_ms`;
//! 4. the grant and the IT-restart indication are formed;
//! 5. the device advances one TTI.
//!
//! Tokens accrue every TTI but are spent only while listening, and carry
//! fractional credit over. The first `10 * (T_on + T_ls)` TTIs are a warm-up
//! and are left out of occupancy and delay statistics.

use std::collections::VecDeque;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::drx::{self, DeviceMode, DrxParams, ModeKind, TickInput};
use crate::error::{Error, Result};
use crate::traffic::{derive_run_seed, seeded_rng, ArrivalSampler, TimeBase, TrafficSpec};

/// How the base station handles the inactivity timer on data exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItPolicy {
    /// Restart on every data exchange.
    Standard,
    /// Restart only when the buffer cannot drain before the timer expires.
    Intelligent,
    /// No timer: the device listens exactly while the buffer holds data.
    Genie,
}

impl ItPolicy {
    pub const ALL: [ItPolicy; 3] = [ItPolicy::Standard, ItPolicy::Intelligent, ItPolicy::Genie];

    pub fn name(self) -> &'static str {
        match self {
            ItPolicy::Standard => "standard",
            ItPolicy::Intelligent => "intelligent",
            ItPolicy::Genie => "genie",
        }
    }
}

impl std::str::FromStr for ItPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ItPolicy::Standard),
            "intelligent" => Ok(ItPolicy::Intelligent),
            "genie" => Ok(ItPolicy::Genie),
            other => Err(Error::invalid(format!("unknown IT policy `{other}`"))),
        }
    }
}

/// Relative power drawn in each kind of TTI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerWeights {
    pub active: f64,
    pub on: f64,
    pub sleep: f64,
}

impl Default for PowerWeights {
    fn default() -> Self {
        Self {
            active: 1.0,
            on: 1.0,
            sleep: 0.0,
        }
    }
}

impl PowerWeights {
    fn weight(&self, kind: ModeKind) -> f64 {
        match kind {
            ModeKind::ActiveRx => self.active,
            ModeKind::ShortOn | ModeKind::LongOn => self.on,
            ModeKind::ShortSleep | ModeKind::LongSleep => self.sleep,
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub traffic: TrafficSpec,
    pub params: DrxParams,
    pub time_base: TimeBase,
    pub it_policy: ItPolicy,
    pub service_multiplier: f64,
    pub horizon_ttis: u64,
    pub seed: u64,
    pub power_weights: PowerWeights,
}

impl SimConfig {
    pub const MIN_HORIZON: u64 = 10_000;

    pub fn new(traffic: TrafficSpec, params: DrxParams, time_base: TimeBase) -> Self {
        Self {
            traffic,
            params,
            time_base,
            it_policy: ItPolicy::Standard,
            service_multiplier: 4.0,
            horizon_ttis: 200_000,
            seed: 0,
            power_weights: PowerWeights::default(),
        }
    }

    pub fn with_policy(mut self, policy: ItPolicy) -> Self {
        self.it_policy = policy;
        self
    }

    pub fn warmup_ttis(&self) -> u64 {
        10 * u64::from(self.params.long_cycle())
    }

    /// Packets of service capacity accrued per TTI.
    pub fn service_rate(&self) -> f64 {
        self.service_multiplier * self.traffic.mean_rate()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(true)?;
        if self.horizon_ttis < Self::MIN_HORIZON {
            return Err(Error::invalid(format!(
                "horizon must be at least {} TTIs",
                Self::MIN_HORIZON
            )));
        }
        if self.horizon_ttis <= self.warmup_ttis() {
            return Err(Error::invalid(format!(
                "horizon {} does not exceed the warm-up of {} TTIs",
                self.horizon_ttis,
                self.warmup_ttis()
            )));
        }
        if !(self.service_multiplier > 1.0 && self.service_multiplier.is_finite()) {
            return Err(Error::invalid("service multiplier must exceed 1"));
        }
        let w = self.power_weights;
        if [w.active, w.on, w.sleep].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("power weights must be non-negative"));
        }
        Ok(())
    }
}

/// Whether the base station asks for an IT restart on a data exchange.
///
/// `it_remaining` counts the active TTIs left including the current one and
/// `buffer_len` is what remains queued after this TTI's delivery. The
/// intelligent rule restarts unless the remaining time strictly exceeds the
/// drain time; ties restart.
pub fn it_restart_decision(
    policy: ItPolicy,
    it_remaining: u32,
    buffer_len: usize,
    service_rate_pkt_per_tti: f64,
) -> Result<bool> {
    if !(service_rate_pkt_per_tti > 0.0) {
        return Err(Error::invalid("service rate must be positive"));
    }
    Ok(match policy {
        ItPolicy::Standard => true,
        ItPolicy::Genie => false,
        ItPolicy::Intelligent => {
            if buffer_len == 0 {
                false
            } else {
                let drain = (buffer_len as f64 / service_rate_pkt_per_tti).ceil();
                drain >= f64::from(it_remaining)
            }
        }
    })
}

/// Measured outputs of a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub sleep_fraction: f64,
    pub power: f64,
    /// Mean arrival-to-delivery delay; NaN when no packet was measured.
    pub mean_delay_ms: f64,
    /// Mean number of sleep TTIs spent waiting, in ms.
    pub mean_sleep_delay_ms: f64,
    pub delay_samples_ms: Vec<f64>,
    /// Fraction of measured TTIs in each [`ModeKind`], indexed by `ModeKind::index`.
    pub occupancy: [f64; 5],
    /// Fraction of measured TTIs in each chain state `S_k`. Empty for the
    /// genie policy.
    pub state_occupancy: Vec<f64>,
    pub packets_arrived: u64,
    pub packets_delivered: u64,
    pub packets_undelivered: u64,
    pub measured_ttis: u64,
}

impl SimMetrics {
    pub fn occupancy_of(&self, kind: ModeKind) -> f64 {
        self.occupancy[kind.index()]
    }
}

struct Queued {
    arrival_tti: u64,
    sleep_mark: u64,
}

/// Runs one scenario to its horizon.
pub fn run_once(config: &SimConfig) -> Result<SimMetrics> {
    config.validate()?;
    let params = config.params;
    let tti_ms = config.time_base.tti_ms();
    let rate = config.service_rate();
    let warmup = config.warmup_ttis();
    let genie = config.it_policy == ItPolicy::Genie;

    let mut arrivals = ArrivalSampler::new(&config.traffic, seeded_rng(config.seed));
    let mut buffer: VecDeque<Queued> = VecDeque::new();
    let mut tokens = 0.0f64;
    let mut mode = drx::init(&params);

    let mut mode_ttis = [0u64; 5];
    let mut state_ttis = vec![0u64; if genie { 0 } else { params.n_states() }];
    let mut sleep_ttis_total = 0u64;
    let mut delays = Vec::new();
    let mut sleep_waits = 0u64;
    let mut arrived = 0u64;
    let mut delivered = 0u64;

    for tti in 0..config.horizon_ttis {
        let measuring = tti >= warmup;
        let n = arrivals.next_count();
        arrived += u64::from(n);
        for _ in 0..n {
            buffer.push_back(Queued {
                arrival_tti: tti,
                sleep_mark: sleep_ttis_total,
            });
        }
        tokens += rate;

        let (kind, listening) = if genie {
            if buffer.is_empty() {
                (ModeKind::LongSleep, false)
            } else {
                (ModeKind::ActiveRx, true)
            }
        } else {
            (mode.kind(), mode.is_listening())
        };

        let mut served = 0usize;
        if listening && !buffer.is_empty() {
            let budget = (tokens.floor() as usize).min(buffer.len());
            for _ in 0..budget {
                let pkt = buffer.pop_front().expect("budget bounded by buffer length");
                if pkt.arrival_tti >= warmup {
                    delays.push((tti - pkt.arrival_tti + 1) as f64 * tti_ms);
                    sleep_waits += sleep_ttis_total - pkt.sleep_mark;
                }
            }
            served = budget;
            tokens -= budget as f64;
            delivered += budget as u64;
        }

        if measuring {
            mode_ttis[kind.index()] += 1;
            if !genie {
                state_ttis[mode.state_index(&params)] += 1;
            }
        }
        if !listening {
            sleep_ttis_total += 1;
        }

        if !genie {
            let input = if served > 0 {
                let it_remaining = match mode {
                    DeviceMode::ActiveRx { it_remaining } => it_remaining,
                    _ => params.t_i,
                };
                let reset = it_restart_decision(config.it_policy, it_remaining, buffer.len(), rate.max(f64::MIN_POSITIVE))?;
                TickInput::grant(reset)
            } else {
                TickInput::IDLE
            };
            mode = drx::tick(mode, input, &params).0;
        }
    }

    let measured = config.horizon_ttis - warmup;
    let m = measured as f64;
    let occupancy = mode_ttis.map(|c| c as f64 / m);
    let sleep_fraction = ModeKind::ALL
        .iter()
        .filter(|k| k.is_sleep())
        .map(|k| occupancy[k.index()])
        .sum();
    let power = ModeKind::ALL
        .iter()
        .map(|&k| config.power_weights.weight(k) * occupancy[k.index()])
        .sum();
    let (mean_delay_ms, mean_sleep_delay_ms) = if delays.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let n = delays.len() as f64;
        (delays.iter().sum::<f64>() / n, sleep_waits as f64 * tti_ms / n)
    };

    Ok(SimMetrics {
        sleep_fraction,
        power,
        mean_delay_ms,
        mean_sleep_delay_ms,
        delay_samples_ms: delays,
        occupancy,
        state_occupancy: state_ttis.iter().map(|&c| c as f64 / m).collect(),
        packets_arrived: arrived,
        packets_delivered: delivered,
        packets_undelivered: buffer.len() as u64,
        measured_ttis: measured,
    })
}

/// Mean and spread of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Half-width of the two-sided 95% Student-t confidence interval.
    pub ci95: f64,
    /// Runs that contributed a finite value.
    pub n: usize,
}

impl Estimate {
    /// Non-finite values (runs without measured packets) are skipped.
    pub fn from_samples(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                ci95: f64::NAN,
                n,
            };
        }
        let mean = finite.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self {
                mean,
                std_error: f64::NAN,
                ci95: f64::NAN,
                n,
            };
        }
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_error = (var / n as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self {
            mean,
            std_error,
            ci95: t * std_error,
            n,
        }
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }
}

/// Aggregate over independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub sleep_fraction: Estimate,
    pub power: Estimate,
    pub mean_delay_ms: Estimate,
    pub mean_sleep_delay_ms: Estimate,
    /// Delay samples of all runs, concatenated in run order.
    pub pooled_delays_ms: Vec<f64>,
    pub per_run: Vec<SimMetrics>,
}

impl MonteCarloSummary {
    /// Mean of the pooled per-packet delays.
    pub fn pooled_mean_delay_ms(&self) -> f64 {
        self.pooled_delays_ms.iter().sum::<f64>() / self.pooled_delays_ms.len() as f64
    }
}

/// Runs `n_runs` independent replications; run `i` uses
/// `derive_run_seed(config.seed, i)`. Runs execute in parallel and are
/// reduced in index order, so the result does not depend on scheduling.
pub fn monte_carlo(config: &SimConfig, n_runs: usize) -> Result<MonteCarloSummary> {
    if n_runs < 2 {
        return Err(Error::invalid("monte carlo needs at least two runs"));
    }
    config.validate()?;
    let per_run: Vec<SimMetrics> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = derive_run_seed(config.seed, i as u64);
            run_once(&c)
        })
        .collect::<Result<_>>()?;

    let collect = |f: fn(&SimMetrics) -> f64| -> Vec<f64> { per_run.iter().map(f).collect() };
    let pooled_delays_ms = per_run
        .iter()
        .flat_map(|m| m.delay_samples_ms.iter().copied())
        .collect();
    Ok(MonteCarloSummary {
        runs: n_runs,
        sleep_fraction: Estimate::from_samples(&collect(|m| m.sleep_fraction)),
        power: Estimate::from_samples(&collect(|m| m.power)),
        mean_delay_ms: Estimate::from_samples(&collect(|m| m.mean_delay_ms)),
        mean_sleep_delay_ms: Estimate::from_samples(&collect(|m| m.mean_sleep_delay_ms)),
        pooled_delays_ms,
        per_run,
    })
}

/// Right-continuous empirical CDF evaluated at the distinct sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    points: Vec<(f64, f64)>,
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("empirical CDF samples must not be NaN"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => points.push((v, f)),
            }
        }
        Ok(Self { points, sorted })
    }

    /// `(value, F(value))` at each distinct sample value, ascending.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// `F(x) = #{samples <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v <= x);
        below as f64 / self.sorted.len() as f64
    }

    /// Smallest sample value `v` with `F(v) >= prob`.
    pub fn quantile(&self, prob: f64) -> f64 {
        let n = self.sorted.len();
        let rank = ((prob * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// Convenience wrapper returning the `(value, cumulative probability)` table.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(EmpiricalCdf::new(samples)?.points().to_vec())
}
