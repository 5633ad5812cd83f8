//! Constrained search over DRX parameters: maximize the power-saving factor
//! subject to a mean-delay budget and `T_s < T_l`.
//!
//! Both searches rank candidates with the same total order (feasible first,
//! then higher PS, lower delay, smaller parameter tuple), so parallel and
//! serial evaluation return identical results.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::analytic::{self, BurstyDelayTable};
use crate::drx::DrxParams;
use crate::error::{Error, Result};
use crate::sim::{self, ItPolicy, SimConfig};
use crate::traffic::{seeded_rng, TimeBase, TrafficSpec};

/// Arithmetic progression `lo, lo + stride, ...` capped at `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub lo: u32,
    pub hi: u32,
    pub stride: u32,
}

impl IntRange {
    pub fn new(lo: u32, hi: u32, stride: u32) -> Result<Self> {
        if stride == 0 || lo == 0 || lo > hi {
            return Err(Error::invalid(format!("bad range [{lo}, {hi}] / {stride}")));
        }
        Ok(Self { lo, hi, stride })
    }

    pub fn single(v: u32) -> Self {
        Self { lo: v, hi: v, stride: 1 }
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + Clone {
        (self.lo..=self.hi).step_by(self.stride as usize)
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.stride + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// How the inactivity timer enters the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiChoice {
    Fixed(u32),
    Search(IntRange),
}

impl TiChoice {
    fn values(&self) -> Vec<u32> {
        match self {
            TiChoice::Fixed(v) => vec![*v],
            TiChoice::Search(r) => r.values().collect(),
        }
    }
}

/// Grid of candidate DRX configurations.
///
/// Long-cycle sleeps start one stride above the short-cycle sleep (or at it,
/// when equal cycles are allowed) and run up to `t_ls_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    pub t_on: u32,
    pub t_ss: IntRange,
    pub t_ls_max: u32,
    pub t_ls_stride: u32,
    pub t_sc: Vec<u32>,
    pub t_i: TiChoice,
    pub allow_equal_cycles: bool,
}

impl SearchSpace {
    pub const T_ON: u32 = 8;
    pub const T_SS_MIN: u32 = 32;
    pub const T_SS_MAX: u32 = 160;
    pub const T_LS_MAX: u32 = 640;
    pub const T_SC_MAX: u32 = 16;

    /// Every integer configuration of the default parameter table.
    pub fn full(t_i: TiChoice) -> Self {
        Self {
            t_on: Self::T_ON,
            t_ss: IntRange::new(Self::T_SS_MIN, Self::T_SS_MAX, 1).expect("static range"),
            t_ls_max: Self::T_LS_MAX,
            t_ls_stride: 1,
            t_sc: (1..=Self::T_SC_MAX).collect(),
            t_i,
            allow_equal_cycles: false,
        }
    }

    /// Coarse grid: `T_ss` every 16 TTIs, `T_ls` every 32, `T_sc` in powers of two.
    pub fn reduced(t_i: TiChoice) -> Self {
        Self {
            t_ss: IntRange::new(Self::T_SS_MIN, Self::T_SS_MAX, 16).expect("static range"),
            t_ls_stride: 32,
            t_sc: vec![1, 2, 4, 8, 16],
            ..Self::full(t_i)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_on == 0 || self.t_ls_stride == 0 || self.t_sc.is_empty() || self.t_sc.contains(&0) {
            return Err(Error::invalid("search space has an empty or zero dimension"));
        }
        if let TiChoice::Fixed(0) = self.t_i {
            return Err(Error::invalid("inactivity timer must be at least 1 TTI"));
        }
        Ok(())
    }

    fn t_ls_start(&self, t_ss: u32) -> u32 {
        if self.allow_equal_cycles {
            t_ss
        } else {
            t_ss.saturating_add(self.t_ls_stride)
        }
    }

    /// Long-cycle sleeps compatible with `t_ss`.
    pub fn t_ls_values(&self, t_ss: u32) -> impl Iterator<Item = u32> + Clone {
        let start = self.t_ls_start(t_ss);
        // An empty range when no long sleep fits.
        let (start, end) = if start > self.t_ls_max { (1, 0) } else { (start, self.t_ls_max) };
        (start..=end).step_by(self.t_ls_stride as usize)
    }

    fn t_ls_count(&self, t_ss: u32) -> usize {
        let start = self.t_ls_start(t_ss);
        if start > self.t_ls_max {
            0
        } else {
            ((self.t_ls_max - start) / self.t_ls_stride + 1) as usize
        }
    }

    /// Number of configurations, computed without enumerating.
    pub fn count(&self) -> u64 {
        let pairs: u64 = self.t_ss.values().map(|s| self.t_ls_count(s) as u64).sum();
        pairs * self.t_sc.len() as u64 * self.t_i.values().len() as u64
    }

    /// Lazily yields every configuration in `(t_ss, t_ls, t_sc, t_i)` order.
    pub fn iter(&self) -> impl Iterator<Item = DrxParams> + '_ {
        let t_is = self.t_i.values();
        self.t_ss.values().flat_map(move |t_ss| {
            let t_is = t_is.clone();
            self.t_ls_values(t_ss).flat_map(move |t_ls| {
                let t_is = t_is.clone();
                self.t_sc.iter().flat_map(move |&t_sc| {
                    t_is.clone().into_iter().map(move |t_i| DrxParams {
                        t_on: self.t_on,
                        t_i,
                        t_ss,
                        t_ls,
                        t_sc,
                    })
                })
            })
        })
    }
}

/// Lazy stream of configurations plus its total count.
pub fn enumerate_space(space: &SearchSpace) -> (impl Iterator<Item = DrxParams> + '_, u64) {
    (space.iter(), space.count())
}

/// Default inactivity timer: the mean inter-arrival time, `ceil(1 / lambda)`.
pub fn default_inactivity_timer(lambda_per_tti: f64) -> u32 {
    if lambda_per_tti <= 0.0 {
        return 1;
    }
    (1.0 / lambda_per_tti).ceil().clamp(1.0, f64::from(u32::MAX)) as u32
}

/// Fitness source for the searches.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluator {
    Analytic,
    Simulated {
        policy: ItPolicy,
        runs: usize,
        horizon_ttis: u64,
        service_multiplier: f64,
        seed: u64,
    },
}

impl Evaluator {
    pub fn kind(&self) -> EvaluatorKind {
        match self {
            Evaluator::Analytic => EvaluatorKind::Analytic,
            Evaluator::Simulated { .. } => EvaluatorKind::Simulated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvaluatorKind {
    Analytic,
    Simulated,
}

impl EvaluatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EvaluatorKind::Analytic => "analytic",
            EvaluatorKind::Simulated => "simulated",
        }
    }
}

impl std::str::FromStr for EvaluatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(EvaluatorKind::Analytic),
            "simulated" => Ok(EvaluatorKind::Simulated),
            other => Err(Error::invalid(format!("unknown evaluator `{other}`"))),
        }
    }
}

/// Everything a fitness evaluation needs besides the configuration.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub traffic: TrafficSpec,
    pub time_base: TimeBase,
    pub evaluator: Evaluator,
    pub allow_equal_cycles: bool,
    bursty_delays: Option<BurstyDelayTable>,
}

impl EvalContext {
    pub fn new(traffic: TrafficSpec, time_base: TimeBase, evaluator: Evaluator) -> Self {
        let bursty_delays = match (&evaluator, traffic) {
            (Evaluator::Analytic, TrafficSpec::Bursty { q, .. }) => {
                Some(BurstyDelayTable::new(q, SearchSpace::T_LS_MAX))
            }
            _ => None,
        };
        Self {
            traffic,
            time_base,
            evaluator,
            allow_equal_cycles: false,
            bursty_delays,
        }
    }

    pub fn analytic(traffic: TrafficSpec, time_base: TimeBase) -> Self {
        Self::new(traffic, time_base, Evaluator::Analytic)
    }

    fn cycle_delay(&self, t: u32) -> Result<f64> {
        match &self.bursty_delays {
            Some(table) if t <= SearchSpace::T_LS_MAX => Ok(table.delay(t)),
            _ => analytic::cycle_delay(&self.traffic, t),
        }
    }
}

/// Power-saving factor and mean delay of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub ps: f64,
    pub mean_delay_ms: f64,
}

/// Scores one configuration. Configurations violating `T_s < T_l` are
/// rejected before any model is touched.
pub fn evaluate(params: &DrxParams, ctx: &EvalContext) -> Result<Evaluation> {
    params.validate(ctx.allow_equal_cycles)?;
    match &ctx.evaluator {
        Evaluator::Analytic => {
            let chain = analytic::build_chain(params, &ctx.traffic)?;
            let pi = analytic::steady_state(&chain)?;
            let ps = analytic::power_saving(&chain, &pi)?;
            let d = analytic::mean_delay_with(
                &chain,
                &pi,
                ctx.cycle_delay(params.t_ss)?,
                ctx.cycle_delay(params.t_ls)?,
            )?;
            Ok(Evaluation {
                ps,
                mean_delay_ms: ctx.time_base.ttis_to_ms(d),
            })
        }
        Evaluator::Simulated {
            policy,
            runs,
            horizon_ttis,
            service_multiplier,
            seed,
        } => {
            let mut config = SimConfig::new(ctx.traffic, *params, ctx.time_base).with_policy(*policy);
            config.horizon_ttis = *horizon_ttis;
            config.service_multiplier = *service_multiplier;
            config.seed = *seed;
            let summary = sim::monte_carlo(&config, *runs)?;
            Ok(Evaluation {
                ps: summary.sleep_fraction.mean,
                mean_delay_ms: summary.mean_delay_ms.mean,
            })
        }
    }
}

/// Best configuration found by a search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best: DrxParams,
    pub ps: f64,
    pub mean_delay_ms: f64,
    pub feasible: bool,
    pub evaluations: u64,
    pub evaluator_kind: EvaluatorKind,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    params: DrxParams,
    eval: Evaluation,
    feasible: bool,
}

impl Candidate {
    fn new(params: DrxParams, eval: Evaluation, d_max_ms: f64) -> Self {
        let feasible = eval.mean_delay_ms.is_finite() && eval.mean_delay_ms <= d_max_ms;
        Self { params, eval, feasible }
    }

    fn delay_key(&self) -> f64 {
        if self.eval.mean_delay_ms.is_nan() {
            f64::INFINITY
        } else {
            self.eval.mean_delay_ms
        }
    }

    /// `Greater` means `self` ranks ahead of `other`.
    fn rank(&self, other: &Self) -> Ordering {
        match (self.feasible, other.feasible) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (true, true) => self
                .eval
                .ps
                .total_cmp(&other.eval.ps)
                .then_with(|| other.delay_key().total_cmp(&self.delay_key()))
                .then_with(|| other.params.cmp(&self.params)),
            (false, false) => other
                .delay_key()
                .total_cmp(&self.delay_key())
                .then_with(|| other.params.cmp(&self.params)),
        }
    }

    fn pick(a: Self, b: Self) -> Self {
        if b.rank(&a) == Ordering::Greater {
            b
        } else {
            a
        }
    }

    fn fitness(&self, d_max_ms: f64) -> f64 {
        if self.feasible {
            self.eval.ps
        } else if self.eval.mean_delay_ms.is_finite() {
            self.eval.ps - 1.0 - (self.eval.mean_delay_ms - d_max_ms)
        } else {
            f64::MIN
        }
    }

    fn into_result(self, evaluations: u64, kind: EvaluatorKind) -> OptResult {
        OptResult {
            best: self.params,
            ps: self.eval.ps,
            mean_delay_ms: self.eval.mean_delay_ms,
            feasible: self.feasible,
            evaluations,
            evaluator_kind: kind,
        }
    }
}

/// Evaluates every configuration of `space` and keeps the best.
///
/// Without a feasible point the result is marked infeasible and reports the
/// minimal-delay configuration.
pub fn exhaustive_search(space: &SearchSpace, d_max_ms: f64, ctx: &EvalContext) -> Result<OptResult> {
    space.validate()?;
    let best = space
        .iter()
        .par_bridge()
        .map(|p| evaluate(&p, ctx).map(|e| Candidate::new(p, e, d_max_ms)))
        .try_reduce_with(|a, b| Ok(Candidate::pick(a, b)))
        .ok_or_else(|| Error::invalid("search space is empty"))??;
    Ok(best.into_result(space.count(), ctx.evaluator.kind()))
}

/// Genetic-algorithm settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub generations: u32,
    pub population: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    /// Stop after this many generations without improvement of the best
    /// fitness. `None` runs all generations.
    pub stall_generations: Option<u32>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 200,
            population: 50,
            mutation_rate: 0.1,
            crossover_rate: 0.9,
            tournament_size: 2,
            elitism: 2,
            stall_generations: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations < 1 {
            return Err(Error::invalid("GA needs at least one generation"));
        }
        if self.population < 4 {
            return Err(Error::invalid("GA population must be at least 4"));
        }
        if self.elitism >= self.population {
            return Err(Error::invalid("elitism must be smaller than the population"));
        }
        if self.tournament_size < 1 {
            return Err(Error::invalid("tournament size must be at least 1"));
        }
        for (name, v) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Worst-case number of fitness evaluations, `generations * population`.
    pub fn evaluation_budget(&self) -> u64 {
        u64::from(self.generations) * self.population as u64
    }
}

/// Integer genes: indices into the short-sleep, long-sleep (relative to the
/// first long sleep allowed for the chosen short sleep), short-cycle-count and
/// inactivity-timer value lists.
type Genome = [usize; 4];

struct GeneSpace<'a> {
    space: &'a SearchSpace,
    t_ss: Vec<u32>,
    t_i: Vec<u32>,
}

impl<'a> GeneSpace<'a> {
    fn new(space: &'a SearchSpace) -> Result<Self> {
        let t_ss: Vec<u32> = space.t_ss.values().filter(|&s| space.t_ls_count(s) > 0).collect();
        if t_ss.is_empty() {
            return Err(Error::invalid("search space is empty"));
        }
        Ok(Self {
            space,
            t_ss,
            t_i: space.t_i.values(),
        })
    }

    fn bounds(&self, genome: &Genome) -> [usize; 4] {
        [
            self.t_ss.len(),
            self.space.t_ls_count(self.t_ss[genome[0]]),
            self.space.t_sc.len(),
            self.t_i.len(),
        ]
    }

    fn repair(&self, genome: &mut Genome) {
        genome[0] = genome[0].min(self.t_ss.len() - 1);
        let bounds = self.bounds(genome);
        for (g, b) in genome.iter_mut().zip(bounds).skip(1) {
            *g = (*g).min(b - 1);
        }
    }

    fn random<R: Rng>(&self, rng: &mut R) -> Genome {
        let mut g = [rng.random_range(0..self.t_ss.len()), 0, 0, 0];
        let bounds = self.bounds(&g);
        for i in 1..4 {
            g[i] = rng.random_range(0..bounds[i]);
        }
        g
    }

    fn decode(&self, g: &Genome) -> DrxParams {
        let t_ss = self.t_ss[g[0]];
        let t_ls = self.space.t_ls_start(t_ss) + g[1] as u32 * self.space.t_ls_stride;
        DrxParams {
            t_on: self.space.t_on,
            t_i: self.t_i[g[3]],
            t_ss,
            t_ls,
            t_sc: self.space.t_sc[g[2]],
        }
    }
}

/// Genetic search: tournament selection, uniform crossover, one-step integer
/// mutation clamped to the grid, and elitism. Infeasible individuals are
/// penalized by `1 + (D - d_max)` so any feasible one beats them. Each
/// distinct configuration is evaluated once; the best candidate over all
/// evaluations is returned.
pub fn genetic_search(
    space: &SearchSpace,
    d_max_ms: f64,
    ga: &GaConfig,
    ctx: &EvalContext,
    seed: u64,
) -> Result<OptResult> {
    space.validate()?;
    ga.validate()?;
    let genes = GeneSpace::new(space)?;
    let mut rng = seeded_rng(seed);
    let mut cache: HashMap<DrxParams, Candidate> = HashMap::new();

    let evaluate_batch = |pop: &[Genome], cache: &mut HashMap<DrxParams, Candidate>| -> Result<Vec<f64>> {
        let params: Vec<DrxParams> = pop.iter().map(|g| genes.decode(g)).collect();
        let mut fresh: Vec<DrxParams> = Vec::new();
        for p in &params {
            if !cache.contains_key(p) && !fresh.contains(p) {
                fresh.push(*p);
            }
        }
        let scored: Vec<Candidate> = fresh
            .par_iter()
            .map(|p| evaluate(p, ctx).map(|e| Candidate::new(*p, e, d_max_ms)))
            .collect::<Result<_>>()?;
        for c in scored {
            cache.insert(c.params, c);
        }
        Ok(params.iter().map(|p| cache[p].fitness(d_max_ms)).collect())
    };

    let mut population: Vec<Genome> = (0..ga.population).map(|_| genes.random(&mut rng)).collect();
    let mut fitness = evaluate_batch(&population, &mut cache)?;
    let mut best_fitness = fitness.iter().copied().fold(f64::MIN, f64::max);
    let mut stall = 0u32;

    for _ in 1..ga.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..ga.elitism].iter().map(|&i| population[i]).collect();

        let select = |rng: &mut rand_chacha::ChaCha8Rng| -> Genome {
            let picks: Vec<usize> = (0..ga.tournament_size)
                .map(|_| rng.random_range(0..population.len()))
                .collect();
            let winner = picks
                .iter()
                .copied()
                .max_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(b.cmp(&a)))
                .expect("tournament is non-empty");
            population[winner]
        };

        while next.len() < ga.population {
            let a = select(&mut rng);
            let b = select(&mut rng);
            let mut child = a;
            if rng.random_bool(ga.crossover_rate) {
                for (c, gb) in child.iter_mut().zip(b) {
                    if rng.random_bool(0.5) {
                        *c = gb;
                    }
                }
            }
            genes.repair(&mut child);
            for i in 0..4 {
                if rng.random_bool(ga.mutation_rate) {
                    let bound = genes.bounds(&child)[i];
                    let step = *[-1i64, 1].choose(&mut rng).expect("non-empty");
                    child[i] = (child[i] as i64 + step).clamp(0, bound as i64 - 1) as usize;
                    genes.repair(&mut child);
                }
            }
            next.push(child);
        }

        population = next;
        fitness = evaluate_batch(&population, &mut cache)?;
        let gen_best = fitness.iter().copied().fold(f64::MIN, f64::max);
        if gen_best > best_fitness {
            best_fitness = gen_best;
            stall = 0;
        } else {
            stall += 1;
            if ga.stall_generations.is_some_and(|limit| stall >= limit) {
                break;
            }
        }
    }

    let evaluations = cache.len() as u64;
    let best = cache
        .into_values()
        .reduce(Candidate::pick)
        .expect("population is non-empty");
    Ok(best.into_result(evaluations, ctx.evaluator.kind()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_ctx(lambda: f64) -> EvalContext {
        EvalContext::analytic(TrafficSpec::poisson(lambda).unwrap(), TimeBase::default())
    }

    #[test]
    fn full_grid_count() {
        let pairs: u64 = (32..=160u64).map(|i| 640 - i).sum();
        assert_eq!(pairs, 70_176);
        let space = SearchSpace::full(TiChoice::Fixed(50));
        assert_eq!(space.count(), 1_122_816);
        let (stream, count) = enumerate_space(&space);
        assert_eq!(count, 1_122_816);
        assert_eq!(stream.count() as u64, count);
    }

    #[test]
    fn reduced_grid_count_matches_stream() {
        let space = SearchSpace::reduced(TiChoice::Fixed(50));
        let all: Vec<DrxParams> = space.iter().collect();
        assert_eq!(all.len() as u64, space.count());
        assert!(all.iter().all(|p| p.t_ss < p.t_ls && p.t_ls <= 640));
        let mut sorted = all.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
    }

    #[test]
    fn single_point_space() {
        let space = SearchSpace {
            t_on: 8,
            t_ss: IntRange::single(64),
            t_ls_max: 128,
            t_ls_stride: 64,
            t_sc: vec![3],
            t_i: TiChoice::Fixed(50),
            allow_equal_cycles: false,
        };
        assert_eq!(space.count(), 1);
        let r = exhaustive_search(&space, 1e9, &poisson_ctx(0.02)).unwrap();
        assert!(r.feasible);
        assert_eq!(r.best, DrxParams::new(8, 50, 64, 128, 3).unwrap());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn empty_space() {
        let space = SearchSpace {
            t_ss: IntRange::single(640),
            ..SearchSpace::reduced(TiChoice::Fixed(50))
        };
        assert_eq!(space.count(), 0);
        assert!(exhaustive_search(&space, 10.0, &poisson_ctx(0.02)).is_err());
        assert!(genetic_search(&space, 10.0, &GaConfig::default(), &poisson_ctx(0.02), 1).is_err());
    }

    #[test]
    fn equal_cycles_extend_grid() {
        let mut space = SearchSpace::full(TiChoice::Fixed(50));
        space.allow_equal_cycles = true;
        let pairs: u64 = (32..=160u64).map(|i| 641 - i).sum();
        assert_eq!(space.count(), pairs * 16);
    }

    #[test]
    fn silent_traffic_evaluates_to_long_cycle_limit() {
        let p = DrxParams::new(8, 50, 32, 640, 4).unwrap();
        let e = evaluate(&p, &poisson_ctx(0.0)).unwrap();
        assert!((e.ps - 640.0 / 648.0).abs() < 1e-12);
        assert_eq!(evaluate(&p, &poisson_ctx(0.0)).unwrap(), e);
    }

    #[test]
    fn rejects_non_increasing_cycles() {
        let p = DrxParams { t_on: 8, t_i: 50, t_ss: 64, t_ls: 64, t_sc: 2 };
        assert!(evaluate(&p, &poisson_ctx(0.02)).is_err());
        let p = DrxParams { t_ss: 96, ..p };
        assert!(evaluate(&p, &poisson_ctx(0.02)).is_err());
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let space = SearchSpace::reduced(TiChoice::Fixed(50));
        let r = exhaustive_search(&space, 0.0, &poisson_ctx(0.02)).unwrap();
        assert!(!r.feasible);
        // Best effort: the minimal-delay configuration.
        let min_delay = space
            .iter()
            .map(|p| evaluate(&p, &poisson_ctx(0.02)).unwrap().mean_delay_ms)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.mean_delay_ms, min_delay);
    }

    #[test]
    fn ga_budget_and_determinism() {
        let space = SearchSpace::reduced(TiChoice::Fixed(50));
        let ga = GaConfig::default();
        assert_eq!(ga.evaluation_budget(), 10_000);
        let ctx = poisson_ctx(0.02);
        let a = genetic_search(&space, 10.0, &ga, &ctx, 3).unwrap();
        let b = genetic_search(&space, 10.0, &ga, &ctx, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.evaluations <= 10_000);
        let ex = exhaustive_search(&space, 10.0, &ctx).unwrap();
        assert!(a.ps <= ex.ps);
        assert!(!a.feasible || a.mean_delay_ms <= 10.0);
    }

    #[test]
    fn ga_stall_stops_early() {
        let space = SearchSpace::reduced(TiChoice::Fixed(50));
        let ga = GaConfig {
            stall_generations: Some(5),
            ..GaConfig::default()
        };
        let r = genetic_search(&space, 10.0, &ga, &poisson_ctx(0.02), 8).unwrap();
        assert!(r.evaluations < space.count());
    }

    #[test]
    fn ga_config_validation() {
        assert!(GaConfig { population: 3, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { generations: 0, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { elitism: 50, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
    }

    #[test]
    fn inactivity_timer_default() {
        assert_eq!(default_inactivity_timer(0.02), 50);
        assert_eq!(default_inactivity_timer(0.00625), 160);
        assert_eq!(default_inactivity_timer(0.0), 1);
        assert_eq!(default_inactivity_timer(0.3), 4);
    }
}
