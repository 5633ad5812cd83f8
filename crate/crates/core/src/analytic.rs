//! Semi-Markov model of the DRX cycle.
//!
//! States are indexed `S_0 ..= S_{2 t_sc + 2}`:
//!
//! | index            | state                         | holding time            |
//! |------------------|-------------------------------|-------------------------|
//! | `0`              | continuous reception          | `(1 - P0(T_I)) / lambda`|
//! | `2i - 1`         | on-duration of short cycle i  | `(1 - P0(T_on)) / lambda`|
//! | `2i`             | sleep of short cycle i        | `T_ss`                  |
//! | `2 t_sc + 1`     | on-duration of the long cycle | `(1 - P0(T_on)) / lambda`|
//! | `2 t_sc + 2`     | sleep of the long cycle       | `T_ls`                  |
//!
//! Forward transitions carry the no-arrival probability of the state's timer;
//! whatever mass is left in a row goes back to `S_0`.

use nalgebra::{DMatrix, DVector};

use crate::drx::DrxParams;
use crate::error::{Error, Result};
use crate::traffic::{no_arrival_prob, TimeBase, TrafficSpec};

/// Transition matrix and holding times of the DRX chain.
#[derive(Debug, Clone)]
pub struct ChainModel {
    params: DrxParams,
    transitions: DMatrix<f64>,
    holding: Vec<f64>,
}

/// Power-saving factor and mean delay from the analytical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticReport {
    pub ps: f64,
    pub mean_delay_ttis: f64,
    pub mean_delay_ms: f64,
}

impl ChainModel {
    pub fn params(&self) -> &DrxParams {
        &self.params
    }

    pub fn n_states(&self) -> usize {
        self.holding.len()
    }

    pub fn transitions(&self) -> &DMatrix<f64> {
        &self.transitions
    }

    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.transitions[(from, to)]
    }

    pub fn holding(&self) -> &[f64] {
        &self.holding
    }

    fn long_on(&self) -> usize {
        2 * self.params.t_sc as usize + 1
    }

    fn long_sleep(&self) -> usize {
        self.long_on() + 1
    }
}

/// Expected time until the first arrival or `t` TTIs, `(1 - P0(t)) / lambda`,
/// with its `lambda -> 0` limit `t`.
fn truncated_holding(traffic: &TrafficSpec, t: u32) -> Result<f64> {
    let lambda = traffic.mean_rate();
    if lambda == 0.0 {
        return Ok(f64::from(t));
    }
    Ok((1.0 - no_arrival_prob(traffic, t)?) / lambda)
}

/// Builds the transition matrix and holding-time vector.
pub fn build_chain(params: &DrxParams, traffic: &TrafficSpec) -> Result<ChainModel> {
    params.validate(true)?;
    let n = params.n_states();
    let t_sc = params.t_sc as usize;
    let p_it = no_arrival_prob(traffic, params.t_i)?;
    let p_on = no_arrival_prob(traffic, params.t_on)?;
    let p_ss = no_arrival_prob(traffic, params.t_ss)?;
    let p_ls = no_arrival_prob(traffic, params.t_ls)?;

    let mut m = DMatrix::zeros(n, n);
    m[(0, 1)] = p_it;
    for i in 1..=t_sc + 1 {
        m[(2 * i - 1, 2 * i)] = p_on;
    }
    for i in 1..=t_sc {
        m[(2 * i, 2 * i + 1)] = p_ss;
    }
    m[(2 * t_sc + 2, 2 * t_sc + 1)] = p_ls;
    for row in 0..n {
        let forward: f64 = m.row(row).sum();
        m[(row, 0)] += 1.0 - forward;
    }

    let u_on = truncated_holding(traffic, params.t_on)?;
    let mut holding = vec![0.0; n];
    holding[0] = truncated_holding(traffic, params.t_i)?;
    for i in 1..=t_sc + 1 {
        holding[2 * i - 1] = u_on;
    }
    for i in 1..=t_sc {
        holding[2 * i] = f64::from(params.t_ss);
    }
    holding[2 * t_sc + 2] = f64::from(params.t_ls);

    Ok(ChainModel {
        params: *params,
        transitions: m,
        holding,
    })
}

/// Stationary distribution of a row-stochastic matrix with a single
/// recurrent class, from the balance equations with one of them replaced by
/// the normalization constraint.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::invalid("transition matrix must be square and non-empty"));
    }
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularChain("balance equations have no unique solution".into()))?;
    let mut pi: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
    if pi.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::SingularChain("stationary vector has negative mass".into()));
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Steady state of the chain by a direct linear solve.
///
/// With no traffic the chain is reducible: everything drains into the
/// long-cycle pair, which is the distribution returned.
pub fn steady_state(chain: &ChainModel) -> Result<Vec<f64>> {
    stationary_distribution(&chain.transitions)
}

/// Steady state from the product-form recursions: `pi_k = pi_0 prod p_{j-1,j}`
/// along the short cycles, the long-cycle pair closed through the
/// `1 - p_{L,Ls} p_{Ls,L}` loop denominator, then normalized.
pub fn closed_form_steady_state(chain: &ChainModel) -> Vec<f64> {
    let n = chain.n_states();
    let long_on = chain.long_on();
    let long_sleep = chain.long_sleep();
    let p_on_sleep = chain.p(long_on, long_sleep);
    let p_sleep_on = chain.p(long_sleep, long_on);
    let loop_den = 1.0 - p_on_sleep * p_sleep_on;

    let mut pi = vec![0.0; n];
    if loop_den <= 1e-15 {
        // The long-cycle pair is closed: it holds all the mass.
        pi[long_on] = 1.0;
        pi[long_sleep] = p_on_sleep;
    } else {
        pi[0] = 1.0;
        for k in 1..long_on {
            pi[k] = pi[k - 1] * chain.p(k - 1, k);
        }
        pi[long_on] = pi[long_on - 1] * chain.p(long_on - 1, long_on) / loop_den;
        pi[long_sleep] = pi[long_on] * p_on_sleep;
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    pi
}

fn weighted_time(chain: &ChainModel, pi: &[f64]) -> Result<f64> {
    if pi.len() != chain.n_states() {
        return Err(Error::invalid("steady-state vector does not match the chain"));
    }
    let total: f64 = pi.iter().zip(&chain.holding).map(|(p, u)| p * u).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("chain has zero expected cycle time"));
    }
    Ok(total)
}

/// Fraction of time spent in the sleep states.
pub fn power_saving(chain: &ChainModel, pi: &[f64]) -> Result<f64> {
    let total = weighted_time(chain, pi)?;
    let sleep: f64 = (1..=chain.params.t_sc as usize + 1)
        .map(|i| pi[2 * i] * chain.holding[2 * i])
        .sum();
    Ok(sleep / total)
}

/// Mean delay in TTIs, the occupancy-weighted average of the per-cycle
/// delays `short_delay` (for `T_ss`) and `long_delay` (for `T_ls`).
pub fn mean_delay_with(chain: &ChainModel, pi: &[f64], short_delay: f64, long_delay: f64) -> Result<f64> {
    let total = weighted_time(chain, pi)?;
    let t_sc = chain.params.t_sc as usize;
    let short: f64 = (1..=t_sc).map(|i| pi[2 * i] * chain.holding[2 * i]).sum();
    let ls = chain.long_sleep();
    Ok((short_delay * short + long_delay * pi[ls] * chain.holding[ls]) / total)
}

/// Mean delay in TTIs with per-cycle delays from [`cycle_delay`].
pub fn mean_delay(chain: &ChainModel, pi: &[f64], traffic: &TrafficSpec) -> Result<f64> {
    let (short, long) = match *traffic {
        TrafficSpec::Poisson { .. } => (
            f64::from(chain.params.t_ss) / 2.0,
            f64::from(chain.params.t_ls) / 2.0,
        ),
        TrafficSpec::Bursty { q, .. } => {
            let table = BurstyDelayTable::new(q, chain.params.t_ls.max(chain.params.t_ss));
            (table.delay(chain.params.t_ss), table.delay(chain.params.t_ls))
        }
    };
    mean_delay_with(chain, pi, short, long)
}

/// Mean delay suffered within a sleep period of `t` TTIs.
pub fn cycle_delay(traffic: &TrafficSpec, t: u32) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("cycle length must be at least 1 TTI"));
    }
    Ok(match *traffic {
        TrafficSpec::Poisson { .. } => f64::from(t) / 2.0,
        TrafficSpec::Bursty { q, .. } => BurstyDelayTable::new(q, t).delay(t),
    })
}

/// Bursty per-cycle delay `D_T` for every `T` up to a bound.
///
/// For a burst of `k` packets the delays `d_1 > d_2 > ... > d_k >= 1` are
/// nested; `d_1` ranges over `k ..= T` and each deeper `d_{i+1}` over
/// `k - i ..= d_i - 1`, weighted by `1 / (d_i - (k - i))`. The recursion is
/// evaluated bottom-up with prefix sums, so all `T` share one pass per `k`.
/// Bursts are truncated once `(1 - q) q^k` drops below `1e-12`.
#[derive(Debug, Clone)]
pub struct BurstyDelayTable {
    q: f64,
    t_max: u32,
    /// `terms[k - 1][t]`: contribution of `k`-packet bursts to `D_t`.
    terms: Vec<Vec<f64>>,
}

impl BurstyDelayTable {
    pub const WEIGHT_CUTOFF: f64 = 1e-12;

    pub fn new(q: f64, t_max: u32) -> Self {
        let t_max_us = t_max as usize;
        let mut terms = Vec::new();
        let mut k = 1usize;
        while k <= t_max_us {
            let weight = (1.0 - q) * q.powi(k as i32);
            if weight < Self::WEIGHT_CUTOFF {
                break;
            }
            let sums = Self::chain_sums(k, t_max_us);
            // Prefix over d_1 = k ..= t.
            let mut term = vec![0.0; t_max_us + 1];
            let mut acc = 0.0;
            for t in k..=t_max_us {
                acc += sums[t];
                term[t] = weight * acc / (t - k + 1) as f64;
            }
            terms.push(term);
            k += 1;
        }
        Self { q, t_max, terms }
    }

    /// `S(d_1)` for a `k`-packet burst: sum over the nested delay chains
    /// starting at `d_1` of `sum(d_i) / prod (d_i - (k - i))`.
    fn chain_sums(k: usize, t_max: usize) -> Vec<f64> {
        // Innermost position: weight 1, value d_k.
        let mut w: Vec<f64> = (0..=t_max).map(|v| if v >= 1 { 1.0 } else { 0.0 }).collect();
        let mut s: Vec<f64> = (0..=t_max).map(|v| if v >= 1 { v as f64 } else { 0.0 }).collect();
        for i in (1..k).rev() {
            let shift = k - i;
            let mut next_w = vec![0.0; t_max + 1];
            let mut next_s = vec![0.0; t_max + 1];
            let (mut pw, mut ps) = (0.0, 0.0);
            for v in 1..=t_max {
                // Prefix sums over u < v of the deeper position.
                pw += w[v - 1];
                ps += s[v - 1];
                if v > shift {
                    let f = 1.0 / (v - shift) as f64;
                    next_w[v] = f * pw;
                    next_s[v] = f * (ps + v as f64 * pw);
                }
            }
            w = next_w;
            s = next_s;
        }
        s
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Highest burst size kept after truncation.
    pub fn k_max(&self) -> usize {
        self.terms.len()
    }

    /// Contribution of `k`-packet bursts to `D_t`; zero beyond truncation or
    /// when `k > t`.
    pub fn term(&self, k: usize, t: u32) -> f64 {
        assert!(t <= self.t_max, "t={t} beyond table bound {}", self.t_max);
        if k == 0 || k > self.terms.len() {
            return 0.0;
        }
        self.terms[k - 1][t as usize]
    }

    pub fn delay(&self, t: u32) -> f64 {
        assert!(t <= self.t_max, "t={t} beyond table bound {}", self.t_max);
        self.terms.iter().map(|term| term[t as usize]).sum()
    }
}

/// Upper bound on `P(delay > threshold)` from Markov's inequality.
pub fn markov_delay_bound(mean_delay_ms: f64, threshold_ms: f64) -> Result<f64> {
    if !(mean_delay_ms >= 0.0 && threshold_ms > 0.0) {
        return Err(Error::invalid("delay bound needs a non-negative mean and a positive threshold"));
    }
    Ok((mean_delay_ms / threshold_ms).min(1.0))
}

/// Builds and solves the chain, returning PS and mean delay.
pub fn analyze(params: &DrxParams, traffic: &TrafficSpec, time_base: TimeBase) -> Result<AnalyticReport> {
    let chain = build_chain(params, traffic)?;
    let pi = steady_state(&chain)?;
    let ps = power_saving(&chain, &pi)?;
    let mean_delay_ttis = mean_delay(&chain, &pi, traffic)?;
    Ok(AnalyticReport {
        ps,
        mean_delay_ttis,
        mean_delay_ms: time_base.ttis_to_ms(mean_delay_ttis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::traffic::seeded_rng;

    fn silent() -> TrafficSpec {
        TrafficSpec::poisson(0.0).unwrap()
    }

    #[test]
    fn zero_traffic_limits() {
        let p = DrxParams::new(8, 50, 32, 640, 4).unwrap();
        let chain = build_chain(&p, &silent()).unwrap();
        assert_eq!(chain.p(0, 1), 1.0);
        assert_eq!(chain.holding()[2 * 4 + 1], 8.0);
        assert_eq!(chain.holding()[0], 50.0);

        let pi = steady_state(&chain).unwrap();
        let long_on = 2 * 4 + 1;
        assert!(pi[..long_on].iter().all(|&v| v.abs() < 1e-12));
        assert_relative_eq!(pi[long_on], 0.5, epsilon = 1e-12);
        assert_relative_eq!(pi[long_on + 1], 0.5, epsilon = 1e-12);

        let ps = power_saving(&chain, &pi).unwrap();
        assert_relative_eq!(ps, 640.0 / 648.0, epsilon = 1e-12);
        let d = mean_delay(&chain, &pi, &silent()).unwrap();
        assert_relative_eq!(d, 320.0 * 640.0 / 648.0, epsilon = 1e-9);
        assert_relative_eq!(d, 316.049_382_716_049_4, epsilon = 1e-9);
    }

    #[test]
    fn poisson_forward_probability() {
        let p = DrxParams::new(8, 50, 32, 128, 2).unwrap();
        let chain = build_chain(&p, &TrafficSpec::poisson(0.02).unwrap()).unwrap();
        assert_relative_eq!(chain.p(0, 1), 0.367_879_441_171_442_33, epsilon = 1e-15);
        assert_relative_eq!(chain.p(0, 0), 1.0 - 0.367_879_441_171_442_33, epsilon = 1e-15);
        // Long sleep returns to the long on-duration.
        assert_relative_eq!(chain.p(6, 5), (-0.02f64 * 128.0).exp(), epsilon = 1e-15);
    }

    #[test]
    fn two_state_flip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pi = stationary_distribution(&m).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_degenerate_ring() {
        let p = DrxParams::new(8, 20, 16, 64, 1).unwrap();
        let chain = build_chain(&p, &silent()).unwrap();
        let cf = closed_form_steady_state(&chain);
        let generic = steady_state(&chain).unwrap();
        for (a, b) in cf.iter().zip(&generic) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Chain-walk oracle: simulate the embedded jump chain and compare visit
    /// frequencies with the linear solve.
    fn walk_frequencies(m: &DMatrix<f64>, steps: usize, seed: u64) -> Vec<f64> {
        let n = m.nrows();
        let mut rng = seeded_rng(seed);
        let mut visits = vec![0u64; n];
        let mut state = 0;
        for _ in 0..steps {
            visits[state] += 1;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = n - 1;
            for j in 0..n {
                acc += m[(state, j)];
                if u < acc {
                    next = j;
                    break;
                }
            }
            state = next;
        }
        visits.iter().map(|&v| v as f64 / steps as f64).collect()
    }

    #[test]
    fn steady_state_matches_chain_walk() {
        let p = DrxParams::new(8, 40, 24, 96, 3).unwrap();
        let chain = build_chain(&p, &TrafficSpec::poisson(0.01).unwrap()).unwrap();
        let pi = steady_state(&chain).unwrap();
        let freq = walk_frequencies(chain.transitions(), 2_000_000, 21);
        for (a, b) in pi.iter().zip(&freq) {
            assert!((a - b).abs() < 1e-2, "pi {a} vs walk {b}");
        }
    }

    #[test]
    fn power_saving_zero_when_no_sleep_mass() {
        let p = DrxParams::new(8, 50, 32, 128, 1).unwrap();
        let chain = build_chain(&p, &TrafficSpec::poisson(0.02).unwrap()).unwrap();
        let mut pi = vec![0.0; chain.n_states()];
        pi[0] = 1.0;
        assert_eq!(power_saving(&chain, &pi).unwrap(), 0.0);
        assert_eq!(mean_delay(&chain, &pi, &TrafficSpec::poisson(0.02).unwrap()).unwrap(), 0.0);
        assert!(power_saving(&chain, &[0.0; 5]).is_err());
    }

    #[test]
    fn cycle_delay_examples() {
        let poisson = TrafficSpec::poisson(0.02).unwrap();
        assert_eq!(cycle_delay(&poisson, 32).unwrap(), 16.0);
        let table = BurstyDelayTable::new(0.5, 32);
        assert_relative_eq!(table.term(1, 32), 4.125, epsilon = 1e-12);
        let flat = TrafficSpec::bursty(0.1, 0.0).unwrap();
        for t in [1, 32, 640] {
            assert_eq!(cycle_delay(&flat, t).unwrap(), 0.0);
        }
        assert!(cycle_delay(&poisson, 0).is_err());
    }

    /// Brute-force enumeration of the nested delay sums for small `T`.
    fn brute_term(q: f64, k: usize, t: usize) -> f64 {
        fn rec(k: usize, pos: usize, prev: usize, chain: &mut Vec<usize>, acc: &mut f64) {
            if pos > k {
                let sum: usize = chain.iter().sum();
                let prod: f64 = (1..k).map(|i| (chain[i - 1] - (k - i)) as f64).product();
                *acc += sum as f64 / prod;
                return;
            }
            let lo = k - pos + 1;
            for d in lo..prev {
                chain.push(d);
                rec(k, pos + 1, d, chain, acc);
                chain.pop();
            }
        }
        if k > t {
            return 0.0;
        }
        let mut total = 0.0;
        for d1 in k..=t {
            let mut chain = vec![d1];
            let mut acc = 0.0;
            rec(k, 2, d1, &mut chain, &mut acc);
            total += acc;
        }
        (1.0 - q) * q.powi(k as i32) * total / (t - k + 1) as f64
    }

    #[test]
    fn nested_recursion_matches_brute_force() {
        for q in [0.3, 0.5, 0.8] {
            let table = BurstyDelayTable::new(q, 12);
            for t in 1..=12u32 {
                for k in 1..=5 {
                    let brute = brute_term(q, k, t as usize);
                    assert_relative_eq!(table.term(k, t), brute, epsilon = 1e-12, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn k1_term_closed_form() {
        for q in (1..=9).map(|i| i as f64 / 10.0) {
            let table = BurstyDelayTable::new(q, 640);
            for t in 1..=640u32 {
                let expected = q * (1.0 - q) * f64::from(t + 1) / 2.0;
                assert!((table.term(1, t) - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn markov_bound_examples() {
        assert_relative_eq!(markov_delay_bound(10.0, 50.0).unwrap(), 0.2);
        assert_relative_eq!(markov_delay_bound(5.0, 50.0).unwrap(), 0.1);
        assert_eq!(markov_delay_bound(7.0, 7.0).unwrap(), 1.0);
        assert_eq!(markov_delay_bound(70.0, 7.0).unwrap(), 1.0);
        assert!(markov_delay_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_traffic_limit_monotone_in_long_sleep() {
        let mut last = (0.0, 0.0);
        for t_ls in (40..=640).step_by(40) {
            let p = DrxParams::new(8, 50, 32, t_ls, 2).unwrap();
            let r = analyze(&p, &silent(), TimeBase::default()).unwrap();
            assert!(r.ps >= last.0 && r.mean_delay_ttis >= last.1);
            last = (r.ps, r.mean_delay_ttis);
        }
    }

    #[test]
    fn report_units() {
        let p = DrxParams::new(8, 50, 32, 128, 2).unwrap();
        let tb = TimeBase::new(0.25).unwrap();
        let r = analyze(&p, &TrafficSpec::poisson(0.01).unwrap(), tb).unwrap();
        assert_relative_eq!(r.mean_delay_ms, r.mean_delay_ttis * 0.25);
    }

    fn arb_inputs() -> impl Strategy<Value = (DrxParams, TrafficSpec)> {
        (
            1u32..16,
            1u32..200,
            1u32..160,
            1u32..480,
            1u32..17,
            0.0f64..0.2,
            any::<bool>(),
            0.0f64..0.9,
        )
            .prop_map(|(t_on, t_i, t_ss, extra, t_sc, lambda, bursty, q)| {
                let params = DrxParams::new(t_on, t_i, t_ss, t_ss + extra, t_sc).unwrap();
                let traffic = if bursty {
                    TrafficSpec::bursty_matched(lambda, q).unwrap()
                } else {
                    TrafficSpec::poisson(lambda).unwrap()
                };
                (params, traffic)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn chain_invariants((params, traffic) in arb_inputs()) {
            let chain = build_chain(&params, &traffic).unwrap();
            let m = chain.transitions();
            for i in 0..chain.n_states() {
                let row: f64 = m.row(i).sum();
                prop_assert!((row - 1.0).abs() < 1e-12);
                prop_assert!(m.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            prop_assert!(chain.holding().iter().all(|&u| u >= 0.0));

            let pi = steady_state(&chain).unwrap();
            let total: f64 = pi.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let residual = DVector::from_row_slice(&pi).transpose() * m
                - DVector::from_row_slice(&pi).transpose();
            prop_assert!(residual.amax() < 1e-10);

            let cf = closed_form_steady_state(&chain);
            prop_assert!(cf.iter().all(|&v| v >= 0.0));
            prop_assert!((cf.iter().sum::<f64>() - 1.0).abs() < 1e-12);

            let ps = power_saving(&chain, &pi).unwrap();
            prop_assert!((0.0..=1.0).contains(&ps));
            prop_assert!(mean_delay(&chain, &pi, &traffic).unwrap() >= 0.0);
        }
    }
}
