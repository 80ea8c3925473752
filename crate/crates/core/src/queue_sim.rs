//! Monte Carlo simulation of the periodic batch-service queue, and an exact
//! distribution-iteration oracle for integer arrivals.
//!
//! Slots are indexed by phase i = t mod T. At phase 0 the oldest RT bits are
//! removed after that slot's arrivals are added. The last bit arriving at
//! phase i misses the delay bound D exactly when
//! Q_i > ⌊(D + i − T)/T⌋ · RT.
//!
//! Replication j draws from ChaCha8 seeded with `seed ^ j` on stream id j.
//! The simulator works in f64 only.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay_exponent::{exponent_exact, ExponentQuery};
use crate::error::{Error, Result};
use crate::rate_models::{ArrivalKind, ArrivalModel};

/// Estimates below this are too small to turn into an exponent.
pub const RESOLUTION_FLOOR: f64 = 1e-8;
/// A single replication is cut into this many batches to get a spread.
const SINGLE_RUN_BATCHES: usize = 10;
const ORACLE_TV_TOL: f64 = 1e-12;
const ORACLE_MASS_TOL: f64 = 1e-12;
const ORACLE_MAX_PERIODS: usize = 2_000_000;

/// Queue threshold for the last-bit violation at phase `i`, in units of RT.
pub fn violation_blocks(i: u32, t: u32, d: u32) -> u64 {
    (u64::from(d) + u64::from(i) - u64::from(t)) / u64::from(t)
}

/// Period-T batch-service queue with real-valued workload.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchQueue {
    q: f64,
    batch: f64,
    period: u32,
    phase: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub phase: u32,
    /// Queue after this slot's arrivals and, at phase 0, the batch removal.
    pub q: f64,
    /// Whether the positive part cut the queue at this slot.
    pub clipped: bool,
}

impl BatchQueue {
    /// Empty queue whose next slot is phase 0; `batch` is RT.
    pub fn new(batch: f64, period: u32) -> Result<Self> {
        if !(batch > 0.0) || !batch.is_finite() {
            return Err(Error::NonPositiveService(batch));
        }
        if period == 0 {
            return Err(Error::domain("service period must be positive"));
        }
        Ok(Self {
            q: 0.0,
            batch,
            period,
            phase: 0,
        })
    }

    pub fn queue(&self) -> f64 {
        self.q
    }

    pub fn next_phase(&self) -> u32 {
        self.phase
    }

    pub fn step(&mut self, arrivals: f64) -> SlotOutcome {
        let phase = self.phase;
        let mut q = self.q + arrivals;
        let mut clipped = false;
        if phase == 0 {
            q -= self.batch;
            if q < 0.0 {
                q = 0.0;
                clipped = true;
            }
        }
        debug_assert!(q >= 0.0);
        self.q = q;
        self.phase = if phase + 1 == self.period {
            0
        } else {
            phase + 1
        };
        SlotOutcome { phase, q, clipped }
    }
}

/// Per-slot arrival draws.
#[derive(Debug, Clone)]
pub enum ArrivalSampler {
    /// Poisson(rate) packets, each Exponential with mean `packet_mean`.
    CompoundPoisson { rate: f64, packet_mean: f64 },
    /// Integer amounts from a finite pmf.
    Discrete(DiscretePmf),
}

impl ArrivalSampler {
    /// The CPE(λ, μ, g, N) instance: rate μλg, packet mean N/(μg).
    pub fn cpe(lambda: f64, mu: f64, g_of_n: f64, n: f64) -> Result<Self> {
        if !(g_of_n > 0.0 && g_of_n.is_finite()) || !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain(format!(
                "scale must be positive and finite (g = {g_of_n}, N = {n})"
            )));
        }
        Ok(Self::CompoundPoisson {
            rate: mu * lambda * g_of_n,
            packet_mean: n / (mu * g_of_n),
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::CompoundPoisson { rate, packet_mean } => rate * packet_mean,
            Self::Discrete(p) => p.mean(),
        }
    }

    fn stream<'a>(&'a self, rng: &'a mut ChaCha8Rng) -> Result<Box<dyn FnMut() -> f64 + 'a>> {
        match self {
            Self::CompoundPoisson { rate, packet_mean } => {
                let count = Poisson::new(*rate)
                    .map_err(|e| Error::domain(format!("arrival rate {rate}: {e}")))?;
                let scale = *packet_mean;
                // sum of m exponentials is Gamma(m, scale); shapes are cached by m
                let mut sizes: Vec<Gamma<f64>> = Vec::new();
                Ok(Box::new(move || {
                    let m = count.sample(rng) as usize;
                    if m == 0 {
                        return 0.0;
                    }
                    while sizes.len() < m {
                        sizes.push(
                            Gamma::new((sizes.len() + 1) as f64, scale)
                                .expect("positive shape and scale"),
                        );
                    }
                    sizes[m - 1].sample(rng)
                }))
            }
            Self::Discrete(p) => {
                let index =
                    WeightedIndex::new(&p.probs).map_err(|e| Error::domain(format!("pmf: {e}")))?;
                Ok(Box::new(move || p.values[index.sample(rng)] as f64))
            }
        }
    }
}

/// Finite-support pmf on non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    values: Vec<u64>,
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(mut pairs: Vec<(u64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidModel("pmf needs at least one atom".into()));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidModel("pmf lists a value twice".into()));
        }
        if pairs.iter().any(|p| !(p.1 >= 0.0) || !p.1.is_finite()) {
            return Err(Error::InvalidModel(
                "pmf probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("pmf sums to {total}, not 1")));
        }
        let (values, probs) = pairs
            .into_iter()
            .filter(|p| p.1 > 0.0)
            .map(|(v, p)| (v, p / total))
            .unzip();
        Ok(Self { values, probs })
    }

    /// Parses `"v:p,v:p,..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = text
            .split(',')
            .map(|item| {
                let (v, p) = item.split_once(':').ok_or_else(|| {
                    Error::InvalidModel(format!("pmf atom `{item}` is not value:prob"))
                })?;
                let v = v
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| Error::InvalidModel(format!("pmf value `{v}`: {e}")))?;
                let p = p
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidModel(format!("pmf prob `{p}`: {e}")))?;
                Ok((v, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v as f64 * p).sum()
    }

    pub fn max_value(&self) -> u64 {
        *self.values.last().expect("non-empty")
    }
}

/// Scale-free queue run description shared by the CPE and discrete front ends.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub sampler: ArrivalSampler,
    /// Bits served per slot, R.
    pub service_rate: f64,
    pub t: u32,
    pub d: u32,
    pub warmup_slots: u64,
    pub measure_slots: u64,
    pub seed: u64,
    pub replications: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    arrivals: f64,
    last_bit_weighted: f64,
    random_bit: f64,
}

impl Tally {
    fn ratio(&self, numerator: f64) -> f64 {
        if self.arrivals > 0.0 {
            numerator / self.arrivals
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ReplicationOutcome {
    batches: Vec<Tally>,
    phase_hits: Vec<u64>,
    /// Slots where Q at phase T−1−k exceeds (D−T−k)R.
    overflow_hits: u64,
    slots: u64,
}

/// Aggregated estimates from one engine run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineReport {
    pub p_last_bit: f64,
    pub ci95_last_bit: f64,
    pub p_random_bit: f64,
    pub ci95_random_bit: f64,
    /// Unconditional per-slot frequency of the last-bit violation at each phase.
    pub per_phase_violation: Vec<f64>,
    /// Per-period frequency of Q_{T−1−k} > (D−T−k)R.
    pub overflow_frequency: f64,
    pub slots_observed: u64,
}

fn mean_and_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

impl EngineConfig {
    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.t > self.d / 2 {
            return Err(Error::domain(format!(
                "T = {} must lie in 1..=floor(D/2) for D = {}",
                self.t, self.d
            )));
        }
        let batch = self.service_rate * f64::from(self.t);
        if !(batch > 0.0) || !batch.is_finite() {
            return Err(Error::NonPositiveService(batch));
        }
        if self.measure_slots == 0 || !self.measure_slots.is_multiple_of(u64::from(self.t)) {
            return Err(Error::domain(format!(
                "measure_slots = {} must be a positive multiple of T = {}",
                self.measure_slots, self.t
            )));
        }
        if self.replications == 0 {
            return Err(Error::domain("replications must be positive"));
        }
        let mean = self.sampler.mean();
        if !(mean < self.service_rate) {
            return Err(Error::Unstable {
                r: self.service_rate,
                lambda: mean,
            });
        }
        Ok(())
    }

    /// Measured slots per replication, rounded up to whole periods.
    fn slots_per_replication(&self) -> u64 {
        let periods = self.measure_slots / u64::from(self.t);
        let reps = u64::from(self.replications);
        periods.div_ceil(reps) * u64::from(self.t)
    }

    fn replicate(&self, j: u32) -> Result<ReplicationOutcome> {
        let t = self.t;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ u64::from(j));
        rng.set_stream(u64::from(j));
        let mut draw = self.sampler.stream(&mut rng)?;
        let mut queue = BatchQueue::new(self.service_rate * f64::from(t), t)?;
        let warm = self.warmup_slots.div_ceil(u64::from(t)) * u64::from(t);
        for _ in 0..warm {
            queue.step(draw());
        }
        let thresholds: Vec<f64> = (0..t)
            .map(|i| violation_blocks(i, t, self.d) as f64 * self.service_rate * f64::from(t))
            .collect();
        let target = t - 1 - self.d % t;
        let measure = self.slots_per_replication();
        let n_batches = if self.replications == 1 {
            SINGLE_RUN_BATCHES
        } else {
            1
        };
        let periods = measure / u64::from(t);
        let mut out = ReplicationOutcome {
            batches: vec![Tally::default(); n_batches],
            phase_hits: vec![0; t as usize],
            overflow_hits: 0,
            slots: measure,
        };
        for period in 0..periods {
            let tally = &mut out.batches[(period * n_batches as u64 / periods) as usize];
            for _ in 0..t {
                let a = draw();
                let s = queue.step(a);
                let thr = thresholds[s.phase as usize];
                tally.arrivals += a;
                if s.q > thr {
                    out.phase_hits[s.phase as usize] += 1;
                    if s.phase == target {
                        out.overflow_hits += 1;
                    }
                    if a > 0.0 {
                        tally.last_bit_weighted += a;
                        tally.random_bit += (s.q - thr).min(a.min(s.q));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn run(&self) -> Result<EngineReport> {
        self.validate()?;
        let outcomes = (0..self.replications)
            .into_par_iter()
            .map(|j| self.replicate(j))
            .collect::<Result<Vec<_>>>()?;
        let batches: Vec<Tally> = outcomes
            .iter()
            .flat_map(|o| o.batches.iter().copied())
            .collect();
        let last: Vec<f64> = batches
            .iter()
            .map(|b| b.ratio(b.last_bit_weighted))
            .collect();
        let random: Vec<f64> = batches.iter().map(|b| b.ratio(b.random_bit)).collect();
        let (p_last_bit, ci95_last_bit) = mean_and_ci95(&last);
        let (p_random_bit, ci95_random_bit) = mean_and_ci95(&random);
        let slots: u64 = outcomes.iter().map(|o| o.slots).sum();
        let periods = (slots / u64::from(self.t)) as f64;
        let per_phase_violation = (0..self.t as usize)
            .map(|i| outcomes.iter().map(|o| o.phase_hits[i]).sum::<u64>() as f64 / periods)
            .collect();
        let overflow_frequency =
            outcomes.iter().map(|o| o.overflow_hits).sum::<u64>() as f64 / periods;
        Ok(EngineReport {
            p_last_bit,
            ci95_last_bit,
            p_random_bit,
            ci95_random_bit,
            per_phase_violation,
            overflow_frequency,
            slots_observed: slots,
        })
    }
}

/// A CPE(λ, μ) source scaled by g(N), served at rate rN for T slots every T slots.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ArrivalModel<f64>,
    pub n: f64,
    pub g_of_n: f64,
    pub r: f64,
    pub t: u32,
    pub d: u32,
    /// `None` uses 100·T·⌈1/(r − λ)⌉.
    pub warmup_slots: Option<u64>,
    pub measure_slots: u64,
    pub seed: u64,
    pub replications: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub p_delay_hat: f64,
    pub ci95_half_width: f64,
    /// −log(p̂)/g(N); absent when p̂ is below the resolution floor.
    pub empirical_exponent: Option<f64>,
    pub predicted_exponent: Option<f64>,
    pub per_phase_violation: Vec<f64>,
    pub slots_observed: u64,
}

impl SimReport {
    pub const CSV_HEADER: &'static str = "N,r,T,D,p_delay_hat,ci95,emp_exp,pred_exp,slots";
}

/// Everything `simulate` measures, including the random-bit estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDetails {
    pub report: SimReport,
    pub engine: EngineReport,
}

impl SimConfig {
    pub fn default_warmup(&self) -> u64 {
        let gap = self.r - self.model.mean_rate();
        100 * u64::from(self.t) * (1.0 / gap).ceil().max(1.0) as u64
    }

    fn engine(&self) -> Result<EngineConfig> {
        let ArrivalKind::Cpe { lambda, mu } = *self.model.kind() else {
            return Err(Error::UnsupportedModel(
                "Monte Carlo simulation needs a CPE source",
            ));
        };
        self.model.require_stable(self.r)?;
        let service = self.r * self.n;
        if !(service * f64::from(self.t) > 0.0) {
            return Err(Error::NonPositiveService(service * f64::from(self.t)));
        }
        Ok(EngineConfig {
            sampler: ArrivalSampler::cpe(lambda, mu, self.g_of_n, self.n)?,
            service_rate: service,
            t: self.t,
            d: self.d,
            warmup_slots: self.warmup_slots.unwrap_or_else(|| self.default_warmup()),
            measure_slots: self.measure_slots,
            seed: self.seed,
            replications: self.replications,
        })
    }
}

/// Runs the CPE simulation and keeps the engine-level diagnostics.
pub fn simulate_detailed(config: &SimConfig) -> Result<SimDetails> {
    let engine = config.engine()?.run()?;
    let predicted = exponent_exact(
        &config.model,
        &ExponentQuery::new(config.r, config.t, config.d),
    )?
    .i_exact;
    let p = engine.p_last_bit;
    let report = SimReport {
        p_delay_hat: p,
        ci95_half_width: engine.ci95_last_bit,
        empirical_exponent: (p >= RESOLUTION_FLOOR).then(|| -p.ln() / config.g_of_n),
        predicted_exponent: Some(predicted),
        per_phase_violation: engine.per_phase_violation.clone(),
        slots_observed: engine.slots_observed,
    };
    Ok(SimDetails { report, engine })
}

pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    simulate_detailed(config).map(|d| d.report)
}

/// Monte Carlo run with integer arrivals drawn from `pmf` and service R per slot.
#[allow(clippy::too_many_arguments)]
pub fn simulate_discrete(
    pmf: &DiscretePmf,
    service_rate: u64,
    t: u32,
    d: u32,
    warmup_slots: u64,
    measure_slots: u64,
    seed: u64,
    replications: u32,
) -> Result<SimReport> {
    let engine = EngineConfig {
        sampler: ArrivalSampler::Discrete(pmf.clone()),
        service_rate: service_rate as f64,
        t,
        d,
        warmup_slots,
        measure_slots,
        seed,
        replications,
    }
    .run()?;
    Ok(SimReport {
        p_delay_hat: engine.p_last_bit,
        ci95_half_width: engine.ci95_last_bit,
        empirical_exponent: None,
        predicted_exponent: None,
        per_phase_violation: engine.per_phase_violation,
        slots_observed: engine.slots_observed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Arrival-weighted last-bit violation probability.
    pub p_delay: f64,
    pub per_phase_violation: Vec<f64>,
    pub periods_iterated: usize,
    pub mass_above_cap: f64,
}

/// Stationary last-bit violation probability by iterating the exact law of Q
/// over whole periods on {0, …, q_cap}.
pub fn exact_discrete_oracle(
    pmf: &DiscretePmf,
    service_rate: u64,
    t: u32,
    d: u32,
    q_cap: usize,
) -> Result<OracleReport> {
    if t == 0 || t > d / 2 {
        return Err(Error::domain(format!(
            "T = {t} must lie in 1..=floor(D/2) for D = {d}"
        )));
    }
    if service_rate == 0 {
        return Err(Error::NonPositiveService(0.0));
    }
    let mean = pmf.mean();
    if !(mean < service_rate as f64) {
        return Err(Error::Unstable {
            r: service_rate as f64,
            lambda: mean,
        });
    }
    let batch = service_rate as usize * t as usize;
    let thresholds: Vec<usize> = (0..t)
        .map(|i| violation_blocks(i, t, d) as usize * batch)
        .collect();
    let atoms: Vec<(usize, f64)> = pmf.atoms().map(|(v, p)| (v as usize, p)).collect();
    // law of Q at the end of phase T − 1
    let mut law = vec![0.0; q_cap + 1];
    law[0] = 1.0;
    let mut next = vec![0.0; q_cap + 1];
    let mut phase_hits = vec![0.0; t as usize];
    for periods in 1..=ORACLE_MAX_PERIODS {
        let mut cur = law.clone();
        let mut spilled = 0.0;
        let mut weighted = 0.0;
        for (i, hits) in phase_hits.iter_mut().enumerate() {
            next.iter_mut().for_each(|x| *x = 0.0);
            let cut = if i == 0 { batch } else { 0 };
            let thr = thresholds[i];
            let mut hit = 0.0;
            for (q, &mass) in cur.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for &(a, p) in &atoms {
                    let w = mass * p;
                    let to = (q + a).saturating_sub(cut);
                    if to > thr {
                        hit += w;
                        weighted += w * a as f64;
                    }
                    if to > q_cap {
                        spilled += w;
                    } else {
                        next[to] += w;
                    }
                }
            }
            *hits = hit;
            std::mem::swap(&mut cur, &mut next);
        }
        let tv = 0.5
            * cur
                .iter()
                .zip(&law)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        law = cur;
        if tv < ORACLE_TV_TOL && periods > 1 {
            if spilled > ORACLE_MASS_TOL {
                return Err(Error::CapTooSmall {
                    cap: q_cap,
                    mass: spilled,
                });
            }
            let p_delay = if mean > 0.0 {
                weighted / (f64::from(t) * mean)
            } else {
                0.0
            };
            return Ok(OracleReport {
                p_delay,
                per_phase_violation: phase_hits,
                periods_iterated: periods,
                mass_above_cap: spilled,
            });
        }
        if spilled > ORACLE_MASS_TOL {
            return Err(Error::CapTooSmall {
                cap: q_cap,
                mass: spilled,
            });
        }
    }
    Err(Error::Unresolved(format!(
        "queue law did not settle within {ORACLE_MAX_PERIODS} periods"
    )))
}

/// Both sides of the reduction from the delay-violation sum to one overflow event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub per_phase_violation: Vec<f64>,
    /// Σ_i P(last bit at phase i violates).
    pub phase_sum: f64,
    /// Phase T − 1 − k.
    pub target_phase: u32,
    /// P(Q_{T−1−k} > (D − T − k)R).
    pub overflow_probability: f64,
    /// phase_sum / overflow_probability; absent when no overflow was seen.
    pub ratio: Option<f64>,
    /// Whether phase T − 1 − k is maximal among phases 0..=T − 1 − k.
    pub target_dominates: bool,
    pub slots_observed: u64,
}

pub fn lemma3_check(config: &SimConfig) -> Result<Lemma3Report> {
    let engine = config.engine()?.run()?;
    let target_phase = config.t - 1 - config.d % config.t;
    let phases = &engine.per_phase_violation;
    let phase_sum: f64 = phases.iter().sum();
    let overflow = engine.overflow_frequency;
    let target = phases[target_phase as usize];
    Ok(Lemma3Report {
        per_phase_violation: phases.clone(),
        phase_sum,
        target_phase,
        overflow_probability: overflow,
        ratio: (overflow > 0.0).then(|| phase_sum / overflow),
        target_dominates: phases[..=target_phase as usize]
            .iter()
            .all(|&f| f <= target),
        slots_observed: engine.slots_observed,
    })
}
