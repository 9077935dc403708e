//! Benchmark harness: runs (SUL × algorithm × restrictions) cells with a
//! configurable equivalence oracle and aggregates per-cell means into CSV.

use crate::automaton::RegisterAutomaton;
use crate::learner::{learn, Algorithm, LearnError, LearnerConfig};
use crate::oracle::{EquivalenceOracle, ExactOracle, OracleError, RandomWalkOracle, SimOracle};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqOracleKind {
    Exact,
    Random,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub eq_oracle: EqOracleKind,
    pub max_depth: usize,
    pub walks: usize,
    pub seed: u64,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            eq_oracle: EqOracleKind::Exact,
            max_depth: 10,
            walks: 10_000,
            seed: 0,
            reps: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub sul: String,
    pub algorithm: Algorithm,
    pub restrictions: bool,
    pub learn_resets: f64,
    pub total_resets: f64,
    pub counterexamples: f64,
    pub locations: f64,
    pub transitions: f64,
    pub registers: f64,
    pub wct_learn_ms: f64,
    pub wct_test_ms: f64,
}

pub const CSV_HEADER: &str = "sul,algorithm,restrictions,learn_resets,total_resets,\
counterexamples,locations,transitions,registers,wct_learn_ms,wct_test_ms";

fn fmt_mean(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as u64)
    } else {
        format!("{v:.2}")
    }
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3},{:.3}",
            self.sul,
            match self.algorithm {
                Algorithm::SlLambda => "sllambda",
                Algorithm::SlCt => "slct",
            },
            if self.restrictions { "on" } else { "off" },
            fmt_mean(self.learn_resets),
            fmt_mean(self.total_resets),
            fmt_mean(self.counterexamples),
            fmt_mean(self.locations),
            fmt_mean(self.transitions),
            fmt_mean(self.registers),
            self.wct_learn_ms,
            self.wct_test_ms,
        )
    }
}

/// Equivalence oracle wrapper that accumulates time spent in the test phase.
struct TimedOracle {
    inner: Box<dyn EquivalenceOracle>,
    elapsed: Duration,
}

impl EquivalenceOracle for TimedOracle {
    fn find_counterexample(
        &mut self,
        hyp: &RegisterAutomaton,
        sim: &mut SimOracle,
    ) -> Result<Option<crate::words::Word>, OracleError> {
        let start = Instant::now();
        let out = self.inner.find_counterexample(hyp, sim);
        self.elapsed += start.elapsed();
        out
    }
}

fn make_oracle(cfg: &BenchConfig, seed: u64) -> Box<dyn EquivalenceOracle> {
    match cfg.eq_oracle {
        EqOracleKind::Exact => Box::new(ExactOracle::default()),
        EqOracleKind::Random => Box::new(RandomWalkOracle::new(cfg.max_depth, cfg.walks, seed)),
    }
}

/// Runs one cell: `reps` learner runs with distinct seeds, reporting means.
pub fn run_cell(
    name: &str,
    sul: &RegisterAutomaton,
    algorithm: Algorithm,
    restrictions: bool,
    cfg: &BenchConfig,
) -> Result<BenchRow, LearnError> {
    let mut sums = BenchRow {
        sul: name.to_string(),
        algorithm,
        restrictions,
        learn_resets: 0.0,
        total_resets: 0.0,
        counterexamples: 0.0,
        locations: 0.0,
        transitions: 0.0,
        registers: 0.0,
        wct_learn_ms: 0.0,
        wct_test_ms: 0.0,
    };
    let reps = cfg.reps.max(1);
    for rep in 0..reps {
        let mut sim = SimOracle::new(sul.clone());
        let mut eq = TimedOracle {
            inner: make_oracle(cfg, cfg.seed.wrapping_add(rep as u64)),
            elapsed: Duration::ZERO,
        };
        let learner_cfg = LearnerConfig {
            algorithm,
            restrictions,
            ..LearnerConfig::default()
        };
        let start = Instant::now();
        let learned = learn(&mut sim, &mut eq, &learner_cfg)?;
        let total = start.elapsed();
        let test = eq.elapsed;
        let stats = learned.stats;
        sums.learn_resets += stats.learn.distinct as f64;
        sums.total_resets += stats.membership.distinct as f64;
        sums.counterexamples += stats.counterexamples as f64;
        sums.locations += stats.locations as f64;
        sums.transitions += stats.transitions as f64;
        sums.registers += stats.max_registers as f64;
        sums.wct_learn_ms += total.saturating_sub(test).as_secs_f64() * 1e3;
        sums.wct_test_ms += test.as_secs_f64() * 1e3;
    }
    let n = reps as f64;
    sums.learn_resets /= n;
    sums.total_resets /= n;
    sums.counterexamples /= n;
    sums.locations /= n;
    sums.transitions /= n;
    sums.registers /= n;
    sums.wct_learn_ms /= n;
    sums.wct_test_ms /= n;
    Ok(sums)
}

/// Full suite: the cross product of SULs, algorithms, and restriction modes.
pub fn run_suite(
    suls: &[(String, RegisterAutomaton)],
    algorithms: &[Algorithm],
    restriction_modes: &[bool],
    cfg: &BenchConfig,
) -> Result<Vec<BenchRow>, LearnError> {
    let mut rows = Vec::new();
    for (name, sul) in suls {
        for &algorithm in algorithms {
            for &restrictions in restriction_modes {
                rows.push(run_cell(name, sul, algorithm, restrictions, cfg)?);
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}
