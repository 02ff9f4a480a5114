//! Monte Carlo checks of the limit theorems and report-only diagnostics of
//! the almost-sure laws.
//!
//! Every experiment derives its random streams from `(seed, experiment)`;
//! replica `i` of a bank always uses child stream `i`, and per-replica
//! results are collected in index order before any reduction. Output is
//! therefore independent of the rayon pool size.
//!
//! Gates are frozen at a reference replica count and widen as `R^(-1/2)`
//! below it.

mod checks;
mod diagnostics;
pub mod stats;

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::rng::RngStream;

pub use checks::{
    coupling_distribution_check, joint_limit_check, laplace_check, lemma31_experiment,
    levy_identity_check, scaling_limit_c1, scaling_limit_c2, sign_excursion_check, HistogramCell,
};
pub use diagnostics::{chung_hirsch_diagnostic, lil_diagnostic, pilot_diagnostic, AsymptoticTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    C2Scaling,
    C1Scaling,
    Joint,
    Levy,
    Laplace,
    Coupling,
    SignExcursions,
    Lemma31,
    Lil,
    ChungHirsch,
    Pilot,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 11] = [
        ExperimentId::C2Scaling,
        ExperimentId::C1Scaling,
        ExperimentId::Joint,
        ExperimentId::Levy,
        ExperimentId::Laplace,
        ExperimentId::Coupling,
        ExperimentId::SignExcursions,
        ExperimentId::Lemma31,
        ExperimentId::Lil,
        ExperimentId::ChungHirsch,
        ExperimentId::Pilot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::C2Scaling => "c2-scaling",
            ExperimentId::C1Scaling => "c1-scaling",
            ExperimentId::Joint => "joint",
            ExperimentId::Levy => "levy",
            ExperimentId::Laplace => "laplace",
            ExperimentId::Coupling => "coupling",
            ExperimentId::SignExcursions => "sign-excursions",
            ExperimentId::Lemma31 => "lemma31",
            ExperimentId::Lil => "lil",
            ExperimentId::ChungHirsch => "chung-hirsch",
            ExperimentId::Pilot => "pilot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == s)
    }

    /// Diagnostics never gate.
    pub fn report_only(self) -> bool {
        matches!(
            self,
            ExperimentId::Lil | ExperimentId::ChungHirsch | ExperimentId::Pilot
        )
    }

    fn stream(self) -> u64 {
        0x0e00 + self as u64
    }
}

/// A non-increasing rate `beta(n) = (log n)^-a (log log n)^-b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateSequence {
    pub log_power: f64,
    pub loglog_power: f64,
}

impl RateSequence {
    pub const PRESETS: [(&'static str, RateSequence); 3] = [
        (
            "1/log",
            RateSequence {
                log_power: 1.0,
                loglog_power: 0.0,
            },
        ),
        (
            "1/(log*loglog)",
            RateSequence {
                log_power: 1.0,
                loglog_power: 1.0,
            },
        ),
        (
            "1/log^2",
            RateSequence {
                log_power: 2.0,
                loglog_power: 0.0,
            },
        ),
    ];

    pub fn new(log_power: f64, loglog_power: f64) -> Result<Self> {
        if !(log_power >= 0.0 && loglog_power >= 0.0) {
            return Err(Error::invalid("rate exponents must be non-negative"));
        }
        Ok(RateSequence {
            log_power,
            loglog_power,
        })
    }

    pub fn eval(&self, n: f64) -> f64 {
        let l = n.ln().max(1.0);
        l.powf(-self.log_power) * loglog(n).powf(-self.loglog_power)
    }

    /// Whether `sum beta(n)^p / n` diverges (integral test in `t = log n`).
    pub fn series_diverges(&self, p: f64) -> bool {
        let a = p * self.log_power;
        let b = p * self.loglog_power;
        a < 1.0 || (a == 1.0 && b <= 1.0)
    }
}

/// `log(max(log n, e))`, at least 1.
pub fn loglog(n: f64) -> f64 {
    n.ln().max(std::f64::consts::E).ln()
}

/// One entry of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub gated: bool,
    pub pass: Option<bool>,
    pub sample_size: u64,
    /// Where the expected value or the gate comes from.
    pub basis: String,
}

impl Statistic {
    /// Gated on `value < tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64, sample_size: usize, basis: &str) -> Self {
        Statistic {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            gated: true,
            pass: Some(value < tolerance),
            sample_size: sample_size as u64,
            basis: basis.into(),
        }
    }

    /// Gated on `value == 0`, for counts of violated identities.
    pub fn exact_zero(name: &str, value: u64, sample_size: usize, basis: &str) -> Self {
        Statistic {
            name: name.into(),
            value: value as f64,
            tolerance: Some(0.0),
            gated: true,
            pass: Some(value == 0),
            sample_size: sample_size as u64,
            basis: basis.into(),
        }
    }

    pub fn report(name: &str, value: f64, sample_size: usize, basis: &str) -> Self {
        Statistic {
            name: name.into(),
            value,
            tolerance: None,
            gated: false,
            pass: None,
            sample_size: sample_size as u64,
            basis: basis.into(),
        }
    }
}

/// Rows of per-checkpoint values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub experiment: String,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
    pub duration_ms: u64,
    /// Two-dimensional histogram, written separately as CSV.
    #[serde(skip)]
    pub histogram: Vec<HistogramCell>,
}

impl TestReport {
    pub(crate) fn new(id: ExperimentId, seed: u64, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        TestReport {
            experiment: id.name().into(),
            params,
            seed,
            statistics: Vec::new(),
            series: None,
            duration_ms: 0,
            histogram: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, s: Statistic) {
        self.statistics.push(s);
    }

    pub fn gated_pass(&self) -> bool {
        self.statistics
            .iter()
            .filter(|s| s.gated)
            .all(|s| s.pass == Some(true))
    }

    pub fn get(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Everything needed to rerun an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub id: ExperimentId,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub thetas: Vec<f64>,
    pub n_max: usize,
    /// Number of independent seeds for the pilot band.
    pub seeds: usize,
}

impl ExperimentPlan {
    /// The reference configuration of `id`.
    pub fn defaults(id: ExperimentId, seed: u64) -> Self {
        let (n, replicas) = match id {
            ExperimentId::C1Scaling => (1 << 16, 2000),
            ExperimentId::Joint => (1 << 16, 10_000),
            ExperimentId::Laplace => (4096, 100_000),
            ExperimentId::Lemma31 => (1_000_000, 100),
            _ => (4096, 5000),
        };
        let n_max = match id {
            ExperimentId::Pilot => 10_000_000,
            _ => 1_000_000,
        };
        ExperimentPlan {
            id,
            n,
            replicas,
            seed,
            thetas: vec![0.5, 1.0, 2.0],
            n_max,
            seeds: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replicas == 0 {
            return Err(Error::invalid("n and R must be at least 1"));
        }
        Ok(())
    }

    pub fn root_stream(&self) -> RngStream {
        RngStream::new(self.seed, self.id.stream())
    }

    pub fn run(&self) -> Result<TestReport> {
        self.validate()?;
        let start = Instant::now();
        let rng = self.root_stream();
        let (n, r) = (self.n, self.replicas);
        let mut report = match self.id {
            ExperimentId::C2Scaling => scaling_limit_c2(n, r, &rng)?,
            ExperimentId::C1Scaling => scaling_limit_c1(n, r, &rng)?,
            ExperimentId::Joint => joint_limit_check(n, r, &rng)?,
            ExperimentId::Levy => levy_identity_check(n, r, &rng)?,
            ExperimentId::Laplace => laplace_check(n, r, &self.thetas, &rng)?,
            ExperimentId::Coupling => coupling_distribution_check(n, r, &rng)?,
            ExperimentId::SignExcursions => sign_excursion_check(n, r, &rng)?,
            ExperimentId::Lemma31 => lemma31_experiment(n, r, &rng)?,
            ExperimentId::Lil => lil_diagnostic(self.n_max, &rng)?,
            ExperimentId::ChungHirsch => {
                chung_hirsch_diagnostic(self.n_max, &RateSequence::PRESETS, &rng)?
            }
            ExperimentId::Pilot => pilot_diagnostic(self.n_max, self.seeds, &rng)?,
        };
        report.seed = self.seed;
        report.duration_ms = start.elapsed().as_millis() as u64;
        Ok(report)
    }
}

/// Runs `f` on `r` replicas with streams `bank.derive(0..r)` and returns the
/// results in replica order.
pub(crate) fn replicas<T, F>(bank: &RngStream, r: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStream) -> T + Sync,
{
    (0..r)
        .into_par_iter()
        .map(|i| f(bank.derive(i as u64)))
        .collect()
}

/// `gate` at `r >= reference`, widened by `sqrt(reference / r)` below.
pub(crate) fn scaled_gate(gate: f64, reference: usize, r: usize) -> f64 {
    gate * (reference as f64 / r as f64).max(1.0).sqrt()
}

pub(crate) fn nr_params(n: usize, r: usize) -> Value {
    json!({ "n": n, "R": r })
}
