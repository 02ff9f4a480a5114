//! Report-only diagnostics of the almost-sure laws along single long paths.
//!
//! Running suprema and infima are taken over `2^10 <= n <= n_max` and
//! sampled at the checkpoints `2^k` and at `n_max`.

use serde_json::json;

use super::stats::median;
use super::{loglog, replicas, ExperimentId, RateSequence, Series, Statistic, TestReport};
use crate::error::{Error, Result};
use crate::limitset::{backbone_rectangle_bound, d2_contains, DomainSpec, BACKBONE_SCALE};
use crate::rng::RngStream;
use crate::walk::CombWalker;

/// First `n` entering the running statistics.
pub const DIAGNOSTIC_START: usize = 1 << 10;

fn lil_c1_norm(n: f64) -> f64 {
    n.powf(0.25) * loglog(n).powf(0.75)
}

fn lil_c2_norm(n: f64) -> f64 {
    (2.0 * n * loglog(n)).sqrt()
}

fn chung_norm(n: f64) -> f64 {
    (std::f64::consts::PI.powi(2) * n / (8.0 * loglog(n))).sqrt()
}

/// `sup_{start <= k <= n} x(k) / a(k)` for an increasing `a`; the exact
/// ratio is only formed when `x(k)` beats the bound from the last
/// checkpoint.
struct RunningSup {
    sup: f64,
    a_block: f64,
}

impl RunningSup {
    fn new() -> Self {
        RunningSup {
            sup: f64::NEG_INFINITY,
            a_block: 0.0,
        }
    }

    #[inline]
    fn update<A: Fn(f64) -> f64>(&mut self, x: i64, n: usize, a: A) {
        let x = x as f64;
        if self.sup >= 0.0 && x <= self.sup * self.a_block {
            return;
        }
        self.sup = self.sup.max(x / a(n as f64));
    }
}

/// `inf_{start <= k <= n} m(k) / d(k)` for a non-decreasing step function
/// `m`. On a stretch where `m` is constant the infimum sits at an end of the
/// stretch as long as `d` is quasi-convex, so only stretch ends are
/// evaluated.
struct RunningInf {
    m: i64,
    inf: f64,
}

impl RunningInf {
    fn new() -> Self {
        RunningInf {
            m: 0,
            inf: f64::INFINITY,
        }
    }

    #[inline]
    fn observe<D: Fn(f64) -> f64>(&mut self, value: i64, n: usize, d: D) {
        if value > self.m {
            if n > DIAGNOSTIC_START {
                self.inf = self.inf.min(self.m as f64 / d((n - 1) as f64));
            }
            self.m = value;
            if n >= DIAGNOSTIC_START {
                self.inf = self.inf.min(self.m as f64 / d(n as f64));
            }
        }
    }

    fn close<D: Fn(f64) -> f64>(&mut self, n: usize, d: D) {
        if n >= DIAGNOSTIC_START {
            self.inf = self.inf.min(self.m as f64 / d(n as f64));
        }
    }
}

struct HirschTrack {
    beta: RateSequence,
    c1_max: RunningInf,
    c1_abs: RunningInf,
    c2_max: RunningInf,
}

/// Running statistics of one comb path up to `n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticTrace {
    pub n_max: usize,
    /// `sup C1(n) / (n^(1/4) (log log n)^(3/4))`.
    pub c1_lil_sup: f64,
    /// `sup C2(n) / (2 n log log n)^(1/2)`.
    pub c2_lil_sup: f64,
    /// `inf max_{k<=n}|C2(k)| (8 log log n / (pi^2 n))^(1/2)`.
    pub chung_inf: f64,
    /// Per rate: infima of `max C1`, `max |C1|` over `n^(1/4) beta(n)` and
    /// of `max C2` over `n^(1/2) beta(n)`.
    pub hirsch: Vec<[f64; 3]>,
    pub series: Series,
}

fn checkpoints(n_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (10..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&n| n <= n_max)
        .collect();
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// Walks `n_max >= 2^10` steps and records the running statistics.
pub fn trace_path(
    n_max: usize,
    betas: &[(&str, RateSequence)],
    rng: RngStream,
) -> Result<AsymptoticTrace> {
    if n_max < DIAGNOSTIC_START {
        return Err(Error::invalid("diagnostics need n_max >= 1024"));
    }
    let spec = DomainSpec::default();
    let mut walker = CombWalker::new(rng);
    let mut c1_sup = RunningSup::new();
    let mut c2_sup = RunningSup::new();
    let mut chung = RunningInf::new();
    let mut hirsch: Vec<HirschTrack> = betas
        .iter()
        .map(|&(_, beta)| HirschTrack {
            beta,
            c1_max: RunningInf::new(),
            c1_abs: RunningInf::new(),
            c2_max: RunningInf::new(),
        })
        .collect();

    let mut columns: Vec<String> = [
        "n",
        "c1",
        "c2",
        "c1_lil_sup",
        "c2_lil_sup",
        "chung_inf",
        "u_class",
        "u_rect",
        "v",
        "in_d2_class",
        "in_d2_rect",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for (name, _) in betas {
        for f in ["c1_max_inf", "c1_absmax_inf", "c2_max_inf"] {
            columns.push(format!("{f}[{name}]"));
        }
    }
    let mut rows = Vec::new();

    let cps = checkpoints(n_max);
    let mut next_cp = 0;
    c1_sup.a_block = lil_c1_norm(DIAGNOSTIC_START as f64);
    c2_sup.a_block = lil_c2_norm(DIAGNOSTIC_START as f64);
    for n in 1..=n_max {
        let s = walker.step();
        for h in hirsch.iter_mut() {
            let beta = h.beta;
            let d1 = |k: f64| k.powf(0.25) * beta.eval(k);
            let d2 = |k: f64| k.sqrt() * beta.eval(k);
            h.c1_max.observe(s.x, n, d1);
            h.c1_abs.observe(s.x.abs(), n, d1);
            h.c2_max.observe(s.y, n, d2);
        }
        chung.observe(s.y.abs(), n, chung_norm);
        if n < DIAGNOSTIC_START {
            continue;
        }
        if n == DIAGNOSTIC_START {
            chung.close(n, chung_norm);
            for h in hirsch.iter_mut() {
                let beta = h.beta;
                h.c1_max.close(n, |k| k.powf(0.25) * beta.eval(k));
                h.c1_abs.close(n, |k| k.powf(0.25) * beta.eval(k));
                h.c2_max.close(n, |k| k.sqrt() * beta.eval(k));
            }
        }
        c1_sup.update(s.x, n, lil_c1_norm);
        c2_sup.update(s.y, n, lil_c2_norm);

        if n == cps[next_cp] {
            next_cp += 1;
            c1_sup.a_block = lil_c1_norm(n as f64);
            c2_sup.a_block = lil_c2_norm(n as f64);
            chung.close(n, chung_norm);
            for h in hirsch.iter_mut() {
                let beta = h.beta;
                h.c1_max.close(n, |k| k.powf(0.25) * beta.eval(k));
                h.c1_abs.close(n, |k| k.powf(0.25) * beta.eval(k));
                h.c2_max.close(n, |k| k.sqrt() * beta.eval(k));
            }
            let nf = n as f64;
            let u_rect = s.x as f64 / lil_c1_norm(nf);
            let u_class = u_rect / BACKBONE_SCALE;
            let v = s.y as f64 / lil_c2_norm(nf);
            let mut row = vec![
                nf,
                s.x as f64,
                s.y as f64,
                c1_sup.sup,
                c2_sup.sup,
                chung.inf,
                u_class,
                u_rect,
                v,
                d2_contains(u_class, v, &spec)? as u8 as f64,
                d2_contains(u_rect, v, &spec)? as u8 as f64,
            ];
            for h in &hirsch {
                row.extend([h.c1_max.inf, h.c1_abs.inf, h.c2_max.inf]);
            }
            rows.push(row);
        }
    }
    Ok(AsymptoticTrace {
        n_max,
        c1_lil_sup: c1_sup.sup,
        c2_lil_sup: c2_sup.sup,
        chung_inf: chung.inf,
        hirsch: hirsch
            .iter()
            .map(|h| [h.c1_max.inf, h.c1_abs.inf, h.c2_max.inf])
            .collect(),
        series: Series { columns, rows },
    })
}

fn require_n_max(n_max: usize) -> Result<()> {
    if n_max < 1_000_000 {
        return Err(Error::invalid("diagnostics need n_max >= 10^6"));
    }
    Ok(())
}

const REPORT_ONLY: &str = "report-only";

/// Running suprema in the two LIL normalizations, with the endpoint
/// scatter at each checkpoint in both backbone conventions.
pub fn lil_diagnostic(n_max: usize, rng: &RngStream) -> Result<TestReport> {
    require_n_max(n_max)?;
    let t = trace_path(n_max, &[], rng.derive(0))?;
    let mut report = TestReport::new(ExperimentId::Lil, rng.seed(), json!({ "n_max": n_max }));
    report.push(Statistic::report(
        "target_c1",
        backbone_rectangle_bound(),
        1,
        "limsup C1(n)/(n^(1/4)(loglog n)^(3/4)) = 2^(5/4)/3^(3/4)",
    ));
    report.push(Statistic::report(
        "target_c2",
        1.0,
        1,
        "limsup C2(n)/(2n loglog n)^(1/2) = 1",
    ));
    report.push(Statistic::report(
        "c1_lil_sup",
        t.c1_lil_sup,
        1,
        REPORT_ONLY,
    ));
    report.push(Statistic::report(
        "c2_lil_sup",
        t.c2_lil_sup,
        1,
        REPORT_ONLY,
    ));
    let rows = t.series.rows.len() as f64;
    let col = |name: &str| t.series.columns.iter().position(|c| c == name).unwrap();
    let (ic, ir) = (col("in_d2_class"), col("in_d2_rect"));
    report.push(Statistic::report(
        "checkpoints_in_d2_class",
        t.series.rows.iter().map(|r| r[ic]).sum::<f64>() / rows,
        t.series.rows.len(),
        "fraction of checkpoints with (u_class, v) in the limit domain",
    ));
    report.push(Statistic::report(
        "checkpoints_in_d2_rect",
        t.series.rows.iter().map(|r| r[ir]).sum::<f64>() / rows,
        t.series.rows.len(),
        "fraction of checkpoints with (u_rect, v) in the limit domain",
    ));
    let keep = [
        "n",
        "c1",
        "c2",
        "c1_lil_sup",
        "c2_lil_sup",
        "u_class",
        "u_rect",
        "v",
        "in_d2_class",
        "in_d2_rect",
    ];
    report.series = Some(select(&t.series, &keep));
    Ok(report)
}

fn select(s: &Series, keep: &[&str]) -> Series {
    let idx: Vec<usize> = keep
        .iter()
        .map(|k| s.columns.iter().position(|c| c == k).expect("known column"))
        .collect();
    Series {
        columns: keep.iter().map(|k| k.to_string()).collect(),
        rows: s
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect(),
    }
}

fn classification(beta: &RateSequence, p: f64) -> &'static str {
    if beta.series_diverges(p) {
        "divergent"
    } else {
        "convergent"
    }
}

/// Chung's functional of `max |C2|` and the Hirsch-type functionals for the
/// given rates.
pub fn chung_hirsch_diagnostic(
    n_max: usize,
    betas: &[(&str, RateSequence)],
    rng: &RngStream,
) -> Result<TestReport> {
    require_n_max(n_max)?;
    let t = trace_path(n_max, betas, rng.derive(0))?;
    let rates: Vec<_> = betas
        .iter()
        .map(|(name, b)| json!({ "name": name, "log_power": b.log_power, "loglog_power": b.loglog_power }))
        .collect();
    let mut report = TestReport::new(
        ExperimentId::ChungHirsch,
        rng.seed(),
        json!({ "n_max": n_max, "rates": rates }),
    );
    report.push(Statistic::report(
        "target_chung",
        1.0,
        1,
        "liminf of the Chung functional = 1",
    ));
    report.push(Statistic::report("chung_inf", t.chung_inf, 1, REPORT_ONLY));
    for ((name, beta), inf) in betas.iter().zip(&t.hirsch) {
        let s1 = classification(beta, 1.0);
        let s2 = classification(beta, 2.0);
        let predict = |div: bool| if div { "liminf 0" } else { "liminf infinite" };
        let c1 = format!(
            "report-only; sum beta^2/n {s2}, {}",
            predict(beta.series_diverges(2.0))
        );
        let c2 = format!(
            "report-only; sum beta/n {s1}, {}",
            predict(beta.series_diverges(1.0))
        );
        report.push(Statistic::report(
            &format!("c1_max_inf[{name}]"),
            inf[0],
            1,
            &c1,
        ));
        report.push(Statistic::report(
            &format!("c1_absmax_inf[{name}]"),
            inf[1],
            1,
            &c1,
        ));
        report.push(Statistic::report(
            &format!("c2_max_inf[{name}]"),
            inf[2],
            1,
            &c2,
        ));
    }
    let mut keep = vec!["n".to_string(), "chung_inf".to_string()];
    keep.extend(t.series.columns.iter().skip(11).cloned());
    let keep: Vec<&str> = keep.iter().map(|s| s.as_str()).collect();
    report.series = Some(select(&t.series, &keep));
    Ok(report)
}

/// The Chung and LIL running statistics over independent seeds, with the
/// fraction of seeds falling in the reference bands.
pub fn pilot_diagnostic(n_max: usize, seeds: usize, rng: &RngStream) -> Result<TestReport> {
    require_n_max(n_max)?;
    if seeds == 0 {
        return Err(Error::invalid("pilot needs at least one seed"));
    }
    let traces = replicas(&rng.derive(0), seeds, |s| trace_path(n_max, &[], s));
    let traces = traces.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = TestReport::new(
        ExperimentId::Pilot,
        rng.seed(),
        json!({ "n_max": n_max, "seeds": seeds }),
    );
    let frac = |f: &dyn Fn(&AsymptoticTrace) -> bool| {
        traces.iter().filter(|t| f(t)).count() as f64 / seeds as f64
    };
    let within = |x: f64, lo: f64, hi: f64| (lo..=hi).contains(&x);
    report.push(Statistic::report(
        "chung_in_0.5_1.5",
        frac(&|t| within(t.chung_inf, 0.5, 1.5)),
        seeds,
        "reference band fraction 0.9, recorded only",
    ));
    report.push(Statistic::report(
        "c2_lil_in_0.5_1.5",
        frac(&|t| within(t.c2_lil_sup, 0.5, 1.5)),
        seeds,
        "reference band fraction 0.9, recorded only",
    ));
    report.push(Statistic::report(
        "c2_lil_in_0.5_1.3",
        frac(&|t| within(t.c2_lil_sup, 0.5, 1.3)),
        seeds,
        "reference band fraction 0.95, recorded only",
    ));
    let chung: Vec<f64> = traces.iter().map(|t| t.chung_inf).collect();
    let c2: Vec<f64> = traces.iter().map(|t| t.c2_lil_sup).collect();
    let c1: Vec<f64> = traces.iter().map(|t| t.c1_lil_sup).collect();
    report.push(Statistic::report(
        "median_chung_inf",
        median(&chung),
        seeds,
        REPORT_ONLY,
    ));
    report.push(Statistic::report(
        "median_c2_lil_sup",
        median(&c2),
        seeds,
        REPORT_ONLY,
    ));
    report.push(Statistic::report(
        "median_c1_lil_sup",
        median(&c1),
        seeds,
        REPORT_ONLY,
    ));
    report.series = Some(Series {
        columns: vec![
            "seed_index".into(),
            "c1_lil_sup".into(),
            "c2_lil_sup".into(),
            "chung_inf".into(),
        ],
        rows: traces
            .iter()
            .enumerate()
            .map(|(i, t)| vec![i as f64, t.c1_lil_sup, t.c2_lil_sup, t.chung_inf])
            .collect(),
    });
    Ok(report)
}
