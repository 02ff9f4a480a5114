//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use combwalk::coupling::sample_coupled_path;
use combwalk::densities::{
    dobrushin_density, joint_density_uz, local_time_laplace, std_normal_pdf,
};
use combwalk::experiments::{
    coupling_distribution_check, joint_limit_check, laplace_check, levy_identity_check,
    scaling_limit_c1, scaling_limit_c2, sign_excursion_check, ExperimentId, ExperimentPlan,
    TestReport,
};
use combwalk::limitset::{
    a_of_bk, d2_contains, example_kg, f_value, k_of_b, max_backbone, strassen_energy,
    trace_boundary, DomainSpec, KGrid,
};
use combwalk::localtime::{local_time, return_times, LocalTimeTable};
use combwalk::quadrature::{integrate_with_breaks, QuadratureSpec};
use combwalk::walk::{sample_comb_path, sample_simple_walk, CombWalker, TransitionCounts};
use combwalk::RngStream;

const SEED: u64 = 20_240_601;

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn stat(r: &TestReport, name: &str) -> f64 {
    r.get(name)
        .unwrap_or_else(|| panic!("{} has no {name}", r.experiment))
        .value
}

fn structural_exactness() -> Outcome {
    let n = 10_000;
    let bad: usize = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let direct = sample_comb_path(n, RngStream::new(SEED, 1).derive(i));
            let coupled = sample_coupled_path(n, &RngStream::new(SEED, 2).derive(i));
            let ok = direct.validate().is_ok()
                && direct.len() == n
                && coupled.path.validate().is_ok()
                && coupled.check_phase_structure().is_ok();
            usize::from(!ok)
        })
        .sum();
    outcome(bad == 0, format!("invalid paths {bad} of 2x10000"))
}

fn transition_frequencies() -> Outcome {
    let mut total = TransitionCounts::default();
    let mut batch = 0u64;
    while total.backbone_total() < 1_000_000 || total.tooth_total() < 1_000_000 {
        let counts: Vec<TransitionCounts> = (0..1000u64)
            .into_par_iter()
            .map(|i| {
                let mut w = CombWalker::new(RngStream::new(SEED, 3).derive(batch * 1000 + i));
                let mut c = TransitionCounts::default();
                let mut from = w.site();
                for _ in 0..1000 {
                    let to = w.step();
                    c.record(from, to);
                    from = to;
                }
                c
            })
            .collect();
        for c in &counts {
            total.merge(c);
        }
        batch += 1;
    }
    let bb = total.backbone_total() as f64;
    let tt = total.tooth_total() as f64;
    let dev_b = total
        .backbone
        .iter()
        .map(|&c| (c as f64 / bb - 0.25).abs())
        .fold(0.0, f64::max);
    let dev_t = total
        .tooth
        .iter()
        .map(|&c| (c as f64 / tt - 0.5).abs())
        .fold(0.0, f64::max);
    outcome(
        dev_b < 0.002 && dev_t < 0.002,
        format!("axis steps {bb} max dev {dev_b:.5}; tooth steps {tt} max dev {dev_t:.5}"),
    )
}

fn local_time_identities() -> Outcome {
    let n = 100_000;
    let bad: usize = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let walk = sample_simple_walk(n, RngStream::new(SEED, 4).derive(i));
            let mut ok = LocalTimeTable::from_path(&walk, n).unwrap().total() == n as u64;
            let rho = return_times(&walk);
            let m = rho.returns();
            let probe: Vec<usize> = if i < 10 {
                (1..=m).collect()
            } else {
                vec![1, m / 2, m]
            };
            for big_n in probe.into_iter().filter(|&k| k >= 1 && k <= m) {
                ok &= local_time(&walk, 0, rho.get(big_n).unwrap()).unwrap() == big_n as u64;
            }
            usize::from(!ok)
        })
        .sum();
    outcome(
        bad == 0,
        format!("paths violating an identity {bad} of 1000"),
    )
}

fn coupling_fidelity() -> Outcome {
    let r = coupling_distribution_check(4096, 5000, &RngStream::new(SEED, 5)).unwrap();
    let (c1, c2) = (stat(&r, "ks_c1"), stat(&r, "ks_c2"));
    outcome(
        c1 < 0.04 && c2 < 0.04,
        format!("ks C1 {c1:.4}, ks C2 {c2:.4}"),
    )
}

fn sign_reconstruction() -> Outcome {
    let r = sign_excursion_check(4096, 5000, &RngStream::new(SEED, 6)).unwrap();
    let (mis, ks) = (stat(&r, "abs_mismatch_paths"), stat(&r, "ks_endpoint"));
    outcome(
        mis == 0.0 && ks < 0.04,
        format!("mismatched paths {mis} of 5000, ks {ks:.4}"),
    )
}

fn marginals() -> Outcome {
    let c2 = scaling_limit_c2(4096, 5000, &RngStream::new(SEED, 7)).unwrap();
    let c1 = scaling_limit_c1(1 << 16, 2000, &RngStream::new(SEED, 8)).unwrap();
    let (l2, r2) = (stat(&c2, "ks_lattice"), stat(&c2, "ks_raw"));
    let (l1, r1) = (stat(&c1, "ks_lattice"), stat(&c1, "ks_raw"));
    outcome(
        l2 < 0.04 && r2 < 0.04 && l1 < 0.05 && r1 < 0.05 && c2.gated_pass() && c1.gated_pass(),
        format!("C2 ks {l2:.4} (raw {r2:.4}); C1 ks {l1:.4} (raw {r1:.4})"),
    )
}

fn joint_limit() -> Outcome {
    let r = joint_limit_check(1 << 16, 10_000, &RngStream::new(SEED, 9)).unwrap();
    let tv = stat(&r, "total_variation");
    outcome(
        tv < 0.08,
        format!(
            "tv {tv:.4}, sampling floor {:.4}",
            stat(&r, "sampling_floor")
        ),
    )
}

fn quadrature() -> Outcome {
    let spec = QuadratureSpec::default();
    let outer = QuadratureSpec::new(1e-11, 1e-10, 4000).unwrap();
    let inner = QuadratureSpec::new(1e-12, 1e-11, 4000).unwrap();
    let u_breaks = [0.0, 0.5, 2.0, 6.0, 30.0];
    let z_breaks = [0.0, 1.0, 3.0, 10.0];

    let dob = |u: f64| dobrushin_density(u, &spec).unwrap();
    let norm = 2.0 * integrate_with_breaks(dob, &u_breaks, &outer).unwrap().value;
    // Gamma(1/4)
    let f0_ref = 2f64.powf(0.25) * 3.625_609_908_221_908 / (2.0 * std::f64::consts::PI);
    let f0 = dob(0.0);

    let jspec = QuadratureSpec::new(1e-10, 1e-9, 4000).unwrap();
    let zmass = |u: f64| {
        integrate_with_breaks(
            |z| joint_density_uz(u, z, &jspec).unwrap(),
            &z_breaks,
            &QuadratureSpec::new(1e-9, 1e-8, 4000).unwrap(),
        )
        .unwrap()
        .value
    };
    let jnorm = 4.0
        * integrate_with_breaks(
            zmass,
            &[0.0, 0.5, 2.0, 6.0, 25.0],
            &QuadratureSpec::new(1e-8, 1e-8, 4000).unwrap(),
        )
        .unwrap()
        .value;

    let u_marginal_err = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&z| {
            let m = integrate_with_breaks(
                |u| joint_density_uz(u, z, &inner).unwrap(),
                &u_breaks,
                &outer,
            )
            .unwrap()
            .value;
            (2.0 * m - std_normal_pdf(z)).abs()
        })
        .fold(0.0, f64::max);
    let z_marginal_err = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&u| {
            let m = integrate_with_breaks(
                |z| joint_density_uz(u, z, &inner).unwrap(),
                &z_breaks,
                &outer,
            )
            .unwrap()
            .value;
            (2.0 * m - dobrushin_density(u, &inner).unwrap()).abs()
        })
        .fold(0.0, f64::max);

    outcome(
        (norm - 1.0).abs() < 1e-8
            && (f0 - f0_ref).abs() < 1e-4
            && (jnorm - 1.0).abs() < 1e-6
            && u_marginal_err < 1e-6
            && z_marginal_err < 1e-5,
        format!(
            "|mass-1| {:.1e}, |f(0)-ref| {:.1e}, joint |mass-1| {:.1e}, u-marginal err {u_marginal_err:.1e}, z-marginal err {z_marginal_err:.1e}",
            (norm - 1.0).abs(),
            (f0 - f0_ref).abs(),
            (jnorm - 1.0).abs()
        ),
    )
}

fn laplace() -> Outcome {
    let r = laplace_check(4096, 100_000, &[0.5, 1.0, 2.0], &RngStream::new(SEED, 10)).unwrap();
    let gaps: Vec<f64> = ["0.5", "1", "2"]
        .iter()
        .map(|t| stat(&r, &format!("gap[theta={t}]")))
        .collect();
    let big = 50.0 * local_time_laplace(50.0, 1.0).unwrap();
    let lim = (2.0 / std::f64::consts::PI).sqrt();
    let rel = (big / lim - 1.0).abs();
    outcome(
        gaps.iter().all(|&g| g < 0.01) && rel < 0.01,
        format!(
            "gaps {:.4} {:.4} {:.4}; theta=50 relative gap {rel:.4}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn levy() -> Outcome {
    let r = levy_identity_check(4096, 5000, &RngStream::new(SEED, 11)).unwrap();
    let (a, b) = (
        stat(&r, "ks_local_time_vs_max"),
        stat(&r, "ks_abs_endpoint_vs_max_gap"),
    );
    outcome(a < 0.04 && b < 0.04, format!("ks {a:.4}, {b:.4}"))
}

fn domain() -> Outcome {
    let spec = DomainSpec::default();
    let grid = KGrid::new(&spec).unwrap();
    let mut disagree = 0;
    for i in 0..=200 {
        for j in 0..=200 {
            let u = -0.7 + 1.4 * i as f64 / 200.0;
            let v = -1.05 + 2.1 * j as f64 / 200.0;
            if d2_contains(u, v, &spec).unwrap() != grid.contains(u, v).unwrap() {
                disagree += 1;
            }
        }
    }

    let b = trace_boundary(&spec, 256).unwrap();
    let ends = [b.points[0], b.points[b.points.len() - 1]];
    let dist = |u: f64, v: f64| {
        ends.iter()
            .map(|p| (p.u - u).abs().max((p.v - v).abs()))
            .fold(f64::INFINITY, f64::min)
    };
    let endpoint_err = dist(0.0, 1.0).max(dist(max_backbone(), 0.0));

    // K(B) maximizes A(B, K); compare with a plain grid search
    let bmax = max_backbone();
    let k_err = (1..=50)
        .map(|i| {
            let bb = bmax * i as f64 / 51.0;
            let m = 100_000;
            let best = (0..=m)
                .map(|j| j as f64 / m as f64)
                .max_by(|&x, &y| a_of_bk(bb, x).unwrap().total_cmp(&a_of_bk(bb, y).unwrap()))
                .unwrap();
            (k_of_b(bb, &spec).unwrap() - best).abs()
        })
        .fold(0.0, f64::max);

    let mut rng = RngStream::new(SEED, 12);
    let mut energy_err: f64 = 0.0;
    for _ in 0..100 {
        let bb = 2.0 * rng.next_f64();
        let a = 2.0 * rng.next_f64();
        let k = 1e-3 + (1.0 - 2e-3) * rng.next_f64();
        let (kp, gp) = example_kg(bb, a, k, k).unwrap();
        let e = strassen_energy(&kp, &gp);
        let f = f_value(bb, a, k).unwrap();
        energy_err = energy_err.max((e.energy - f).abs() / f.max(1.0));
        energy_err = energy_err.max(e.orthogonality_violation);
    }

    outcome(
        disagree == 0 && endpoint_err < 1e-9 && k_err < 1e-3 && energy_err < 1e-12,
        format!(
            "grid disagreements {disagree}, endpoint err {endpoint_err:.1e}, K(B) err {k_err:.1e}, energy err {energy_err:.1e}"
        ),
    )
}

fn well_formed(r: &TestReport) -> bool {
    !r.statistics.is_empty()
        && r.statistics.iter().all(|s| !s.gated && s.value.is_finite())
        && r.series.as_ref().is_some_and(|s| {
            !s.rows.is_empty() && s.rows.iter().all(|row| row.len() == s.columns.len())
        })
        && serde_json::from_str::<serde_json::Value>(&r.to_json()).is_ok()
}

fn diagnostics() -> Outcome {
    let run = |id, n_max| {
        let mut plan = ExperimentPlan::defaults(id, SEED);
        plan.n_max = n_max;
        plan.run().unwrap()
    };
    let lil = run(ExperimentId::Lil, 1_000_000);
    let ch = run(ExperimentId::ChungHirsch, 1_000_000);
    let pilot = run(ExperimentId::Pilot, 10_000_000);
    let chung = stat(&pilot, "chung_in_0.5_1.5");
    let c2 = stat(&pilot, "c2_lil_in_0.5_1.5");
    outcome(
        well_formed(&lil) && well_formed(&ch) && well_formed(&pilot),
        format!(
            "reports well formed; recorded pilot band fractions: chung {chung:.2}, c2 lil {c2:.2} (reference 0.90{})",
            if chung >= 0.9 && c2 >= 0.9 { "" } else { ", not met" }
        ),
    )
}

fn snapshot(
    bin: &str,
    dir: &Path,
    args: &[&str],
    threads: &str,
) -> (Option<i32>, BTreeMap<String, Vec<u8>>) {
    if dir.exists() {
        fs::remove_dir_all(dir).unwrap();
    }
    fs::create_dir_all(dir).unwrap();
    let out = Command::new(bin)
        .args(args)
        .args(["--threads", threads, "--no-timing", "--seed", "5", "--out"])
        .arg(dir)
        .env_remove("COMBWALK_SEED")
        .output()
        .unwrap();
    let mut files = BTreeMap::new();
    files.insert("<stdout>".to_string(), out.stdout);
    files.insert("<stderr>".to_string(), out.stderr);
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        files.insert(
            e.file_name().to_string_lossy().into_owned(),
            fs::read(e.path()).unwrap(),
        );
    }
    (out.status.code(), files)
}

fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_combwalk");
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let commands: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "20000"],
        vec!["simulate", "--n", "20000", "--coupled"],
        vec!["simulate", "--n", "20000", "--simple"],
        vec!["simulate", "--n", "2000", "--coupled", "--format", "json"],
        vec!["density", "--model", "dobrushin", "--grid", "-6:6:0.05"],
        vec!["density", "--model", "joint-uz", "--grid", "-2:2:0.25"],
        vec!["density", "--model", "eta-abs-w", "--grid", "-2:2:0.25"],
        vec!["density", "--model", "laplace", "--theta", "0.5,1,2,50"],
        vec!["domain", "--trace", "--query", "0.3", "0.4"],
        vec!["domain", "--trace", "--format", "json"],
        vec![
            "experiment",
            "--id",
            "c2-scaling",
            "--n",
            "1024",
            "--R",
            "2000",
        ],
        vec![
            "experiment",
            "--id",
            "c1-scaling",
            "--n",
            "16384",
            "--R",
            "300",
        ],
        vec!["experiment", "--id", "joint", "--n", "1024", "--R", "2000"],
        vec!["experiment", "--id", "levy", "--n", "1024", "--R", "2000"],
        vec![
            "experiment",
            "--id",
            "laplace",
            "--n",
            "1024",
            "--R",
            "5000",
        ],
        vec![
            "experiment",
            "--id",
            "coupling",
            "--n",
            "1024",
            "--R",
            "500",
        ],
        vec![
            "experiment",
            "--id",
            "sign-excursions",
            "--n",
            "1024",
            "--R",
            "500",
        ],
        vec![
            "experiment",
            "--id",
            "lemma31",
            "--n",
            "100000",
            "--R",
            "40",
        ],
        vec!["experiment", "--id", "lil", "--n-max", "1000000"],
        vec!["experiment", "--id", "chung-hirsch", "--n-max", "1000000"],
        vec![
            "experiment",
            "--id",
            "pilot",
            "--n-max",
            "1000000",
            "--seeds",
            "6",
        ],
    ];
    let mut differing = Vec::new();
    let mut errored = Vec::new();
    for args in &commands {
        let (code, base) = snapshot(bin, &dir, args, "1");
        if !matches!(code, Some(0) | Some(3)) {
            errored.push(args.join(" "));
        }
        for threads in ["4", "8"] {
            if snapshot(bin, &dir, args, threads) != (code, base.clone()) {
                differing.push(format!("{} @{threads}", args.join(" ")));
            }
        }
    }
    outcome(
        differing.is_empty() && errored.is_empty(),
        format!(
            "{} commands x threads 1/4/8; differing {differing:?}; errored {errored:?}",
            commands.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        (
            "structural exactness",
            structural_exactness,
            Duration::from_secs(10),
        ),
        (
            "transition frequencies",
            transition_frequencies,
            Duration::from_secs(10),
        ),
        (
            "local-time identities",
            local_time_identities,
            Duration::from_secs(5),
        ),
        (
            "coupling fidelity",
            coupling_fidelity,
            Duration::from_secs(60),
        ),
        (
            "sign-excursion reconstruction",
            sign_reconstruction,
            Duration::from_secs(60),
        ),
        ("scaling marginals", marginals, Duration::from_secs(300)),
        ("joint limit", joint_limit, Duration::from_secs(600)),
        ("quadrature", quadrature, Duration::from_secs(60)),
        (
            "local-time Laplace transform",
            laplace,
            Duration::from_secs(60),
        ),
        ("Levy identity", levy, Duration::from_secs(60)),
        ("limit-point domain", domain, Duration::from_secs(30)),
        (
            "asymptotic diagnostics",
            diagnostics,
            Duration::from_secs(900),
        ),
        (
            "reproducibility across threads",
            reproducibility,
            Duration::from_secs(900),
        ),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= *budget;
        // straight to the process stdout so the lines survive test capture
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "{} {:>2} {name}: {} [{:.2}s, budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        )
        .unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
