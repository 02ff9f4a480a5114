//! The comb walk assembled from two independent simple walks `S1`, `S2` and
//! an i.i.d. sequence `G1, G2, ...` with `P(G = k) = 2^-(k+1)`.
//!
//! With `T_N = G1 + ... + GN` and `rho2(N)` the `N`-th return of `S2` to
//! zero, the path alternates between
//!
//! * axis phase `N` on `T_N + rho2(N) < n <= T_{N+1} + rho2(N)`:
//!   `C1(n) = S1(n - rho2(N))`, `C2(n) = 0`;
//! * tooth phase `N` on `T_{N+1} + rho2(N) < n <= T_{N+1} + rho2(N+1)`:
//!   `C1(n) = S1(T_{N+1})`, `C2(n) = S2(n - T_{N+1})`.
//!
//! Intervals are half-open on the left; the two formulas agree at every
//! shared endpoint. Axis phase 0 also contains `n = 0`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::localtime::ReturnTimes;
use crate::rng::RngStream;
use crate::walk::{CombPath, SimpleWalkPath, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Axis(usize),
    Tooth(usize),
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Axis(n) | Phase::Tooth(n) => n,
        }
    }

    pub fn is_axis(self) -> bool {
        matches!(self, Phase::Axis(_))
    }
}

/// Inverse CDF of the geometric law `P(G = k) = 2^-(k+1)`: the smallest
/// `k` with `u < 1 - 2^-(k+1)`.
pub fn geometric_from_uniform(u: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::UniformOutOfRange(u));
    }
    let q = 1.0 - u;
    let mut k = 0u64;
    let mut tail = 0.5;
    while q <= tail {
        k += 1;
        tail *= 0.5;
    }
    Ok(k)
}

pub fn sample_geometric(rng: &mut RngStream) -> u64 {
    geometric_from_uniform(rng.next_f64()).expect("next_f64 lies in [0, 1)")
}

/// The geometric variables, their partial sums and the return times of
/// `S2` consumed while building a path.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CouplingSchedule {
    pub g: Vec<u64>,
    /// `t[N] = T_N`, with `t[0] = 0`.
    pub t: Vec<u64>,
    pub rho2: ReturnTimes,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledCombPath {
    pub path: CombPath,
    /// Phase of every step index, `phases[0] = Axis(0)`.
    pub phases: Vec<Phase>,
    pub schedule: CouplingSchedule,
}

impl CoupledCombPath {
    /// `C2 = 0` on axis phases and `C1` frozen on every tooth phase.
    pub fn check_phase_structure(&self) -> Result<()> {
        let sites = self.path.sites();
        for i in 0..sites.len() {
            match self.phases[i] {
                Phase::Axis(_) if sites[i].y != 0 => {
                    return Err(Error::invalid(format!("C2 nonzero on axis phase at {i}")))
                }
                Phase::Tooth(_) if sites[i].x != sites[i - 1].x => {
                    return Err(Error::invalid(format!("C1 moved on tooth phase at {i}")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// CSV with header `step,x,y,phase,N`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,x,y,phase,N")?;
        for (i, (s, p)) in self.path.sites().iter().zip(&self.phases).enumerate() {
            let tag = if p.is_axis() { "axis" } else { "tooth" };
            writeln!(w, "{},{},{},{},{}", i, s.x, s.y, tag, p.index())?;
        }
        Ok(())
    }
}

/// Supplies the three input sequences one element at a time.
pub trait CouplingSource {
    fn next_s1_step(&mut self) -> Option<i64>;
    fn next_s2_step(&mut self) -> Option<i64>;
    fn next_geometric(&mut self) -> Option<u64>;
}

struct SliceSource<'a> {
    s1: Box<dyn Iterator<Item = i64> + 'a>,
    s2: Box<dyn Iterator<Item = i64> + 'a>,
    g: std::slice::Iter<'a, u64>,
}

impl CouplingSource for SliceSource<'_> {
    fn next_s1_step(&mut self) -> Option<i64> {
        self.s1.next()
    }
    fn next_s2_step(&mut self) -> Option<i64> {
        self.s2.next()
    }
    fn next_geometric(&mut self) -> Option<u64> {
        self.g.next().copied()
    }
}

/// Lazily extended inputs drawn from three disjoint streams.
#[derive(Clone, Debug)]
pub struct StreamSource {
    pub s1: RngStream,
    pub s2: RngStream,
    pub g: RngStream,
}

impl StreamSource {
    pub fn from_root(rng: &RngStream) -> Self {
        StreamSource {
            s1: rng.derive(1),
            s2: rng.derive(2),
            g: rng.derive(3),
        }
    }
}

impl CouplingSource for StreamSource {
    fn next_s1_step(&mut self) -> Option<i64> {
        Some(self.s1.next_sign())
    }
    fn next_s2_step(&mut self) -> Option<i64> {
        Some(self.s2.next_sign())
    }
    fn next_geometric(&mut self) -> Option<u64> {
        Some(sample_geometric(&mut self.g))
    }
}

/// Runs the phase machine for `n` steps. Returns the path together with
/// the time `S2` has been advanced to.
fn run_coupling<S: CouplingSource>(src: &mut S, n: usize) -> Result<(CoupledCombPath, usize)> {
    let mut sites = Vec::with_capacity(n + 1);
    let mut phases = Vec::with_capacity(n + 1);
    sites.push(Site::ORIGIN);
    phases.push(Phase::Axis(0));

    let mut schedule = CouplingSchedule {
        g: Vec::new(),
        t: vec![0],
        rho2: ReturnTimes::from_raw(vec![0]),
    };
    let (mut c1, mut c2) = (0i64, 0i64);
    let mut s2_time = 0usize;
    let mut phase = Phase::Axis(0);
    // axis steps left in the current axis phase; None until G is drawn
    let mut axis_left: Option<u64> = None;

    let exhausted = |input: &'static str, step: usize, phase: Phase| Error::CouplingExhausted {
        input,
        step,
        phase,
    };

    for step in 1..=n {
        loop {
            match (phase, axis_left) {
                (Phase::Axis(_), None) => {
                    let g = src
                        .next_geometric()
                        .ok_or_else(|| exhausted("G", step, phase))?;
                    let last = *schedule.t.last().unwrap();
                    schedule.g.push(g);
                    schedule.t.push(last + g);
                    axis_left = Some(g);
                }
                (Phase::Axis(k), Some(0)) => {
                    phase = Phase::Tooth(k);
                    axis_left = None;
                }
                _ => break,
            }
        }
        match phase {
            Phase::Axis(_) => {
                c1 += src
                    .next_s1_step()
                    .ok_or_else(|| exhausted("S1", step, phase))?;
                axis_left = axis_left.map(|r| r - 1);
                sites.push(Site::new(c1, 0));
                phases.push(phase);
            }
            Phase::Tooth(k) => {
                c2 += src
                    .next_s2_step()
                    .ok_or_else(|| exhausted("S2", step, phase))?;
                s2_time += 1;
                sites.push(Site::new(c1, c2));
                phases.push(phase);
                if c2 == 0 {
                    schedule.rho2.push(s2_time);
                    phase = Phase::Axis(k + 1);
                }
            }
        }
    }

    Ok((
        CoupledCombPath {
            path: CombPath::from_sites_unchecked(sites),
            phases,
            schedule,
        },
        s2_time,
    ))
}

/// Builds the coupled path up to horizon `n` from explicit inputs.
pub fn build_comb_from_pair(
    s1: &SimpleWalkPath,
    s2: &SimpleWalkPath,
    g: &[u64],
    n: usize,
) -> Result<CoupledCombPath> {
    let mut src = SliceSource {
        s1: Box::new(s1.increments()),
        s2: Box::new(s2.increments()),
        g: g.iter(),
    };
    run_coupling(&mut src, n).map(|(p, _)| p)
}

/// Samples a coupled path with inputs drawn lazily from three streams
/// derived from `rng`.
pub fn sample_coupled_path(n: usize, rng: &RngStream) -> CoupledCombPath {
    let mut src = StreamSource::from_root(rng);
    run_coupling(&mut src, n)
        .expect("stream inputs never run out")
        .0
}

/// Endpoint of a coupled path with two occupation counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledEndpoint {
    pub site: Site,
    /// Steps made in axis phases.
    pub axis_steps: usize,
    /// Steps `1..=n` taken from a backbone site.
    pub backbone_departures: usize,
}

/// Same draws and the same endpoint as [`sample_coupled_path`], without
/// storing the path.
pub fn coupled_endpoint(n: usize, rng: &RngStream) -> CoupledEndpoint {
    let mut src = StreamSource::from_root(rng);
    let (mut c1, mut c2) = (0i64, 0i64);
    let mut on_axis = true;
    let mut axis_left: Option<u64> = None;
    let mut axis_steps = 0;
    let mut backbone_departures = 0;
    for _ in 0..n {
        backbone_departures += (c2 == 0) as usize;
        if on_axis {
            let left = match axis_left {
                Some(l) => l,
                None => sample_geometric(&mut src.g),
            };
            if left == 0 {
                on_axis = false;
                axis_left = None;
            } else {
                c1 += src.s1.next_sign();
                axis_left = Some(left - 1);
                axis_steps += 1;
                continue;
            }
        }
        c2 += src.s2.next_sign();
        if c2 == 0 {
            on_axis = true;
        }
    }
    CoupledEndpoint {
        site: Site::new(c1, c2),
        axis_steps,
        backbone_departures,
    }
}

/// `(C1(n), C2(n))` straight from the case formulas, for checking the
/// incremental construction. Returns `None` when the schedule or the walks
/// do not reach `n`. At a shared endpoint both formulas are evaluated and
/// must agree.
pub fn site_by_formula(
    n: usize,
    s1: &SimpleWalkPath,
    s2: &SimpleWalkPath,
    schedule: &CouplingSchedule,
) -> Option<Site> {
    let t = &schedule.t;
    let rho = schedule.rho2.as_slice();
    let s1v = s1.values();
    let s2v = s2.values();
    if n == 0 {
        return Some(Site::ORIGIN);
    }
    for k in 0..t.len().saturating_sub(1) {
        let rk = *rho.get(k)?;
        let axis_lo = t[k] as usize + rk;
        let axis_hi = t[k + 1] as usize + rk;
        if n > axis_lo && n <= axis_hi {
            let axis = Site::new(*s1v.get(n - rk)?, 0);
            if n == axis_hi {
                // boundary with the following tooth phase
                let tooth = Site::new(
                    *s1v.get(t[k + 1] as usize)?,
                    *s2v.get(n - t[k + 1] as usize)?,
                );
                if tooth != axis {
                    return None;
                }
            }
            return Some(axis);
        }
        let rk1 = match rho.get(k + 1) {
            Some(&r) => r,
            None => {
                // tooth phase still open at the end of the schedule
                if n > axis_hi {
                    return Some(Site::new(
                        *s1v.get(t[k + 1] as usize)?,
                        *s2v.get(n - t[k + 1] as usize)?,
                    ));
                }
                return None;
            }
        };
        let tooth_hi = t[k + 1] as usize + rk1;
        if n > axis_hi && n <= tooth_hi {
            return Some(Site::new(
                *s1v.get(t[k + 1] as usize)?,
                *s2v.get(n - t[k + 1] as usize)?,
            ));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma31Report {
    pub horizon: usize,
    /// Phase index at time `n`.
    pub phase_index: usize,
    /// Visits of `S2` to zero during its own steps `1..=n`.
    pub s2_local_time_zero: u64,
    /// `|xi2(0, n) - N| / n^(1/4)`.
    pub normalized_gap: f64,
}

/// Compares the phase counter of the coupled walk at time `n` with the
/// local time at zero of `S2` run for `n` of its own steps.
pub fn lemma31_diagnostic(n: usize, rng: &RngStream) -> Result<Lemma31Report> {
    if n < 1000 {
        return Err(Error::invalid("lemma31 diagnostic needs n >= 1000"));
    }
    let mut src = StreamSource::from_root(rng);
    let (path, s2_time) = run_coupling(&mut src, n)?;
    let phase_index = path.phases[n].index();
    let visits_so_far = path.schedule.rho2.returns() as u64;
    // the coupled path leaves S2 at zero or inside an excursion; continue
    // S2 on its own clock up to time n
    let mut s2 = path.path.endpoint().y;
    let mut visits = visits_so_far;
    for _ in s2_time..n {
        s2 += src.s2.next_sign();
        visits += (s2 == 0) as u64;
    }
    let gap = (visits as f64 - phase_index as f64).abs() / (n as f64).powf(0.25);
    Ok(Lemma31Report {
        horizon: n,
        phase_index,
        s2_local_time_zero: visits,
        normalized_gap: gap,
    })
}
