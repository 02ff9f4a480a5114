//! Local times, return times, running maxima and excursion signing for
//! one-dimensional simple walks.
//!
//! Local time counts visits at steps `1..=n`; the starting point is not a
//! visit, so the local time at zero evaluated at the `N`-th return time is
//! exactly `N`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::walk::SimpleWalkPath;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalTimeTable {
    counts: BTreeMap<i64, u64>,
    horizon: usize,
}

impl LocalTimeTable {
    pub fn from_path(path: &SimpleWalkPath, n: usize) -> Result<Self> {
        check_horizon(path, n)?;
        let mut counts = BTreeMap::new();
        for &v in &path.values()[1..=n] {
            *counts.entry(v).or_insert(0) += 1;
        }
        Ok(LocalTimeTable { counts, horizon: n })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, level: i64) -> u64 {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// CSV with header `level,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "level,count")?;
        for (k, c) in self.iter() {
            writeln!(w, "{k},{c}")?;
        }
        Ok(())
    }
}

fn check_horizon(path: &SimpleWalkPath, n: usize) -> Result<()> {
    if n > path.len() {
        return Err(Error::HorizonOutOfRange {
            horizon: n,
            len: path.len(),
        });
    }
    Ok(())
}

/// Number of `i` in `1..=n` with `S(i) = k`.
pub fn local_time(path: &SimpleWalkPath, k: i64, n: usize) -> Result<u64> {
    check_horizon(path, n)?;
    Ok(path.values()[1..=n].iter().filter(|&&v| v == k).count() as u64)
}

/// Return times to zero: `rho[0] = 0` and `rho[N]` is the `N`-th return.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ReturnTimes {
    rho: Vec<usize>,
}

impl ReturnTimes {
    pub(crate) fn from_raw(rho: Vec<usize>) -> Self {
        ReturnTimes { rho }
    }

    pub(crate) fn push(&mut self, t: usize) {
        self.rho.push(t);
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.rho
    }

    /// `rho(N)`; `None` if the path returned fewer than `N` times.
    pub fn get(&self, n: usize) -> Option<usize> {
        self.rho.get(n).copied()
    }

    /// Number of completed returns.
    pub fn returns(&self) -> usize {
        self.rho.len() - 1
    }
}

pub fn return_times(path: &SimpleWalkPath) -> ReturnTimes {
    let mut rho = vec![0];
    rho.extend(
        path.values()
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &v)| v == 0)
            .map(|(i, _)| i),
    );
    ReturnTimes { rho }
}

/// `M(i) = max_{j <= i} S(j)`.
pub fn running_max(path: &SimpleWalkPath) -> Vec<i64> {
    path.values()
        .iter()
        .scan(i64::MIN, |m, &v| {
            *m = (*m).max(v);
            Some(*m)
        })
        .collect()
}

/// `|S|` of a simple walk.
pub fn reflect(path: &SimpleWalkPath) -> Vec<i64> {
    path.values().iter().map(|v| v.abs()).collect()
}

/// Maximal zero-free stretches of a reflected path.
///
/// Each interval `(u, v)` has the path zero at `u`, positive strictly
/// inside, and zero at `v` unless it is the final incomplete excursion.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExcursionDecomposition {
    pub intervals: Vec<(usize, usize)>,
    /// The last interval ends with the path still away from zero.
    pub incomplete_tail: bool,
}

pub fn decompose_excursions(reflected: &[i64]) -> Result<ExcursionDecomposition> {
    match reflected.first() {
        None => return Err(Error::invalid("empty reflected path")),
        Some(&r0) if r0 != 0 => {
            return Err(Error::InvalidReflectedPath {
                index: 0,
                reason: "path must start at zero",
            })
        }
        _ => {}
    }
    let mut intervals = Vec::new();
    let mut start = None;
    for i in 1..reflected.len() {
        let (a, b) = (reflected[i - 1], reflected[i]);
        if b < 0 {
            return Err(Error::InvalidReflectedPath {
                index: i,
                reason: "negative entry",
            });
        }
        match (b - a).abs() {
            1 => {}
            // a walk may sit at zero only in the lazy convention
            0 if a == 0 => {}
            0 => {
                return Err(Error::InvalidReflectedPath {
                    index: i,
                    reason: "flat step away from zero",
                })
            }
            _ => {
                return Err(Error::InvalidReflectedPath {
                    index: i,
                    reason: "jump larger than one",
                })
            }
        }
        if a == 0 && b > 0 {
            start = Some(i - 1);
        }
        if b == 0 {
            if let Some(u) = start.take() {
                intervals.push((u, i));
            }
        }
    }
    let incomplete_tail = if let Some(u) = start {
        intervals.push((u, reflected.len() - 1));
        true
    } else {
        false
    };
    Ok(ExcursionDecomposition {
        intervals,
        incomplete_tail,
    })
}

/// Multiplies every excursion of `reflected` (including an unfinished last
/// one) by a sign from `next_sign`.
pub fn sign_excursions_with<F>(reflected: &[i64], mut next_sign: F) -> Result<SimpleWalkPath>
where
    F: FnMut() -> i64,
{
    if reflected.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
        let index = reflected
            .windows(2)
            .position(|w| (w[1] - w[0]).abs() != 1)
            .unwrap()
            + 1;
        return Err(Error::InvalidReflectedPath {
            index,
            reason: "not the modulus of a simple walk",
        });
    }
    let dec = decompose_excursions(reflected)?;
    let mut out = vec![0i64; reflected.len()];
    for &(u, v) in &dec.intervals {
        let sign = next_sign();
        for i in u + 1..=v {
            out[i] = sign * reflected[i];
        }
    }
    Ok(SimpleWalkPath::from_values_unchecked(out))
}

/// Random excursion signs, one fair bit per excursion (`1` is positive).
pub fn sign_excursions(reflected: &[i64], mut signs: RngStream) -> Result<SimpleWalkPath> {
    sign_excursions_with(reflected, || signs.next_sign())
}

/// Endpoint summaries used by the Lévy-identity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevyPair {
    pub local_time_zero: u64,
    pub abs_endpoint: i64,
    pub max: i64,
    pub max_minus_endpoint: i64,
}

/// Single pass over `n` fresh steps of a simple walk.
pub fn levy_pair(n: usize, mut rng: RngStream) -> LevyPair {
    let mut s = 0i64;
    let mut m = 0i64;
    let mut zeros = 0u64;
    for _ in 0..n {
        s += rng.next_sign();
        m = m.max(s);
        zeros += (s == 0) as u64;
    }
    LevyPair {
        local_time_zero: zeros,
        abs_endpoint: s.abs(),
        max: m,
        max_minus_endpoint: m - s,
    }
}
