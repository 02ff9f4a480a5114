//! Comb-lattice geometry and the direct sampler.
//!
//! The comb keeps every vertical edge of the square lattice but only the
//! horizontal edges lying on the x-axis (the backbone). From a backbone
//! site the walk moves to each of its four neighbours with probability
//! 1/4; from a tooth site it moves up or down with probability 1/2.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site {
    pub x: i64,
    pub y: i64,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Site { x, y }
    }

    pub fn on_backbone(self) -> bool {
        self.y == 0
    }
}

pub fn degree(s: Site) -> usize {
    if s.y == 0 {
        4
    } else {
        2
    }
}

/// Neighbours in the fixed outcome order `(+x, -x, +y, -y)`; tooth sites
/// only have the two vertical ones.
pub fn neighbors(s: Site) -> Vec<Site> {
    if s.y == 0 {
        vec![
            Site::new(s.x + 1, 0),
            Site::new(s.x - 1, 0),
            Site::new(s.x, 1),
            Site::new(s.x, -1),
        ]
    } else {
        vec![Site::new(s.x, s.y + 1), Site::new(s.x, s.y - 1)]
    }
}

/// True iff `a` and `b` are joined by a comb edge.
pub fn is_comb_edge(a: Site, b: Site) -> bool {
    let vertical = a.x == b.x && (a.y - b.y).abs() == 1;
    let horizontal = a.y == 0 && b.y == 0 && (a.x - b.x).abs() == 1;
    vertical || horizontal
}

/// Maps a uniform `u` to a neighbour of `s`.
///
/// On the backbone the quartiles of `u` select `(+x, -x, +y, -y)` in that
/// order; on a tooth `u < 1/2` moves up and `u >= 1/2` moves down.
pub fn step_comb(s: Site, u: f64) -> Result<Site> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::UniformOutOfRange(u));
    }
    Ok(if s.y == 0 {
        backbone_move(s, (u * 4.0) as u8)
    } else if u < 0.5 {
        Site::new(s.x, s.y + 1)
    } else {
        Site::new(s.x, s.y - 1)
    })
}

#[inline]
fn backbone_move(s: Site, quartile: u8) -> Site {
    match quartile {
        0 => Site::new(s.x + 1, 0),
        1 => Site::new(s.x - 1, 0),
        2 => Site::new(s.x, 1),
        _ => Site::new(s.x, -1),
    }
}

/// Streaming direct sampler.
///
/// Each backbone step consumes two random bits and each tooth step one
/// bit; the bits are the binary digits of a uniform `u` at the resolution
/// [`step_comb`] actually looks at, so `step_comb(site, u)` with
/// `u = q / 4` (resp. `b / 2`) gives the same move.
#[derive(Clone, Debug)]
pub struct CombWalker {
    site: Site,
    rng: RngStream,
}

impl CombWalker {
    pub fn new(rng: RngStream) -> Self {
        CombWalker {
            site: Site::ORIGIN,
            rng,
        }
    }

    pub fn site(&self) -> Site {
        self.site
    }

    #[inline]
    pub fn step(&mut self) -> Site {
        let s = self.site;
        self.site = if s.y == 0 {
            backbone_move(s, self.rng.next_bits(2) as u8)
        } else if self.rng.next_bits(1) == 0 {
            Site::new(s.x, s.y + 1)
        } else {
            Site::new(s.x, s.y - 1)
        };
        self.site
    }

    /// Advances `n` steps and returns the final site.
    pub fn advance(&mut self, n: usize) -> Site {
        for _ in 0..n {
            self.step();
        }
        self.site
    }
}

/// A finite comb trajectory; every consecutive pair is a comb edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombPath {
    sites: Vec<Site>,
}

impl CombPath {
    /// Validates legality; the start may be any site.
    pub fn from_sites(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("a comb path needs at least one site"));
        }
        validate_comb_sites(&sites)?;
        Ok(CombPath { sites })
    }

    pub(crate) fn from_sites_unchecked(sites: Vec<Site>) -> Self {
        CombPath { sites }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.sites.len() == 1
    }

    pub fn endpoint(&self) -> Site {
        *self.sites.last().expect("non-empty path")
    }

    pub fn validate(&self) -> Result<()> {
        validate_comb_sites(&self.sites)
    }

    /// CSV with header `step,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,x,y")?;
        for (i, s) in self.sites.iter().enumerate() {
            writeln!(w, "{},{},{}", i, s.x, s.y)?;
        }
        Ok(())
    }
}

pub fn validate_comb_sites(sites: &[Site]) -> Result<()> {
    for (i, pair) in sites.windows(2).enumerate() {
        if !is_comb_edge(pair[0], pair[1]) {
            return Err(Error::IllegalCombStep {
                index: i + 1,
                from: (pair[0].x, pair[0].y),
                to: (pair[1].x, pair[1].y),
            });
        }
    }
    Ok(())
}

pub fn sample_comb_path(n: usize, rng: RngStream) -> CombPath {
    let mut walker = CombWalker::new(rng);
    let mut sites = Vec::with_capacity(n + 1);
    sites.push(Site::ORIGIN);
    for _ in 0..n {
        sites.push(walker.step());
    }
    CombPath { sites }
}

/// Outcome counts of the transitions along a path: backbone moves in the
/// order `(+x, -x, +y, -y)` and tooth moves `(up, down)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub backbone: [u64; 4],
    pub tooth: [u64; 2],
}

impl TransitionCounts {
    pub fn record(&mut self, from: Site, to: Site) {
        if from.y == 0 {
            let k = match (to.x - from.x, to.y - from.y) {
                (1, 0) => 0,
                (-1, 0) => 1,
                (0, 1) => 2,
                _ => 3,
            };
            self.backbone[k] += 1;
        } else if to.y > from.y {
            self.tooth[0] += 1;
        } else {
            self.tooth[1] += 1;
        }
    }

    pub fn of_path(path: &CombPath) -> Self {
        let mut c = TransitionCounts::default();
        for w in path.sites().windows(2) {
            c.record(w[0], w[1]);
        }
        c
    }

    pub fn merge(&mut self, other: &TransitionCounts) {
        for (a, b) in self.backbone.iter_mut().zip(other.backbone) {
            *a += b;
        }
        for (a, b) in self.tooth.iter_mut().zip(other.tooth) {
            *a += b;
        }
    }

    pub fn backbone_total(&self) -> u64 {
        self.backbone.iter().sum()
    }

    pub fn tooth_total(&self) -> u64 {
        self.tooth.iter().sum()
    }
}

/// A ±1-step walk on the integers started at 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleWalkPath {
    values: Vec<i64>,
}

impl SimpleWalkPath {
    pub fn from_values(values: Vec<i64>) -> Result<Self> {
        if values.first() != Some(&0) {
            return Err(Error::NotAtOrigin);
        }
        for (i, w) in values.windows(2).enumerate() {
            if (w[1] - w[0]).abs() != 1 {
                return Err(Error::IllegalWalkStep { index: i + 1 });
            }
        }
        Ok(SimpleWalkPath { values })
    }

    pub fn from_increments(steps: &[i64]) -> Result<Self> {
        let mut values = Vec::with_capacity(steps.len() + 1);
        values.push(0);
        let mut s = 0;
        for (i, &d) in steps.iter().enumerate() {
            if d.abs() != 1 {
                return Err(Error::IllegalWalkStep { index: i + 1 });
            }
            s += d;
            values.push(s);
        }
        Ok(SimpleWalkPath { values })
    }

    pub(crate) fn from_values_unchecked(values: Vec<i64>) -> Self {
        SimpleWalkPath { values }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 1
    }

    pub fn endpoint(&self) -> i64 {
        *self.values.last().expect("non-empty path")
    }

    pub fn increments(&self) -> impl Iterator<Item = i64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Samples `n` fair ±1 steps; one random word feeds 64 steps, least
/// significant bit first, with a set bit meaning `+1`.
pub fn sample_simple_walk(n: usize, mut rng: RngStream) -> SimpleWalkPath {
    let mut values = Vec::with_capacity(n + 1);
    values.push(0);
    let mut s = 0i64;
    for _ in 0..n {
        s += rng.next_sign();
        values.push(s);
    }
    SimpleWalkPath { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degrees() {
        assert_eq!(degree(Site::new(0, 0)), 4);
        assert_eq!(degree(Site::new(3, 2)), 2);
        assert_eq!(degree(Site::new(5, 0)), 4);
    }

    #[test]
    fn neighbour_sets() {
        let mut n0 = neighbors(Site::ORIGIN);
        n0.sort();
        let mut want = vec![
            Site::new(1, 0),
            Site::new(-1, 0),
            Site::new(0, 1),
            Site::new(0, -1),
        ];
        want.sort();
        assert_eq!(n0, want);
        assert_eq!(
            neighbors(Site::new(2, -1)),
            vec![Site::new(2, 0), Site::new(2, -2)]
        );
        assert_eq!(
            neighbors(Site::new(0, 3)),
            vec![Site::new(0, 4), Site::new(0, 2)]
        );
    }

    #[test]
    fn step_examples() {
        assert_eq!(step_comb(Site::ORIGIN, 0.10).unwrap(), Site::new(1, 0));
        assert_eq!(step_comb(Site::ORIGIN, 0.60).unwrap(), Site::new(0, 1));
        assert_eq!(step_comb(Site::new(4, 2), 0.75).unwrap(), Site::new(4, 1));
        assert_eq!(step_comb(Site::ORIGIN, 0.30).unwrap(), Site::new(-1, 0));
        assert_eq!(step_comb(Site::ORIGIN, 0.99).unwrap(), Site::new(0, -1));
    }

    #[test]
    fn step_rejects_bad_uniform() {
        assert!(step_comb(Site::ORIGIN, 1.0).is_err());
        assert!(step_comb(Site::ORIGIN, -0.1).is_err());
        assert!(step_comb(Site::ORIGIN, f64::NAN).is_err());
    }

    #[test]
    fn walker_agrees_with_step_comb() {
        // Replays the walker's bit draws through step_comb.
        let rng = RngStream::new(17, 3);
        let mut walker = CombWalker::new(rng.clone());
        let mut bits = rng;
        let mut s = Site::ORIGIN;
        for _ in 0..10_000 {
            let u = if s.y == 0 {
                bits.next_bits(2) as f64 / 4.0
            } else {
                bits.next_bits(1) as f64 / 2.0
            };
            s = step_comb(s, u).unwrap();
            assert_eq!(walker.step(), s);
        }
    }

    #[test]
    fn empty_paths() {
        let p = sample_comb_path(0, RngStream::new(1, 0));
        assert_eq!(p.sites(), &[Site::ORIGIN]);
        let w = sample_simple_walk(0, RngStream::new(1, 0));
        assert_eq!(w.values(), &[0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_comb_path(5000, RngStream::new(9, 1));
        let b = sample_comb_path(5000, RngStream::new(9, 1));
        assert_eq!(a, b);
        let c = sample_simple_walk(5000, RngStream::new(9, 1));
        let d = sample_simple_walk(5000, RngStream::new(9, 1));
        assert_eq!(c, d);
    }

    #[test]
    fn backbone_frequencies_on_a_long_path() {
        let p = sample_comb_path(1_000_000, RngStream::new(2024, 0));
        p.validate().unwrap();
        // a single path visits the backbone only ~sqrt(n) times, so pool
        // many paths to reach the 1e6-visit regime
        let mut counts = TransitionCounts::of_path(&p);
        let root = RngStream::new(2024, 1);
        let mut r = 0;
        while counts.backbone_total() < 1_000_000 {
            let q = sample_comb_path(20_000, root.derive(r));
            counts.merge(&TransitionCounts::of_path(&q));
            r += 1;
        }
        let n = counts.backbone_total() as f64;
        for &c in &counts.backbone {
            assert!((c as f64 / n - 0.25).abs() < 0.002);
        }
    }

    #[test]
    fn clt_mean_of_simple_walk() {
        let root = RngStream::new(77, 0);
        let reps = 10_000;
        let n = 10_000;
        let mean: f64 = (0..reps)
            .map(|r| sample_simple_walk(n, root.derive(r)).endpoint() as f64 / (n as f64).sqrt())
            .sum::<f64>()
            / reps as f64;
        assert!(mean.abs() < 0.04, "mean {mean}");
    }

    #[test]
    fn rejects_illegal_paths() {
        assert!(CombPath::from_sites(vec![Site::new(0, 1), Site::new(1, 1)]).is_err());
        assert!(CombPath::from_sites(vec![Site::ORIGIN, Site::new(1, 1)]).is_err());
        assert!(SimpleWalkPath::from_values(vec![0, 2]).is_err());
        assert!(SimpleWalkPath::from_values(vec![1, 2]).is_err());
        assert!(SimpleWalkPath::from_increments(&[1, 0]).is_err());
    }

    #[test]
    fn csv_dump() {
        let p = CombPath::from_sites(vec![Site::ORIGIN, Site::new(0, 1)]).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "step,x,y\n0,0,0\n1,0,1\n");
    }

    proptest! {
        #[test]
        fn step_is_pure_and_legal(x in -1000i64..1000, y in -1000i64..1000, u in 0.0f64..1.0) {
            let s = Site::new(x, y);
            let a = step_comb(s, u).unwrap();
            prop_assert_eq!(a, step_comb(s, u).unwrap());
            prop_assert!(is_comb_edge(s, a));
            prop_assert!(neighbors(s).contains(&a));
            prop_assert_eq!(neighbors(s).len(), degree(s));
        }

        #[test]
        fn sampled_paths_are_legal(seed in any::<u64>(), n in 0usize..2000) {
            let p = sample_comb_path(n, RngStream::new(seed, 0));
            prop_assert_eq!(p.len(), n);
            prop_assert_eq!(p.sites()[0], Site::ORIGIN);
            prop_assert!(p.validate().is_ok());
        }
    }
}
