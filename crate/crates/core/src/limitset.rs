//! The set of joint endpoint limit points of the normalized comb walk.
//!
//! The region is the union over `K` of the sublevel sets
//! `F(|u|, |v|, K) <= 1` with
//!
//! ```text
//! F(B, A, K) = 3 B^(4/3) / (2^(2/3) K^(1/3)) + A^2 / (1 - K).
//! ```
//!
//! The first term decreases in `K` and the second increases, so `F` has a
//! single stationary point in `K`; both the membership test and the
//! boundary trace locate it by bisection. `K` ranges over `(0, 1)` with the
//! limits at `0` and `1` admitted whenever the matching numerator vanishes,
//! which makes the region closed.
//!
//! Coordinates are those of the endpoint pair `(k(1), g(1))` of the joint
//! Strassen-type class. The backbone coordinate normalized by
//! `n^(1/4) (log log n)^(3/4)` carries an extra factor
//! [`BACKBONE_SCALE`] `= 2^(3/4)`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt_f64;

/// `3 / 2^(2/3)`, the coefficient of `B^(4/3) K^(-1/3)`.
fn first_coef() -> f64 {
    3.0 / 2f64.powf(2.0 / 3.0)
}

/// Largest first coordinate, `2^(1/2) 3^(-3/4)`.
pub fn max_backbone() -> f64 {
    2f64.sqrt() * 3f64.powf(-0.75)
}

/// Factor from endpoint-class coordinates to the `n^(1/4) (log log n)^(3/4)`
/// normalization of the backbone coordinate.
pub const BACKBONE_SCALE: f64 = 1.681_792_830_507_429; // 2^(3/4)

/// `2^(5/4) / 3^(3/4)`, the backbone bound in the latter normalization.
pub fn backbone_rectangle_bound() -> f64 {
    2f64.powf(1.25) / 3f64.powf(0.75)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainSpec {
    /// Absolute tolerance on `K` for the bisections.
    pub tolerance: f64,
    /// Number of `K` grid points used by the brute-force oracle.
    pub grid_resolution: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            tolerance: 1e-14,
            grid_resolution: 10_000,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("domain tolerance must be positive"));
        }
        if self.grid_resolution < 1000 {
            return Err(Error::invalid("grid resolution must be at least 1000"));
        }
        Ok(())
    }
}

/// `F(B, A, K)`; `+inf` where a term diverges. At `K = 0` with `B = 0` the
/// value is `A^2`, at `K = 1` with `A = 0` it is the first term alone.
pub fn f_value(b: f64, a: f64, k: f64) -> Result<f64> {
    if b < 0.0 || a < 0.0 || b.is_nan() || a.is_nan() {
        return Err(Error::invalid("F is defined on magnitudes B, A >= 0"));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::invalid(format!("K = {k} outside [0, 1]")));
    }
    let first = if b == 0.0 {
        0.0
    } else if k == 0.0 {
        f64::INFINITY
    } else {
        first_coef() * b.powf(4.0 / 3.0) / k.cbrt()
    };
    let second = if a == 0.0 {
        0.0
    } else if k == 1.0 {
        f64::INFINITY
    } else {
        a * a / (1.0 - k)
    };
    Ok(first + second)
}

/// The `A >= 0` with `F(B, A, K) = 1`, or 0 when the first term alone
/// already exceeds 1.
pub fn a_of_bk(b: f64, k: f64) -> Result<f64> {
    if b < 0.0 || !(0.0..=1.0).contains(&k) {
        return Err(Error::invalid("A(B, K) needs B >= 0 and K in [0, 1]"));
    }
    let first = f_value(b, 0.0, k)?;
    if first >= 1.0 || k == 1.0 {
        return Ok(0.0);
    }
    Ok(((1.0 - k) * (1.0 - first)).sqrt())
}

fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    // g(lo) >= 0 >= g(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `K` maximizing `A(B, K)`.
///
/// With `b = 3 B^(4/3) / 2^(2/3)` the stationarity condition of
/// `A^2 = (1 - K)(1 - b K^(-1/3))` reads `g(K) = b/3 + 2bK/3 - K^(4/3) = 0`;
/// `g` is concave, non-negative at `K = b^3` and non-positive at `K = 1`.
pub fn k_of_b(b: f64, spec: &DomainSpec) -> Result<f64> {
    spec.validate()?;
    let bmax = max_backbone();
    if !(0.0..=bmax * (1.0 + 1e-12)).contains(&b) {
        return Err(Error::invalid(format!("B = {b} outside [0, {bmax}]")));
    }
    let coef = first_coef() * b.powf(4.0 / 3.0);
    if coef == 0.0 {
        return Ok(0.0);
    }
    if coef >= 1.0 {
        return Ok(1.0);
    }
    let g = |k: f64| coef / 3.0 + 2.0 * coef * k / 3.0 - k.powf(4.0 / 3.0);
    Ok(bisect(g, coef.powi(3), 1.0, spec.tolerance))
}

/// `inf_K F(|u|, |v|, K)` under the closure convention, with the
/// minimizing `K`.
pub fn inf_f(u: f64, v: f64, spec: &DomainSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let (b, a) = (u.abs(), v.abs());
    if b.is_nan() || a.is_nan() {
        return Err(Error::invalid("NaN coordinate"));
    }
    if b == 0.0 {
        return Ok((a * a, 0.0));
    }
    if a == 0.0 {
        return Ok((f_value(b, 0.0, 1.0)?, 1.0));
    }
    let coef = first_coef() * b.powf(4.0 / 3.0);
    // dF/dK = -(coef/3) K^(-4/3) + A^2/(1-K)^2 is increasing in K
    let neg_slope = |k: f64| coef / 3.0 * k.powf(-4.0 / 3.0) - a * a / ((1.0 - k) * (1.0 - k));
    let k = bisect(neg_slope, 0.0, 1.0, spec.tolerance);
    Ok((f_value(b, a, k)?, k))
}

/// Rounding slack on the level `F <= 1`, so that computed boundary points
/// count as members.
pub const LEVEL_SLACK: f64 = 1e-12;

pub fn d2_contains(u: f64, v: f64, spec: &DomainSpec) -> Result<bool> {
    Ok(inf_f(u, v, spec)?.0 <= 1.0 + LEVEL_SLACK)
}

/// Brute-force membership oracle: minimum of `F` over equally spaced `K`
/// in `[0, 1]`, endpoints included.
#[derive(Clone, Debug)]
pub struct KGrid {
    // interior points only: (K^(-1/3), 1/(1-K))
    interior: Vec<(f64, f64)>,
}

impl KGrid {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.grid_resolution;
        let interior = (1..m - 1)
            .map(|i| {
                let k = i as f64 / (m - 1) as f64;
                (1.0 / k.cbrt(), 1.0 / (1.0 - k))
            })
            .collect();
        Ok(KGrid { interior })
    }

    pub fn min_f(&self, u: f64, v: f64) -> Result<f64> {
        let (b, a) = (u.abs(), v.abs());
        let mut best = f_value(b, a, 0.0)?.min(f_value(b, a, 1.0)?);
        let first = first_coef() * b.powf(4.0 / 3.0);
        let second = a * a;
        for &(kc, inv) in &self.interior {
            best = best.min(first * kc + second * inv);
        }
        Ok(best)
    }

    pub fn contains(&self, u: f64, v: f64) -> Result<bool> {
        Ok(self.min_f(u, v)? <= 1.0 + LEVEL_SLACK)
    }
}

pub fn d2_contains_grid(u: f64, v: f64, spec: &DomainSpec) -> Result<bool> {
    KGrid::new(spec)?.contains(u, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub u: f64,
    pub v: f64,
    /// Maximizing `K` at this point.
    pub k: f64,
}

/// First-quadrant boundary trace from `(0, 1)` to `(2^(1/2) 3^(-3/4), 0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPolyline {
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryPolyline {
    /// Outward unit normal at point `i`: the gradient of `F` in `(B, A)` at
    /// the maximizing `K`, or the axis direction at the two ends.
    pub fn outward_normal(&self, i: usize) -> (f64, f64) {
        let p = self.points[i];
        if p.u == 0.0 {
            return (0.0, 1.0);
        }
        if p.v == 0.0 {
            return (1.0, 0.0);
        }
        let db = 4.0 / 3.0 * first_coef() * p.u.cbrt() / p.k.cbrt();
        let da = 2.0 * p.v / (1.0 - p.k);
        let norm = db.hypot(da);
        (db / norm, da / norm)
    }

    /// The closed four-quadrant polyline, counter-clockwise from `(u_max, 0)`.
    pub fn four_quadrants(&self) -> Vec<(f64, f64)> {
        let q1: Vec<(f64, f64)> = self.points.iter().rev().map(|p| (p.u, p.v)).collect();
        let mut out = q1.clone();
        out.extend(self.points.iter().skip(1).map(|p| (-p.u, p.v)));
        out.extend(q1.iter().skip(1).map(|&(u, v)| (-u, -v)));
        out.extend(self.points.iter().skip(1).map(|p| (p.u, -p.v)));
        out
    }

    /// CSV with header `u,v` tracing all four quadrants.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "u,v")?;
        for (u, v) in self.four_quadrants() {
            writeln!(w, "{},{}", fmt_f64(u), fmt_f64(v))?;
        }
        Ok(())
    }
}

pub fn trace_boundary(spec: &DomainSpec, points: usize) -> Result<BoundaryPolyline> {
    spec.validate()?;
    if points < 16 {
        return Err(Error::invalid("boundary trace needs at least 16 points"));
    }
    let bmax = max_backbone();
    let mut out = Vec::with_capacity(points);
    let mut last_v = f64::INFINITY;
    for i in 0..points {
        let b = if i + 1 == points {
            bmax
        } else {
            bmax * i as f64 / (points - 1) as f64
        };
        let k = k_of_b(b, spec)?;
        let v = if i + 1 == points { 0.0 } else { a_of_bk(b, k)? };
        let v = v.min(last_v);
        last_v = v;
        out.push(BoundaryPoint { u: b, v, k });
    }
    Ok(BoundaryPolyline { points: out })
}

/// A continuous piecewise-linear function on `[0, 1]` with `f(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseLinearPath {
    breakpoints: Vec<(f64, f64)>,
}

impl PiecewiseLinearPath {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let ok = breakpoints.len() >= 2
            && breakpoints[0] == (0.0, 0.0)
            && breakpoints.last().unwrap().0 == 1.0
            && breakpoints.windows(2).all(|w| w[0].0 < w[1].0);
        if !ok {
            return Err(Error::invalid(
                "breakpoints must start at (0, 0), end at x = 1 and increase strictly in x",
            ));
        }
        Ok(PiecewiseLinearPath { breakpoints })
    }

    pub fn zero() -> Self {
        PiecewiseLinearPath {
            breakpoints: vec![(0.0, 0.0), (1.0, 0.0)],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        let i = bp.partition_point(|p| p.0 <= x).clamp(1, bp.len() - 1);
        let (x0, y0) = bp[i - 1];
        let (x1, y1) = bp[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }
}

/// The two-piece pair: `k` rises linearly to `B` on `[0, K1]` and stays
/// there; `g` is zero on `[0, K2]` and rises linearly to `A` afterwards.
pub fn example_kg(
    b: f64,
    a: f64,
    k1: f64,
    k2: f64,
) -> Result<(PiecewiseLinearPath, PiecewiseLinearPath)> {
    if !(0.0 <= k1 && k1 <= k2 && k2 <= 1.0) {
        return Err(Error::invalid("need 0 <= K1 <= K2 <= 1"));
    }
    let k = if k1 == 0.0 {
        if b != 0.0 {
            return Err(Error::invalid(
                "K1 = 0 requires B = 0 (k must be continuous)",
            ));
        }
        PiecewiseLinearPath::zero()
    } else if k1 == 1.0 {
        PiecewiseLinearPath::new(vec![(0.0, 0.0), (1.0, b)])?
    } else {
        PiecewiseLinearPath::new(vec![(0.0, 0.0), (k1, b), (1.0, b)])?
    };
    let g = if k2 == 1.0 {
        PiecewiseLinearPath::zero()
    } else if k2 == 0.0 {
        PiecewiseLinearPath::new(vec![(0.0, 0.0), (1.0, a)])?
    } else {
        PiecewiseLinearPath::new(vec![(0.0, 0.0), (k2, 0.0), (1.0, a)])?
    };
    Ok((k, g))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Energy {
    /// `int_0^1 |3^(3/4) 2^(-1/2) k'|^(4/3) + g'^2 dx`.
    pub energy: f64,
    /// Lebesgue measure of `{x : k'(x) != 0 and g(x) != 0}`.
    pub orthogonality_violation: f64,
}

pub fn strassen_energy(k: &PiecewiseLinearPath, g: &PiecewiseLinearPath) -> Energy {
    let scale = 3f64.powf(0.75) / 2f64.sqrt();
    let mut energy = 0.0;
    for ((x0, y0), (x1, y1)) in k.segments() {
        let len = x1 - x0;
        let slope = (y1 - y0) / len;
        energy += (scale * slope).abs().powf(4.0 / 3.0) * len;
    }
    for ((x0, y0), (x1, y1)) in g.segments() {
        let len = x1 - x0;
        let slope = (y1 - y0) / len;
        energy += slope * slope * len;
    }

    // common refinement of both breakpoint sets
    let mut xs: Vec<f64> = k
        .breakpoints()
        .iter()
        .chain(g.breakpoints())
        .map(|p| p.0)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut violation = 0.0;
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let k_moves = k.value_at(x0) != k.value_at(x1);
        // g is linear here, so it vanishes on the piece only if it does so
        // at both ends
        let g_nonzero = g.value_at(x0) != 0.0 || g.value_at(x1) != 0.0;
        if k_moves && g_nonzero {
            violation += x1 - x0;
        }
    }
    Energy {
        energy,
        orthogonality_violation: violation,
    }
}
