//! Limiting densities of the scaled comb walk, evaluated by quadrature.
//!
//! With `X, Y, Z` independent standard normals:
//!
//! * `U = X |Y|^(1/2)` has density `(2/pi) int_0^inf exp(-u^2/(2v^2) - v^4/2) dv`;
//! * `(U, Z)` has joint density
//!   `(1/2pi) int_0^inf (y+|z|) y^(-1/2) exp(-u^2/(2y) - (y+|z|)^2/2) dy`;
//! * `(|Y|, Z)` has density `(2pi)^(-1/2) (y+|z|) exp(-(y+|z|)^2/2)` on `y >= 0`;
//! * the Brownian local time at zero satisfies
//!   `E exp(-theta eta(0,t)) = 2 exp(theta^2 t/2) (1 - Phi(theta sqrt t))`.
//!
//! Semi-infinite integrals are cut where an explicit tail bound falls below
//! a tenth of the absolute tolerance. The `y^(-1/2)` singularity of the
//! joint density is removed by `y = w^2`.

use std::f64::consts::{FRAC_1_PI, FRAC_2_PI, PI, SQRT_2};
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::quadrature::{integrate, integrate_with_breaks, QuadratureSpec};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn dobrushin_integrand(u2: f64, v: f64) -> f64 {
    let v2 = v * v;
    let a = if u2 == 0.0 { 0.0 } else { u2 / (2.0 * v2) };
    (-a - 0.5 * v2 * v2).exp()
}

/// Bound on `int_V^inf exp(-v^4/2) dv`, valid for `V >= 1`.
fn quartic_tail(v: f64) -> f64 {
    (-0.5 * v.powi(4)).exp() / (2.0 * v.powi(3))
}

/// Density of `X |Y|^(1/2)`.
pub fn dobrushin_density(u: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let u2 = u * u;
    let cut = spec.truncation_radius(1.0, |v| FRAC_2_PI * quartic_tail(v));
    // the integrand peaks at v = (u^2/2)^(1/6)
    let peak = (0.5 * u2).powf(1.0 / 6.0);
    let breaks: Vec<f64> = if peak > 0.0 && peak < cut {
        vec![0.0, peak, cut]
    } else {
        vec![0.0, cut]
    };
    let r = integrate_with_breaks(|v| dobrushin_integrand(u2, v), &breaks, spec)?;
    Ok(FRAC_2_PI * r.value)
}

/// Joint density of `(X |Y|^(1/2), Z)`, integrated over `w = y^(1/2)`:
/// `(1/pi) int_0^inf (w^2+|z|) exp(-u^2/(2w^2) - (w^2+|z|)^2/2) dw`.
pub fn joint_density_uz(u: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let u2 = u * u;
    let az = z.abs();
    let cut = spec.truncation_radius(1.0, |w| FRAC_1_PI * (-0.5 * w.powi(4)).exp() / (2.0 * w));
    let integrand = |w: f64| {
        let s = w * w + az;
        let a = if u2 == 0.0 { 0.0 } else { u2 / (2.0 * w * w) };
        s * (-a - 0.5 * s * s).exp()
    };
    let peak = (0.5 * u2).powf(1.0 / 6.0);
    let breaks: Vec<f64> = if peak > 0.0 && peak < cut {
        vec![0.0, peak, cut]
    } else {
        vec![0.0, cut]
    };
    let r = integrate_with_breaks(integrand, &breaks, spec)?;
    Ok(FRAC_1_PI * r.value)
}

/// Joint density of `(|Y|, Z)`.
pub fn eta_absw_density(y: f64, z: f64) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(Error::invalid(format!("|Y| density needs y >= 0, got {y}")));
    }
    let s = y + z.abs();
    Ok(FRAC_1_SQRT_2PI * s * (-0.5 * s * s).exp())
}

/// Largest `theta sqrt(t)` evaluated by the direct product; beyond it the
/// Mills-ratio series is used.
pub const LAPLACE_ASYMPTOTIC_SWITCH: f64 = 30.0;

/// `E exp(-theta eta(0,t)) = 2 exp(theta^2 t/2) (1 - Phi(theta sqrt t))`.
pub fn local_time_laplace(theta: f64, t: f64) -> Result<f64> {
    if !(theta > 0.0 && t > 0.0) || !theta.is_finite() || !t.is_finite() {
        return Err(Error::invalid(format!(
            "Laplace transform needs theta > 0 and t > 0, got theta = {theta}, t = {t}"
        )));
    }
    let x = theta * t.sqrt();
    if x <= LAPLACE_ASYMPTOTIC_SWITCH {
        // 2 (1 - Phi(x)) = erfc(x / sqrt 2)
        Ok((0.5 * x * x).exp() * libm::erfc(x / SQRT_2))
    } else {
        // 1 - Phi(x) = phi(x)/x * sum_k (-1)^k (2k-1)!! / x^(2k)
        let inv2 = 1.0 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=10 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        Ok((2.0 / PI).sqrt() / x * sum)
    }
}

/// The constant `c` in `E exp(-theta eta(0,t)) ~ c / (theta sqrt t)`.
pub fn laplace_asymptotic_constant() -> f64 {
    (2.0 / PI).sqrt()
}

/// Mass of `(U, Z)` on the rectangle `[u0, u1] x [z0, z1]`.
///
/// Both inner integrals are done in closed form, leaving
/// `(1/pi) int_0^inf w sqrt(2pi) (Phi(u1/w) - Phi(u0/w)) H(w) dw` with
/// `H(w) = int_{z0}^{z1} (w^2+|z|) exp(-(w^2+|z|)^2/2) dz`.
pub fn joint_uz_cell_mass(
    u0: f64,
    u1: f64,
    z0: f64,
    z1: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if !(u0 <= u1 && z0 <= z1) {
        return Err(Error::invalid("cell bounds must be ordered"));
    }
    let tail = |w: f64, a: f64| {
        let s = w * w + a;
        (-0.5 * s * s).exp()
    };
    let z_factor = |w: f64| -> f64 {
        if z0 >= 0.0 {
            tail(w, z0) - tail(w, z1)
        } else if z1 <= 0.0 {
            tail(w, -z1) - tail(w, -z0)
        } else {
            2.0 * tail(w, 0.0) - tail(w, -z0) - tail(w, z1)
        }
    };
    let u_factor = |w: f64| -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        // difference of upper tails is better conditioned on the right
        if u0 >= 0.0 {
            std_normal_cdf(-u0 / w) - std_normal_cdf(-u1 / w)
        } else {
            std_normal_cdf(u1 / w) - std_normal_cdf(u0 / w)
        }
    };
    let cut = spec.truncation_radius(1.0, |w| (-0.5 * w.powi(4)).exp() / w);
    let c = (2.0 * PI).sqrt() * FRAC_1_PI;
    let r = integrate(|w| w * u_factor(w) * z_factor(w), 0.0, cut, spec)?;
    Ok(c * r.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Dobrushin,
    JointUz,
    EtaAbsW,
}

impl ModelId {
    pub fn name(self) -> &'static str {
        match self {
            ModelId::Dobrushin => "dobrushin",
            ModelId::JointUz => "joint-uz",
            ModelId::EtaAbsW => "eta-abs-w",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dobrushin" => Some(ModelId::Dobrushin),
            "joint-uz" => Some(ModelId::JointUz),
            "eta-abs-w" => Some(ModelId::EtaAbsW),
            _ => None,
        }
    }

    fn symmetric(self) -> bool {
        !matches!(self, ModelId::EtaAbsW)
    }
}

/// Spacing of the cached CDF table.
const TABLE_STEP: f64 = 1.0 / 64.0;

/// A one-dimensional law with a cached CDF table.
///
/// For the two-dimensional models the law is that of the first coordinate:
/// `U` for the joint `(U, Z)` law and `|Y|` for the `(|Y|, Z)` law.
#[derive(Clone, Debug)]
pub struct DensityModel {
    id: ModelId,
    spec: QuadratureSpec,
    /// Nodes `0, h, 2h, ...` on the non-negative half line.
    nodes: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl DensityModel {
    pub fn build(id: ModelId, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let radius = match id {
            // P(|X||Y|^(1/2) > r) <= P(|X| > r^(2/3)) + P(|Y| > r^(2/3))
            ModelId::Dobrushin | ModelId::JointUz => {
                spec.truncation_radius(1.0, |r| 4.0 * (-0.5 * r.powf(4.0 / 3.0)).exp())
            }
            ModelId::EtaAbsW => spec.truncation_radius(1.0, |r| 2.0 * (-0.5 * r * r).exp()),
        };
        let cells = (radius / TABLE_STEP).ceil() as usize;
        let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * TABLE_STEP).collect();
        let mut model = DensityModel {
            id,
            spec,
            nodes,
            density: Vec::new(),
            cdf: Vec::new(),
        };
        let density = model
            .nodes
            .iter()
            .map(|&x| model.marginal_density(x))
            .collect::<Result<Vec<_>>>()?;
        let mut cdf = Vec::with_capacity(model.nodes.len());
        let mut acc = if id.symmetric() { 0.5 } else { 0.0 };
        cdf.push(acc);
        for w in model.nodes.windows(2) {
            let cell = integrate(
                |x| model.marginal_density(x).unwrap_or(f64::NAN),
                w[0],
                w[1],
                &spec,
            )?;
            if !cell.value.is_finite() {
                return Err(Error::QuadratureNoConvergence {
                    estimate: cell.value,
                    error: cell.error,
                });
            }
            acc += cell.value;
            cdf.push(acc);
        }
        model.density = density;
        model.cdf = cdf;
        Ok(model)
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Right end of the cached table.
    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn marginal_density(&self, x: f64) -> Result<f64> {
        match self.id {
            // integrating the joint density over z in closed form gives
            // exactly the Dobrushin integrand
            ModelId::Dobrushin | ModelId::JointUz => dobrushin_density(x, &self.spec),
            ModelId::EtaAbsW => {
                if x < 0.0 {
                    Ok(0.0)
                } else {
                    Ok(2.0 * std_normal_pdf(x))
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if self.id.symmetric() {
            self.marginal_density(x.abs())
        } else {
            self.marginal_density(x)
        }
    }

    /// CDF by cubic Hermite interpolation of the cached table.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 {
            return if self.id.symmetric() {
                1.0 - self.cdf(-x)
            } else {
                0.0
            };
        }
        let last = self.nodes.len() - 1;
        if x >= self.nodes[last] {
            return self.cdf[last].min(1.0);
        }
        let i = ((x / TABLE_STEP) as usize).min(last - 1);
        let h = TABLE_STEP;
        let s = (x - self.nodes[i]) / h;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.density[i] * h, self.density[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * f1
            + (s3 - s2) * d1;
        v.clamp(0.0, 1.0)
    }

    /// Mass the cached table assigns to the whole line.
    pub fn table_total_mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CdfRow {
    pub point: f64,
    pub density: f64,
    pub cdf: f64,
}

/// Density and CDF of `model` on a sorted grid.
pub fn cdf_table(model: &DensityModel, grid: &[f64]) -> Result<Vec<CdfRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    let tol = model.spec.abs_tol.max(1e-12);
    let mut rows = Vec::with_capacity(grid.len());
    let mut running = 0.0f64;
    for &x in grid {
        let density = model.density(x)?;
        if density < 0.0 {
            return Err(Error::invalid(format!("negative density {density} at {x}")));
        }
        let c = model.cdf(x);
        if c < running - tol {
            return Err(Error::invalid(format!(
                "CDF decreased at {x}: {running} -> {c}"
            )));
        }
        running = running.max(c);
        rows.push(CdfRow {
            point: x,
            density,
            cdf: running,
        });
    }
    Ok(rows)
}

/// CSV with header `point,density,cdf`.
pub fn write_cdf_csv<W: Write>(rows: &[CdfRow], mut w: W) -> io::Result<()> {
    writeln!(w, "point,density,cdf")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(r.point),
            fmt_f64(r.density),
            fmt_f64(r.cdf)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    /// Maclaurin series of erf, fine for |x| <= 3.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let t = term / (2.0 * n + 1.0);
            sum += t;
            if t.abs() < 1e-18 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        let oracle = 0.5 * (1.0 + erf_series(1.0 / SQRT_2));
        assert!((std_normal_cdf(1.0) - oracle).abs() < 1e-12);
        assert!((std_normal_cdf(1.0) - 0.841345).abs() < 1e-6);
        for z in [0.5, 1.0, 3.0] {
            assert!((std_normal_cdf(z) + std_normal_cdf(-z) - 1.0).abs() < 1e-15);
            let oracle = 0.5 * (1.0 + erf_series(z / SQRT_2));
            assert!((std_normal_cdf(z) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn dobrushin_at_zero_matches_gamma_closed_form() {
        let closed = 2f64.powf(0.25) * libm::tgamma(0.25) / (2.0 * PI);
        let f0 = dobrushin_density(0.0, &spec()).unwrap();
        assert!((f0 - closed).abs() < 1e-12, "{f0} vs {closed}");
        assert!((f0 - 0.6862).abs() < 1e-4);
    }

    #[test]
    fn dobrushin_is_even() {
        for u in [0.3, 1.0, 2.5] {
            let a = dobrushin_density(u, &spec()).unwrap();
            let b = dobrushin_density(-u, &spec()).unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn joint_density_symmetries() {
        let s = spec();
        let p = joint_density_uz(0.7, 1.2, &s).unwrap();
        assert_eq!(p, joint_density_uz(-0.7, 1.2, &s).unwrap());
        assert_eq!(p, joint_density_uz(0.7, -1.2, &s).unwrap());
        assert!(p > 0.0);
    }

    #[test]
    fn eta_absw_values() {
        assert_eq!(eta_absw_density(0.0, 0.0).unwrap(), 0.0);
        let v = eta_absw_density(1.0, 0.0).unwrap();
        assert!((v - 0.241971).abs() < 1e-6);
        assert!((v - FRAC_1_SQRT_2PI * (-0.5f64).exp()).abs() < 1e-16);
        assert!(eta_absw_density(-0.1, 0.0).is_err());
    }

    #[test]
    fn laplace_values() {
        let v = local_time_laplace(1.0, 1.0).unwrap();
        let direct = 2.0 * 0.5f64.exp() * (1.0 - std_normal_cdf(1.0));
        assert!((v - direct).abs() < 1e-14);
        assert!((v - 0.523_156_583_730_2).abs() < 1e-12);
        assert!((local_time_laplace(1e-12, 1.0).unwrap() - 1.0).abs() < 1e-11);
        let big = local_time_laplace(100.0, 1.0).unwrap();
        assert!((big - 0.0079788).abs() < 1e-6);
        assert!(local_time_laplace(0.0, 1.0).is_err());
        assert!(local_time_laplace(1.0, -1.0).is_err());
    }

    #[test]
    fn laplace_branches_agree_at_switch() {
        let x = LAPLACE_ASYMPTOTIC_SWITCH;
        let below = local_time_laplace(x * (1.0 - 1e-12), 1.0).unwrap();
        let above = local_time_laplace(x * (1.0 + 1e-12), 1.0).unwrap();
        assert!(((below - above) / below).abs() < 1e-10);
        // the direct branch at x = 30 against the series
        let series = {
            let inv2 = 1.0 / (x * x);
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..=10 {
                term *= -((2 * k - 1) as f64) * inv2;
                sum += term;
            }
            (2.0 / PI).sqrt() / x * sum
        };
        assert!(((local_time_laplace(x, 1.0).unwrap() - series) / series).abs() < 1e-10);
    }

    #[test]
    fn laplace_scaling_limit() {
        let c = laplace_asymptotic_constant();
        let v = 50.0 * local_time_laplace(50.0, 1.0).unwrap();
        assert!((v / c - 1.0).abs() < 0.01);
        // depends on theta and t only through theta sqrt t
        let a = local_time_laplace(2.0, 0.25).unwrap();
        let b = local_time_laplace(1.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn cell_mass_matches_nested_quadrature() {
        let s = QuadratureSpec::new(1e-11, 1e-9, 2000).unwrap();
        for &(u0, u1, z0, z1) in &[
            (0.0, 0.25, 0.0, 0.25),
            (-0.5, 0.25, -0.75, 0.5),
            (1.0, 1.5, -2.0, -1.0),
        ] {
            let mass = joint_uz_cell_mass(u0, u1, z0, z1, &s).unwrap();
            let nested = integrate(
                |z| {
                    integrate(|u| joint_density_uz(u, z, &s).unwrap(), u0, u1, &s)
                        .unwrap()
                        .value
                },
                z0,
                z1,
                &s,
            )
            .unwrap()
            .value;
            assert!((mass - nested).abs() < 1e-9, "{mass} vs {nested}");
        }
    }

    #[test]
    fn cell_mass_of_whole_plane_is_one() {
        let m = joint_uz_cell_mass(-40.0, 40.0, -40.0, 40.0, &spec()).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cached_cdf_properties() {
        let m = DensityModel::build(ModelId::Dobrushin, spec()).unwrap();
        assert_eq!(m.cdf(0.0), 0.5);
        assert!((m.table_total_mass() - 1.0).abs() < 1e-9);
        let grid: Vec<f64> = (-1000..=1000).map(|i| i as f64 * 0.01).collect();
        let rows = cdf_table(&m, &grid).unwrap();
        assert!(rows.windows(2).all(|w| w[0].cdf <= w[1].cdf));
        assert!((rows.last().unwrap().cdf - 1.0).abs() < 1e-6);
        assert!(rows[0].cdf < 1e-6);
        assert!(rows.iter().all(|r| r.density >= 0.0));
    }

    #[test]
    fn cached_cdf_matches_independent_route() {
        // F(u) = 1/2 + (2/pi) int_0^inf exp(-v^4/2) v sqrt(pi/2) erf(u/(v sqrt 2)) dv
        let s = spec();
        let m = DensityModel::build(ModelId::Dobrushin, s).unwrap();
        for u in [0.013, 0.1, 0.5, 1.0, 1.7, 3.0, 5.0] {
            let oracle = 0.5
                + FRAC_2_PI
                    * integrate(
                        |v: f64| {
                            if v == 0.0 {
                                0.0
                            } else {
                                (-0.5 * v.powi(4)).exp()
                                    * v
                                    * (PI / 2.0).sqrt()
                                    * libm::erf(u / (v * SQRT_2))
                            }
                        },
                        0.0,
                        8.0,
                        &s,
                    )
                    .unwrap()
                    .value;
            assert!(
                (m.cdf(u) - oracle).abs() < 1e-9,
                "u={u}: {} vs {oracle}",
                m.cdf(u)
            );
            assert!((m.cdf(-u) - (1.0 - oracle)).abs() < 1e-9);
        }
    }

    #[test]
    fn half_normal_model() {
        let m = DensityModel::build(ModelId::EtaAbsW, spec()).unwrap();
        for y in [0.0, 0.3, 1.0, 2.2] {
            assert!((m.cdf(y) - (2.0 * std_normal_cdf(y) - 1.0)).abs() < 1e-10);
        }
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.density(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_table_rejects_unsorted_grid() {
        let m = DensityModel::build(ModelId::EtaAbsW, spec()).unwrap();
        assert!(cdf_table(&m, &[0.0, 1.0, 0.5]).is_err());
        assert!(cdf_table(&m, &[]).is_err());
    }

    #[test]
    fn model_names_round_trip() {
        for id in [ModelId::Dobrushin, ModelId::JointUz, ModelId::EtaAbsW] {
            assert_eq!(ModelId::parse(id.name()), Some(id));
        }
        assert_eq!(ModelId::parse("laplace"), None);
    }
}
