//! Semisprays and sprays on the tangent bundle of the total space:
//! the canonical spray of a regular Lagrangian, transformation-law and
//! homogeneity residuals, and integral curves by classical Runge-Kutta.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::algebroid::{AlgebroidSpec, ChartData};
use crate::chart;
use crate::error::{Error, Result};
use crate::expr::{Expression, Var, VariableContext};
use crate::linalg::{self, CMat};
use crate::report::{ResidualAccumulator, ResidualReport, Tolerances};
use crate::wirtinger::{self, WPoint};

/// A semispray in coefficient form: the base part is forced to `rho u`,
/// the vertical part is `-2 G^a(z, u)`.
#[derive(Debug, Clone)]
pub struct SprayField {
    algebroid: Arc<AlgebroidSpec>,
    g: Vec<Expression>,
}

impl SprayField {
    pub fn new(algebroid: Arc<AlgebroidSpec>, g: Vec<Expression>) -> Result<SprayField> {
        if g.len() != algebroid.m {
            return Err(Error::DimensionMismatch(format!(
                "spray needs {} coefficient expressions",
                algebroid.m
            )));
        }
        Ok(SprayField { algebroid, g })
    }

    pub fn parse(algebroid: Arc<AlgebroidSpec>, texts: &[&str]) -> Result<SprayField> {
        let ctx = VariableContext::full(algebroid.n, algebroid.m);
        let g = texts
            .iter()
            .map(|t| Expression::parse(t, &ctx).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        SprayField::new(algebroid, g)
    }

    pub fn algebroid(&self) -> &Arc<AlgebroidSpec> {
        &self.algebroid
    }

    pub fn coefficients(&self) -> &[Expression] {
        &self.g
    }

    pub fn g_at(&self, p: &WPoint) -> Result<Vec<Complex64>> {
        self.g.iter().map(|e| wirtinger::value_at(e, p)).collect()
    }

    /// `dg[a][b] = d G^a / d u^b`.
    pub fn g_du_at(&self, p: &WPoint) -> Result<CMat> {
        self.g
            .iter()
            .map(|e| {
                (0..self.algebroid.m)
                    .map(|b| wirtinger::d1(e, p, Var::u(b)))
                    .collect()
            })
            .collect()
    }
}

/// Canonical-spray values at a point, with the reported conditioning of the
/// fiber metric.
#[derive(Debug, Clone)]
pub struct CanonicalSpray {
    pub g: Vec<Complex64>,
    pub metric_condition: f64,
}

/// Coefficients of the canonical spray of a regular Lagrangian:
/// `G^a = 1/2 (g^{b-bar a} d2L/dz^k dubar^b + 1/2 (W dM/dz^k u)^a) rho^k_g u^g`.
///
/// The `W dM` correction refers the fiber trivialization to the designated
/// reference chart, so it vanishes (`chart = None`) when the formula is
/// evaluated in the reference chart itself.
pub fn canonical_spray(
    a: &AlgebroidSpec,
    lagrangian: &Expression,
    chart_arg: Option<&ChartData>,
    p: &WPoint,
) -> Result<CanonicalSpray> {
    wirtinger::reality_check(lagrangian, std::slice::from_ref(p), 1e-12)?;
    let second = chart::lagrangian_second(lagrangian, p, a.n, a.m)?;
    let det = linalg::determinant(&second.g).norm();
    if det < 1e-12 {
        return Err(Error::SingularMetric { det });
    }
    let ginv = linalg::invert(&second.g, 1e-14).ok_or(Error::SingularMetric { det })?;
    let metric_condition = linalg::condition_estimate(&second.g, 1e-14);

    let eta = linalg::mat_vec(&a.anchor_at(p)?, &p.u);
    let mut correction = vec![vec![Complex64::new(0.0, 0.0); a.n]; a.m]; // [a][k]
    if let Some(ch) = chart_arg {
        let cd = chart::chart_point_data(a, ch, p)?;
        for alpha in 0..a.m {
            for k in 0..a.n {
                let mut acc = Complex64::new(0.0, 0.0);
                for e in 0..a.m {
                    for b in 0..a.m {
                        acc += cd.w[alpha][e] * cd.dm[e][b][k] * p.u[b];
                    }
                }
                correction[alpha][k] = acc;
            }
        }
    }

    let mut g_out = vec![Complex64::new(0.0, 0.0); a.m];
    for alpha in 0..a.m {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..a.n {
            let mut paren = Complex64::new(0.0, 0.0);
            for beta in 0..a.m {
                paren += ginv[beta][alpha] * second.l_zu[k][beta];
            }
            paren += 0.5 * correction[alpha][k];
            acc += paren * eta[k];
        }
        g_out[alpha] = 0.5 * acc;
    }
    Ok(CanonicalSpray {
        g: g_out,
        metric_condition,
    })
}

/// Canonical spray evaluated in the target chart at the matched point, with
/// every ingredient chain-ruled from source-chart expressions.
pub fn canonical_spray_tilde(
    a: &AlgebroidSpec,
    lagrangian: &Expression,
    ch: &ChartData,
    p: &WPoint,
) -> Result<Vec<Complex64>> {
    let second = chart::tilde_lagrangian_second(a, lagrangian, ch, p)?;
    let det = linalg::determinant(&second.g).norm();
    let ginv = linalg::invert(&second.g, 1e-14).ok_or(Error::SingularMetric { det })?;
    let structure = chart::transformed_structure(a, ch, p)?;
    let cd = chart::chart_point_data(a, ch, p)?;
    let eta_tilde = linalg::mat_vec(&structure.anchor, &cd.u_tilde);
    let mut g_out = vec![Complex64::new(0.0, 0.0); a.m];
    for alpha in 0..a.m {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..a.n {
            let mut paren = Complex64::new(0.0, 0.0);
            for beta in 0..a.m {
                paren += ginv[beta][alpha] * second.l_zu[k][beta];
            }
            acc += paren * eta_tilde[k];
        }
        g_out[alpha] = 0.5 * acc;
    }
    Ok(g_out)
}

/// How spray coefficients are produced, so the covariance residual can
/// evaluate both charts.
#[derive(Debug, Clone)]
pub enum SpraySource {
    /// Coefficient expressions reused verbatim in each chart.
    Field(SprayField),
    /// Canonical spray of a Lagrangian, re-derived per chart.
    Canonical(Expression),
}

/// Residual of the spray transformation law
/// `G~^a - M^a_b G^b + 1/2 dM^a_b/dz^k u^b rho^k_g u^g` over a point batch,
/// together with the base-component covariance (which holds by construction
/// and is re-checked numerically).
pub fn semispray_change_residual(
    a: &AlgebroidSpec,
    source: &SpraySource,
    ch: &ChartData,
    points: &[WPoint],
    tol: &Tolerances,
) -> Result<ResidualReport> {
    let mut g_law = ResidualAccumulator::new("spray_change_law", tol.metric);
    let mut z_law = ResidualAccumulator::new("spray_base_covariance", tol.exact);
    for p in points {
        let cd = chart::chart_point_data(a, ch, p)?;
        let direct = match source {
            SpraySource::Field(f) => f.g_at(p)?,
            SpraySource::Canonical(l) => canonical_spray(a, l, None, p)?.g,
        };
        let tilde = match source {
            SpraySource::Field(f) => {
                let q = WPoint::new(cd.z_tilde.clone(), cd.u_tilde.clone());
                f.g_at(&q)?
            }
            SpraySource::Canonical(l) => canonical_spray_tilde(a, l, ch, p)?,
        };
        let eta = linalg::mat_vec(&a.anchor_at(p)?, &p.u);
        let mut worst = 0.0f64;
        for alpha in 0..a.m {
            let mut r = tilde[alpha];
            for beta in 0..a.m {
                r -= cd.m[alpha][beta] * direct[beta];
                for k in 0..a.n {
                    r += 0.5 * cd.dm[alpha][beta][k] * p.u[beta] * eta[k];
                }
            }
            worst = worst.max(r.norm());
        }
        g_law.observe(worst, p);

        // Base components: rho~ u~ must equal J (rho u).
        let structure = chart::transformed_structure(a, ch, p)?;
        let lhs = linalg::mat_vec(&structure.anchor, &cd.u_tilde);
        let rhs = linalg::mat_vec(&cd.jac, &eta);
        let worst = lhs
            .iter()
            .zip(&rhs)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        z_law.observe(worst, p);
    }
    let mut report = ResidualReport::default();
    report.push(g_law.finish());
    report.push(z_law.finish());
    Ok(report)
}

/// `max over lambda of |G^a(z, lambda u) - lambda^2 G^a(z, u)|`; a semispray
/// is a spray when this vanishes.
pub fn homogeneity_residual(s: &SprayField, p: &WPoint, lambdas: &[Complex64]) -> Result<f64> {
    let base = s.g_at(p)?;
    let mut worst = 0.0f64;
    for &lambda in lambdas {
        let scaled = WPoint::new(p.z.clone(), p.u.iter().map(|u| u * lambda).collect());
        let at_scaled = s.g_at(&scaled)?;
        for alpha in 0..base.len() {
            worst = worst.max((at_scaled[alpha] - lambda * lambda * base[alpha]).norm());
        }
    }
    Ok(worst)
}

/// The lambda sample used to flag a semispray as a spray.
pub const SPRAY_LAMBDAS: [Complex64; 4] = [
    Complex64::new(2.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(1.0, 1.0),
    Complex64::new(0.5, 0.0),
];

/// Deviation of `[Liouville, S]` from `S`, computed as a vector-field
/// bracket on the fiber coordinates. The horizontal part is reproduced
/// exactly because `rho^k_a u^a` has fiber degree one; the vertical part
/// measures the Euler defect of `G`.
pub fn liouville_bracket_residual(s: &SprayField, p: &WPoint) -> Result<f64> {
    let a = s.algebroid.as_ref();
    let g = s.g_at(p)?;
    let g_du = s.g_du_at(p)?;
    let mut worst = 0.0f64;
    // vertical: L(S^a) - S(u^a) - S^a = u^b d(-2G^a)/du^b + 2G^a - (-2G^a)
    for alpha in 0..a.m {
        let mut acc = Complex64::new(0.0, 0.0);
        for beta in 0..a.m {
            acc += p.u[beta] * (-2.0 * g_du[alpha][beta]);
        }
        acc += 4.0 * g[alpha];
        worst = worst.max(acc.norm());
    }
    // horizontal: u^b d(rho^k_a u^a)/du^b - rho^k_a u^a
    let anchor = a.anchor_at(p)?;
    let eta = linalg::mat_vec(&anchor, &p.u);
    for k in 0..a.n {
        let mut acc = Complex64::new(0.0, 0.0);
        for beta in 0..a.m {
            acc += p.u[beta] * anchor[k][beta];
        }
        acc -= eta[k];
        worst = worst.max(acc.norm());
    }
    Ok(worst)
}

/// An integral curve sampled at the integrator steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, Vec<Complex64>, Vec<Complex64>)>,
    pub step: f64,
    pub method: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryManifest {
    pub method: &'static str,
    pub step: f64,
    pub t_end: f64,
    pub samples: usize,
    pub admissibility_residual: f64,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|(t, _, _)| *t).unwrap_or(0.0)
    }

    /// CSV with columns `t, Re z^k, Im z^k, Re u^a, Im u^a`.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let (n, m) = self
            .samples
            .first()
            .map(|(_, z, u)| (z.len(), u.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["t".to_string()];
        for k in 1..=n {
            header.push(format!("re_z{k}"));
            header.push(format!("im_z{k}"));
        }
        for a in 1..=m {
            header.push(format!("re_u{a}"));
            header.push(format!("im_u{a}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for (t, z, u) in &self.samples {
            let mut row = vec![format!("{t}")];
            for c in z {
                row.push(format!("{}", c.re));
                row.push(format!("{}", c.im));
            }
            for c in u {
                row.push(format!("{}", c.re));
                row.push(format!("{}", c.im));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn finite(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Classical fourth-order Runge-Kutta on
/// `dz/dt = rho(z) u`, `du/dt = -2 G(z, u)` with a real curve parameter.
pub fn integrate(s: &SprayField, x0: &WPoint, t_end: f64, step: f64) -> Result<Trajectory> {
    let a = s.algebroid.clone();
    integrate_with(a.as_ref(), &|p: &WPoint| s.g_at(p), x0, t_end, step)
}

/// Same integrator with any pointwise spray-coefficient evaluator (for
/// sprays that exist only as derived values, e.g. the canonical spray).
pub fn integrate_with(
    a: &AlgebroidSpec,
    g_fn: &dyn Fn(&WPoint) -> Result<Vec<Complex64>>,
    x0: &WPoint,
    t_end: f64,
    step: f64,
) -> Result<Trajectory> {
    assert!(step > 0.0 && t_end > 0.0, "step and t_end must be positive");
    let rhs = |z: &[Complex64], u: &[Complex64]| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let p = WPoint::new(z.to_vec(), u.to_vec());
        let dz = linalg::mat_vec(&a.anchor_at(&p)?, u);
        let g = g_fn(&p)?;
        let du = g.iter().map(|c| -2.0 * c).collect();
        Ok((dz, du))
    };

    let mut t = 0.0f64;
    let mut z = x0.z.clone();
    let mut u = x0.u.clone();
    let mut samples = vec![(t, z.clone(), u.clone())];
    while t < t_end - 1e-15 {
        let h = step.min(t_end - t);
        let (k1z, k1u) = rhs(&z, &u)?;
        let add = |base: &[Complex64], k: &[Complex64], f: f64| -> Vec<Complex64> {
            base.iter().zip(k).map(|(b, k)| b + f * k).collect()
        };
        let (k2z, k2u) = rhs(&add(&z, &k1z, h / 2.0), &add(&u, &k1u, h / 2.0))?;
        let (k3z, k3u) = rhs(&add(&z, &k2z, h / 2.0), &add(&u, &k2u, h / 2.0))?;
        let (k4z, k4u) = rhs(&add(&z, &k3z, h), &add(&u, &k3u, h))?;
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1z[i] + 2.0 * k2z[i] + 2.0 * k3z[i] + k4z[i]);
        }
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
        }
        t += h;
        if !finite(&z) || !finite(&u) {
            return Err(Error::NonFiniteState { t_last: t - h });
        }
        if a.min_singular_distance(&z) < 0.1 {
            return Err(Error::SingularityProximity { t });
        }
        samples.push((t, z.clone(), u.clone()));
    }
    Ok(Trajectory {
        samples,
        step,
        method: "rk4",
    })
}

/// `max_t |dz/dt - rho u|` with the time derivative taken by central
/// differences over the recorded samples.
pub fn admissibility_residual(a: &AlgebroidSpec, traj: &Trajectory) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 1..traj.samples.len().saturating_sub(1) {
        let (t0, z0, _) = &traj.samples[i - 1];
        let (_, z1, u1) = &traj.samples[i];
        let (t2, z2, _) = &traj.samples[i + 1];
        let dt = t2 - t0;
        let p = WPoint::new(z1.clone(), u1.clone());
        let eta = linalg::mat_vec(&a.anchor_at(&p)?, u1);
        for k in 0..z1.len() {
            let fd = (z2[k] - z0[k]) / dt;
            worst = worst.max((fd - eta[k]).norm());
        }
    }
    Ok(worst)
}

pub fn manifest(a: &AlgebroidSpec, traj: &Trajectory) -> Result<TrajectoryManifest> {
    Ok(TrajectoryManifest {
        method: traj.method,
        step: traj.step,
        t_end: traj.t_end(),
        samples: traj.samples.len(),
        admissibility_residual: admissibility_residual(a, traj)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(z: &[Complex64], u: &[Complex64]) -> WPoint {
        WPoint::new(z.to_vec(), u.to_vec())
    }

    fn full_ctx(n: usize, m: usize) -> VariableContext {
        VariableContext::full(n, m)
    }

    #[test]
    fn canonical_spray_flat_lagrangian() {
        let a = catalog::trivial();
        let l = Expression::parse("u1*ub1", &full_ctx(1, 1)).unwrap();
        let p = pt(&[c64(0.7, -0.1)], &[c64(2.0, 1.0)]);
        let out = canonical_spray(&a, &l, None, &p).unwrap();
        assert!(out.g[0].norm() < 1e-15);
    }

    #[test]
    fn canonical_spray_closed_form_values() {
        // L = z zb u ub on the trivial algebroid: G = u^2/(2z).
        let a = catalog::trivial();
        let l = Expression::parse("z1*zb1*u1*ub1", &full_ctx(1, 1)).unwrap();
        let p = pt(&[c64(1.0, 0.0)], &[c64(2.0, 0.0)]);
        let out = canonical_spray(&a, &l, None, &p).unwrap();
        assert!((out.g[0] - c64(2.0, 0.0)).norm() < 1e-10);

        let p = pt(&[c64(0.0, 2.0)], &[c64(1.0, 0.0)]);
        let out = canonical_spray(&a, &l, None, &p).unwrap();
        assert!((out.g[0] - c64(0.0, -0.25)).norm() < 1e-10);
    }

    #[test]
    fn canonical_spray_rejects_bad_inputs() {
        let a = catalog::trivial();
        // Degenerate metric: no u ub term.
        let l = Expression::parse("z1*zb1", &full_ctx(1, 1)).unwrap();
        let p = pt(&[c64(1.0, 0.0)], &[c64(1.0, 0.0)]);
        assert!(matches!(
            canonical_spray(&a, &l, None, &p),
            Err(Error::SingularMetric { .. })
        ));
        // Not real-valued.
        let l = Expression::parse("z1*u1*ub1", &full_ctx(1, 1)).unwrap();
        let p = pt(&[c64(0.0, 1.0)], &[c64(1.0, 0.0)]);
        assert!(matches!(
            canonical_spray(&a, &l, None, &p),
            Err(Error::RealityCheck { .. })
        ));
    }

    #[test]
    fn canonical_spray_covariance_on_twochart() {
        let a = catalog::twochart();
        let ch = a.charts[0].clone();
        let l = Expression::parse("z1*zb1*u1*ub1", &full_ctx(1, 1)).unwrap();
        let points: Vec<WPoint> = (0..12)
            .map(|i| {
                let th = 0.5 + 0.4 * (i as f64);
                pt(
                    &[c64(th.cos() * 1.2, th.sin() * 0.9)],
                    &[c64(0.8, 0.2 * th.sin())],
                )
            })
            .collect();
        let report = semispray_change_residual(
            &a,
            &SpraySource::Canonical(l),
            &ch,
            &points,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(report.pass(), "{:?}", report);
        assert!(report.max_residual("spray_change_law").unwrap() <= 1e-8);
    }

    #[test]
    fn constant_spray_fails_change_law() {
        let a = catalog::twochart();
        let ch = a.charts[0].clone();
        let arc = Arc::new(a.clone());
        let s = SprayField::parse(arc, &["1"]).unwrap();
        let points = vec![pt(&[c64(1.0, 0.3)], &[c64(1.0, 0.0)])];
        let report = semispray_change_residual(
            &a,
            &SpraySource::Field(s),
            &ch,
            &points,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(report.max_residual("spray_change_law").unwrap() > 1e-3);
    }

    #[test]
    fn homogeneity_flags_quadratic_only() {
        let a = Arc::new(catalog::trivial());
        let quad = SprayField::parse(a.clone(), &["u1^2"]).unwrap();
        let p = pt(&[c64(0.5, 0.5)], &[c64(1.0, -1.0)]);
        assert!(homogeneity_residual(&quad, &p, &SPRAY_LAMBDAS).unwrap() < 1e-15);

        let linear = SprayField::parse(a.clone(), &["u1"]).unwrap();
        let p1 = pt(&[c64(0.5, 0.5)], &[c64(1.0, 0.0)]);
        let r = homogeneity_residual(&linear, &p1, &SPRAY_LAMBDAS).unwrap();
        // |lambda - lambda^2| |u| = 2 at lambda = 2, u = 1.
        assert!((r - 2.0).abs() < 1e-12);

        // Canonical spray of the homogeneous Lagrangian: G = u^2/(2z).
        let canonical = SprayField::parse(a, &["u1^2/(2*z1)"]).unwrap();
        let p2 = pt(&[c64(1.3, -0.2)], &[c64(0.4, 0.9)]);
        assert!(homogeneity_residual(&canonical, &p2, &SPRAY_LAMBDAS).unwrap() < 1e-10);
    }

    #[test]
    fn liouville_bracket_measures_euler_defect() {
        let a = Arc::new(catalog::trivial());
        let quad = SprayField::parse(a.clone(), &["u1^2"]).unwrap();
        let p = pt(&[c64(0.2, 0.1)], &[c64(1.5, -0.5)]);
        assert!(liouville_bracket_residual(&quad, &p).unwrap() < 1e-14);

        // Cubic term: the bracket computation gives |-2(u dG/du - 2G)| = 2|u|^3.
        let cubic = SprayField::parse(a.clone(), &["u1^3"]).unwrap();
        let u = c64(1.1, 0.4);
        let p = pt(&[c64(0.2, 0.1)], &[u]);
        let r = liouville_bracket_residual(&cubic, &p).unwrap();
        let expect = (u * u * u * 2.0).norm();
        assert!(
            (r - expect).abs() < 1e-12,
            "residual {r}, expected {expect}"
        );

        // G = 0: both parts reproduce exactly.
        let zero = SprayField::parse(a, &["0"]).unwrap();
        assert!(liouville_bracket_residual(&zero, &p).unwrap() == 0.0);
    }

    #[test]
    fn straight_line_integration_is_exact() {
        let a = Arc::new(catalog::trivial());
        let zero = SprayField::parse(a.clone(), &["0"]).unwrap();
        let x0 = pt(&[c64(0.0, 0.0)], &[c64(1.0, 0.0)]);
        let traj = integrate(&zero, &x0, 1.0, 1e-2).unwrap();
        let (t, z, u) = traj.samples.last().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((z[0] - c64(1.0, 0.0)).norm() < 1e-10);
        assert!((u[0] - c64(1.0, 0.0)).norm() < 1e-10);

        let x0 = pt(&[c64(1.0, 0.0)], &[c64(0.0, 1.0)]);
        let traj = integrate(&zero, &x0, 1.0, 1e-2).unwrap();
        let (_, z, _) = traj.samples.last().unwrap();
        assert!((z[0] - c64(1.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn rk4_order_check() {
        // du/dt = -2u^2, dz/dt = u with u(0) = 1: u(t) = 1/(1 + 2t).
        let a = Arc::new(catalog::trivial());
        let s = SprayField::parse(a, &["u1^2"]).unwrap();
        let x0 = pt(&[c64(0.0, 0.0)], &[c64(1.0, 0.0)]);
        let endpoint = |step: f64| -> Complex64 {
            let traj = integrate(&s, &x0, 1.0, step).unwrap();
            traj.samples.last().unwrap().2[0]
        };
        let reference = endpoint(0.04 / 8.0);
        let e1 = (endpoint(0.04) - reference).norm();
        let e2 = (endpoint(0.02) - reference).norm();
        let factor = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&factor),
            "step-halving factor {factor} outside [12, 20]"
        );
    }

    #[test]
    fn singularity_guard_aborts() {
        // rho = z with singular locus z = 0: drive z toward the origin.
        let a = Arc::new(catalog::scaled());
        let s = SprayField::parse(a, &["0"]).unwrap();
        // dz/dt = z u, u constant = -1: z(t) = z0 exp(-t) heads to 0.
        let x0 = pt(&[c64(0.5, 0.0)], &[c64(-1.0, 0.0)]);
        let err = integrate(&s, &x0, 10.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::SingularityProximity { .. }));
    }

    #[test]
    fn admissibility_of_rk4_runs() {
        let a = Arc::new(catalog::scaled());
        let s = SprayField::parse(a.clone(), &["u1^2"]).unwrap();
        let x0 = pt(&[c64(1.0, 0.0)], &[c64(0.5, 0.2)]);
        let traj = integrate(&s, &x0, 1.0, 1e-3).unwrap();
        let r = admissibility_residual(&a, &traj).unwrap();
        assert!(r <= 1e-6, "admissibility residual {r}");
    }

    #[test]
    fn csv_header_and_rows() {
        let a = Arc::new(catalog::trivial());
        let s = SprayField::parse(a, &["0"]).unwrap();
        let x0 = pt(&[c64(0.0, 0.0)], &[c64(1.0, 0.0)]);
        let traj = integrate(&s, &x0, 0.1, 0.05).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,re_z1,im_z1,re_u1,im_u1");
        assert_eq!(lines.count(), traj.samples.len());
    }
}
