//! Scenario execution: each command is a strategy behind the
//! [`ScenarioCommand`] trait, registered by name in a [`CommandRegistry`]
//! and selected at runtime from configuration or the CLI. A scenario is
//! fully determined by its inputs and seed, so reports are reproducible
//! byte for byte.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebroid::AlgebroidSpec;
use crate::catalog;
use crate::error::{Error, Result};
use crate::expr::{Expression, VariableContext};
use crate::induction::{CaseRegistry, LagrangeDomain, LagrangeStructure};
use crate::prolongation;
use crate::report::{CheckResult, ResidualAccumulator, ResidualReport, Tolerances};
use crate::sampling::{self, SamplingSpec};
use crate::spray::{self, SprayField, SpraySource, Trajectory, SPRAY_LAMBDAS};
use crate::wirtinger::{self, WPoint};

fn default_domain() -> String {
    "e".to_string()
}

/// A reproducible run request. The seed lives in the sampling spec, so two
/// identical scenarios produce byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub command: String,
    pub algebroid: String,
    #[serde(default)]
    pub lagrangian: Option<String>,
    /// `"e"` or `"tm"`; which bundle the Lagrangian text lives on.
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default)]
    pub case: Option<u8>,
    #[serde(default)]
    pub direction: Option<String>,
    #[serde(default)]
    pub spray: Option<Vec<String>>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default, rename = "points")]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Optional probe point (z components then u components); values of
    /// derived quantities are echoed there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbePoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbePoint {
    pub z: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
}

impl ProbePoint {
    pub fn to_point(&self) -> WPoint {
        WPoint::new(
            self.z
                .iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect(),
            self.u
                .iter()
                .map(|[re, im]| Complex64::new(*re, *im))
                .collect(),
        )
    }
}

/// The machine-readable result of a run: environment echo, sorted checks,
/// optional derived values, overall pass flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub algebroid: String,
    pub seed: u64,
    pub points: usize,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub values: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// Everything a command needs to run.
pub struct RunContext {
    pub algebroid: AlgebroidSpec,
    pub scenario: Scenario,
    pub points: Vec<WPoint>,
}

impl RunContext {
    fn lagrangian_on_e(&self) -> Result<LagrangeStructure> {
        let text = self
            .scenario
            .lagrangian
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs --lagrangian".to_string()))?;
        LagrangeStructure::on_e(self.algebroid.n, self.algebroid.m, text)
    }

    fn lagrangian_on_tm(&self) -> Result<LagrangeStructure> {
        let text = self
            .scenario
            .lagrangian
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs --lagrangian".to_string()))?;
        LagrangeStructure::on_tm(self.algebroid.n, text)
    }

    fn spray_field(&self) -> Result<SprayField> {
        let texts = self.scenario.spray.as_ref().ok_or_else(|| {
            Error::Config("this command needs --spray coefficient expressions".to_string())
        })?;
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        SprayField::parse(std::sync::Arc::new(self.algebroid.clone()), &refs)
    }

    fn probe_or_first(&self) -> Result<WPoint> {
        if let Some(p) = &self.scenario.probe {
            let point = p.to_point();
            if point.z.len() != self.algebroid.n || point.u.len() != self.algebroid.m {
                return Err(Error::Config(format!(
                    "probe point needs {} z components and {} u components",
                    self.algebroid.n, self.algebroid.m
                )));
            }
            return Ok(point);
        }
        self.points
            .first()
            .cloned()
            .ok_or_else(|| Error::Config("no sample points".to_string()))
    }
}

/// The result of one command: checks plus optional artifacts.
pub struct RunOutput {
    pub checks: ResidualReport,
    pub values: BTreeMap<String, serde_json::Value>,
    pub trajectory: Option<Trajectory>,
}

impl RunOutput {
    fn from_checks(checks: ResidualReport) -> RunOutput {
        RunOutput {
            checks,
            values: BTreeMap::new(),
            trajectory: None,
        }
    }
}

/// A named, interchangeable scenario command.
pub trait ScenarioCommand: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &RunContext) -> Result<RunOutput>;
}

fn complex_vec_json(v: &[Complex64]) -> serde_json::Value {
    serde_json::json!(v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
}

fn grid_json(g: &[Vec<Complex64>]) -> serde_json::Value {
    serde_json::json!(g
        .iter()
        .map(|row| row.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

struct ValidateCommand;

impl ScenarioCommand for ValidateCommand {
    fn name(&self) -> &'static str {
        "validate"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let checks = ctx
            .algebroid
            .validate_structure(&ctx.points, &ctx.scenario.tolerances)?;
        Ok(RunOutput::from_checks(checks))
    }
}

struct DeriveSprayCommand;

impl ScenarioCommand for DeriveSprayCommand {
    fn name(&self) -> &'static str {
        "derive-spray"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let a = &ctx.algebroid;
        let tol = &ctx.scenario.tolerances;
        let l = ctx.lagrangian_on_e()?;
        let mut checks = ResidualReport::default();

        let mut reality = ResidualAccumulator::new("spray_reality", 1e-12);
        let mut homogeneity = ResidualAccumulator::new("spray_homogeneity", tol.exact);
        let mut condition_max = 0.0f64;
        for p in &ctx.points {
            let v = wirtinger::value_at(l.expr(), p)?;
            reality.observe(v.im.abs(), p);
            let base = spray::canonical_spray(a, l.expr(), None, p)?;
            condition_max = condition_max.max(base.metric_condition);
            let mut worst = 0.0f64;
            for lambda in SPRAY_LAMBDAS {
                let scaled = WPoint::new(p.z.clone(), p.u.iter().map(|u| u * lambda).collect());
                let at_scaled = spray::canonical_spray(a, l.expr(), None, &scaled)?;
                for (gs, gb) in at_scaled.g.iter().zip(&base.g) {
                    worst = worst.max((gs - lambda * lambda * gb).norm());
                }
            }
            homogeneity.observe(worst, p);
        }
        checks.push(reality.finish());
        checks.push(homogeneity.finish());

        for (ci, chart) in a.charts.iter().enumerate() {
            let mut report = spray::semispray_change_residual(
                a,
                &SpraySource::Canonical(l.expr().clone()),
                chart,
                &ctx.points,
                tol,
            )?;
            for c in &mut report.checks {
                c.name = format!("chart{ci}_{}", c.name);
            }
            checks.merge(report);
        }

        let mut values = BTreeMap::new();
        let probe = ctx.probe_or_first()?;
        let at_probe = spray::canonical_spray(a, l.expr(), None, &probe)?;
        values.insert("spray_at_probe".to_string(), complex_vec_json(&at_probe.g));
        values.insert(
            "probe".to_string(),
            serde_json::json!({
                "z": probe.z.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                "u": probe.u.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
            }),
        );
        values.insert(
            "metric_condition_max".to_string(),
            serde_json::json!(condition_max),
        );
        Ok(RunOutput {
            checks,
            values,
            trajectory: None,
        })
    }
}

struct DeriveConnectionCommand;

impl ScenarioCommand for DeriveConnectionCommand {
    fn name(&self) -> &'static str {
        "derive-connection"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let a = &ctx.algebroid;
        let tol = &ctx.scenario.tolerances;
        let s = ctx.spray_field()?;
        let mut checks = ResidualReport::default();

        // T(semispray) = Liouville, exactly, at every point.
        let mut semispray = ResidualAccumulator::new("semispray_maps_to_liouville", 0.0);
        for p in &ctx.points {
            let g = s.g_at(p)?;
            let coeffs = prolongation::semispray_coefficients(&g, p);
            let mapped = prolongation::tangent_structure_apply(&coeffs);
            let liou = prolongation::liouville_section(p);
            let worst = mapped
                .v
                .iter()
                .zip(&liou.v)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            semispray.observe(worst, p);
        }
        checks.push(semispray.finish());

        if let Some(text) = &ctx.scenario.lagrangian {
            let ctx_e = VariableContext::full(a.n, a.m);
            let l = Expression::parse(text, &ctx_e)?;
            let mut matches = ResidualAccumulator::new("spray_matches_lagrangian", tol.metric);
            for p in &ctx.points {
                let canonical = spray::canonical_spray(a, &l, None, p)?;
                let given = s.g_at(p)?;
                let worst = canonical
                    .g
                    .iter()
                    .zip(&given)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                matches.observe(worst, p);
            }
            checks.push(matches.finish());
        }

        for (ci, chart) in a.charts.iter().enumerate() {
            let mut report =
                prolongation::theorem_connection_change_residual(a, &s, chart, &ctx.points, tol)?;
            for c in &mut report.checks {
                c.name = format!("chart{ci}_{}", c.name);
            }
            checks.merge(report);
        }

        let mut values = BTreeMap::new();
        let probe = ctx.probe_or_first()?;
        let n = prolongation::nlc_from_spray(a, &s, None, &probe)?;
        values.insert("connection_at_probe".to_string(), grid_json(&n));
        Ok(RunOutput {
            checks,
            values,
            trajectory: None,
        })
    }
}

struct InduceCommand;

impl ScenarioCommand for InduceCommand {
    fn name(&self) -> &'static str {
        "induce"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let a = &ctx.algebroid;
        let tol = &ctx.scenario.tolerances;
        let registry = CaseRegistry::default();
        let case = match ctx.scenario.case {
            Some(id) => registry
                .by_id(id)
                .ok_or_else(|| Error::Config(format!("unknown rank case {id}")))?,
            None => registry
                .for_algebroid(a)
                .ok_or_else(|| Error::Config("no rank case matches this algebroid".to_string()))?,
        };
        let lagrangian = match case.case_id() {
            3 => ctx.lagrangian_on_e()?,
            _ => ctx.lagrangian_on_tm()?,
        };
        let mut checks = ResidualReport::default();
        let mut reality = ResidualAccumulator::new("lagrangian_reality", 1e-12);
        for p in &ctx.points {
            let probe = match lagrangian.domain {
                LagrangeDomain::OnE => p.clone(),
                LagrangeDomain::OnTM => crate::induction::linked_tm_point(a, p)?,
            };
            let v = wirtinger::value_at(lagrangian.expr(), &probe)?;
            reality.observe(v.im.abs(), p);
        }
        checks.push(reality.finish());
        checks.merge(case.run(a, &lagrangian, &ctx.points, tol)?);
        let mut values = BTreeMap::new();
        values.insert("case".to_string(), serde_json::json!(case.case_id()));
        values.insert("case_name".to_string(), serde_json::json!(case.name()));
        Ok(RunOutput {
            checks,
            values,
            trajectory: None,
        })
    }
}

struct IntegrateCommand;

impl ScenarioCommand for IntegrateCommand {
    fn name(&self) -> &'static str {
        "integrate"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let a = &ctx.algebroid;
        let tol = &ctx.scenario.tolerances;
        let t_end = ctx.scenario.t_end.unwrap_or(1.0);
        let step = ctx.scenario.step.unwrap_or(1e-3);
        let x0 = ctx.probe_or_first()?;
        let traj = if ctx.scenario.spray.is_some() {
            let s = ctx.spray_field()?;
            spray::integrate(&s, &x0, t_end, step)?
        } else {
            let l = ctx.lagrangian_on_e()?;
            let expr = l.expr().clone();
            let a_clone = a.clone();
            spray::integrate_with(
                a,
                &move |p: &WPoint| Ok(spray::canonical_spray(&a_clone, &expr, None, p)?.g),
                &x0,
                t_end,
                step,
            )?
        };
        let mut checks = ResidualReport::default();
        let mut adm = ResidualAccumulator::new("ode_admissibility", tol.ode);
        adm.observe_value(spray::admissibility_residual(a, &traj)?);
        checks.push(adm.finish());

        let mut values = BTreeMap::new();
        let (t, z, u) = traj.samples.last().cloned().unwrap();
        values.insert("t_end".to_string(), serde_json::json!(t));
        values.insert("z_end".to_string(), complex_vec_json(&z));
        values.insert("u_end".to_string(), complex_vec_json(&u));
        values.insert(
            "steps".to_string(),
            serde_json::json!(traj.samples.len() - 1),
        );
        Ok(RunOutput {
            checks,
            values,
            trajectory: Some(traj),
        })
    }
}

struct ReportCommand;

impl ScenarioCommand for ReportCommand {
    fn name(&self) -> &'static str {
        "report"
    }
    fn run(&self, ctx: &RunContext) -> Result<RunOutput> {
        let a = &ctx.algebroid;
        let tol = &ctx.scenario.tolerances;
        let mut checks = a.validate_structure(&ctx.points, tol)?;
        checks.merge(prolongation::basis_bracket_residuals(a, &ctx.points, tol)?);
        checks.merge(prolongation::prolong_differential_check(
            a,
            &ctx.points,
            tol,
        )?);
        checks.merge(prolongation::lemma_checks(a, &ctx.points)?);

        let mut values = BTreeMap::new();
        if ctx.scenario.lagrangian.is_some() {
            let on_e = ctx.scenario.domain == "e";
            if on_e {
                let sub = DeriveSprayCommand.run(ctx)?;
                checks.merge(sub.checks);
                values.extend(sub.values);
            }
            let registry = CaseRegistry::default();
            if let Some(case) = registry.for_algebroid(a) {
                let wants_tm = case.case_id() != 3;
                let runnable = if wants_tm { !on_e || a.n == a.m } else { on_e };
                if runnable {
                    let lagrangian = if wants_tm {
                        ctx.lagrangian_on_tm()?
                    } else {
                        ctx.lagrangian_on_e()?
                    };
                    checks.merge(case.run(a, &lagrangian, &ctx.points, tol)?);
                    values.insert("case".to_string(), serde_json::json!(case.case_id()));
                }
            }
        }
        Ok(RunOutput {
            checks,
            values,
            trajectory: None,
        })
    }
}

/// Strategy registry: commands selected by name at runtime.
pub struct CommandRegistry {
    commands: Vec<Box<dyn ScenarioCommand>>,
}

impl Default for CommandRegistry {
    fn default() -> Self {
        CommandRegistry {
            commands: vec![
                Box::new(ValidateCommand),
                Box::new(DeriveSprayCommand),
                Box::new(DeriveConnectionCommand),
                Box::new(InduceCommand),
                Box::new(IntegrateCommand),
                Box::new(ReportCommand),
            ],
        }
    }
}

impl CommandRegistry {
    pub fn by_name(&self, name: &str) -> Option<&dyn ScenarioCommand> {
        self.commands
            .iter()
            .find(|c| c.name() == name)
            .map(|c| c.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.commands.iter().map(|c| c.name()).collect()
    }
}

/// Resolve a catalog name or a JSON definition file.
pub fn load_algebroid(name_or_path: &str) -> Result<AlgebroidSpec> {
    if let Some(a) = catalog::by_name(name_or_path) {
        return Ok(a);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return AlgebroidSpec::from_json(&text);
    }
    Err(Error::Config(format!(
        "`{name_or_path}` is neither a catalog entry ({}) nor a definition file",
        catalog::all()
            .iter()
            .map(|a| a.name.clone())
            .collect::<Vec<_>>()
            .join(", ")
    )))
}

/// Execute a scenario end to end and assemble the deterministic report.
pub fn run(scenario: &Scenario) -> Result<(RunReport, Option<Trajectory>)> {
    let registry = CommandRegistry::default();
    let command = registry.by_name(&scenario.command).ok_or_else(|| {
        Error::Config(format!(
            "unknown command `{}` (expected one of {})",
            scenario.command,
            registry.names().join(", ")
        ))
    })?;
    let algebroid = load_algebroid(&scenario.algebroid)?;
    let points = sampling::sample_points(&algebroid, &scenario.sampling);
    let ctx = RunContext {
        algebroid,
        scenario: scenario.clone(),
        points,
    };
    let output = command.run(&ctx)?;
    let checks = output.checks.finalize();
    let report = RunReport {
        command: scenario.command.clone(),
        algebroid: ctx.algebroid.name.clone(),
        seed: scenario.sampling.seed,
        points: scenario.sampling.count,
        tolerances: scenario.tolerances,
        lagrangian: scenario.lagrangian.clone(),
        case: scenario.case.or_else(|| {
            output
                .values
                .get("case")
                .and_then(|v| v.as_u64())
                .map(|v| v as u8)
        }),
        direction: scenario.direction.clone(),
        values: output.values,
        pass: checks.pass(),
        checks: checks.checks,
    };
    Ok((report, output.trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(command: &str, algebroid: &str) -> Scenario {
        Scenario {
            command: command.to_string(),
            algebroid: algebroid.to_string(),
            lagrangian: None,
            domain: "e".to_string(),
            case: None,
            direction: None,
            spray: None,
            t_end: None,
            step: None,
            sampling: SamplingSpec {
                count: 20,
                ..Default::default()
            },
            tolerances: Tolerances::default(),
            probe: None,
        }
    }

    #[test]
    fn validate_passes_on_catalog() {
        for name in ["trivial", "tangent", "scaled", "heisenberg-like"] {
            let (report, _) = run(&scenario("validate", name)).unwrap();
            assert!(report.pass, "{name}: {report:?}");
        }
    }

    #[test]
    fn derive_spray_reports_probe_value() {
        let mut s = scenario("derive-spray", "trivial");
        s.lagrangian = Some("z1*zb1*u1*ub1".to_string());
        s.probe = Some(ProbePoint {
            z: vec![[1.0, 0.0]],
            u: vec![[2.0, 0.0]],
        });
        let (report, _) = run(&s).unwrap();
        assert!(report.pass, "{report:?}");
        let g = report.values.get("spray_at_probe").unwrap();
        let g0 = g.as_array().unwrap()[0].as_array().unwrap();
        assert!((g0[0].as_f64().unwrap() - 2.0).abs() < 1e-10);
        assert!(g0[1].as_f64().unwrap().abs() < 1e-10);
    }

    #[test]
    fn unknown_command_is_a_config_error() {
        let s = scenario("explode", "trivial");
        assert!(matches!(run(&s), Err(Error::Config(_))));
    }

    #[test]
    fn induce_selects_case_by_rank() {
        let mut s = scenario("induce", "immersion");
        s.lagrangian = Some("u1*ub1 + u2*ub2 + z1*zb1*u1*ub1".to_string());
        s.domain = "tm".to_string();
        let (report, _) = run(&s).unwrap();
        assert_eq!(report.case, Some(2));
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn reports_are_byte_identical_for_same_seed() {
        let mut s = scenario("report", "trivial");
        s.lagrangian = Some("z1*zb1*u1*ub1".to_string());
        let (r1, _) = run(&s).unwrap();
        let (r2, _) = run(&s).unwrap();
        let j1 = serde_json::to_string_pretty(&r1).unwrap();
        let j2 = serde_json::to_string_pretty(&r2).unwrap();
        assert_eq!(j1, j2);
        assert!(r1.pass);
    }

    #[test]
    fn full_report_passes_across_the_catalog() {
        // Lagrangian per entry (fiber metric must be regular for the spray
        // derivation); immersion runs with the tangent-bundle domain.
        let cases = [
            ("trivial", "z1*zb1*u1*ub1", "e"),
            ("tangent", "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1", "e"),
            ("scaled", "u1*ub1 + z1*zb1*u1*ub1", "e"),
            ("immersion", "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1", "tm"),
            ("submersion", "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1", "e"),
            ("twochart", "z1*zb1*u1*ub1", "e"),
            (
                "heisenberg-like",
                "u1*ub1 + u2*ub2 + u3*ub3 + z1*zb1*u1*ub1",
                "e",
            ),
        ];
        for (name, lagrangian, domain) in cases {
            let mut s = scenario("report", name);
            s.lagrangian = Some(lagrangian.to_string());
            s.domain = domain.to_string();
            s.sampling.count = 12;
            let (report, _) = run(&s).unwrap();
            assert!(report.pass, "{name}: {report:?}");
        }
    }

    #[test]
    fn integrate_exports_trajectory() {
        let mut s = scenario("integrate", "trivial");
        s.spray = Some(vec!["0".to_string()]);
        s.probe = Some(ProbePoint {
            z: vec![[0.0, 0.0]],
            u: vec![[1.0, 0.0]],
        });
        s.t_end = Some(1.0);
        s.step = Some(0.01);
        let (report, traj) = run(&s).unwrap();
        assert!(report.pass, "{report:?}");
        let traj = traj.unwrap();
        let (_, z, _) = traj.samples.last().unwrap();
        assert!((z[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }
}
