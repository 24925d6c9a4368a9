//! Local data of a holomorphic Lie algebroid — anchor components, structure
//! functions, chart transitions — and the verification of every structural
//! identity they must satisfy.
//!
//! Conventions: the anchor grid stores `rho[alpha][k]` for the coefficient of
//! `d/dz^k` in the image of the frame section `e_alpha`; structure functions
//! are kept once per unordered pair (`alpha < beta`) and expanded by sign.
//! For a holomorphic algebroid every mixed structure function (one barred,
//! one unbarred lower index) vanishes, conjugate data is the literal
//! conjugate, and the mixed identities reduce to formal holomorphy checks.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{Expression, Var, VariableContext};
use crate::linalg::{self, CMat};
use crate::report::{ResidualAccumulator, ResidualReport, Tolerances};
use crate::wirtinger::{self, WPoint};

/// A section written in the local frame: `m` holomorphic components `Z^a(z)`.
#[derive(Debug, Clone)]
pub struct SectionExpr {
    components: Vec<Expression>,
}

impl SectionExpr {
    pub fn new(components: Vec<Expression>) -> SectionExpr {
        assert!(
            !components.is_empty(),
            "a section needs at least one component"
        );
        SectionExpr { components }
    }

    /// The constant basis section `e_alpha`.
    pub fn basis(m: usize, alpha: usize, n: usize) -> SectionExpr {
        let ctx = VariableContext::holomorphic_base(n);
        let components = (0..m)
            .map(|i| {
                let v = if i == alpha { 1.0 } else { 0.0 };
                Expression::constant(Complex64::new(v, 0.0), &ctx)
            })
            .collect();
        SectionExpr { components }
    }

    pub fn parse(texts: &[&str], n: usize) -> Result<SectionExpr> {
        let ctx = VariableContext::holomorphic_base(n);
        let components = texts
            .iter()
            .map(|t| Expression::parse(t, &ctx).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(SectionExpr::new(components))
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, alpha: usize) -> &Expression {
        &self.components[alpha]
    }

    pub fn values_at(&self, p: &WPoint) -> Result<Vec<Complex64>> {
        self.components
            .iter()
            .map(|e| wirtinger::value_at(e, p))
            .collect()
    }

    /// `dz[a][k]` = d Z^a / d z^k.
    pub fn dz_at(&self, p: &WPoint, n: usize) -> Result<Vec<Vec<Complex64>>> {
        self.components
            .iter()
            .map(|e| (0..n).map(|k| wirtinger::d1(e, p, Var::z(k))).collect())
            .collect()
    }
}

/// Declared singular locus of the structure data, excluded from sampling and
/// guarded against during integration.
#[derive(Debug, Clone)]
pub enum SingularLocus {
    /// The hyperplane `z^index = 0`.
    Coordinate { index: usize },
    /// A single base point.
    Point { z: Vec<Complex64> },
}

impl SingularLocus {
    pub fn distance(&self, z: &[Complex64]) -> f64 {
        match self {
            SingularLocus::Coordinate { index } => {
                z.get(*index).map(|c| c.norm()).unwrap_or(f64::INFINITY)
            }
            SingularLocus::Point { z: center } => z
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Transition data of one chart change: `z~(z)` and the fiber transition
/// `M(z)`, with the inverse `W` either user-supplied or inverted per point.
#[derive(Debug, Clone)]
pub struct ChartData {
    pub zmap: Vec<Expression>,
    pub m_grid: Vec<Vec<Expression>>,
    pub w_grid: Option<Vec<Vec<Expression>>>,
}

impl ChartData {
    pub fn m_at(&self, p: &WPoint) -> Result<CMat> {
        self.m_grid
            .iter()
            .map(|row| row.iter().map(|e| wirtinger::value_at(e, p)).collect())
            .collect()
    }

    /// Inverse transition at `p`: user-supplied expressions when present,
    /// partial-pivot inversion of `M` otherwise.
    pub fn w_at(&self, p: &WPoint) -> Result<CMat> {
        if let Some(w) = &self.w_grid {
            return w
                .iter()
                .map(|row| row.iter().map(|e| wirtinger::value_at(e, p)).collect())
                .collect();
        }
        let m = self.m_at(p)?;
        linalg::invert(&m, 1e-12).ok_or(Error::SingularJacobian {
            det: linalg::determinant(&m).norm(),
        })
    }

    /// `jac[k][h]` = d z~^k / d z^h.
    pub fn jacobian_at(&self, p: &WPoint) -> Result<CMat> {
        let n = self.zmap.len();
        self.zmap
            .iter()
            .map(|e| (0..n).map(|h| wirtinger::d1(e, p, Var::z(h))).collect())
            .collect()
    }

    pub fn zmap_at(&self, p: &WPoint) -> Result<Vec<Complex64>> {
        self.zmap
            .iter()
            .map(|e| wirtinger::value_at(e, p))
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CEntryFile {
    gamma: usize,
    alpha: usize,
    beta: usize,
    expr: String,
}

#[derive(Debug, Clone, Deserialize)]
struct ChartFile {
    zmap: Vec<String>,
    #[serde(rename = "M")]
    m: Vec<Vec<String>>,
    #[serde(rename = "W", default)]
    w: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SingularFile {
    Coordinate { coordinate: usize },
    Point { point: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
struct AlgebroidFile {
    name: String,
    n: usize,
    m: usize,
    rho: Vec<Vec<String>>,
    #[serde(rename = "C", default)]
    c: Vec<CEntryFile>,
    #[serde(default)]
    charts: Vec<ChartFile>,
    #[serde(default)]
    singular: Vec<SingularFile>,
}

/// Local structure data of a holomorphic Lie algebroid.
#[derive(Debug, Clone)]
pub struct AlgebroidSpec {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// `rho[alpha][k]`, all holomorphic in `z`.
    rho: Vec<Vec<Expression>>,
    /// Canonical entries `(gamma, alpha, beta)` with `alpha < beta`.
    c: BTreeMap<(usize, usize, usize), Expression>,
    pub charts: Vec<ChartData>,
    pub singular: Vec<SingularLocus>,
}

impl AlgebroidSpec {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        rho: Vec<Vec<Expression>>,
        c_entries: Vec<(usize, usize, usize, Expression)>,
        charts: Vec<ChartData>,
        singular: Vec<SingularLocus>,
    ) -> Result<AlgebroidSpec> {
        if rho.len() != m || rho.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "anchor grid must be {m} x {n} (one row per frame section)"
            )));
        }
        let mut c = BTreeMap::new();
        for (gamma, alpha, beta, expr) in c_entries {
            if gamma >= m || alpha >= m || beta >= m {
                return Err(Error::DimensionMismatch(
                    "structure-function index out of range".to_string(),
                ));
            }
            if alpha == beta {
                return Err(Error::UnsupportedInput(
                    "structure functions are antisymmetric; entries with alpha == beta must be zero".to_string(),
                ));
            }
            let (key, stored) = if alpha < beta {
                ((gamma, alpha, beta), expr)
            } else {
                ((gamma, beta, alpha), expr.neg())
            };
            if c.insert(key, stored).is_some() {
                return Err(Error::UnsupportedInput(format!(
                    "duplicate structure-function entry for ({}, {}, {})",
                    key.0 + 1,
                    key.1 + 1,
                    key.2 + 1
                )));
            }
        }
        for chart in &charts {
            if chart.zmap.len() != n
                || chart.m_grid.len() != m
                || chart.m_grid.iter().any(|row| row.len() != m)
            {
                return Err(Error::DimensionMismatch(
                    "chart data shapes must match (n, m)".to_string(),
                ));
            }
        }
        Ok(AlgebroidSpec {
            name: name.into(),
            n,
            m,
            rho,
            c,
            charts,
            singular,
        })
    }

    pub fn from_json(text: &str) -> Result<AlgebroidSpec> {
        let file: AlgebroidFile = serde_json::from_str(text)?;
        let zctx = VariableContext::holomorphic_base(file.n);
        let parse = |t: &String| Expression::parse(t, &zctx).map_err(Error::from);
        let rho = file
            .rho
            .iter()
            .map(|row| row.iter().map(parse).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut c_entries = Vec::new();
        for e in &file.c {
            if e.gamma == 0 || e.alpha == 0 || e.beta == 0 {
                return Err(Error::Config(
                    "structure-function indices are 1-based".to_string(),
                ));
            }
            c_entries.push((e.gamma - 1, e.alpha - 1, e.beta - 1, parse(&e.expr)?));
        }
        let mut charts = Vec::new();
        for chart in &file.charts {
            let zmap = chart.zmap.iter().map(parse).collect::<Result<Vec<_>>>()?;
            let m_grid = chart
                .m
                .iter()
                .map(|row| row.iter().map(parse).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let w_grid = match &chart.w {
                Some(rows) => Some(
                    rows.iter()
                        .map(|row| row.iter().map(parse).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            charts.push(ChartData {
                zmap,
                m_grid,
                w_grid,
            });
        }
        let singular = file
            .singular
            .iter()
            .map(|s| match s {
                SingularFile::Coordinate { coordinate } => SingularLocus::Coordinate {
                    index: coordinate.saturating_sub(1),
                },
                SingularFile::Point { point } => SingularLocus::Point {
                    z: point
                        .iter()
                        .map(|[re, im]| Complex64::new(*re, *im))
                        .collect(),
                },
            })
            .collect();
        Self::new(file.name, file.n, file.m, rho, c_entries, charts, singular)
    }

    pub fn rho_expr(&self, alpha: usize, k: usize) -> &Expression {
        &self.rho[alpha][k]
    }

    /// Signed structure-function value accessor; absent entries are zero.
    pub fn c_signed(&self, gamma: usize, alpha: usize, beta: usize) -> Option<(f64, &Expression)> {
        if alpha == beta {
            return None;
        }
        let (key, sign) = if alpha < beta {
            ((gamma, alpha, beta), 1.0)
        } else {
            ((gamma, beta, alpha), -1.0)
        };
        self.c.get(&key).map(|e| (sign, e))
    }

    /// Structure-function component as an owned expression (zero when absent).
    pub fn c_expression(&self, gamma: usize, alpha: usize, beta: usize) -> Expression {
        let zctx = VariableContext::holomorphic_base(self.n);
        match self.c_signed(gamma, alpha, beta) {
            Some((sign, e)) if sign < 0.0 => e.neg(),
            Some((_, e)) => e.clone(),
            None => Expression::constant(Complex64::new(0.0, 0.0), &zctx),
        }
    }

    /// `anchor[k][alpha]` = rho^k_alpha at `p` (the matrix of the map u -> eta).
    pub fn anchor_at(&self, p: &WPoint) -> Result<CMat> {
        let mut out = linalg::zeros(self.n, self.m);
        for (alpha, row) in self.rho.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                out[k][alpha] = wirtinger::value_at(e, p)?;
            }
        }
        Ok(out)
    }

    /// `d[k][alpha][j]` = d rho^k_alpha / d z^j at `p`.
    pub fn anchor_dz_at(&self, p: &WPoint) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); self.n]; self.m]; self.n];
        for (alpha, row) in self.rho.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                for j in 0..self.n {
                    out[k][alpha][j] = wirtinger::d1(e, p, Var::z(j))?;
                }
            }
        }
        Ok(out)
    }

    /// Full antisymmetric table `c[gamma][alpha][beta]` at `p`.
    pub fn c_at(&self, p: &WPoint) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![vec![vec![zero; self.m]; self.m]; self.m];
        for (&(gamma, alpha, beta), e) in &self.c {
            let v = wirtinger::value_at(e, p)?;
            out[gamma][alpha][beta] = v;
            out[gamma][beta][alpha] = -v;
        }
        Ok(out)
    }

    /// `dc[gamma][alpha][beta][j]` = d C^gamma_{alpha beta} / d z^j at `p`.
    pub fn c_dz_at(&self, p: &WPoint) -> Result<Vec<Vec<Vec<Vec<Complex64>>>>> {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![vec![vec![vec![zero; self.n]; self.m]; self.m]; self.m];
        for (&(gamma, alpha, beta), e) in &self.c {
            for j in 0..self.n {
                let v = wirtinger::d1(e, p, Var::z(j))?;
                out[gamma][alpha][beta][j] = v;
                out[gamma][beta][alpha][j] = -v;
            }
        }
        Ok(out)
    }

    /// Numerical anchor rank at `p` (column-pivoted elimination).
    pub fn anchor_rank_at(&self, p: &WPoint, pivot_tol: f64) -> Result<usize> {
        Ok(linalg::rank(&self.anchor_at(p)?, pivot_tol))
    }

    pub fn generic_rank(&self) -> usize {
        self.n.min(self.m)
    }

    pub fn min_singular_distance(&self, z: &[Complex64]) -> f64 {
        self.singular
            .iter()
            .map(|l| l.distance(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// `v^k = Z^alpha(z) rho^k_alpha(z)` at `p`.
    pub fn anchor_apply(&self, s: &SectionExpr, p: &WPoint) -> Result<Vec<Complex64>> {
        self.check_section(s)?;
        let anchor = self.anchor_at(p)?;
        let coeffs = s.values_at(p)?;
        Ok(linalg::mat_vec(&anchor, &coeffs))
    }

    /// Leibniz expansion of the bracket over the structure functions:
    /// `[s1,s2]^g = Z1^a Z2^b C^g_{ab} + rho^k_a Z1^a dZ2^g/dz^k - rho^k_b Z2^b dZ1^g/dz^k`.
    pub fn bracket_sections(
        &self,
        s1: &SectionExpr,
        s2: &SectionExpr,
        p: &WPoint,
    ) -> Result<Vec<Complex64>> {
        self.check_section(s1)?;
        self.check_section(s2)?;
        let anchor = self.anchor_at(p)?;
        let c = self.c_at(p)?;
        let v1 = s1.values_at(p)?;
        let v2 = s2.values_at(p)?;
        let d1 = s1.dz_at(p, self.n)?;
        let d2 = s2.dz_at(p, self.n)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.m];
        for gamma in 0..self.m {
            let mut acc = Complex64::new(0.0, 0.0);
            for alpha in 0..self.m {
                for beta in 0..self.m {
                    acc += v1[alpha] * v2[beta] * c[gamma][alpha][beta];
                }
            }
            for k in 0..self.n {
                for alpha in 0..self.m {
                    acc += anchor[k][alpha] * (v1[alpha] * d2[gamma][k] - v2[alpha] * d1[gamma][k]);
                }
            }
            out[gamma] = acc;
        }
        Ok(out)
    }

    fn check_section(&self, s: &SectionExpr) -> Result<()> {
        if s.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "section has {} components, algebroid rank is {}",
                s.len(),
                self.m
            )));
        }
        Ok(())
    }

    /// Residual of the first structure identity
    /// `rho^j_a d_j rho^i_b - rho^j_b d_j rho^i_a - rho^i_g C^g_{ab}` at `p`.
    pub fn identity_one_residual(&self, p: &WPoint) -> Result<f64> {
        let anchor = self.anchor_at(p)?;
        let danchor = self.anchor_dz_at(p)?;
        let c = self.c_at(p)?;
        Ok(structure_identity_residual(&anchor, &danchor, &c))
    }

    /// Componentwise Jacobi identity expanded through `bracket_sections`
    /// on basis sections; returns the max residual over all index triples.
    pub fn jacobi_residual(&self, p: &WPoint) -> Result<f64> {
        // Triples with a repeated index cancel identically by antisymmetry
        // of the structure functions, so only distinct triples are scanned.
        let mut worst = 0.0f64;
        for alpha in 0..self.m {
            for beta in (alpha + 1)..self.m {
                for gamma in (beta + 1)..self.m {
                    let r = self.jacobi_triple(alpha, beta, gamma, p)?;
                    worst = worst.max(r);
                }
            }
        }
        Ok(worst)
    }

    fn jacobi_triple(&self, alpha: usize, beta: usize, gamma: usize, p: &WPoint) -> Result<f64> {
        let term = |a: usize, b: usize, c: usize| -> Result<Vec<Complex64>> {
            // [e_a, [e_b, e_c]] with the inner bracket written as the
            // section with components C^d_{bc}(z).
            let inner = SectionExpr::new((0..self.m).map(|d| self.c_expression(d, b, c)).collect());
            self.bracket_sections(&SectionExpr::basis(self.m, a, self.n), &inner, p)
        };
        let t1 = term(alpha, beta, gamma)?;
        let t2 = term(beta, gamma, alpha)?;
        let t3 = term(gamma, alpha, beta)?;
        Ok((0..self.m)
            .map(|d| (t1[d] + t2[d] + t3[d]).norm())
            .fold(0.0, f64::max))
    }

    /// Transformed anchor values and the Jacobi-matrix blocks of the chart
    /// change at `p`.
    pub fn change_chart(&self, chart: &ChartData, p: &WPoint) -> Result<ChartFrame> {
        let jac = chart.jacobian_at(p)?;
        let det = linalg::determinant(&jac).norm();
        if det <= 1e-10 {
            return Err(Error::SingularJacobian { det });
        }
        let m = chart.m_at(p)?;
        let w = chart.w_at(p)?;
        let anchor = self.anchor_at(p)?;
        // rho~^k_alpha = W^beta_alpha rho^h_beta dz~^k/dz^h
        let mut rho_tilde = linalg::zeros(self.n, self.m);
        for k in 0..self.n {
            for alpha in 0..self.m {
                let mut acc = Complex64::new(0.0, 0.0);
                for beta in 0..self.m {
                    for h in 0..self.n {
                        acc += w[beta][alpha] * anchor[h][beta] * jac[k][h];
                    }
                }
                rho_tilde[k][alpha] = acc;
            }
        }
        // fiber block of the Jacobi matrix: dM^alpha_beta/dz^h u^beta
        let mut fiber_block = linalg::zeros(self.m, self.n);
        for alpha in 0..self.m {
            for h in 0..self.n {
                let mut acc = Complex64::new(0.0, 0.0);
                for beta in 0..self.m {
                    acc += wirtinger::d1(&chart.m_grid[alpha][beta], p, Var::z(h))? * p.u[beta];
                }
                fiber_block[alpha][h] = acc;
            }
        }
        Ok(ChartFrame {
            rho_tilde,
            jac,
            fiber_block,
            m,
            w,
        })
    }

    /// All six structure identities, the Jacobi identity, chart consistency,
    /// and the anchor-rank scan over a point batch.
    pub fn validate_structure(
        &self,
        points: &[WPoint],
        tol: &Tolerances,
    ) -> Result<ResidualReport> {
        let mut id1 = ResidualAccumulator::new("prop1_identity_1", tol.exact);
        let mut id2 = ResidualAccumulator::new("prop1_identity_2", tol.exact)
            .with_note("mixed structure functions vanish for a holomorphic algebroid; checks formal antiholomorphy of rho");
        let mut id3 = ResidualAccumulator::new("prop1_identity_3", tol.exact)
            .with_note("holomorphy of the conjugate anchor under d/dz");
        let mut id4 = ResidualAccumulator::new("prop1_identity_4", tol.exact)
            .with_note("conjugate of identity 1");
        let mut id5 = ResidualAccumulator::new("prop1_identity_5", tol.exact)
            .with_note("holomorphy of the conjugate anchor under d/dz");
        let mut id6 = ResidualAccumulator::new("prop1_identity_6", tol.exact)
            .with_note("mixed structure functions vanish for a holomorphic algebroid; checks formal antiholomorphy of rho");
        let mut jacobi = ResidualAccumulator::new("jacobi", tol.exact);
        let mut rank_scan = ResidualAccumulator::new("anchor_rank", 0.5).with_note(
            "number of sample points where the anchor rank deviates from the generic rank",
        );

        let conj_rho: Vec<Vec<Expression>> = self
            .rho
            .iter()
            .map(|row| row.iter().map(|e| e.conjugate()).collect())
            .collect();

        for p in points {
            id1.observe(self.identity_one_residual(p)?, p);
            jacobi.observe(self.jacobi_residual(p)?, p);

            let anchor = self.anchor_at(p)?;
            // Identities 2 and 6: rho^i_g C^g_{a b-bar} terms are zero by
            // the holomorphic model; the right-hand sides involve formal
            // d/dzb of rho, which must vanish identically.
            let mut mixed = 0.0f64;
            for alpha in 0..self.m {
                for i in 0..self.n {
                    for beta in 0..self.m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..self.n {
                            acc += anchor[j][beta].conj()
                                * wirtinger::d1(&self.rho[alpha][i], p, Var::zb(j))?;
                        }
                        mixed = mixed.max(acc.norm());
                    }
                }
            }
            id2.observe(mixed, p);
            id6.observe(mixed, p);

            // Identities 3 and 5: d/dz of the conjugated anchor must vanish.
            let mut conj_mixed = 0.0f64;
            for alpha in 0..self.m {
                for i in 0..self.n {
                    for beta in 0..self.m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..self.n {
                            acc +=
                                anchor[j][beta] * wirtinger::d1(&conj_rho[alpha][i], p, Var::z(j))?;
                        }
                        conj_mixed = conj_mixed.max(acc.norm());
                    }
                }
            }
            id3.observe(conj_mixed, p);
            id5.observe(conj_mixed, p);

            // Identity 4 is the conjugate of identity 1, evaluated honestly
            // on the conjugated expressions.
            let mut conj_anchor = linalg::zeros(self.n, self.m);
            let mut conj_danchor =
                vec![vec![vec![Complex64::new(0.0, 0.0); self.n]; self.m]; self.n];
            for alpha in 0..self.m {
                for k in 0..self.n {
                    conj_anchor[k][alpha] = wirtinger::value_at(&conj_rho[alpha][k], p)?;
                    for j in 0..self.n {
                        conj_danchor[k][alpha][j] =
                            wirtinger::d1(&conj_rho[alpha][k], p, Var::zb(j))?;
                    }
                }
            }
            let mut conj_c = vec![vec![vec![Complex64::new(0.0, 0.0); self.m]; self.m]; self.m];
            for (&(gamma, alpha, beta), e) in &self.c {
                let v = wirtinger::value_at(&e.conjugate(), p)?;
                conj_c[gamma][alpha][beta] = v;
                conj_c[gamma][beta][alpha] = -v;
            }
            id4.observe(
                structure_identity_residual(&conj_anchor, &conj_danchor, &conj_c),
                p,
            );

            let rank = self.anchor_rank_at(p, 1e-10)?;
            if rank != self.generic_rank() {
                rank_scan.observe(1.0, p);
            }
        }

        let mut report = ResidualReport::default();
        for acc in [id1, id2, id3, id4, id5, id6, jacobi, rank_scan] {
            report.push(acc.finish());
        }

        for (ci, chart) in self.charts.iter().enumerate() {
            let mut mw = ResidualAccumulator::new(format!("chart{ci}_mw_inverse"), 1e-10);
            let mut cov =
                ResidualAccumulator::new(format!("chart{ci}_anchor_covariance"), tol.exact);
            for p in points {
                let frame = self.change_chart(chart, p)?;
                let prod = linalg::mat_mul(&frame.m, &frame.w);
                let eye = linalg::identity(self.m);
                let mut worst = 0.0f64;
                for i in 0..self.m {
                    for j in 0..self.m {
                        worst = worst.max((prod[i][j] - eye[i][j]).norm());
                    }
                }
                mw.observe(worst, p);

                // u~^a rho~^k_a must equal dz~^k/dz^h (rho u)^h
                let u_tilde = linalg::mat_vec(&frame.m, &p.u);
                let eta = linalg::mat_vec(&self.anchor_at(p)?, &p.u);
                let lhs = linalg::mat_vec(&frame.rho_tilde, &u_tilde);
                let rhs = linalg::mat_vec(&frame.jac, &eta);
                let worst = lhs
                    .iter()
                    .zip(&rhs)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                cov.observe(worst, p);
            }
            report.push(mw.finish());
            report.push(cov.finish());
        }

        Ok(report)
    }
}

/// max over (i, a < b) of |rho^j_a d_j rho^i_b - rho^j_b d_j rho^i_a - rho^i_g C^g_{ab}|
/// on plain numeric data (shared between the direct and transformed charts).
pub fn structure_identity_residual(
    anchor: &CMat,
    danchor: &[Vec<Vec<Complex64>>],
    c: &[Vec<Vec<Complex64>>],
) -> f64 {
    let n = anchor.len();
    let m = if n > 0 { anchor[0].len() } else { 0 };
    let mut worst = 0.0f64;
    for alpha in 0..m {
        for beta in (alpha + 1)..m {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += anchor[j][alpha] * danchor[i][beta][j]
                        - anchor[j][beta] * danchor[i][alpha][j];
                }
                for gamma in 0..m {
                    acc -= anchor[i][gamma] * c[gamma][alpha][beta];
                }
                worst = worst.max(acc.norm());
            }
        }
    }
    worst
}

/// Transformed anchor and the blocks of the chart-change Jacobi matrix.
#[derive(Debug, Clone)]
pub struct ChartFrame {
    /// `rho_tilde[k][alpha]` in the target chart, at the source point.
    pub rho_tilde: CMat,
    /// `jac[k][h]` = d z~^k / d z^h.
    pub jac: CMat,
    /// `dM^alpha_beta/dz^h u^beta` block.
    pub fiber_block: CMat,
    pub m: CMat,
    pub w: CMat,
}
