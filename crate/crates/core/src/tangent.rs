//! Geometry of the holomorphic tangent bundle of the total space: induced
//! directional coordinates, the tangent action of the anchor, nonlinear
//! connections with their adapted frames, and the torsion/curvature
//! coefficient tables of a distinguished linear connection.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use crate::algebroid::{AlgebroidSpec, ChartData};
use crate::chart::{self, TildeLagrangian};
use crate::error::{Error, Result};
use crate::expr::{Expression, Var, VariableContext};
use crate::linalg::{self, CMat};
use crate::report::{ResidualAccumulator, ResidualReport, Tolerances};
use crate::wirtinger::{self, WPoint};

/// Which bundle a nonlinear connection lives on, fixing the coefficient
/// grid shape: `N^a_k` (m x n), `N^b_a` (m x m), or `N^h_k` (n x n).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnKind {
    OnTE,
    OnProlongation,
    OnTM,
}

impl ConnKind {
    fn shape(self, n: usize, m: usize) -> (usize, usize) {
        match self {
            ConnKind::OnTE => (m, n),
            ConnKind::OnProlongation => (m, m),
            ConnKind::OnTM => (n, n),
        }
    }
}

type EvalFn = dyn Fn(&WPoint) -> Result<CMat> + Send + Sync;

#[derive(Clone)]
enum Coeffs {
    Expr(Vec<Vec<Expression>>),
    Eval(Arc<EvalFn>),
}

impl std::fmt::Debug for Coeffs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeffs::Expr(grid) => f.debug_tuple("Expr").field(grid).finish(),
            Coeffs::Eval(_) => f.write_str("Eval(..)"),
        }
    }
}

/// Nonlinear-connection coefficients, either as expressions in
/// `(z, zb, u, ub)` or as a derived pointwise evaluator.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub kind: ConnKind,
    rows: usize,
    cols: usize,
    coeffs: Coeffs,
}

impl ConnectionField {
    pub fn from_exprs(
        kind: ConnKind,
        n: usize,
        m: usize,
        grid: Vec<Vec<Expression>>,
    ) -> Result<Self> {
        let (rows, cols) = kind.shape(n, m);
        if grid.len() != rows || grid.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "connection grid must be {rows} x {cols}"
            )));
        }
        Ok(ConnectionField {
            kind,
            rows,
            cols,
            coeffs: Coeffs::Expr(grid),
        })
    }

    /// Parse a dense grid of coefficient strings over the full context.
    pub fn parse(kind: ConnKind, n: usize, m: usize, grid: &[Vec<String>]) -> Result<Self> {
        let ctx = VariableContext::full(n, m);
        let parsed = grid
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| Expression::parse(t, &ctx).map_err(Error::from))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_exprs(kind, n, m, parsed)
    }

    pub fn zero(kind: ConnKind, n: usize, m: usize) -> Self {
        let ctx = VariableContext::full(n, m);
        let (rows, cols) = kind.shape(n, m);
        let grid = vec![vec![Expression::constant(Complex64::new(0.0, 0.0), &ctx); cols]; rows];
        ConnectionField {
            kind,
            rows,
            cols,
            coeffs: Coeffs::Expr(grid),
        }
    }

    pub fn from_evaluator(
        kind: ConnKind,
        n: usize,
        m: usize,
        f: impl Fn(&WPoint) -> Result<CMat> + Send + Sync + 'static,
    ) -> Self {
        let (rows, cols) = kind.shape(n, m);
        ConnectionField {
            kind,
            rows,
            cols,
            coeffs: Coeffs::Eval(Arc::new(f)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn exprs(&self) -> Result<&Vec<Vec<Expression>>> {
        match &self.coeffs {
            Coeffs::Expr(grid) => Ok(grid),
            Coeffs::Eval(_) => Err(Error::NeedsExpressionCoeffs { op: "exprs" }),
        }
    }

    pub fn at(&self, p: &WPoint) -> Result<CMat> {
        match &self.coeffs {
            Coeffs::Expr(grid) => grid
                .iter()
                .map(|row| row.iter().map(|e| wirtinger::value_at(e, p)).collect())
                .collect(),
            Coeffs::Eval(f) => {
                let out = f(p)?;
                if out.len() != self.rows || out.iter().any(|r| r.len() != self.cols) {
                    return Err(Error::DimensionMismatch(
                        "derived connection evaluator returned a wrong shape".to_string(),
                    ));
                }
                Ok(out)
            }
        }
    }

    /// `d[r][c][j]` = d N_{rc} / d z^j. Expression-backed fields only.
    pub fn dz_at(&self, p: &WPoint, n: usize) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let grid = match &self.coeffs {
            Coeffs::Expr(grid) => grid,
            Coeffs::Eval(_) => return Err(Error::NeedsExpressionCoeffs { op: "dz_at" }),
        };
        grid.iter()
            .map(|row| {
                row.iter()
                    .map(|e| (0..n).map(|j| wirtinger::d1(e, p, Var::z(j))).collect())
                    .collect()
            })
            .collect()
    }

    /// `d[r][c][b]` = d N_{rc} / d u^b. Expression-backed fields only.
    pub fn du_at(&self, p: &WPoint, m: usize) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let grid = match &self.coeffs {
            Coeffs::Expr(grid) => grid,
            Coeffs::Eval(_) => return Err(Error::NeedsExpressionCoeffs { op: "du_at" }),
        };
        grid.iter()
            .map(|row| {
                row.iter()
                    .map(|e| (0..m).map(|b| wirtinger::d1(e, p, Var::u(b))).collect())
                    .collect()
            })
            .collect()
    }
}

/// `eta^k = u^a rho^k_a(z)`.
pub fn induced_eta(a: &AlgebroidSpec, p: &WPoint) -> Result<Vec<Complex64>> {
    Ok(linalg::mat_vec(&a.anchor_at(p)?, &p.u))
}

/// A tangent vector of the total space at a point, `Z^k d/dz^k + V^a d/du^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub z: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

/// Tangent action of the anchor: base components pass through and
/// `V^h_eta = Z^k u^a d rho^h_a/dz^k + V^a rho^h_a`.
pub fn tangent_pushforward(
    a: &AlgebroidSpec,
    v: &TangentVector,
    p: &WPoint,
) -> Result<TangentVector> {
    if v.z.len() != a.n || v.v.len() != a.m {
        return Err(Error::DimensionMismatch("tangent vector shape".to_string()));
    }
    let anchor = a.anchor_at(p)?;
    let danchor = a.anchor_dz_at(p)?;
    let mut out = vec![Complex64::new(0.0, 0.0); a.n];
    for h in 0..a.n {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..a.n {
            for alpha in 0..a.m {
                acc += v.z[k] * p.u[alpha] * danchor[h][alpha][k];
            }
        }
        for alpha in 0..a.m {
            acc += v.v[alpha] * anchor[h][alpha];
        }
        out[h] = acc;
    }
    Ok(TangentVector {
        z: v.z.clone(),
        v: out,
    })
}

/// The coefficients of the pulled-back coframe `d*eta^k` in the natural
/// cobasis: `dz`-block `u^a d rho^k_a/dz^h` and `du`-block `rho^k_a`.
pub fn dual_pullback(a: &AlgebroidSpec, p: &WPoint) -> Result<(CMat, CMat)> {
    let anchor = a.anchor_at(p)?;
    let danchor = a.anchor_dz_at(p)?;
    let mut dz_block = linalg::zeros(a.n, a.n);
    for k in 0..a.n {
        for h in 0..a.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for alpha in 0..a.m {
                acc += p.u[alpha] * danchor[k][alpha][h];
            }
            dz_block[k][h] = acc;
        }
    }
    Ok((dz_block, anchor))
}

/// `(delta f / delta z^k)_k = (d f/dz^k - N^a_k d f/du^a)_k`.
pub fn adapted_frame_apply(
    a: &AlgebroidSpec,
    n_field: &ConnectionField,
    f: &Expression,
    p: &WPoint,
) -> Result<Vec<Complex64>> {
    assert_eq!(n_field.kind, ConnKind::OnTE);
    let nv = n_field.at(p)?;
    let mut out = vec![Complex64::new(0.0, 0.0); a.n];
    for k in 0..a.n {
        let mut acc = wirtinger::d1(f, p, Var::z(k))?;
        for alpha in 0..a.m {
            acc -= nv[alpha][k] * wirtinger::d1(f, p, Var::u(alpha))?;
        }
        out[k] = acc;
    }
    Ok(out)
}

/// How the coefficients of a connection on the tangent bundle of the total
/// space are produced, so covariance checks can re-derive them per chart.
#[derive(Debug, Clone)]
pub enum TeConnectionSource {
    /// Coefficient functions reused verbatim in every chart.
    Field(ConnectionField),
    /// Chern-Lagrange-type derivation `N^a_k = g^{b-bar a} d2L/dz^k dubar^b`
    /// from a Lagrangian on the total space, re-derived per chart.
    ChernLagrange(Expression),
}

impl TeConnectionSource {
    pub fn value_direct(&self, a: &AlgebroidSpec, p: &WPoint) -> Result<CMat> {
        match self {
            TeConnectionSource::Field(f) => f.at(p),
            TeConnectionSource::ChernLagrange(l) => {
                let second = chart::lagrangian_second(l, p, a.n, a.m)?;
                chern_lagrange_grid(&second, a.n, a.m)
            }
        }
    }

    /// Coefficients in the target chart, at the matched point.
    pub fn value_tilde(&self, a: &AlgebroidSpec, ch: &ChartData, p: &WPoint) -> Result<CMat> {
        match self {
            TeConnectionSource::Field(f) => {
                let cd = chart::chart_point_data(a, ch, p)?;
                let q = WPoint::new(cd.z_tilde.clone(), cd.u_tilde.clone());
                f.at(&q)
            }
            TeConnectionSource::ChernLagrange(l) => {
                let second = chart::tilde_lagrangian_second(a, l, ch, p)?;
                chern_lagrange_grid(&second, a.n, a.m)
            }
        }
    }
}

/// `N^a_k = g^{b-bar a} L_{z^k ubar^b}` from precomputed second partials.
fn chern_lagrange_grid(second: &TildeLagrangian, n: usize, m: usize) -> Result<CMat> {
    let det = linalg::determinant(&second.g).norm();
    let ginv = linalg::invert(&second.g, 1e-12).ok_or(Error::SingularMetric { det })?;
    let mut out = linalg::zeros(m, n);
    for alpha in 0..m {
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for beta in 0..m {
                acc += ginv[beta][alpha] * second.l_zu[k][beta];
            }
            out[alpha][k] = acc;
        }
    }
    Ok(out)
}

/// Residual of the transformation law
/// `dz~^k/dz^h N~^a_k - M^a_b N^b_h + dM^a_b/dz^h u^b` over a point batch.
pub fn nlc_change_residual(
    a: &AlgebroidSpec,
    source: &TeConnectionSource,
    ch: &ChartData,
    points: &[WPoint],
    tol: &Tolerances,
) -> Result<ResidualReport> {
    let mut acc = ResidualAccumulator::new("nlc_change_law", tol.exact);
    for p in points {
        let cd = chart::chart_point_data(a, ch, p)?;
        let direct = source.value_direct(a, p)?;
        let tilde = source.value_tilde(a, ch, p)?;
        let mut worst = 0.0f64;
        for alpha in 0..a.m {
            for h in 0..a.n {
                let mut r = Complex64::new(0.0, 0.0);
                for k in 0..a.n {
                    r += cd.jac[k][h] * tilde[alpha][k];
                }
                for beta in 0..a.m {
                    r -= cd.m[alpha][beta] * direct[beta][h];
                    r += cd.dm[alpha][beta][h] * p.u[beta];
                }
                worst = worst.max(r.norm());
            }
        }
        acc.observe(worst, p);
    }
    let mut report = ResidualReport::default();
    report.push(acc.finish());
    Ok(report)
}

/// One labeled coefficient array of a tensor table.
#[derive(Debug, Clone)]
pub struct TensorBlock {
    pub name: String,
    pub shape: Vec<usize>,
    values: Vec<Complex64>,
}

impl TensorBlock {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> TensorBlock {
        let len = shape.iter().product();
        TensorBlock {
            name: name.into(),
            shape,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0usize;
        for (i, &v) in idx.iter().enumerate() {
            assert!(v < self.shape[i], "index out of range in {}", self.name);
            flat = flat * self.shape[i] + v;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.values[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let flat = self.flat(idx);
        self.values[flat] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Max violation of antisymmetry in the two named axis positions.
    pub fn antisymmetry_residual(&self, axis_a: usize, axis_b: usize) -> f64 {
        assert_eq!(self.shape[axis_a], self.shape[axis_b]);
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; self.shape.len()];
        loop {
            let mut swapped = idx.clone();
            swapped.swap(axis_a, axis_b);
            worst = worst.max((self.get(&idx) + self.get(&swapped)).norm());
            // advance odometer
            let mut axis = idx.len();
            loop {
                if axis == 0 {
                    return worst;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Labeled coefficient arrays evaluated at one point.
#[derive(Debug, Clone, Default)]
pub struct TensorTable {
    pub blocks: Vec<TensorBlock>,
}

impl TensorTable {
    pub fn block(&self, name: &str) -> Option<&TensorBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn push(&mut self, block: TensorBlock) {
        self.blocks.push(block);
    }
}

/// Lie brackets of the adapted frame: the `[delta_k, delta_h]` coefficient
/// table `dN^a_k/dz^h - dN^a_h/dz^k` (indexed `[a][k][h]`), plus residuals
/// of the two bracket families the adapted frame is supposed to kill,
/// evaluated as derivations on the test functions `z^j`, `u^a`, `z^j u^a`.
pub fn adapted_bracket_coeffs(
    a: &AlgebroidSpec,
    n_field: &ConnectionField,
    p: &WPoint,
) -> Result<TensorTable> {
    assert_eq!(n_field.kind, ConnKind::OnTE);
    let dz = n_field.dz_at(p, a.n)?;
    let du = n_field.du_at(p, a.m)?;
    let mut table = TensorTable::default();
    let mut block = TensorBlock::new("delta_delta", vec![a.m, a.n, a.n]);
    for alpha in 0..a.m {
        for k in 0..a.n {
            for h in 0..a.n {
                block.set(&[alpha, k, h], dz[alpha][k][h] - dz[alpha][h][k]);
            }
        }
    }
    table.push(block);

    // [delta_k, d/du^b] applied to the test family; the only surviving
    // term is dN^a_k/du^b times the u^a-gradient of the test function.
    let mut mixed = TensorBlock::new("delta_vertical_residual", vec![a.n, a.m]);
    for k in 0..a.n {
        for beta in 0..a.m {
            let mut worst = 0.0f64;
            for alpha in 0..a.m {
                let coeff = du[alpha][k][beta];
                // test functions u^a and z^j u^a have u^a-gradients 1 and z^j
                worst = worst.max(coeff.norm());
                for j in 0..a.n {
                    worst = worst.max((coeff * p.z[j]).norm());
                }
            }
            mixed.set(&[k, beta], Complex64::new(worst, 0.0));
        }
    }
    table.push(mixed);

    // [d/du^a, d/du^b] vanishes identically for coordinate fields.
    table.push(TensorBlock::new(
        "vertical_vertical_residual",
        vec![a.m, a.m],
    ));
    Ok(table)
}

#[derive(Debug, Clone, Deserialize, Default)]
struct LinearConnectionFile {
    #[serde(rename = "L_ijk", default)]
    l_ijk: Vec<Entry3>,
    #[serde(rename = "L_ija", default)]
    l_ija: Vec<Entry3>,
    #[serde(rename = "L_abk", default)]
    l_abk: Vec<Entry3>,
    #[serde(rename = "C_abc", default)]
    c_abc: Vec<Entry3>,
}

#[derive(Debug, Clone, Deserialize)]
struct Entry3 {
    #[serde(alias = "i", alias = "a")]
    first: usize,
    #[serde(alias = "j", alias = "b")]
    second: usize,
    #[serde(alias = "k", alias = "c", alias = "g")]
    third: usize,
    expr: String,
}

/// Coefficients of a distinguished complex linear connection, supplied by
/// the user as sparse expression grids (omitted entries are zero).
#[derive(Debug, Clone)]
pub struct LinearConnectionCoeffs {
    pub n: usize,
    pub m: usize,
    l_hh: BTreeMap<(usize, usize, usize), Expression>,
    l_hv: BTreeMap<(usize, usize, usize), Expression>,
    l_vh: BTreeMap<(usize, usize, usize), Expression>,
    c_vv: BTreeMap<(usize, usize, usize), Expression>,
}

impl LinearConnectionCoeffs {
    pub fn empty(n: usize, m: usize) -> Self {
        LinearConnectionCoeffs {
            n,
            m,
            l_hh: BTreeMap::new(),
            l_hv: BTreeMap::new(),
            l_vh: BTreeMap::new(),
            c_vv: BTreeMap::new(),
        }
    }

    pub fn from_json(n: usize, m: usize, text: &str) -> Result<Self> {
        let file: LinearConnectionFile = serde_json::from_str(text)?;
        let ctx = VariableContext::full(n, m);
        let mut out = Self::empty(n, m);
        let parse = |t: &String| Expression::parse(t, &ctx).map_err(Error::from);
        for e in &file.l_ijk {
            out.l_hh
                .insert((e.first - 1, e.second - 1, e.third - 1), parse(&e.expr)?);
        }
        for e in &file.l_ija {
            out.l_hv
                .insert((e.first - 1, e.second - 1, e.third - 1), parse(&e.expr)?);
        }
        for e in &file.l_abk {
            out.l_vh
                .insert((e.first - 1, e.second - 1, e.third - 1), parse(&e.expr)?);
        }
        for e in &file.c_abc {
            out.c_vv
                .insert((e.first - 1, e.second - 1, e.third - 1), parse(&e.expr)?);
        }
        Ok(out)
    }

    pub fn set_l_hh(&mut self, i: usize, j: usize, k: usize, e: Expression) {
        self.l_hh.insert((i, j, k), e);
    }
    pub fn set_l_hv(&mut self, i: usize, j: usize, gamma: usize, e: Expression) {
        self.l_hv.insert((i, j, gamma), e);
    }
    pub fn set_l_vh(&mut self, alpha: usize, beta: usize, k: usize, e: Expression) {
        self.l_vh.insert((alpha, beta, k), e);
    }
    pub fn set_c_vv(&mut self, alpha: usize, beta: usize, gamma: usize, e: Expression) {
        self.c_vv.insert((alpha, beta, gamma), e);
    }

    fn values(
        map: &BTreeMap<(usize, usize, usize), Expression>,
        shape: (usize, usize, usize),
        p: &WPoint,
    ) -> Result<Vec<Vec<Vec<Complex64>>>> {
        let mut out = vec![vec![vec![Complex64::new(0.0, 0.0); shape.2]; shape.1]; shape.0];
        for (&(i, j, k), e) in map {
            out[i][j][k] = wirtinger::value_at(e, p)?;
        }
        Ok(out)
    }

    fn dz(
        map: &BTreeMap<(usize, usize, usize), Expression>,
        shape: (usize, usize, usize),
        n: usize,
        p: &WPoint,
    ) -> Result<Vec<Vec<Vec<Vec<Complex64>>>>> {
        let mut out =
            vec![vec![vec![vec![Complex64::new(0.0, 0.0); n]; shape.2]; shape.1]; shape.0];
        for (&(i, j, k), e) in map {
            for l in 0..n {
                out[i][j][k][l] = wirtinger::d1(e, p, Var::z(l))?;
            }
        }
        Ok(out)
    }
}

/// Torsion coefficient table of a distinguished linear connection.
pub fn torsion_table(
    a: &AlgebroidSpec,
    d: &LinearConnectionCoeffs,
    n_field: &ConnectionField,
    p: &WPoint,
) -> Result<TensorTable> {
    let (n, m) = (a.n, a.m);
    let l_hh = LinearConnectionCoeffs::values(&d.l_hh, (n, n, n), p)?;
    let l_hv = LinearConnectionCoeffs::values(&d.l_hv, (n, n, m), p)?;
    let l_vh = LinearConnectionCoeffs::values(&d.l_vh, (m, m, n), p)?;
    let c_vv = LinearConnectionCoeffs::values(&d.c_vv, (m, m, m), p)?;
    let n_dz = n_field.dz_at(p, n)?;

    let mut table = TensorTable::default();

    let mut t_hh = TensorBlock::new("T_i_hk", vec![n, n, n]);
    for i in 0..n {
        for h in 0..n {
            for k in 0..n {
                t_hh.set(&[i, h, k], l_hh[i][k][h] - l_hh[i][h][k]);
            }
        }
    }
    table.push(t_hh);

    let mut t_vhk = TensorBlock::new("T_a_hk", vec![m, n, n]);
    for alpha in 0..m {
        for h in 0..n {
            for k in 0..n {
                t_vhk.set(&[alpha, h, k], n_dz[alpha][h][k] - n_dz[alpha][k][h]);
            }
        }
    }
    table.push(t_vhk);

    let mut t_hva = TensorBlock::new("T_i_ha", vec![n, n, m]);
    for i in 0..n {
        for h in 0..n {
            for alpha in 0..m {
                t_hva.set(&[i, h, alpha], -l_hv[i][h][alpha]);
            }
        }
    }
    table.push(t_hva);

    let mut t_bha = TensorBlock::new("T_b_ha", vec![m, n, m]);
    for beta in 0..m {
        for h in 0..n {
            for alpha in 0..m {
                t_bha.set(&[beta, h, alpha], l_vh[beta][alpha][h]);
            }
        }
    }
    table.push(t_bha);

    // T(d_a, d_b) = D_a d_b - D_b d_a: coefficient C^g_{ba} - C^g_{ab},
    // following the same first-argument convention as T_i_hk.
    let mut t_gab = TensorBlock::new("T_g_ab", vec![m, m, m]);
    for gamma in 0..m {
        for alpha in 0..m {
            for beta in 0..m {
                t_gab.set(
                    &[gamma, alpha, beta],
                    c_vv[gamma][beta][alpha] - c_vv[gamma][alpha][beta],
                );
            }
        }
    }
    table.push(t_gab);

    Ok(table)
}

/// Curvature coefficient table. The two blocks whose printed form looks
/// index-suspect are evaluated verbatim and again in the plausible variant,
/// reported side by side with an `_alt` suffix.
pub fn curvature_table(
    a: &AlgebroidSpec,
    d: &LinearConnectionCoeffs,
    n_field: &ConnectionField,
    p: &WPoint,
) -> Result<TensorTable> {
    let (n, m) = (a.n, a.m);
    let l_hh = LinearConnectionCoeffs::values(&d.l_hh, (n, n, n), p)?;
    let l_hv = LinearConnectionCoeffs::values(&d.l_hv, (n, n, m), p)?;
    let l_vh = LinearConnectionCoeffs::values(&d.l_vh, (m, m, n), p)?;
    let c_vv = LinearConnectionCoeffs::values(&d.c_vv, (m, m, m), p)?;
    let dz_l_hh = LinearConnectionCoeffs::dz(&d.l_hh, (n, n, n), n, p)?;
    let dz_l_vh = LinearConnectionCoeffs::dz(&d.l_vh, (m, m, n), n, p)?;
    let dz_l_hv = LinearConnectionCoeffs::dz(&d.l_hv, (n, n, m), n, p)?;
    let dz_c_vv = LinearConnectionCoeffs::dz(&d.c_vv, (m, m, m), n, p)?;
    let n_dz = n_field.dz_at(p, n)?;

    let mut table = TensorTable::default();

    // R^i_{jhk}
    let mut r1 = TensorBlock::new("R_i_jhk", vec![n, n, n, n]);
    for i in 0..n {
        for j in 0..n {
            for h in 0..n {
                for k in 0..n {
                    let mut acc = dz_l_hh[i][j][h][k] - dz_l_hh[i][j][k][h];
                    for l in 0..n {
                        acc += l_hh[l][j][h] * l_hh[i][l][k] - l_hh[l][j][k] * l_hh[i][l][h];
                    }
                    for alpha in 0..m {
                        let f = n_dz[alpha][k][h] - n_dz[alpha][h][k];
                        acc -= f * l_hv[i][j][alpha];
                    }
                    r1.set(&[i, j, h, k], acc);
                }
            }
        }
    }
    table.push(r1);

    // R^a_{bhk}, verbatim (+) and real-case variant (-) for the second
    // quadratic term.
    let mut r2 = TensorBlock::new("R_a_bhk", vec![m, m, n, n]);
    let mut r2_alt = TensorBlock::new("R_a_bhk_alt", vec![m, m, n, n]);
    for alpha in 0..m {
        for beta in 0..m {
            for h in 0..n {
                for k in 0..n {
                    let base = dz_l_vh[alpha][beta][k][h] - dz_l_vh[alpha][beta][h][k];
                    let mut quad_plus = Complex64::new(0.0, 0.0);
                    let mut quad_minus = Complex64::new(0.0, 0.0);
                    for gamma in 0..m {
                        let first = l_vh[gamma][beta][k] * l_vh[alpha][gamma][h];
                        let second = l_vh[gamma][beta][h] * l_vh[alpha][gamma][k];
                        quad_plus += first + second;
                        quad_minus += first - second;
                    }
                    let mut bracket = Complex64::new(0.0, 0.0);
                    for gamma in 0..m {
                        let f = n_dz[gamma][k][h] - n_dz[gamma][h][k];
                        bracket += f * c_vv[alpha][gamma][beta];
                    }
                    r2.set(&[alpha, beta, h, k], base + quad_plus - bracket);
                    r2_alt.set(&[alpha, beta, h, k], base + quad_minus - bracket);
                }
            }
        }
    }
    table.push(r2);
    table.push(r2_alt);

    // R^a_{g k b}
    let mut r3 = TensorBlock::new("R_a_gkb", vec![m, m, n, m]);
    for alpha in 0..m {
        for gamma in 0..m {
            for k in 0..n {
                for beta in 0..m {
                    let mut acc = dz_c_vv[alpha][gamma][beta][k];
                    for sigma in 0..m {
                        acc += c_vv[sigma][gamma][beta] * l_vh[alpha][sigma][k]
                            - l_vh[sigma][gamma][k] * c_vv[alpha][sigma][beta];
                    }
                    r3.set(&[alpha, gamma, k, beta], acc);
                }
            }
        }
    }
    table.push(r3);

    // R^i_{hkb}
    let mut r4 = TensorBlock::new("R_i_hkb", vec![n, n, n, m]);
    for i in 0..n {
        for h in 0..n {
            for k in 0..n {
                for beta in 0..m {
                    let mut acc = dz_l_hv[i][h][beta][k];
                    for j in 0..n {
                        acc += l_hv[j][h][beta] * l_hh[i][j][k] - l_hh[j][h][k] * l_hv[i][j][beta];
                    }
                    r4.set(&[i, h, k, beta], acc);
                }
            }
        }
    }
    table.push(r4);

    // R^i_{k a b}: verbatim (first factor carries the repeated beta) and
    // the plausible intended form with alpha in the first factor.
    let mut r5 = TensorBlock::new("R_i_kab", vec![n, n, m, m]);
    let mut r5_alt = TensorBlock::new("R_i_kab_alt", vec![n, n, m, m]);
    for i in 0..n {
        for k in 0..n {
            for alpha in 0..m {
                for beta in 0..m {
                    let mut verbatim = Complex64::new(0.0, 0.0);
                    let mut alt = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        verbatim += l_hv[j][k][beta] * l_hv[i][j][beta]
                            - l_hv[j][k][alpha] * l_hv[i][j][beta];
                        alt += l_hv[j][k][beta] * l_hv[i][j][alpha]
                            - l_hv[j][k][alpha] * l_hv[i][j][beta];
                    }
                    r5.set(&[i, k, alpha, beta], verbatim);
                    r5_alt.set(&[i, k, alpha, beta], alt);
                }
            }
        }
    }
    table.push(r5);
    table.push(r5_alt);

    // R^s_{gab}
    let mut r6 = TensorBlock::new("R_s_gab", vec![m, m, m, m]);
    for sigma in 0..m {
        for gamma in 0..m {
            for alpha in 0..m {
                for beta in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for tau in 0..m {
                        acc += c_vv[tau][gamma][beta] * c_vv[sigma][tau][alpha]
                            - c_vv[tau][gamma][alpha] * c_vv[sigma][tau][beta];
                    }
                    r6.set(&[sigma, gamma, alpha, beta], acc);
                }
            }
        }
    }
    table.push(r6);

    Ok(table)
}
