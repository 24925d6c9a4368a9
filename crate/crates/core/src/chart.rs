//! Pointwise chain-rule machinery for chart changes.
//!
//! Everything the covariance checks need in the target chart is computed at
//! matched points from source-chart expressions: the coordinate Jacobian and
//! its derivative, the fiber transition `M`, its inverse `W = M^-1` and the
//! derivatives of `W` obtained from `dW = -W dM W`. No inverse coordinate
//! map is ever required.

use num_complex::Complex64;

use crate::algebroid::{AlgebroidSpec, ChartData};
use crate::error::{Error, Result};
use crate::expr::{Expression, Var};
use crate::linalg::{self, CMat};
use crate::wirtinger::{self, WPoint};

type C3 = Vec<Vec<Vec<Complex64>>>;
type C4 = Vec<Vec<Vec<Vec<Complex64>>>>;

fn c3(a: usize, b: usize, c: usize) -> C3 {
    vec![vec![vec![Complex64::new(0.0, 0.0); c]; b]; a]
}

fn c4(a: usize, b: usize, c: usize, d: usize) -> C4 {
    vec![vec![vec![vec![Complex64::new(0.0, 0.0); d]; c]; b]; a]
}

/// All transition quantities of one chart at one point.
#[derive(Debug, Clone)]
pub struct ChartPointData {
    pub z_tilde: Vec<Complex64>,
    pub u_tilde: Vec<Complex64>,
    /// `j[k][h] = dz~^k/dz^h`
    pub jac: CMat,
    /// `jinv[h][k] = dz^h/dz~^k`
    pub jinv: CMat,
    /// `j2[k][h][l] = d2 z~^k / dz^h dz^l`
    pub j2: C3,
    pub m: CMat,
    /// `dm[a][b][h] = d M^a_b / dz^h`
    pub dm: C3,
    /// `d2m[a][b][h][l]`
    pub d2m: C4,
    pub w: CMat,
    /// `dw[a][b][h] = d W^a_b / dz^h = -(W dM W)`
    pub dw: C3,
    /// `d2w[a][b][h][l]`
    pub d2w: C4,
}

pub fn chart_point_data(
    algebroid: &AlgebroidSpec,
    chart: &ChartData,
    p: &WPoint,
) -> Result<ChartPointData> {
    let n = algebroid.n;
    let m = algebroid.m;
    let z_tilde = chart.zmap_at(p)?;
    let jac = chart.jacobian_at(p)?;
    let det = linalg::determinant(&jac).norm();
    let jinv = linalg::invert(&jac, 1e-12).ok_or(Error::SingularJacobian { det })?;
    let mut j2 = c3(n, n, n);
    for (k, e) in chart.zmap.iter().enumerate() {
        for h in 0..n {
            for l in 0..=h {
                let v = wirtinger::d2(e, p, Var::z(h), Var::z(l))?;
                j2[k][h][l] = v;
                j2[k][l][h] = v;
            }
        }
    }
    let m_mat = chart.m_at(p)?;
    let w = chart.w_at(p)?;
    let mut dm = c3(m, m, n);
    let mut d2m = c4(m, m, n, n);
    for a in 0..m {
        for b in 0..m {
            let e = &chart.m_grid[a][b];
            for h in 0..n {
                dm[a][b][h] = wirtinger::d1(e, p, Var::z(h))?;
                for l in 0..=h {
                    let v = wirtinger::d2(e, p, Var::z(h), Var::z(l))?;
                    d2m[a][b][h][l] = v;
                    d2m[a][b][l][h] = v;
                }
            }
        }
    }
    // dW_h = -W dM_h W ; d2W_hl = -(dW_l dM_h W + W d2M_hl W + W dM_h dW_l)
    let dm_slice = |h: usize| -> CMat {
        (0..m)
            .map(|a| (0..m).map(|b| dm[a][b][h]).collect())
            .collect()
    };
    let d2m_slice = |h: usize, l: usize| -> CMat {
        (0..m)
            .map(|a| (0..m).map(|b| d2m[a][b][h][l]).collect())
            .collect()
    };
    let mut dw = c3(m, m, n);
    for h in 0..n {
        let prod = linalg::mat_mul(&linalg::mat_mul(&w, &dm_slice(h)), &w);
        for a in 0..m {
            for b in 0..m {
                dw[a][b][h] = -prod[a][b];
            }
        }
    }
    let dw_slice = |h: usize, dw: &C3| -> CMat {
        (0..m)
            .map(|a| (0..m).map(|b| dw[a][b][h]).collect())
            .collect()
    };
    let mut d2w = c4(m, m, n, n);
    for h in 0..n {
        for l in 0..n {
            let t1 = linalg::mat_mul(&linalg::mat_mul(&dw_slice(l, &dw), &dm_slice(h)), &w);
            let t2 = linalg::mat_mul(&linalg::mat_mul(&w, &d2m_slice(h, l)), &w);
            let t3 = linalg::mat_mul(&linalg::mat_mul(&w, &dm_slice(h)), &dw_slice(l, &dw));
            for a in 0..m {
                for b in 0..m {
                    d2w[a][b][h][l] = -(t1[a][b] + t2[a][b] + t3[a][b]);
                }
            }
        }
    }
    let u_tilde = linalg::mat_vec(&m_mat, &p.u);
    Ok(ChartPointData {
        z_tilde,
        u_tilde,
        jac,
        jinv,
        j2,
        m: m_mat,
        dm,
        d2m,
        w,
        dw,
        d2w,
    })
}

/// Numeric structure data of one chart at one point: anchor, structure
/// functions, and their first derivatives in that chart's own coordinates.
#[derive(Debug, Clone)]
pub struct StructureEval {
    /// `anchor[k][a]`
    pub anchor: CMat,
    /// `danchor[k][a][j]`
    pub danchor: C3,
    /// `c[g][a][b]`
    pub c: C3,
    /// `dc[g][a][b][j]`
    pub dc: C4,
}

pub fn direct_structure(a: &AlgebroidSpec, p: &WPoint) -> Result<StructureEval> {
    Ok(StructureEval {
        anchor: a.anchor_at(p)?,
        danchor: a.anchor_dz_at(p)?,
        c: a.c_at(p)?,
        dc: a.c_dz_at(p)?,
    })
}

/// Structure data re-expressed in the target chart, evaluated at the matched
/// point `z~(p)`: the transformation laws composed with the chain rule.
pub fn transformed_structure(
    a: &AlgebroidSpec,
    chart: &ChartData,
    p: &WPoint,
) -> Result<StructureEval> {
    let n = a.n;
    let m = a.m;
    let cd = chart_point_data(a, chart, p)?;
    let anchor = a.anchor_at(p)?;
    let danchor = a.anchor_dz_at(p)?;
    let c = a.c_at(p)?;
    let dc = a.c_dz_at(p)?;

    // rho~^k_a = W^b_a rho^h_b J^k_h
    let mut anchor_t = linalg::zeros(n, m);
    for k in 0..n {
        for al in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..m {
                for h in 0..n {
                    acc += cd.w[b][al] * anchor[h][b] * cd.jac[k][h];
                }
            }
            anchor_t[k][al] = acc;
        }
    }

    // d rho~^k_a / dz~^l = (d/dz^j rho~^k_a) (J^-1)^j_l
    let mut danchor_t = c3(n, m, n);
    for k in 0..n {
        for al in 0..m {
            for j in 0..n {
                let mut dj = Complex64::new(0.0, 0.0);
                for b in 0..m {
                    for h in 0..n {
                        dj += cd.dw[b][al][j] * anchor[h][b] * cd.jac[k][h]
                            + cd.w[b][al] * danchor[h][b][j] * cd.jac[k][h]
                            + cd.w[b][al] * anchor[h][b] * cd.j2[k][h][j];
                    }
                }
                for l in 0..n {
                    danchor_t[k][al][l] += dj * cd.jinv[j][l];
                }
            }
        }
    }

    // T^e_{ab} = W^s_a W^d_b C^e_{sd} + W^s_a rho^k_s dW^e_b/dz^k - W^d_b rho^k_d dW^e_a/dz^k
    let t_val = |e: usize, al: usize, be: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..m {
            for d in 0..m {
                acc += cd.w[s][al] * cd.w[d][be] * c[e][s][d];
            }
        }
        for s in 0..m {
            for k in 0..n {
                acc += cd.w[s][al] * anchor[k][s] * cd.dw[e][be][k];
                acc -= cd.w[s][be] * anchor[k][s] * cd.dw[e][al][k];
            }
        }
        acc
    };
    // d/dz^j of T^e_{ab}
    let t_dz = |e: usize, al: usize, be: usize, j: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..m {
            for d in 0..m {
                acc += cd.dw[s][al][j] * cd.w[d][be] * c[e][s][d]
                    + cd.w[s][al] * cd.dw[d][be][j] * c[e][s][d]
                    + cd.w[s][al] * cd.w[d][be] * dc[e][s][d][j];
            }
        }
        for s in 0..m {
            for k in 0..n {
                acc += cd.dw[s][al][j] * anchor[k][s] * cd.dw[e][be][k]
                    + cd.w[s][al] * danchor[k][s][j] * cd.dw[e][be][k]
                    + cd.w[s][al] * anchor[k][s] * cd.d2w[e][be][k][j];
                acc -= cd.dw[s][be][j] * anchor[k][s] * cd.dw[e][al][k]
                    + cd.w[s][be] * danchor[k][s][j] * cd.dw[e][al][k]
                    + cd.w[s][be] * anchor[k][s] * cd.d2w[e][al][k][j];
            }
        }
        acc
    };

    let mut c_t = c3(m, m, m);
    let mut dc_t = c4(m, m, m, n);
    for g in 0..m {
        for al in 0..m {
            for be in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for e in 0..m {
                    acc += cd.m[g][e] * t_val(e, al, be);
                }
                c_t[g][al][be] = acc;
                for j in 0..n {
                    let mut dj = Complex64::new(0.0, 0.0);
                    for e in 0..m {
                        dj += cd.dm[g][e][j] * t_val(e, al, be) + cd.m[g][e] * t_dz(e, al, be, j);
                    }
                    for l in 0..n {
                        dc_t[g][al][be][l] += dj * cd.jinv[j][l];
                    }
                }
            }
        }
    }

    Ok(StructureEval {
        anchor: anchor_t,
        danchor: danchor_t,
        c: c_t,
        dc: dc_t,
    })
}

/// Jacobi residual on plain structure data:
/// max over index choices of the cyclic sum
/// `C^e_{bg} C^d_{ae} + rho^k_a dC^d_{bg}/dz^k`.
pub fn jacobi_structure_residual(se: &StructureEval) -> f64 {
    let n = se.anchor.len();
    let m = se.c.len();
    let mut worst = 0.0f64;
    for al in 0..m {
        for be in (al + 1)..m {
            for ga in (be + 1)..m {
                for d in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (a, b, g) in [(al, be, ga), (be, ga, al), (ga, al, be)] {
                        for e in 0..m {
                            acc += se.c[e][b][g] * se.c[d][a][e];
                        }
                        for k in 0..n {
                            acc += se.anchor[k][a] * se.dc[d][b][g][k];
                        }
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    worst
}

/// Second derivatives of a Lagrangian with respect to this chart's
/// coordinates at the matched point: the fiber metric `g~` and the mixed
/// block `d2 L~ / dz~^k du~bar^b`.
#[derive(Debug, Clone)]
pub struct TildeLagrangian {
    pub g: CMat,
    pub l_zu: CMat,
}

/// Direct-chart version: `g[a][b] = d2L/du^a dubar^b`, `l_zu[k][b] = d2L/dz^k dubar^b`.
pub fn lagrangian_second(
    l: &Expression,
    p: &WPoint,
    n: usize,
    m: usize,
) -> Result<TildeLagrangian> {
    let mut g = linalg::zeros(m, m);
    let mut l_zu = linalg::zeros(n, m);
    for b in 0..m {
        for a in 0..m {
            g[a][b] = wirtinger::d2(l, p, Var::u(a), Var::ub(b))?;
        }
        for k in 0..n {
            l_zu[k][b] = wirtinger::d2(l, p, Var::z(k), Var::ub(b))?;
        }
    }
    Ok(TildeLagrangian { g, l_zu })
}

/// Chain-ruled second derivatives in the target chart at the matched point.
///
/// With `A = J^-1` and `B^d_k = dW^d_b/dz^h A^h_k u~^b`:
/// `d/dz~^k = A^h_k d/dz^h + B^d_k d/du^d`, `d/du~bar^b = conj(W^d_b) d/dubar^d`.
pub fn tilde_lagrangian_second(
    a: &AlgebroidSpec,
    l: &Expression,
    chart: &ChartData,
    p: &WPoint,
) -> Result<TildeLagrangian> {
    let n = a.n;
    let m = a.m;
    let cd = chart_point_data(a, chart, p)?;
    let direct = lagrangian_second(l, p, n, m)?;

    let mut b_coef = linalg::zeros(m, n); // B[d][k]
    for d in 0..m {
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for h in 0..n {
                for be in 0..m {
                    acc += cd.dw[d][be][h] * cd.jinv[h][k] * cd.u_tilde[be];
                }
            }
            b_coef[d][k] = acc;
        }
    }

    let mut g = linalg::zeros(m, m);
    for al in 0..m {
        for be in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for e in 0..m {
                for d in 0..m {
                    acc += cd.w[e][al] * cd.w[d][be].conj() * direct.g[e][d];
                }
            }
            g[al][be] = acc;
        }
    }

    let mut l_zu = linalg::zeros(n, m);
    for k in 0..n {
        for be in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for d in 0..m {
                let mut inner = Complex64::new(0.0, 0.0);
                for h in 0..n {
                    inner += cd.jinv[h][k] * direct.l_zu[h][d];
                }
                for e in 0..m {
                    inner += b_coef[e][k] * direct.g[e][d];
                }
                acc += cd.w[d][be].conj() * inner;
            }
            l_zu[k][be] = acc;
        }
    }

    Ok(TildeLagrangian { g, l_zu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::structure_identity_residual;
    use crate::catalog;
    use crate::expr::VariableContext;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn transformed_structure_keeps_identities() {
        // Identity (i) holds in both charts of the twochart entry.
        let a = catalog::twochart();
        let chart = a.charts[0].clone();
        let p = WPoint::new(vec![c64(1.3, 0.6)], vec![c64(0.7, -0.2)]);
        let direct = direct_structure(&a, &p).unwrap();
        let tilde = transformed_structure(&a, &chart, &p).unwrap();
        let r_direct = structure_identity_residual(&direct.anchor, &direct.danchor, &direct.c);
        let r_tilde = structure_identity_residual(&tilde.anchor, &tilde.danchor, &tilde.c);
        assert!(r_direct < 1e-12);
        assert!(r_tilde < 1e-12);
        assert!((r_direct - r_tilde).abs() < 1e-9);
    }

    #[test]
    fn transformed_anchor_derivative_matches_closed_form() {
        // twochart: rho = z, z~ = 1/z, M = z. Then
        // rho~(z~) = W rho dz~/dz = (1/z) z (-1/z^2) = -1/z^2 = -z~^2,
        // so d rho~/d z~ = -2 z~ = -2/z.
        let a = catalog::twochart();
        let chart = a.charts[0].clone();
        let z = c64(0.8, 0.5);
        let p = WPoint::new(vec![z], vec![c64(1.0, 0.0)]);
        let tilde = transformed_structure(&a, &chart, &p).unwrap();
        let expect_val = -(z * z).finv();
        let expect_deriv = -2.0 * z.finv();
        assert!((tilde.anchor[0][0] - expect_val).norm() < 1e-12);
        assert!((tilde.danchor[0][0][0] - expect_deriv).norm() < 1e-11);
    }

    #[test]
    fn tilde_metric_matches_scalar_formula() {
        // L = z zb u ub on the twochart entry: g = |z|^2, and with M = z
        // g~ = |W|^2 g = 1 at the matched point.
        let a = catalog::twochart();
        let chart = a.charts[0].clone();
        let ctx = VariableContext::full(1, 1);
        let l = Expression::parse("z1*zb1*u1*ub1", &ctx).unwrap();
        let z = c64(1.2, -0.4);
        let p = WPoint::new(vec![z], vec![c64(0.5, 0.3)]);
        let tl = tilde_lagrangian_second(&a, &l, &chart, &p).unwrap();
        assert!((tl.g[0][0] - c64(1.0, 0.0)).norm() < 1e-12);
    }
}
