//! Built-in example algebroids. The entries are chosen to exercise the
//! three constant-rank regimes of the anchor, a nontrivial chart change,
//! and a nonabelian bracket. Definitions go through the JSON loader so the
//! file format stays honest.

use crate::algebroid::AlgebroidSpec;
use crate::expr::{Expression, VariableContext};

const TRIVIAL: &str = r#"{
  "name": "trivial", "n": 1, "m": 1,
  "rho": [["1"]]
}"#;

const TANGENT: &str = r#"{
  "name": "tangent", "n": 2, "m": 2,
  "rho": [["1", "0"], ["0", "1"]]
}"#;

const SCALED: &str = r#"{
  "name": "scaled", "n": 1, "m": 1,
  "rho": [["z1"]],
  "singular": [{"coordinate": 1}]
}"#;

const IMMERSION: &str = r#"{
  "name": "immersion", "n": 2, "m": 1,
  "rho": [["1", "z1"]]
}"#;

// The anchor fields d/dz and z d/dz only close with [e_1, e_2] = e_1,
// so the structure constant C^1_{12} = 1 is forced by the first identity.
const SUBMERSION: &str = r#"{
  "name": "submersion", "n": 1, "m": 2,
  "rho": [["1"], ["z1"]],
  "C": [{"gamma": 1, "alpha": 1, "beta": 2, "expr": "1"}]
}"#;

const TWOCHART: &str = r#"{
  "name": "twochart", "n": 1, "m": 1,
  "rho": [["z1"]],
  "charts": [{"zmap": ["1/z1"], "M": [["z1"]]}],
  "singular": [{"coordinate": 1}]
}"#;

const HEISENBERG_LIKE: &str = r#"{
  "name": "heisenberg-like", "n": 1, "m": 3,
  "rho": [["1"], ["0"], ["0"]],
  "C": [{"gamma": 3, "alpha": 1, "beta": 2, "expr": "1"}]
}"#;

fn load(text: &str) -> AlgebroidSpec {
    AlgebroidSpec::from_json(text).expect("catalog entry must parse")
}

pub fn trivial() -> AlgebroidSpec {
    load(TRIVIAL)
}
pub fn tangent() -> AlgebroidSpec {
    load(TANGENT)
}
pub fn scaled() -> AlgebroidSpec {
    load(SCALED)
}
pub fn immersion() -> AlgebroidSpec {
    load(IMMERSION)
}
pub fn submersion() -> AlgebroidSpec {
    load(SUBMERSION)
}
pub fn twochart() -> AlgebroidSpec {
    load(TWOCHART)
}
pub fn heisenberg_like() -> AlgebroidSpec {
    load(HEISENBERG_LIKE)
}

pub fn all() -> Vec<AlgebroidSpec> {
    vec![
        trivial(),
        tangent(),
        scaled(),
        immersion(),
        submersion(),
        twochart(),
        heisenberg_like(),
    ]
}

pub fn by_name(name: &str) -> Option<AlgebroidSpec> {
    all().into_iter().find(|a| a.name == name)
}

/// Expression corpus for the AD-versus-finite-difference suite. Every
/// singularity sits on a coordinate zero, so annulus sampling with modulus
/// at least 0.3 stays clear of it.
pub struct CatalogExpression {
    pub text: &'static str,
    pub n: usize,
    pub m: usize,
}

pub const EXPRESSIONS: &[CatalogExpression] = &[
    CatalogExpression {
        text: "z1^3 - 2*z1*u1 + (1+2i)",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "z1*zb1*u1*ub1",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "exp(z1*u1)",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "log(z1)*u1",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "sqrt(z1*zb1 + u1*ub1)",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "u1^2*ub1/(2*z1) - exp(z1)*zb1^2",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "(z1 + u1)^3/(z1^2*u1)",
        n: 1,
        m: 1,
    },
    CatalogExpression {
        text: "z1*u2 + z2^2*u1*ub2 - zb2/(z1*u1)",
        n: 2,
        m: 2,
    },
    CatalogExpression {
        text: "log(z1*zb1 + u1*ub1 + u2*ub2)",
        n: 2,
        m: 2,
    },
    CatalogExpression {
        text: "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1",
        n: 2,
        m: 2,
    },
];

pub fn parsed_expressions() -> Vec<Expression> {
    EXPRESSIONS
        .iter()
        .map(|e| {
            let ctx = VariableContext::full(e.n, e.m);
            Expression::parse(e.text, &ctx).expect("catalog expression must parse")
        })
        .collect()
}
