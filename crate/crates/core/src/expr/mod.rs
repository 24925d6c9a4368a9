//! A small DSL for closed-form expressions of complex variables in which
//! conjugated variables are independent symbols.
//!
//! Variables come in four classes: `z1..zn`, `zb1..zbn` (the formal
//! conjugates), `u1..um`, `ub1..ubm`. A context declares the dimensions and
//! which classes may appear; a holomorphic context admits only `z`/`u`.
//! Because `zb`/`ub` are ordinary symbols, Wirtinger differentiation is plain
//! forward-mode differentiation in the enlarged variable set.

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{EvalError, ParseError};
use crate::scalar::ScalarAlgebra;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarClass {
    Z,
    Zb,
    U,
    Ub,
}

impl VarClass {
    pub fn conjugate(self) -> VarClass {
        match self {
            VarClass::Z => VarClass::Zb,
            VarClass::Zb => VarClass::Z,
            VarClass::U => VarClass::Ub,
            VarClass::Ub => VarClass::U,
        }
    }

    pub fn is_conjugated(self) -> bool {
        matches!(self, VarClass::Zb | VarClass::Ub)
    }

    pub fn is_base(self) -> bool {
        matches!(self, VarClass::Z | VarClass::Zb)
    }

    fn prefix(self) -> &'static str {
        match self {
            VarClass::Z => "z",
            VarClass::Zb => "zb",
            VarClass::U => "u",
            VarClass::Ub => "ub",
        }
    }
}

/// A variable reference; `index` is zero-based (so `z1` has index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub class: VarClass,
    pub index: usize,
}

impl Var {
    pub fn z(index: usize) -> Var {
        Var {
            class: VarClass::Z,
            index,
        }
    }
    pub fn zb(index: usize) -> Var {
        Var {
            class: VarClass::Zb,
            index,
        }
    }
    pub fn u(index: usize) -> Var {
        Var {
            class: VarClass::U,
            index,
        }
    }
    pub fn ub(index: usize) -> Var {
        Var {
            class: VarClass::Ub,
            index,
        }
    }

    pub fn conjugate(self) -> Var {
        Var {
            class: self.class.conjugate(),
            index: self.index,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class.prefix(), self.index + 1)
    }
}

/// Declares dimensions and which variable classes an expression may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableContext {
    pub n: usize,
    pub m: usize,
    classes: BTreeSet<VarClass>,
}

impl VariableContext {
    pub fn new(n: usize, m: usize, classes: &[VarClass]) -> VariableContext {
        assert!(n >= 1 && m >= 1, "context dimensions must be at least 1");
        VariableContext {
            n,
            m,
            classes: classes.iter().copied().collect(),
        }
    }

    /// All four classes.
    pub fn full(n: usize, m: usize) -> VariableContext {
        Self::new(
            n,
            m,
            &[VarClass::Z, VarClass::Zb, VarClass::U, VarClass::Ub],
        )
    }

    /// Holomorphic functions of the base coordinates only.
    pub fn holomorphic_base(n: usize) -> VariableContext {
        Self::new(n, 1, &[VarClass::Z])
    }

    /// Holomorphic functions of base and fiber coordinates.
    pub fn holomorphic(n: usize, m: usize) -> VariableContext {
        Self::new(n, m, &[VarClass::Z, VarClass::U])
    }

    pub fn allows(&self, class: VarClass) -> bool {
        self.classes.contains(&class)
    }

    pub fn is_holomorphic(&self) -> bool {
        !self.allows(VarClass::Zb) && !self.allows(VarClass::Ub)
    }

    pub fn dimension_of(&self, class: VarClass) -> usize {
        if class.is_base() {
            self.n
        } else {
            self.m
        }
    }

    pub fn declares(&self, var: Var) -> bool {
        self.allows(var.class) && var.index < self.dimension_of(var.class)
    }

    /// Context with every class replaced by its conjugate.
    pub fn conjugate(&self) -> VariableContext {
        VariableContext {
            n: self.n,
            m: self.m,
            classes: self.classes.iter().map(|c| c.conjugate()).collect(),
        }
    }

    fn union(&self, other: &VariableContext) -> VariableContext {
        assert_eq!(
            (self.n, self.m),
            (other.n, other.m),
            "cannot combine expressions over different dimensions"
        );
        VariableContext {
            n: self.n,
            m: self.m,
            classes: self.classes.union(&other.classes).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Exp(Box<Node>),
    Log(Box<Node>),
    Sqrt(Box<Node>),
}

/// A parsed expression together with its variable context.
///
/// Immutable after construction; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    ctx: VariableContext,
}

/// Values for the variables an expression may reference.
#[derive(Debug, Clone)]
pub struct Assignment<S> {
    pub z: Vec<S>,
    pub zb: Vec<S>,
    pub u: Vec<S>,
    pub ub: Vec<S>,
}

impl<S: Clone> Assignment<S> {
    pub fn get(&self, var: Var) -> Option<S> {
        let slot = match var.class {
            VarClass::Z => &self.z,
            VarClass::Zb => &self.zb,
            VarClass::U => &self.u,
            VarClass::Ub => &self.ub,
        };
        slot.get(var.index).cloned()
    }
}

impl Expression {
    /// Parse `text` against `ctx`. Errors carry byte offsets.
    pub fn parse(text: &str, ctx: &VariableContext) -> Result<Expression, ParseError> {
        let tokens = lexer::lex(text)?;
        let root = parser::parse_tokens(&tokens, text.len(), ctx)?;
        Ok(Expression {
            root,
            ctx: ctx.clone(),
        })
    }

    pub fn constant(c: Complex64, ctx: &VariableContext) -> Expression {
        Expression {
            root: Node::Const(c),
            ctx: ctx.clone(),
        }
    }

    pub fn variable(var: Var, ctx: &VariableContext) -> Expression {
        assert!(
            ctx.declares(var),
            "variable {var} not declared by the context"
        );
        Expression {
            root: Node::Var(var),
            ctx: ctx.clone(),
        }
    }

    pub fn context(&self) -> &VariableContext {
        &self.ctx
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut vars = BTreeSet::new();
        collect_vars(&self.root, &mut vars);
        vars
    }

    /// Evaluate over any scalar algebra. The same code path serves plain
    /// complex numbers and (nested) dual numbers.
    pub fn eval<S: ScalarAlgebra>(&self, values: &Assignment<S>) -> Result<S, EvalError> {
        eval_node(&self.root, values)
    }

    /// Structural combinators; contexts must share dimensions.
    pub fn add(&self, rhs: &Expression) -> Expression {
        Expression {
            root: Node::Add(Box::new(self.root.clone()), Box::new(rhs.root.clone())),
            ctx: self.ctx.union(&rhs.ctx),
        }
    }

    pub fn sub(&self, rhs: &Expression) -> Expression {
        Expression {
            root: Node::Sub(Box::new(self.root.clone()), Box::new(rhs.root.clone())),
            ctx: self.ctx.union(&rhs.ctx),
        }
    }

    pub fn mul(&self, rhs: &Expression) -> Expression {
        Expression {
            root: Node::Mul(Box::new(self.root.clone()), Box::new(rhs.root.clone())),
            ctx: self.ctx.union(&rhs.ctx),
        }
    }

    pub fn neg(&self) -> Expression {
        Expression {
            root: Node::Neg(Box::new(self.root.clone())),
            ctx: self.ctx.clone(),
        }
    }

    /// Formal complex conjugate: literals are conjugated and every variable
    /// swaps with its conjugate class. Valid because `exp`, `log`, `sqrt`
    /// use principal branches.
    pub fn conjugate(&self) -> Expression {
        Expression {
            root: conj_node(&self.root),
            ctx: self.ctx.conjugate(),
        }
    }

    /// Rewrap over a wider context (same tree). Every free variable must be
    /// declared by the new context.
    pub fn promote(&self, ctx: &VariableContext) -> Expression {
        for v in self.free_vars() {
            assert!(
                ctx.declares(v),
                "variable {v} not declared by the target context"
            );
        }
        Expression {
            root: self.root.clone(),
            ctx: ctx.clone(),
        }
    }

    /// Replace variables by expression trees (used to compose pullbacks such
    /// as eta = rho * u). Substituted expressions must live over `new_ctx`.
    pub fn substitute(
        &self,
        map: &std::collections::BTreeMap<Var, Expression>,
        new_ctx: &VariableContext,
    ) -> Expression {
        Expression {
            root: subst_node(&self.root, map),
            ctx: new_ctx.clone(),
        }
    }
}

fn collect_vars(node: &Node, out: &mut BTreeSet<Var>) {
    match node {
        Node::Const(_) => {}
        Node::Var(v) => {
            out.insert(*v);
        }
        Node::Neg(a) | Node::Exp(a) | Node::Log(a) | Node::Sqrt(a) | Node::Pow(a, _) => {
            collect_vars(a, out)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

fn conj_node(node: &Node) -> Node {
    match node {
        Node::Const(c) => Node::Const(c.conj()),
        Node::Var(v) => Node::Var(v.conjugate()),
        Node::Neg(a) => Node::Neg(Box::new(conj_node(a))),
        Node::Add(a, b) => Node::Add(Box::new(conj_node(a)), Box::new(conj_node(b))),
        Node::Sub(a, b) => Node::Sub(Box::new(conj_node(a)), Box::new(conj_node(b))),
        Node::Mul(a, b) => Node::Mul(Box::new(conj_node(a)), Box::new(conj_node(b))),
        Node::Div(a, b) => Node::Div(Box::new(conj_node(a)), Box::new(conj_node(b))),
        Node::Pow(a, n) => Node::Pow(Box::new(conj_node(a)), *n),
        Node::Exp(a) => Node::Exp(Box::new(conj_node(a))),
        Node::Log(a) => Node::Log(Box::new(conj_node(a))),
        Node::Sqrt(a) => Node::Sqrt(Box::new(conj_node(a))),
    }
}

fn subst_node(node: &Node, map: &std::collections::BTreeMap<Var, Expression>) -> Node {
    match node {
        Node::Const(c) => Node::Const(*c),
        Node::Var(v) => match map.get(v) {
            Some(e) => e.root.clone(),
            None => Node::Var(*v),
        },
        Node::Neg(a) => Node::Neg(Box::new(subst_node(a, map))),
        Node::Add(a, b) => Node::Add(Box::new(subst_node(a, map)), Box::new(subst_node(b, map))),
        Node::Sub(a, b) => Node::Sub(Box::new(subst_node(a, map)), Box::new(subst_node(b, map))),
        Node::Mul(a, b) => Node::Mul(Box::new(subst_node(a, map)), Box::new(subst_node(b, map))),
        Node::Div(a, b) => Node::Div(Box::new(subst_node(a, map)), Box::new(subst_node(b, map))),
        Node::Pow(a, n) => Node::Pow(Box::new(subst_node(a, map)), *n),
        Node::Exp(a) => Node::Exp(Box::new(subst_node(a, map))),
        Node::Log(a) => Node::Log(Box::new(subst_node(a, map))),
        Node::Sqrt(a) => Node::Sqrt(Box::new(subst_node(a, map))),
    }
}

fn eval_node<S: ScalarAlgebra>(node: &Node, values: &Assignment<S>) -> Result<S, EvalError> {
    match node {
        Node::Const(c) => Ok(S::from_complex(*c)),
        Node::Var(v) => values.get(*v).ok_or_else(|| EvalError::UnboundVariable {
            name: v.to_string(),
        }),
        Node::Neg(a) => Ok(eval_node(a, values)?.neg()),
        Node::Add(a, b) => Ok(eval_node(a, values)?.add(&eval_node(b, values)?)),
        Node::Sub(a, b) => Ok(eval_node(a, values)?.sub(&eval_node(b, values)?)),
        Node::Mul(a, b) => Ok(eval_node(a, values)?.mul(&eval_node(b, values)?)),
        Node::Div(a, b) => {
            let num = eval_node(a, values)?;
            let den = eval_node(b, values)?;
            num.div(&den).ok_or_else(|| EvalError::DivisionByZero {
                subexpr: print_node(node),
            })
        }
        Node::Pow(a, exponent) => {
            let base = eval_node(a, values)?;
            base.powi(*exponent)
                .ok_or_else(|| EvalError::DivisionByZero {
                    subexpr: print_node(node),
                })
        }
        Node::Exp(a) => Ok(eval_node(a, values)?.exp()),
        Node::Log(a) => eval_node(a, values)?
            .ln()
            .ok_or_else(|| EvalError::SingularFunction {
                func: "log",
                subexpr: print_node(node),
            }),
        Node::Sqrt(a) => eval_node(a, values)?
            .sqrt()
            .ok_or_else(|| EvalError::SingularFunction {
                func: "sqrt",
                subexpr: print_node(node),
            }),
    }
}

// Precedence levels for printing: add/sub 1, mul/div 2, unary minus 3, pow 4.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) => {
            // A constant that prints with a sign or as a+bi binds like the
            // expression it will reparse as.
            if c.im != 0.0 && c.re != 0.0 {
                1
            } else if c.re < 0.0 || c.im < 0.0 {
                3
            } else {
                5
            }
        }
        Node::Var(_) | Node::Exp(_) | Node::Log(_) | Node::Sqrt(_) => 5,
    }
}

fn fmt_const(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else if c.im < 0.0 {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

fn print_prec(node: &Node, min_prec: u8, out: &mut String) {
    let prec = precedence(node);
    let needs_parens = prec < min_prec;
    if needs_parens {
        out.push('(');
    }
    match node {
        Node::Const(c) => out.push_str(&fmt_const(*c)),
        Node::Var(v) => out.push_str(&v.to_string()),
        Node::Neg(a) => {
            out.push('-');
            print_prec(a, 3, out);
        }
        Node::Add(a, b) => {
            print_prec(a, 1, out);
            out.push_str(" + ");
            print_prec(b, 2, out);
        }
        Node::Sub(a, b) => {
            print_prec(a, 1, out);
            out.push_str(" - ");
            print_prec(b, 2, out);
        }
        Node::Mul(a, b) => {
            print_prec(a, 2, out);
            out.push('*');
            print_prec(b, 3, out);
        }
        Node::Div(a, b) => {
            print_prec(a, 2, out);
            out.push('/');
            print_prec(b, 5, out);
        }
        Node::Pow(a, n) => {
            print_prec(a, 5, out);
            out.push('^');
            out.push_str(&n.to_string());
        }
        Node::Exp(a) => {
            out.push_str("exp(");
            print_prec(a, 0, out);
            out.push(')');
        }
        Node::Log(a) => {
            out.push_str("log(");
            print_prec(a, 0, out);
            out.push(')');
        }
        Node::Sqrt(a) => {
            out.push_str("sqrt(");
            print_prec(a, 0, out);
            out.push(')');
        }
    }
    if needs_parens {
        out.push(')');
    }
}

fn print_node(node: &Node) -> String {
    let mut s = String::new();
    print_prec(node, 0, &mut s);
    s
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_node(&self.root))
    }
}
