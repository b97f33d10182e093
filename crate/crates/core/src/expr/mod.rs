//! Closed-form scalar expressions over named coordinates: parsing, exact
//! order-2 jet evaluation over a generic scalar, and precedence-aware
//! pretty-printing that round-trips through the parser.

mod jet;
mod parse;
mod scalar;

pub use jet::{dot, jadd, jchain, jdiv, jmul, jneg, jpowi, jscale, jsub, Jet2, Order, SymMat};
pub use scalar::{Dual, JetScalar};

use std::fmt;

use crate::error::{Error, Result};

/// Evaluating `abs_smooth` with delta = 0 closer to zero than this, with
/// derivatives requested, is a `NonSmooth` error.
pub const ABS_SMOOTH_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Lit(f64),
    Var(usize),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// General power, evaluated as exp(b ln a); requires a positive base.
    Pow(Box<Node>, Box<Node>),
    /// Unrolled integer power, exact for negative bases.
    PowInt(Box<Node>, i32),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    /// Smoothed absolute value sqrt(t^2 + delta^2); delta = 0 falls back to
    /// |t| away from zero and errors within the cutoff.
    AbsSmooth(Box<Node>, f64),
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    node: Node,
    vars: Vec<String>,
}

/// Parses `source` over the given variables.
pub fn parse<S: AsRef<str>>(source: &str, variables: &[S]) -> Result<Expr> {
    let vars: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return Err(Error::Input(format!("duplicate variable name `{v}`")));
        }
    }
    let node = parse::parse_source(source, &vars)?;
    Ok(Expr { node, vars })
}

struct Ctx<'a, S> {
    point: &'a [S],
    /// Variable index -> active slot, `None` for frozen variables.
    pos_of: &'a [Option<usize>],
    m: usize,
    ord: Order,
}

impl Expr {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub(crate) fn node_ref(&self) -> &Node {
        &self.node
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Plain evaluation, no derivatives.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet_gen(point, Order::Value)?.value)
    }

    /// Order-2 jet with the gradient and Hessian taken over `active` only;
    /// an empty active set degenerates to plain evaluation.
    pub fn eval_jet(&self, point: &[f64], active: &[usize]) -> Result<Jet2<f64>> {
        if point.len() != self.nvars() {
            return Err(Error::Dimension {
                expected: self.nvars(),
                got: point.len(),
            });
        }
        let mut pos_of = vec![None; self.nvars()];
        for (slot, &ix) in active.iter().enumerate() {
            if ix >= self.nvars() {
                return Err(Error::Input(format!(
                    "active index {ix} out of range for {} variables",
                    self.nvars()
                )));
            }
            if pos_of[ix].is_some() {
                return Err(Error::Input(format!("duplicate active index {ix}")));
            }
            pos_of[ix] = Some(slot);
        }
        let ord = if active.is_empty() { Order::Value } else { Order::Hess };
        let ctx = Ctx {
            point,
            pos_of: &pos_of,
            m: active.len(),
            ord,
        };
        eval_node(&self.node, &ctx)
    }

    /// Jet over all variables at the requested order, generic in the scalar.
    pub(crate) fn jet_gen<S: JetScalar>(&self, point: &[S], ord: Order) -> Result<Jet2<S>> {
        if point.len() != self.nvars() {
            return Err(Error::Dimension {
                expected: self.nvars(),
                got: point.len(),
            });
        }
        let pos_of: Vec<Option<usize>> = (0..self.nvars()).map(Some).collect();
        let ctx = Ctx {
            point,
            pos_of: &pos_of,
            m: self.nvars(),
            ord,
        };
        eval_node(&self.node, &ctx)
    }
}

fn eval_node<S: JetScalar>(node: &Node, ctx: &Ctx<'_, S>) -> Result<Jet2<S>> {
    let deriv_requested = ctx.ord > Order::Value || S::CARRIES_DERIV;
    match node {
        Node::Lit(v) => Ok(Jet2::constant(S::from_f64(*v), ctx.m, ctx.ord)),
        Node::Var(i) => Ok(match ctx.pos_of[*i] {
            Some(pos) => Jet2::coordinate(ctx.point[*i], pos, ctx.m, ctx.ord),
            None => Jet2::constant(ctx.point[*i], ctx.m, ctx.ord),
        }),
        Node::Add(a, b) => Ok(jadd(&eval_node(a, ctx)?, &eval_node(b, ctx)?)),
        Node::Sub(a, b) => Ok(jsub(&eval_node(a, ctx)?, &eval_node(b, ctx)?)),
        Node::Mul(a, b) => Ok(jmul(&eval_node(a, ctx)?, &eval_node(b, ctx)?)),
        Node::Div(a, b) => Ok(jdiv(&eval_node(a, ctx)?, &eval_node(b, ctx)?)),
        Node::Neg(a) => Ok(jneg(&eval_node(a, ctx)?)),
        Node::PowInt(a, k) => {
            let ja = eval_node(a, ctx)?;
            Ok(jpowi(&ja, *k, ctx.m, ctx.ord))
        }
        Node::Pow(a, b) => {
            let ja = eval_node(a, ctx)?;
            let jb = eval_node(b, ctx)?;
            let v = ja.value;
            if v.re() <= 0.0 {
                return Err(Error::Domain(format!(
                    "power with non-positive base {}",
                    v.re()
                )));
            }
            let ln_a = jchain(&ja, v.ln(), S::one() / v, -S::one() / (v * v));
            let prod = jmul(&jb, &ln_a);
            let e = prod.value.exp();
            Ok(jchain(&prod, e, e, e))
        }
        Node::Call(f, a) => {
            let ja = eval_node(a, ctx)?;
            let v = ja.value;
            let (u, du, ddu) = match f {
                Func::Sin => (v.sin(), v.cos(), -v.sin()),
                Func::Cos => (v.cos(), -v.sin(), -v.cos()),
                Func::Exp => {
                    let e = v.exp();
                    (e, e, e)
                }
                Func::Log => {
                    if v.re() <= 0.0 {
                        return Err(Error::Domain(format!(
                            "log of non-positive value {}",
                            v.re()
                        )));
                    }
                    (v.ln(), S::one() / v, -S::one() / (v * v))
                }
                Func::Sqrt => {
                    if v.re() <= 0.0 {
                        return Err(Error::Domain(format!(
                            "sqrt of non-positive value {}",
                            v.re()
                        )));
                    }
                    let s = v.sqrt();
                    let half = S::from_f64(0.5);
                    let quarter = S::from_f64(-0.25);
                    (s, half / s, quarter / (s * s * s))
                }
            };
            Ok(jchain(&ja, u, du, ddu))
        }
        Node::AbsSmooth(a, delta) => {
            let ja = eval_node(a, ctx)?;
            let t = ja.value;
            if *delta == 0.0 {
                if t.re().abs() <= ABS_SMOOTH_CUTOFF && deriv_requested {
                    return Err(Error::NonSmooth {
                        cutoff: ABS_SMOOTH_CUTOFF,
                    });
                }
                let sign = S::from_f64(if t.re() >= 0.0 { 1.0 } else { -1.0 });
                Ok(jchain(&ja, sign * t, sign, S::zero()))
            } else if *delta < 0.0 {
                Err(Error::Domain(format!(
                    "abs_smooth smoothing width must be non-negative, got {delta}"
                )))
            } else {
                let d2 = S::from_f64(delta * delta);
                let s = (t * t + d2).sqrt();
                Ok(jchain(&ja, s, t / s, d2 / (s * s * s)))
            }
        }
    }
}

fn prec(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) | Node::PowInt(..) => 4,
        Node::Lit(..) | Node::Var(..) | Node::Call(..) | Node::AbsSmooth(..) => 5,
    }
}

fn fmt_node(n: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let wrap = |child: &Node, cond: bool, vars: &[String], f: &mut fmt::Formatter<'_>| {
        if cond {
            write!(f, "(")?;
            fmt_node(child, vars, f)?;
            write!(f, ")")
        } else {
            fmt_node(child, vars, f)
        }
    };
    match n {
        Node::Lit(v) => write!(f, "{v}"),
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Add(a, b) => {
            wrap(a, false, vars, f)?;
            write!(f, " + ")?;
            wrap(b, prec(b) <= 1, vars, f)
        }
        Node::Sub(a, b) => {
            wrap(a, false, vars, f)?;
            write!(f, " - ")?;
            wrap(b, prec(b) <= 1, vars, f)
        }
        Node::Mul(a, b) => {
            wrap(a, prec(a) < 2, vars, f)?;
            write!(f, "*")?;
            wrap(b, prec(b) <= 2, vars, f)
        }
        Node::Div(a, b) => {
            wrap(a, prec(a) < 2, vars, f)?;
            write!(f, "/")?;
            wrap(b, prec(b) <= 2, vars, f)
        }
        Node::Pow(a, b) => {
            wrap(a, prec(a) <= 4, vars, f)?;
            write!(f, "^")?;
            wrap(b, prec(b) < 3, vars, f)
        }
        Node::PowInt(a, k) => {
            wrap(a, prec(a) <= 4, vars, f)?;
            write!(f, "^{k}")
        }
        Node::Neg(a) => {
            write!(f, "-")?;
            wrap(a, prec(a) < 4, vars, f)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            fmt_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::AbsSmooth(a, delta) => {
            write!(f, "abs_smooth(")?;
            fmt_node(a, vars, f)?;
            if *delta != 0.0 {
                write!(f, ", {delta}")?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.node, &self.vars, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vars2() -> Vec<String> {
        vec!["x1".into(), "y1".into()]
    }

    fn p(src: &str) -> Expr {
        parse(src, &vars2()).unwrap()
    }

    #[test]
    fn parses_expected_shapes() {
        let e = p("x1^2 + sin(y1)");
        assert_eq!(
            e.node,
            Node::Add(
                Box::new(Node::PowInt(Box::new(Node::Var(0)), 2)),
                Box::new(Node::Call(Func::Sin, Box::new(Node::Var(1)))),
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("2+3*4^2").eval(&[0.0, 0.0]).unwrap(), 50.0);
        // Right-associative: 2^(3^2); the outer power is the general
        // exp/log path since its exponent is not a literal.
        assert!((p("2^3^2").eval(&[0.0, 0.0]).unwrap() - 512.0).abs() < 1e-10);
        assert_eq!(p("(2+3)*4").eval(&[0.0, 0.0]).unwrap(), 20.0);
        assert_eq!(p("2-3-4").eval(&[0.0, 0.0]).unwrap(), -5.0);
        assert_eq!(p("16/4/2").eval(&[0.0, 0.0]).unwrap(), 2.0);
        // Unary minus binds looser than ^.
        assert_eq!(p("-x1^2").eval(&[3.0, 0.0]).unwrap(), -9.0);
        assert_eq!(p("x1^-2").eval(&[2.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn integer_powers_are_exact_general_powers_need_positive_base() {
        assert_eq!(p("(-2)^3").eval(&[0.0, 0.0]).unwrap(), -8.0);
        assert_eq!(p("2^-3").eval(&[0.0, 0.0]).unwrap(), 0.125);
        let sqrt2 = p("2^0.5").eval(&[0.0, 0.0]).unwrap();
        assert!((sqrt2 - 2.0f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            p("(-2)^0.5").eval(&[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            p("x1^y1").eval(&[-1.0, 2.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn parse_errors_carry_byte_offsets() {
        match parse("2*(", &vars2()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("x1 + z9", &vars2()) {
            Err(Error::UnknownVariable { name, offset }) => {
                assert_eq!(name, "z9");
                assert_eq!(offset, 5);
            }
            other => panic!("expected unknown variable, got {other:?}"),
        }
        match parse("foo(x1)", &vars2()) {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 0);
            }
            other => panic!("expected unknown function, got {other:?}"),
        }
        match parse("x1 @ y1", &vars2()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("x1 y1", &vars2()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn jets_match_hand_values() {
        let j = p("x1^2").eval_jet(&[3.0, 0.0], &[0]).unwrap();
        assert_eq!(j.value, 9.0);
        assert_eq!(j.grad, vec![6.0]);
        assert_eq!(j.hess.get(0, 0), 2.0);

        // Active subset freezes the other variable.
        let j = p("x1*y1").eval_jet(&[2.0, 3.0], &[1]).unwrap();
        assert_eq!(j.value, 6.0);
        assert_eq!(j.grad, vec![2.0]);
        assert_eq!(j.hess.get(0, 0), 0.0);

        let j = p("sqrt(x1^2 + y1^2)")
            .eval_jet(&[3.0, 4.0], &[0, 1])
            .unwrap();
        assert!((j.value - 5.0).abs() < 1e-15);
        assert!((j.grad[0] - 0.6).abs() < 1e-15);
        assert!((j.grad[1] - 0.8).abs() < 1e-15);
        assert!((j.hess.get(0, 0) - 16.0 / 125.0).abs() < 1e-15);
        assert!((j.hess.get(0, 1) + 12.0 / 125.0).abs() < 1e-15);

        // Empty active set: plain evaluation with zero-length gradient.
        let j = p("sin(x1)").eval_jet(&[1.0, 0.0], &[]).unwrap();
        assert!(j.grad.is_empty());
        assert!(j.hess.is_empty());
    }

    #[test]
    fn abs_smooth_semantics() {
        let e = p("abs_smooth(x1)");
        assert_eq!(e.eval(&[-3.0, 0.0]).unwrap(), 3.0);
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            e.eval_jet(&[0.0, 0.0], &[0]),
            Err(Error::NonSmooth { .. })
        ));
        let j = e.eval_jet(&[-3.0, 0.0], &[0]).unwrap();
        assert_eq!(j.grad, vec![-1.0]);

        let s = p("abs_smooth(x1, 0.5)");
        let j = s.eval_jet(&[0.0, 0.0], &[0]).unwrap();
        assert_eq!(j.value, 0.5);
        assert_eq!(j.grad, vec![0.0]);
        assert!((j.hess.get(0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(p("log(x1)").eval(&[-1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(p("log(x1)").eval(&[0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(p("sqrt(x1)").eval(&[-1.0, 0.0]), Err(Error::Domain(_))));
        assert!(p("log(x1)").eval(&[2.0, 0.0]).is_ok());
    }

    fn fd_grad(e: &Expr, point: &[f64], i: usize, h: f64) -> f64 {
        let mut up = point.to_vec();
        let mut dn = point.to_vec();
        up[i] += h;
        dn[i] -= h;
        (e.eval(&up).unwrap() - e.eval(&dn).unwrap()) / (2.0 * h)
    }

    fn fd_hess(e: &Expr, point: &[f64], i: usize, j: usize, h: f64) -> f64 {
        let ev = |di: f64, dj: f64| {
            let mut q = point.to_vec();
            q[i] += di;
            q[j] += dj;
            e.eval(&q).unwrap()
        };
        if i == j {
            (ev(h, 0.0) - 2.0 * ev(0.0, 0.0) + ev(-h, 0.0)) / (h * h)
        } else {
            (ev(h, h) - ev(h, -h) - ev(-h, h) + ev(-h, -h)) / (4.0 * h * h)
        }
    }

    #[test]
    fn jets_match_finite_differences_for_every_builtin() {
        let cases: &[(&str, [f64; 2])] = &[
            ("sin(x1*y1)", [0.8, -0.6]),
            ("cos(x1 - y1)", [0.3, 1.1]),
            ("exp(x1/2 + y1/3)", [0.5, -0.4]),
            ("log(x1 + 3)", [1.2, 0.0]),
            ("sqrt(x1^2 + y1^2 + 1)", [0.7, -1.3]),
            ("x1^3 - 2*x1*y1 + y1^2", [1.1, -0.9]),
            ("x1^2.5", [1.7, 0.0]),
            ("abs_smooth(x1*y1, 0.5)", [0.4, 0.9]),
        ];
        let h = 1e-6;
        for (src, point) in cases {
            let e = p(src);
            let j = e.eval_jet(point, &[0, 1]).unwrap();
            for i in 0..2 {
                let fd = fd_grad(&e, point, i, h);
                let denom = fd.abs().max(1.0);
                assert!(
                    (j.grad[i] - fd).abs() / denom < 1e-6,
                    "{src}: grad[{i}] jet {} vs fd {fd}",
                    j.grad[i]
                );
            }
            for i in 0..2 {
                for k in i..2 {
                    let fd = fd_hess(&e, point, i, k, 1e-4);
                    let denom = fd.abs().max(1.0);
                    assert!(
                        (j.hess.get(i, k) - fd).abs() / denom < 1e-4,
                        "{src}: hess[{i}{k}] jet {} vs fd {fd}",
                        j.hess.get(i, k)
                    );
                }
            }
        }
    }

    #[test]
    fn dual_evaluation_raises_derivative_order() {
        // d/ds at s=0 of grad(sin(x y)) along (1, 2) equals the Hessian row
        // contraction; checks that jets over duals carry third-order data.
        let e = p("sin(x1*y1)");
        let pt = [0.8, -0.6];
        let dir = [1.0, 2.0];
        let dp: Vec<Dual> = pt
            .iter()
            .zip(dir.iter())
            .map(|(&v, &d)| Dual::new(v, d))
            .collect();
        let jd = e.jet_gen(&dp, Order::Hess).unwrap();
        let j = e.eval_jet(&pt, &[0, 1]).unwrap();
        for i in 0..2 {
            let contracted: f64 = (0..2).map(|k| j.hess.get(i, k) * dir[k]).sum();
            assert!((jd.grad[i].eps - contracted).abs() < 1e-12);
        }
    }

    #[test]
    fn display_round_trips_hand_cases() {
        for src in [
            "x1 + y1*x1",
            "-x1^2",
            "x1^-2",
            "(x1 + y1)*x1",
            "x1 - (y1 - x1)",
            "x1/(y1 + 3)",
            "2^x1",
            "sin(x1)*cos(y1)",
            "abs_smooth(x1, 0.25)",
            "-(x1*y1)",
        ] {
            let e = p(src);
            let printed = e.to_string();
            let re = parse(&printed, &vars2()).unwrap();
            assert_eq!(e.node, re.node, "{src} printed as {printed}");
        }
    }

    fn ast_strategy() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..100).prop_map(|v| Node::Lit(v as f64 / 4.0)),
            (0usize..2).prop_map(Node::Var),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Node::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Node::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Node::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Node::Div(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                (inner.clone(), -3i32..=3)
                    .prop_map(|(a, k)| Node::PowInt(Box::new(a), k)),
                inner.clone().prop_map(|a| Node::Call(Func::Sin, Box::new(a))),
                inner.clone().prop_map(|a| Node::Call(Func::Exp, Box::new(a))),
                (inner, prop_oneof![Just(0.0f64), Just(0.5f64)])
                    .prop_map(|(a, d)| Node::AbsSmooth(Box::new(a), d)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(ast in ast_strategy()) {
            let e = Expr { node: ast, vars: vars2() };
            let printed = e.to_string();
            let re = parse(&printed, &vars2()).unwrap();
            prop_assert_eq!(e.node, re.node, "printed: {}", printed);
        }
    }
}
