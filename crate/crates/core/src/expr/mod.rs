//! Arithmetic expressions over named chart coordinates.
//!
//! Expressions are parsed once and then evaluated either on plain `f64`
//! points or on [`Jet2`] points, which yields exact first and second
//! derivatives. [`Expression::derivative`] produces a symbolic partial
//! derivative; evaluating that on jets gives third derivatives of the
//! original where a formula needs them.

mod jet;
mod parse;

use std::fmt;

pub use jet::{Jet2, Scalar, MAX_VARS};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    const ALL: [(Func, &'static str); 9] = [
        (Func::Sin, "sin"),
        (Func::Cos, "cos"),
        (Func::Tan, "tan"),
        (Func::Exp, "exp"),
        (Func::Log, "log"),
        (Func::Sqrt, "sqrt"),
        (Func::Sinh, "sinh"),
        (Func::Cosh, "cosh"),
        (Func::Tanh, "tanh"),
    ];

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().find(|(_, n)| *n == name).map(|(f, _)| *f)
    }

    fn name(self) -> &'static str {
        Func::ALL.iter().find(|(f, _)| *f == self).map(|(_, n)| *n).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with the variable names it may reference.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
    source: String,
}

impl PartialEq for Expression {
    /// Structural equality of the trees over the same variable list; the
    /// source text is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.vars == other.vars
    }
}

impl Expression {
    pub fn parse<S: AsRef<str>>(source: &str, vars: &[S]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        let root = parse::Parser::new(source, &vars)?.parse_all()?;
        Ok(Expression {
            root,
            vars,
            source: source.to_string(),
        })
    }

    pub fn constant<S: AsRef<str>>(value: f64, vars: &[S]) -> Self {
        let root = num(value);
        let vars: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        let mut e = Expression {
            root,
            vars,
            source: String::new(),
        };
        e.source = e.to_string();
        e
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// True when no variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.eval_with(point)
    }

    /// Value, gradient and Hessian with respect to the expression's own
    /// variables.
    pub fn eval_jet2(&self, point: &[f64]) -> Result<Jet2> {
        let n = self.vars.len();
        if n > MAX_VARS {
            return Err(Error::DimensionTooLarge(n));
        }
        let jets: Vec<Jet2> = point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet2::variable(n, i, x))
            .collect();
        Ok(self.eval_with(&jets)?.widen(n))
    }

    /// Evaluates on arbitrary scalars, one per declared variable. Passing
    /// jets over a larger variable set propagates derivatives with respect to
    /// that set.
    pub fn eval_with<T: Scalar>(&self, point: &[T]) -> Result<T> {
        if point.len() != self.vars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vars.len(),
                found: point.len(),
            });
        }
        let v = self.root.eval(point, &self.vars)?;
        if !v.val().is_finite() {
            return Err(Error::domain(self.to_string(), "result is not finite"));
        }
        Ok(v)
    }

    /// Symbolic partial derivative with respect to variable `index`.
    pub fn derivative(&self, index: usize) -> Expression {
        let root = self.root.diff(index);
        let mut e = Expression {
            root,
            vars: self.vars.clone(),
            source: String::new(),
        };
        e.source = e.to_string();
        e
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f, &self.vars)
    }
}

/// A constant node that never stores a negative literal, so printing and
/// re-parsing reproduce the same tree.
fn num(v: f64) -> Node {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        Node::Neg(Box::new(Node::Const(-v)))
    } else {
        Node::Const(v)
    }
}

fn const_value(n: &Node) -> Option<f64> {
    match n {
        Node::Const(v) => Some(*v),
        Node::Neg(inner) => const_value(inner).map(|v| -v),
        _ => None,
    }
}

fn add(a: Node, b: Node) -> Node {
    match (const_value(&a), const_value(&b)) {
        (Some(x), Some(y)) => num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Node::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (const_value(&a), const_value(&b)) {
        (Some(x), Some(y)) => num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Node::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (const_value(&a), const_value(&b)) {
        (Some(x), Some(y)) => num(x * y),
        (Some(0.0), _) => Node::Const(0.0),
        (_, Some(0.0)) => Node::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Node::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (const_value(&a), const_value(&b)) {
        (Some(0.0), _) => Node::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Node::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Neg(inner) => *inner,
        Node::Const(v) => num(-v),
        other => Node::Neg(Box::new(other)),
    }
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, Box::new(a))
}

fn pow(a: Node, b: Node) -> Node {
    match const_value(&b) {
        Some(0.0) => Node::Const(1.0),
        Some(1.0) => a,
        _ => Node::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

fn integer_exponent(v: f64) -> Option<i32> {
    (v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
}

impl Node {
    fn is_constant(&self) -> bool {
        match self {
            Node::Const(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_constant(),
            Node::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    fn eval<T: Scalar>(&self, x: &[T], vars: &[String]) -> Result<T> {
        let fail = |reason: &str| Error::domain(self.render(vars), reason);
        Ok(match self {
            Node::Const(v) => T::from_f64(*v),
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x, vars)?,
            Node::Bin(op, a, b) => {
                let l = a.eval(x, vars)?;
                match op {
                    BinOp::Add => l + b.eval(x, vars)?,
                    BinOp::Sub => l - b.eval(x, vars)?,
                    BinOp::Mul => l * b.eval(x, vars)?,
                    BinOp::Div => {
                        let r = b.eval(x, vars)?;
                        if r.val() == 0.0 {
                            return Err(fail("division by zero"));
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        let r = b.eval(x, vars)?;
                        let int_exp = if b.is_constant() {
                            integer_exponent(r.val())
                        } else {
                            None
                        };
                        match int_exp {
                            Some(e) => {
                                if e < 0 && l.val() == 0.0 {
                                    return Err(fail("zero raised to a negative power"));
                                }
                                l.s_powi(e)
                            }
                            None => {
                                if l.val() <= 0.0 {
                                    return Err(fail(
                                        "non-integer exponent requires a positive base",
                                    ));
                                }
                                (r * l.s_ln()).s_exp()
                            }
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let u = a.eval(x, vars)?;
                match f {
                    Func::Sin => u.s_sin(),
                    Func::Cos => u.s_cos(),
                    Func::Tan => {
                        if u.val().cos() == 0.0 {
                            return Err(fail("tangent pole"));
                        }
                        u.s_tan()
                    }
                    Func::Exp => u.s_exp(),
                    Func::Log => {
                        if u.val() <= 0.0 {
                            return Err(fail("logarithm of a non-positive value"));
                        }
                        u.s_ln()
                    }
                    Func::Sqrt => {
                        if u.val() < 0.0 {
                            return Err(fail("square root of a negative value"));
                        }
                        u.s_sqrt()
                    }
                    Func::Sinh => u.s_sinh(),
                    Func::Cosh => u.s_cosh(),
                    Func::Tanh => u.s_tanh(),
                }
            }
        })
    }

    fn diff(&self, i: usize) -> Node {
        match self {
            Node::Const(_) => Node::Const(0.0),
            Node::Var(j) => Node::Const(if *j == i { 1.0 } else { 0.0 }),
            Node::Neg(a) => neg(a.diff(i)),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.diff(i), b.diff(i)),
                    BinOp::Sub => sub(a.diff(i), b.diff(i)),
                    BinOp::Mul => add(mul(a.diff(i), b.clone()), mul(a.clone(), b.diff(i))),
                    BinOp::Div => {
                        // (a' b - a b') / b^2
                        let top = sub(mul(a.diff(i), b.clone()), mul(a.clone(), b.diff(i)));
                        div(top, pow(b.clone(), Node::Const(2.0)))
                    }
                    BinOp::Pow => {
                        if b.is_constant() {
                            let e = b.eval::<f64>(&[], &[]).unwrap_or(f64::NAN);
                            let lowered = pow(a.clone(), num(e - 1.0));
                            mul(mul(num(e), lowered), a.diff(i))
                        } else {
                            // a^b (b' ln a + b a'/a)
                            let log_term = mul(b.diff(i), call(Func::Log, a.clone()));
                            let ratio = div(mul(b.clone(), a.diff(i)), a.clone());
                            mul(self.clone(), add(log_term, ratio))
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let inner = a.as_ref().clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => add(
                        Node::Const(1.0),
                        pow(call(Func::Tan, inner), Node::Const(2.0)),
                    ),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Node::Const(1.0), inner),
                    Func::Sqrt => div(
                        Node::Const(1.0),
                        mul(Node::Const(2.0), call(Func::Sqrt, inner)),
                    ),
                    Func::Sinh => call(Func::Cosh, inner),
                    Func::Cosh => call(Func::Sinh, inner),
                    Func::Tanh => sub(
                        Node::Const(1.0),
                        pow(call(Func::Tanh, inner), Node::Const(2.0)),
                    ),
                };
                mul(outer, a.diff(i))
            }
        }
    }

    fn render(&self, vars: &[String]) -> String {
        struct Show<'a>(&'a Node, &'a [String]);
        impl fmt::Display for Show<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.write(f, self.1)
            }
        }
        Show(self, vars).to_string()
    }

    /// Writes the node so that re-parsing yields the same tree: every compound
    /// operand is parenthesised.
    fn write(&self, f: &mut fmt::Formatter<'_>, vars: &[String]) -> fmt::Result {
        let operand = |n: &Node, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            match n {
                Node::Bin(..) | Node::Neg(_) => {
                    f.write_str("(")?;
                    n.write(f, vars)?;
                    f.write_str(")")
                }
                _ => n.write(f, vars),
            }
        };
        match self {
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Var(i) => f.write_str(&vars[*i]),
            Node::Neg(a) => {
                f.write_str("-")?;
                operand(a, f)
            }
            Node::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                    BinOp::Pow => "^",
                };
                operand(a, f)?;
                f.write_str(sym)?;
                operand(b, f)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, vars)?;
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn polynomial_plus_sine_jet() {
        let e = Expression::parse("x1^2 + sin(x2)", &["x1", "x2"]).unwrap();
        let j = e.eval_jet2(&[2.0, 0.0]).unwrap();
        assert_eq!(j.value(), 4.0);
        assert_eq!(j.gradient(), vec![4.0, 1.0]);
        assert_eq!(j.hessian(), vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn product_jet() {
        let e = Expression::parse("x1*x2", &["x1", "x2"]).unwrap();
        let j = e.eval_jet2(&[3.0, 5.0]).unwrap();
        assert_eq!(j.value(), 15.0);
        assert_eq!(j.gradient(), vec![5.0, 3.0]);
        assert_eq!(j.hessian(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn exponential_jet() {
        let e = Expression::parse("exp(x1)", &["x1"]).unwrap();
        let j = e.eval_jet2(&[1.0]).unwrap();
        let ee = std::f64::consts::E;
        assert!(close(j.value(), ee) && close(j.d(0), ee) && close(j.dd(0, 0), ee));
    }

    #[test]
    fn trailing_operator_reports_end_offset() {
        let err = Expression::parse("x1 + ", &["x1"]).unwrap_err();
        assert!(matches!(err, Error::Syntax { offset: 5, .. }), "{err}");
    }

    #[test]
    fn undeclared_variable_is_named() {
        let err = Expression::parse("y1*z", &["y1"]).unwrap_err();
        assert_eq!(err, Error::UndeclaredVariable("z".into()));
    }

    #[test]
    fn empty_source_is_rejected() {
        assert!(matches!(
            Expression::parse("  ", &["x"]),
            Err(Error::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn unknown_function_and_unbalanced_paren() {
        assert!(matches!(
            Expression::parse("foo(x)", &["x"]),
            Err(Error::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            Expression::parse("sin(x", &["x"]),
            Err(Error::Syntax { offset: 5, .. })
        ));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_negation() {
        let v = ["x"];
        let e = Expression::parse("2^3^2", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 512.0);
        let e = Expression::parse("-x^2", &v).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = Expression::parse("2^-x", &v).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = Expression::parse("1 + log(x - 2)", &["x"]).unwrap();
        match e.eval(&[1.0]).unwrap_err() {
            Error::Domain { expr, .. } => assert_eq!(expr, "log(x - 2.0)"),
            other => panic!("{other}"),
        }
        let e = Expression::parse("x^0.5", &["x"]).unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(Error::Domain { .. })));
        // integer exponents accept negative bases
        let e = Expression::parse("x^3", &["x"]).unwrap();
        assert_eq!(e.eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn display_round_trips() {
        let vars = ["x1", "x2"];
        for src in [
            "x1^2 + sin(x2)",
            "-(x1 - x2) * 3.5e-2 / (1 + x1^-2)",
            "2^3^x1 - -x2",
            "sqrt(cosh(x1) * tanh(x2)) + exp(log(x1))",
        ] {
            let e = Expression::parse(src, &vars).unwrap();
            let again = Expression::parse(&e.to_string(), &vars).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn constant_expression_has_zero_derivatives() {
        let e = Expression::parse("2 * sin(1) + 3^2", &["x", "y"]).unwrap();
        let j = e.eval_jet2(&[0.3, 0.7]).unwrap();
        assert!(j.gradient().iter().all(|&g| g == 0.0));
        assert!(j.hessian().iter().flatten().all(|&h| h == 0.0));
    }

    #[test]
    fn symbolic_derivative_matches_jet_gradient() {
        let vars = ["x", "y"];
        let e = Expression::parse("x^y * sin(x*y) / (1 + tanh(y)) + sqrt(x)", &vars).unwrap();
        let p = [1.3, 0.7];
        let j = e.eval_jet2(&p).unwrap();
        for i in 0..2 {
            let d = e.derivative(i);
            let dj = d.eval_jet2(&p).unwrap();
            assert!(close(dj.value(), j.d(i)));
            for k in 0..2 {
                assert!(close(dj.d(k), j.dd(i, k)));
            }
        }
    }
}
