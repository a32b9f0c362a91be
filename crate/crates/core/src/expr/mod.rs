//! Scalar coordinate expressions and their evaluation as Taylor jets.
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;            (* right associative *)
//! atom    = number | ident | ident "(" expr ")" | "(" expr ")" ;
//! number  = digit { digit } [ "." { digit } ] [ ("e" | "E") [ "+" | "-" ] digit { digit } ]
//!         | "." digit { digit } [ ... exponent ... ] ;
//! ident   = ( letter | "_" ) { letter | digit | "_" } ;
//! ```
//!
//! Functions: `sin cos tan exp log ln sqrt sinh cosh tanh`. The identifier
//! `pi` is a constant unless it is declared as a coordinate. Multiplication is
//! never implicit.

mod jet;
mod parse;

pub use jet::{Jet, JetError, MAX_ORDER, MAX_VARS};
pub use parse::parse_scalar;

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol '{name}' at byte {pos}")]
    UnknownSymbol { name: String, pos: usize },
    #[error("{kind} at point {point:?}")]
    Domain { kind: JetError, point: Vec<f64> },
    #[error("point has {got} coordinates, expression expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jet order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
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
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, x: &Jet) -> Result<Jet, JetError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Tan => x.tan(),
            Func::Exp => Ok(x.exp()),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sinh => Ok(x.sinh()),
            Func::Cosh => Ok(x.cosh()),
            Func::Tanh => Ok(x.tanh()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Var(k) => Some(*k),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    fn eval(&self, vars: &[Jet], proto: &Jet) -> Result<Jet, JetError> {
        Ok(match self {
            Node::Num(x) => proto.constant_like(*x),
            Node::Var(k) => vars[*k].clone(),
            Node::Neg(a) => -a.eval(vars, proto)?,
            Node::Add(a, b) => a.eval(vars, proto)? + b.eval(vars, proto)?,
            Node::Sub(a, b) => a.eval(vars, proto)? - b.eval(vars, proto)?,
            Node::Mul(a, b) => a.eval(vars, proto)? * b.eval(vars, proto)?,
            Node::Div(a, b) => a.eval(vars, proto)?.div_jet(&b.eval(vars, proto)?)?,
            Node::Pow(a, b) => {
                let base = a.eval(vars, proto)?;
                if b.is_constant() {
                    let e = b.eval(vars, proto)?.value();
                    if e.fract() == 0.0 && e.abs() <= 64.0 {
                        base.powi(e as i32)?
                    } else {
                        base.powf(e)?
                    }
                } else {
                    let e = b.eval(vars, proto)?;
                    (e * base.ln().map_err(|_| JetError::NonPositivePowBase)?).exp()
                }
            }
            Node::Call(f, a) => f.apply(&a.eval(vars, proto)?)?,
        })
    }

    fn fmt_names(&self, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(x) => {
                if *x < 0.0 {
                    write!(f, "(-{:?})", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Node::Var(k) => match names.get(*k) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{k}"),
            },
            Node::Neg(a) => {
                write!(f, "(-")?;
                a.fmt_names(names, f)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_names(names, f)?;
                write!(f, ")")
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                let op = match self {
                    Node::Add(..) => "+",
                    Node::Sub(..) => "-",
                    Node::Mul(..) => "*",
                    Node::Div(..) => "/",
                    _ => "^",
                };
                write!(f, "(")?;
                a.fmt_names(names, f)?;
                write!(f, " {op} ")?;
                b.fmt_names(names, f)?;
                write!(f, ")")
            }
        }
    }
}

/// Parsed scalar expression over a fixed list of coordinate names.
#[derive(Debug, Clone)]
pub struct ScalarExpr {
    root: Arc<Node>,
    coords: Arc<[String]>,
}

impl ScalarExpr {
    pub fn from_node(node: Node, coords: &[String]) -> ScalarExpr {
        if let Some(k) = node.max_var() {
            assert!(k < coords.len(), "variable index {k} outside coordinate list");
        }
        ScalarExpr { root: Arc::new(node), coords: coords.iter().cloned().collect() }
    }

    pub fn constant(c: f64, coords: &[String]) -> ScalarExpr {
        ScalarExpr::from_node(Node::Num(c), coords)
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    /// Evaluates the Taylor jet of the expression at `point` up to `order`.
    pub fn eval_jet(&self, point: &[f64], order: usize) -> Result<Jet, ExprError> {
        if order > MAX_ORDER {
            return Err(ExprError::OrderTooHigh(order));
        }
        if point.len() != self.coords.len() {
            return Err(ExprError::DimensionMismatch { expected: self.coords.len(), got: point.len() });
        }
        let n = point.len();
        let vars: Vec<Jet> = (0..n).map(|k| Jet::variable(n, order, k, point[k])).collect();
        self.eval_on(&vars, &Jet::zero(n, order))
            .map_err(|kind| ExprError::Domain { kind, point: point.to_vec() })
    }

    /// Evaluates with the coordinates replaced by arbitrary jets, i.e. the jet
    /// of the composition with a map whose components are `vars`.
    pub fn eval_on(&self, vars: &[Jet], proto: &Jet) -> Result<Jet, JetError> {
        assert_eq!(vars.len(), self.coords.len());
        self.root.eval(vars, proto)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        Ok(self.eval_jet(point, 0)?.value())
    }

    fn combine(&self, other: &ScalarExpr, f: fn(Box<Node>, Box<Node>) -> Node) -> ScalarExpr {
        assert_eq!(self.coords, other.coords, "expressions over different coordinates");
        ScalarExpr {
            root: Arc::new(f(Box::new((*self.root).clone()), Box::new((*other.root).clone()))),
            coords: self.coords.clone(),
        }
    }

    pub fn add(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, Node::Add)
    }

    pub fn sub(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, Node::Sub)
    }

    pub fn mul(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, Node::Mul)
    }

    pub fn div(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, Node::Div)
    }

    pub fn pow(&self, other: &ScalarExpr) -> ScalarExpr {
        self.combine(other, Node::Pow)
    }

    pub fn neg(&self) -> ScalarExpr {
        ScalarExpr { root: Arc::new(Node::Neg(Box::new((*self.root).clone()))), coords: self.coords.clone() }
    }

    pub fn call(&self, f: Func) -> ScalarExpr {
        ScalarExpr { root: Arc::new(Node::Call(f, Box::new((*self.root).clone()))), coords: self.coords.clone() }
    }
}

impl PartialEq for ScalarExpr {
    fn eq(&self, o: &Self) -> bool {
        self.coords == o.coords && self.root == o.root
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_names(&self.coords, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn inverse_square() {
        let e = parse_scalar("1/y^2", &xy()).unwrap();
        assert_eq!(e.eval(&[0.0, 2.0]).unwrap(), 0.25);
    }

    #[test]
    fn domain_error_carries_point() {
        let e = parse_scalar("log(x)", &xy()).unwrap();
        match e.eval_jet(&[-1.0, 3.0], 2) {
            Err(ExprError::Domain { kind: JetError::NonPositiveLog, point }) => assert_eq!(point, vec![-1.0, 3.0]),
            other => panic!("{other:?}"),
        }
        let e = parse_scalar("1/(x-1)", &xy()).unwrap();
        assert!(matches!(e.eval(&[1.0, 0.0]), Err(ExprError::Domain { kind: JetError::DivisionByZero, .. })));
    }

    #[test]
    fn real_power_checked_at_eval() {
        let e = parse_scalar("x^0.5", &xy()).unwrap();
        assert!((e.eval(&[4.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(e.eval(&[-4.0, 0.0]).is_err());
        let neg = parse_scalar("x^3", &xy()).unwrap();
        assert_eq!(neg.eval(&[-2.0, 0.0]).unwrap(), -8.0);
    }

    #[test]
    fn variable_exponent() {
        let e = parse_scalar("x^y", &xy()).unwrap();
        let j = e.eval_jet(&[2.0, 3.0], 1).unwrap();
        assert!((j.value() - 8.0).abs() < 1e-13);
        assert!((j.partial(&[1]) - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn order_and_dimension_checked() {
        let e = parse_scalar("x", &xy()).unwrap();
        assert_eq!(e.eval_jet(&[0.0, 0.0], 5).unwrap_err(), ExprError::OrderTooHigh(5));
        assert!(matches!(e.eval(&[0.0]), Err(ExprError::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn display_reparses() {
        let src = "-x^2 + sin(y)/3.5 - 2e-3*exp(-x*y)";
        let e = parse_scalar(src, &xy()).unwrap();
        let again = parse_scalar(&e.to_string(), &xy()).unwrap();
        assert_eq!(e.node(), again.node());
    }

    #[test]
    fn combinators() {
        let x = parse_scalar("x", &xy()).unwrap();
        let y = parse_scalar("y", &xy()).unwrap();
        let e = x.mul(&y).add(&x.call(Func::Cos)).neg();
        let v = e.eval(&[0.0, 5.0]).unwrap();
        assert_eq!(v, -1.0);
    }
}
