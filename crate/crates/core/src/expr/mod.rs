//! A small expression language for coefficient functions of `(x, y, z1..zn)`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;          (* right-associative *)
//! primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! variable = "x" | "y" | "z1" | ... | "zn" ;
//! func    = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "abs" | "atan" ;
//! ```
//!
//! Evaluation comes in two flavours: plain `f64` ([`Expr::eval`]) and
//! forward-mode dual numbers carrying the partial derivative with respect to
//! one `z` component ([`Expr::eval_dual`]). Both share the same value path, so
//! the value part of a dual evaluation is bit-identical to `eval`.

mod eval;
mod parse;

use std::fmt;

use thiserror::Error;

pub use eval::{Dual, DualValue, EvalError, FaultKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    /// Zero-based state component (`z1` is `Z(0)`).
    Z(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Atan,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A parsed expression. `pos` is the byte offset of the node in its source;
/// equality compares structure only.
#[derive(Clone, Debug)]
pub struct Expr {
    pub node: Node,
    pub pos: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (Node::Num(a), Node::Num(b)) => a.to_bits() == b.to_bits(),
            (Node::Var(a), Node::Var(b)) => a == b,
            (Node::Neg(a), Node::Neg(b)) => a == b,
            (Node::Binary(o1, l1, r1), Node::Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Node::Call(f1, a1), Node::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind} at byte {pos}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character {0:?}")]
    Lexical(char),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("function {name} takes 1 argument, found {found}")]
    Arity { name: &'static str, found: usize },
    #[error("function {0} must be called with parentheses")]
    MissingCall(&'static str),
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected token {0:?}")]
    Unexpected(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
}

/// Parses `source` allowing the variables `x`, `y` and `z1..z{dim}`.
/// `dim = 0` restricts expressions to the spatial variables.
pub fn parse(source: &str, dim: usize) -> Result<Expr, ParseError> {
    parse::Parser::new(source, dim)?.parse()
}

impl Expr {
    /// Binding strength used for printing; higher binds tighter.
    fn precedence(&self) -> u8 {
        match &self.node {
            Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Node::Neg(_) => 3,
            Node::Binary(BinOp::Pow, ..) => 4,
            Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
        }
    }

    /// Largest `z` component referenced, as a count (`z3` gives 3).
    pub fn max_state_index(&self) -> usize {
        match &self.node {
            Node::Num(_) => 0,
            Node::Var(Var::Z(k)) => k + 1,
            Node::Var(_) => 0,
            Node::Neg(a) | Node::Call(_, a) => a.max_state_index(),
            Node::Binary(_, a, b) => a.max_state_index().max(b.max_state_index()),
        }
    }

    pub fn depends_on_state(&self) -> bool {
        self.max_state_index() > 0
    }

    /// Conservative syntactic check that the expression is affine in `z`.
    pub fn is_affine_in_state(&self) -> bool {
        self.state_degree().is_some_and(|d| d <= 1)
    }

    /// Polynomial degree in `z`, or `None` when not polynomial (or unknown).
    fn state_degree(&self) -> Option<u32> {
        match &self.node {
            Node::Num(_) | Node::Var(Var::X | Var::Y) => Some(0),
            Node::Var(Var::Z(_)) => Some(1),
            Node::Neg(a) => a.state_degree(),
            Node::Binary(BinOp::Add | BinOp::Sub, a, b) => Some(a.state_degree()?.max(b.state_degree()?)),
            Node::Binary(BinOp::Mul, a, b) => Some(a.state_degree()? + b.state_degree()?),
            Node::Binary(BinOp::Div, a, b) => match b.state_degree()? {
                0 => a.state_degree(),
                _ => None,
            },
            Node::Binary(BinOp::Pow, a, b) => match (a.state_degree()?, b.state_degree()?) {
                (0, 0) => Some(0),
                (da, 0) => match b.node {
                    Node::Num(p) if p >= 0.0 && p.fract() == 0.0 && p <= 64.0 => Some(da * p as u32),
                    _ => None,
                },
                _ => None,
            },
            Node::Call(_, a) => match a.state_degree()? {
                0 => Some(0),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match &self.node {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(Var::X) => f.write_str("x"),
            Node::Var(Var::Y) => f.write_str("y"),
            Node::Var(Var::Z(k)) => write!(f, "z{}", k + 1),
            Node::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, a.precedence() < 3)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Binary(op, a, b) => {
                let p = self.precedence();
                let (left_parens, right_parens) = match op {
                    BinOp::Pow => (a.precedence() <= p, b.precedence() < 3),
                    _ => (a.precedence() < p, b.precedence() <= p),
                };
                wrap(f, a, left_parens)?;
                write!(f, " {} ", op.symbol())?;
                wrap(f, b, right_parens)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let e = parse("x*y + sin(z1)", 1).unwrap();
        assert!(matches!(e.node, Node::Binary(BinOp::Add, ..)));
        let err = parse("z2", 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("z2".into()));
        assert_eq!(err.pos, 0);
        assert!(parse("cos(z1^3)", 1).is_ok());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let cases: [(&str, usize, ParseErrorKind); 9] = [
            ("", 0, ParseErrorKind::Empty),
            ("   ", 3, ParseErrorKind::Empty),
            ("x + $", 4, ParseErrorKind::Lexical('$')),
            ("1 + w", 4, ParseErrorKind::UnknownIdentifier("w".into())),
            ("(x + y", 0, ParseErrorKind::Unbalanced),
            ("x + y)", 5, ParseErrorKind::Unbalanced),
            ("sin(x, y)", 0, ParseErrorKind::Arity { name: "sin", found: 2 }),
            ("cos()", 0, ParseErrorKind::Arity { name: "cos", found: 0 }),
            ("exp x", 0, ParseErrorKind::MissingCall("exp")),
        ];
        for (src, pos, kind) in cases {
            let err = parse(src, 1).unwrap_err();
            assert_eq!((err.pos, &err.kind), (pos, &kind), "{src:?}");
        }
        assert_eq!(parse("x +", 1).unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(
            parse("z1", 0).unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier("z1".into())
        );
        assert_eq!(
            parse("z0", 3).unwrap_err().kind,
            ParseErrorKind::UnknownIdentifier("z0".into())
        );
        assert!(matches!(
            parse("1e999", 1).unwrap_err().kind,
            ParseErrorKind::BadNumber(_)
        ));
        assert!(matches!(
            parse("x y", 1).unwrap_err().kind,
            ParseErrorKind::Unexpected(_)
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str| parse(s, 1).unwrap().eval(2.0, 3.0, &[0.5]).unwrap();
        assert_eq!(v("2^3^2"), 512.0);
        assert_eq!(v("-x^2"), -4.0);
        assert_eq!(v("x^-1"), 0.5);
        assert_eq!(v("1 - 2 - 3"), -4.0);
        assert_eq!(v("8 / 4 / 2"), 1.0);
        assert_eq!(v("1 + 2 * 3"), 7.0);
        assert_eq!(v("(1 + 2) * 3"), 9.0);
        assert_eq!(v("-(x - y) * 2"), 2.0);
        assert_eq!(v("2e-1 + .5 + 1.5E1"), 0.2 + 0.5 + 15.0);
    }

    #[test]
    fn printing_is_minimal_and_reparses() {
        let cases = [
            ("x*y + sin(z1)", "x * y + sin(z1)"),
            ("(x - y) - (z1 - 1)", "x - y - (z1 - 1.0)"),
            ("(2^3)^2", "(2.0 ^ 3.0) ^ 2.0"),
            ("2^3^2", "2.0 ^ 3.0 ^ 2.0"),
            ("(-x)^2", "(-x) ^ 2.0"),
            ("x^-y", "x ^ -y"),
            ("-(x + 1)", "-(x + 1.0)"),
            ("z1^3/(1+z1^2)", "z1 ^ 3.0 / (1.0 + z1 ^ 2.0)"),
        ];
        for (src, printed) in cases {
            let e = parse(src, 1).unwrap();
            assert_eq!(e.to_string(), printed);
            assert_eq!(parse(&e.to_string(), 1).unwrap(), e);
        }
    }

    #[test]
    fn affine_detection() {
        let affine = ["0", "z1", "2*z1 - x*z2 + 3", "(z1 + z2)/(1 + x^2)", "sin(x)*z1"];
        let nonlinear = ["z1*z2", "z1^2", "sin(z1)", "1/z1", "x^z1", "abs(z1)"];
        for s in affine {
            assert!(parse(s, 2).unwrap().is_affine_in_state(), "{s}");
        }
        for s in nonlinear {
            assert!(!parse(s, 2).unwrap().is_affine_in_state(), "{s}");
        }
    }
}
