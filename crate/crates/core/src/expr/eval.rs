use thiserror::Error;

use super::{BinOp, Expr, Func, Node, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum FaultKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0}")]
    Domain(&'static str),
    #[error("non-finite result")]
    NonFinite,
}

/// An evaluation fault at the expression node starting at byte `pos`.
#[derive(Clone, Copy, Debug, PartialEq, Error)]
#[error("{kind} at byte {pos}")]
pub struct EvalError {
    pub pos: usize,
    pub kind: FaultKind,
}

/// A value together with its derivative along one `z` direction.
///
/// `kink` records that a non-differentiable point (`abs` at 0) was crossed
/// with a nonzero inner derivative; the subgradient 0 was used there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
    pub kink: bool,
}

impl Dual {
    fn constant(value: f64) -> Self {
        Self {
            value,
            deriv: 0.0,
            kink: false,
        }
    }
}

/// Value and full gradient with respect to `z1..zn`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub partials: Vec<f64>,
    pub kink: bool,
}

fn is_small_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() <= i32::MAX as f64
}

/// `base^exp` on plain values, shared by the value and derivative paths.
fn real_pow(base: f64, exp: f64) -> Result<f64, FaultKind> {
    if base == 0.0 && exp < 0.0 {
        return Err(FaultKind::DivisionByZero);
    }
    if is_small_integer(exp) {
        Ok(base.powi(exp as i32))
    } else if base < 0.0 {
        Err(FaultKind::Domain("negative base with non-integer exponent"))
    } else {
        Ok(base.powf(exp))
    }
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64, z: &[f64]) -> Result<f64, EvalError> {
        self.eval_sweep(x, y, z, None).map(|d| d.value)
    }

    /// Forward-mode evaluation seeded along `z[active]` (or no direction).
    pub fn eval_sweep(&self, x: f64, y: f64, z: &[f64], active: Option<usize>) -> Result<Dual, EvalError> {
        let fault = |kind| EvalError { pos: self.pos, kind };
        let out = match &self.node {
            Node::Num(v) => Dual::constant(*v),
            Node::Var(Var::X) => Dual::constant(x),
            Node::Var(Var::Y) => Dual::constant(y),
            Node::Var(Var::Z(k)) => Dual {
                value: z[*k],
                deriv: if active == Some(*k) { 1.0 } else { 0.0 },
                kink: false,
            },
            Node::Neg(a) => {
                let a = a.eval_sweep(x, y, z, active)?;
                Dual {
                    value: -a.value,
                    deriv: -a.deriv,
                    kink: a.kink,
                }
            }
            Node::Binary(op, a, b) => {
                let a = a.eval_sweep(x, y, z, active)?;
                let b = b.eval_sweep(x, y, z, active)?;
                binary(*op, a, b).map_err(fault)?
            }
            Node::Call(func, a) => {
                let a = a.eval_sweep(x, y, z, active)?;
                call(*func, a).map_err(fault)?
            }
        };
        if !out.value.is_finite() || !out.deriv.is_finite() {
            return Err(fault(FaultKind::NonFinite));
        }
        Ok(out)
    }

    /// Value and all partial derivatives with respect to `z`, one sweep per
    /// component.
    pub fn eval_dual(&self, x: f64, y: f64, z: &[f64]) -> Result<DualValue, EvalError> {
        let mut partials = Vec::with_capacity(z.len());
        let mut kink = false;
        let mut value = None;
        for k in 0..z.len() {
            let d = self.eval_sweep(x, y, z, Some(k))?;
            value.get_or_insert(d.value);
            kink |= d.kink;
            partials.push(d.deriv);
        }
        let value = match value {
            Some(v) => v,
            None => self.eval(x, y, z)?,
        };
        Ok(DualValue { value, partials, kink })
    }
}

fn binary(op: BinOp, a: Dual, b: Dual) -> Result<Dual, FaultKind> {
    let kink = a.kink || b.kink;
    let (value, deriv) = match op {
        BinOp::Add => (a.value + b.value, a.deriv + b.deriv),
        BinOp::Sub => (a.value - b.value, a.deriv - b.deriv),
        BinOp::Mul => {
            let mut d = 0.0;
            if a.deriv != 0.0 {
                d += a.deriv * b.value;
            }
            if b.deriv != 0.0 {
                d += a.value * b.deriv;
            }
            (a.value * b.value, d)
        }
        BinOp::Div => {
            if b.value == 0.0 {
                return Err(FaultKind::DivisionByZero);
            }
            let v = a.value / b.value;
            let d = if a.deriv != 0.0 || b.deriv != 0.0 {
                (a.deriv - v * b.deriv) / b.value
            } else {
                0.0
            };
            (v, d)
        }
        BinOp::Pow => {
            let v = real_pow(a.value, b.value)?;
            let mut d = 0.0;
            if a.deriv != 0.0 && b.value != 0.0 {
                d += b.value * real_pow(a.value, b.value - 1.0)? * a.deriv;
            }
            if b.deriv != 0.0 {
                if a.value > 0.0 {
                    d += v * a.value.ln() * b.deriv;
                } else if a.value < 0.0 {
                    return Err(FaultKind::Domain("variable exponent on a negative base"));
                }
            }
            (v, d)
        }
    };
    Ok(Dual { value, deriv, kink })
}

fn call(func: Func, a: Dual) -> Result<Dual, FaultKind> {
    let u = a.value;
    let du = a.deriv;
    let chain = |slope: f64| if du != 0.0 { slope * du } else { 0.0 };
    let mut kink = a.kink;
    let (value, deriv) = match func {
        Func::Sin => (u.sin(), chain(u.cos())),
        Func::Cos => (u.cos(), chain(-u.sin())),
        Func::Tan => {
            let c = u.cos();
            (u.tan(), chain(1.0 / (c * c)))
        }
        Func::Exp => {
            let e = u.exp();
            (e, chain(e))
        }
        Func::Log => {
            if u <= 0.0 {
                return Err(FaultKind::Domain("log of a non-positive value"));
            }
            (u.ln(), chain(1.0 / u))
        }
        Func::Sqrt => {
            if u < 0.0 {
                return Err(FaultKind::Domain("sqrt of a negative value"));
            }
            let s = u.sqrt();
            if s == 0.0 && du != 0.0 {
                return Err(FaultKind::Domain("sqrt is not differentiable at 0"));
            }
            (s, chain(0.5 / s))
        }
        Func::Abs => {
            if u == 0.0 && du != 0.0 {
                kink = true;
            }
            (u.abs(), if u == 0.0 { 0.0 } else { chain(u.signum()) })
        }
        Func::Atan => (u.atan(), chain(1.0 / (1.0 + u * u))),
    };
    Ok(Dual { value, deriv, kink })
}
