use std::fmt;

use super::{parse_at, ProblemSpec};
use crate::error::{Error, Result};

/// A polynomial `Σ c · x^p y^q` in `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    terms: Vec<(f64, u32, u32)>,
}

impl Poly2 {
    pub fn new(terms: impl IntoIterator<Item = (f64, u32, u32)>) -> Self {
        let mut merged: Vec<(f64, u32, u32)> = Vec::new();
        for (c, p, q) in terms {
            match merged.iter_mut().find(|t| t.1 == p && t.2 == q) {
                Some(t) => t.0 += c,
                None => merged.push((c, p, q)),
            }
        }
        merged.retain(|t| t.0 != 0.0);
        merged.sort_by_key(|t| (t.1, t.2));
        Self { terms: merged }
    }

    pub fn constant(c: f64) -> Self {
        Self::new([(c, 0, 0)])
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[(f64, u32, u32)] {
        &self.terms
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, p, q)| c * x.powi(p as i32) * y.powi(q as i32))
            .sum()
    }

    pub fn d_dx(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .filter(|t| t.1 > 0)
                .map(|&(c, p, q)| (c * p as f64, p - 1, q)),
        )
    }

    pub fn d_dy(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .filter(|t| t.2 > 0)
                .map(|&(c, p, q)| (c * q as f64, p, q - 1)),
        )
    }

    /// `Σ |c|`, an upper bound for `sup |p|` on the unit square.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.0.abs()).sum()
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, &(c, p, q)) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c:?})")?;
            match p {
                0 => {}
                1 => write!(f, " * x")?,
                _ => write!(f, " * x^{p}")?,
            }
            match q {
                0 => {}
                1 => write!(f, " * y")?,
                _ => write!(f, " * y^{q}")?,
            }
        }
        Ok(())
    }
}

/// The scalar benchmark with
///
/// ```text
/// f¹ = w1(x, y) · ( z³/(1 + z²) + cos(z^k) ),
/// f² = w2(x, y) · (z - 1)/(1 + z²) + sin(z^l),
/// ```
///
/// polynomial weights and coefficients, and integer exponents `k, l > 1`.
/// The growth data is computed from coefficient sup bounds:
/// `B = max(W1, sup|A¹|, sup|A²|, sup|A¹_x|, sup|A²_y|)` and
/// `b = max(W1, W2 (1 + √2)/2 + 1)`.
pub fn builtin_example_4_6(k: u32, l: u32, w1: &Poly2, w2: &Poly2, a1: &Poly2, a2: &Poly2) -> Result<ProblemSpec> {
    if k < 2 || l < 2 {
        return Err(Error::Parameter(format!(
            "exponents must satisfy k, l > 1, got k = {k}, l = {l}"
        )));
    }
    let a1x = a1.d_dx();
    let a2y = a2.d_dy();
    let w1_sup = w1.sup_bound();
    let w2_sup = w2.sup_bound();
    let growth = [w1_sup, a1.sup_bound(), a2.sup_bound(), a1x.sup_bound(), a2y.sup_bound()]
        .into_iter()
        .fold(0.0, f64::max);
    let majorant = w1_sup.max(w2_sup * (1.0 + 2f64.sqrt()) / 2.0 + 1.0);

    let f1 = format!("({w1}) * (z1^3 / (1 + z1^2) + cos(z1^{k}))");
    let f2 = format!("({w2}) * (z1 - 1) / (1 + z1^2) + sin(z1^{l})");
    let coefficient = |name: &str, p: &Poly2| parse_at(format!("coefficients.{name}[0][0]"), &p.to_string(), 0);
    ProblemSpec::from_parts(
        1,
        vec![parse_at("functions.f1[0]".into(), &f1, 1)?],
        vec![parse_at("functions.f2[0]".into(), &f2, 1)?],
        [
            coefficient("A1", a1)?,
            coefficient("A2", a2)?,
            coefficient("A1x", &a1x)?,
            coefficient("A2y", &a2y)?,
        ]
        .map(|e| vec![e]),
        growth,
        parse_at("meta.b".into(), &format!("{majorant:?}"), 0)?,
        None,
    )
}
