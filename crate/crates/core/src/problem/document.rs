use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_at, Coefficient, Nonlinearity, ProblemSpec, Rhs};
use crate::error::{Error, Result};
use crate::io::read_rhs_grid;
use crate::solvers::{Method, WeightChoice};

/// A list of expression strings; a bare string is accepted when `n = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprVector {
    One(String),
    Many(Vec<String>),
}

impl ExprVector {
    fn entries(&self) -> Vec<&str> {
        match self {
            ExprVector::One(s) => vec![s.as_str()],
            ExprVector::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

impl<S: Into<String>> FromIterator<S> for ExprVector {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        ExprVector::Many(iter.into_iter().map(Into::into).collect())
    }
}

/// An `n×n` matrix of expression strings in `(x, y)`, as rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprMatrix {
    One(String),
    Rows(Vec<Vec<String>>),
}

impl ExprMatrix {
    pub fn zeros(n: usize) -> Self {
        ExprMatrix::Rows(vec![vec!["0".into(); n]; n])
    }

    fn rows(&self) -> Vec<Vec<&str>> {
        match self {
            ExprMatrix::One(s) => vec![vec![s.as_str()]],
            ExprMatrix::Rows(r) => r.iter().map(|row| row.iter().map(String::as_str).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaDocument {
    pub n: usize,
    #[serde(rename = "B")]
    pub growth: f64,
    pub b: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionsDocument {
    pub f1: ExprVector,
    pub f2: ExprVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsDocument {
    #[serde(rename = "A1")]
    pub a1: ExprMatrix,
    #[serde(rename = "A2")]
    pub a2: ExprMatrix,
    #[serde(rename = "A1x")]
    pub a1x: ExprMatrix,
    #[serde(rename = "A2y")]
    pub a2y: ExprMatrix,
}

/// Either component expressions `v` or a path to a grid CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<ExprVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
}

/// Optional solver defaults stored with a problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<WeightChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_max_iter: Option<usize>,
}

/// The JSON problem file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub meta: MetaDocument,
    pub functions: FunctionsDocument,
    pub coefficients: CoefficientsDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<RhsDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDocument>,
}

impl ProblemDocument {
    /// All functions zero, `B = 0`, `b = 0`, no right-hand side.
    pub fn zero(n: usize) -> Self {
        let zeros: ExprVector = vec!["0"; n].into_iter().collect();
        Self {
            meta: MetaDocument {
                n,
                growth: 0.0,
                b: "0".into(),
            },
            functions: FunctionsDocument {
                f1: zeros.clone(),
                f2: zeros,
            },
            coefficients: CoefficientsDocument {
                a1: ExprMatrix::zeros(n),
                a2: ExprMatrix::zeros(n),
                a1x: ExprMatrix::zeros(n),
                a2y: ExprMatrix::zeros(n),
            },
            rhs: None,
            solver: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem documents always serialize")
    }

    pub fn compile(&self, base_dir: Option<&Path>) -> Result<ProblemSpec> {
        let n = self.meta.n;
        if n == 0 {
            return Err(Error::Schema("meta.n must be positive".into()));
        }
        let vector = |name: &str, v: &ExprVector, dim: usize| -> Result<Vec<_>> {
            let entries = v.entries();
            if entries.len() != n {
                return Err(Error::Dimension(format!(
                    "{name} has {} entries, n = {n}",
                    entries.len()
                )));
            }
            entries
                .iter()
                .enumerate()
                .map(|(k, s)| parse_at(format!("{name}[{k}]"), s, dim))
                .collect()
        };
        let matrix = |name: &str, m: &ExprMatrix| -> Result<Vec<_>> {
            let rows = m.rows();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("{name} must be {n}x{n}")));
            }
            let mut out = Vec::with_capacity(n * n);
            for (r, row) in rows.iter().enumerate() {
                for (c, s) in row.iter().enumerate() {
                    out.push(parse_at(format!("{name}[{r}][{c}]"), s, 0)?);
                }
            }
            Ok(out)
        };

        let f1 = vector("functions.f1", &self.functions.f1, n)?;
        let f2 = vector("functions.f2", &self.functions.f2, n)?;
        let c = &self.coefficients;
        let coefficients = [
            matrix("coefficients.A1", &c.a1)?,
            matrix("coefficients.A2", &c.a2)?,
            matrix("coefficients.A1x", &c.a1x)?,
            matrix("coefficients.A2y", &c.a2y)?,
        ];
        let majorant = parse_at("meta.b".into(), &self.meta.b, 0)?;
        let rhs = match &self.rhs {
            None => None,
            Some(RhsDocument { v: Some(v), grid: None }) => Some(Rhs::Exprs(vector("rhs.v", v, 0)?)),
            Some(RhsDocument {
                v: None,
                grid: Some(path),
            }) => {
                let resolved = match base_dir {
                    Some(dir) => dir.join(path),
                    None => path.into(),
                };
                Some(Rhs::Grid {
                    path: Some(path.clone()),
                    field: read_rhs_grid(&resolved)?,
                })
            }
            Some(_) => return Err(Error::Schema("rhs needs exactly one of `v` or `grid`".into())),
        };
        ProblemSpec::from_parts(n, f1, f2, coefficients, self.meta.growth, majorant, rhs)
    }

    pub(super) fn from_spec(spec: &ProblemSpec) -> Self {
        let n = spec.dim();
        let vector = |which| spec.nonlinearity(which).iter().map(|e| e.to_string()).collect();
        let matrix = |which| {
            let entries = spec.coefficient(which);
            ExprMatrix::Rows(
                entries
                    .chunks(n)
                    .map(|row| row.iter().map(|e| e.to_string()).collect())
                    .collect(),
            )
        };
        let rhs = spec.rhs().map(|rhs| match rhs {
            Rhs::Exprs(v) => RhsDocument {
                v: Some(v.iter().map(|e| e.to_string()).collect()),
                grid: None,
            },
            Rhs::Grid { path, .. } => RhsDocument {
                v: None,
                grid: Some(path.clone().unwrap_or_default()),
            },
        });
        Self {
            meta: MetaDocument {
                n,
                growth: spec.growth_constant(),
                b: spec.majorant().to_string(),
            },
            functions: FunctionsDocument {
                f1: vector(Nonlinearity::F1),
                f2: vector(Nonlinearity::F2),
            },
            coefficients: CoefficientsDocument {
                a1: matrix(Coefficient::A1),
                a2: matrix(Coefficient::A2),
                a1x: matrix(Coefficient::A1x),
                a2y: matrix(Coefficient::A2y),
            },
            rhs,
            solver: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_structure() {
        let mut doc = ProblemDocument::zero(2);
        doc.meta.growth = 1.5;
        doc.meta.b = "1 + x*y".into();
        doc.functions.f1 = ["z1^3/(1+z1^2) + cos(z2^2)", "sin(x) * z2"].into_iter().collect();
        doc.functions.f2 = ["-z1", "abs(z2) - (z1 - 1)"].into_iter().collect();
        doc.coefficients.a1 = ExprMatrix::Rows(vec![vec!["x".into(), "0".into()], vec!["1".into(), "x^2".into()]]);
        doc.coefficients.a1x = ExprMatrix::Rows(vec![vec!["1".into(), "0".into()], vec!["0".into(), "2*x".into()]]);
        doc.rhs = Some(RhsDocument {
            v: Some(["x*y", "2.5e-3"].into_iter().collect()),
            grid: None,
        });
        let spec = doc.compile(None).unwrap();
        let again = ProblemDocument::from_json(&spec.to_document().to_json())
            .unwrap()
            .compile(None)
            .unwrap();
        for which in [Nonlinearity::F1, Nonlinearity::F2] {
            assert_eq!(spec.nonlinearity(which), again.nonlinearity(which));
        }
        for which in Coefficient::ALL {
            assert_eq!(spec.coefficient(which), again.coefficient(which));
        }
        assert_eq!(spec.majorant(), again.majorant());
        assert_eq!(spec.growth_constant(), again.growth_constant());
        match (spec.rhs(), again.rhs()) {
            (Some(Rhs::Exprs(a)), Some(Rhs::Exprs(b))) => assert_eq!(a, b),
            other => panic!("rhs lost in round trip: {other:?}"),
        }
    }

    #[test]
    fn scalar_shorthand_for_one_component() {
        let text = r#"{"meta": {"n": 1, "B": 0, "b": "0"},
            "functions": {"f1": "z1", "f2": "0"},
            "coefficients": {"A1": "x", "A2": "0", "A1x": "1", "A2y": "0"}}"#;
        let spec = ProblemSpec::load(text, None).unwrap();
        assert_eq!(spec.coefficient(Coefficient::A1)[0].to_string(), "x");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&ProblemDocument::zero(1).to_json()).unwrap();
        value["meta"]["extra"] = 1.into();
        assert!(matches!(
            ProblemDocument::from_json(&value.to_string()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn rhs_needs_exactly_one_source() {
        let mut doc = ProblemDocument::zero(1);
        doc.rhs = Some(RhsDocument { v: None, grid: None });
        assert!(matches!(doc.compile(None), Err(Error::Schema(_))));
    }
}
