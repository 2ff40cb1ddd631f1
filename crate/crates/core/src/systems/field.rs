//! Vector fields of the built-in flows plus a generic polynomial form for
//! user-supplied systems.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One monomial `coeff * prod_k x_k^powers[k]` contributing to equation `eq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub eq: usize,
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// A resolved vector field with its coefficients unpacked for fast evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Lorenz {
        sigma: f64,
        rho: f64,
        beta: f64,
    },
    Rossler {
        a: f64,
        b: f64,
        c: f64,
    },
    Chen {
        a: f64,
        b: f64,
        c: f64,
    },
    LuChen {
        a: f64,
        b: f64,
        c: f64,
    },
    Halvorsen {
        a: f64,
    },
    SprottB,
    Rucklidge {
        kappa: f64,
        lambda: f64,
    },
    Hadley {
        a: f64,
        b: f64,
        f: f64,
        g: f64,
    },
    Dadras {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        h: f64,
    },
    Thomas {
        b: f64,
    },
    ShimizuMorioka {
        a: f64,
        b: f64,
    },
    Arneodo {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
    SprottD,
    /// `x' = -omega y, y' = omega x`; circular orbits, zero Lyapunov exponent.
    Harmonic {
        omega: f64,
    },
    Polynomial {
        dim: usize,
        terms: Vec<PolyTerm>,
    },
}

fn param(params: &BTreeMap<String, f64>, kind: &str, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| invalid(format!("system kind `{kind}` requires parameter `{key}`")))
}

impl VectorField {
    /// Resolve a `kind` string and a named parameter map.
    pub fn resolve(kind: &str, params: &BTreeMap<String, f64>, terms: Option<&[PolyTerm]>, dim: usize) -> Result<Self> {
        let p = |k: &str| param(params, kind, k);
        let field = match kind {
            "lorenz" => Self::Lorenz {
                sigma: p("sigma")?,
                rho: p("rho")?,
                beta: p("beta")?,
            },
            "rossler" => Self::Rossler {
                a: p("a")?,
                b: p("b")?,
                c: p("c")?,
            },
            "chen" => Self::Chen {
                a: p("a")?,
                b: p("b")?,
                c: p("c")?,
            },
            "lu_chen" => Self::LuChen {
                a: p("a")?,
                b: p("b")?,
                c: p("c")?,
            },
            "halvorsen" => Self::Halvorsen { a: p("a")? },
            "sprott_b" => Self::SprottB,
            "rucklidge" => Self::Rucklidge {
                kappa: p("kappa")?,
                lambda: p("lambda")?,
            },
            "hadley" => Self::Hadley {
                a: p("a")?,
                b: p("b")?,
                f: p("f")?,
                g: p("g")?,
            },
            "dadras" => Self::Dadras {
                a: p("a")?,
                b: p("b")?,
                c: p("c")?,
                d: p("d")?,
                h: p("h")?,
            },
            "thomas" => Self::Thomas { b: p("b")? },
            "shimizu_morioka" => Self::ShimizuMorioka { a: p("a")?, b: p("b")? },
            "arneodo" => Self::Arneodo {
                a: p("a")?,
                b: p("b")?,
                c: p("c")?,
                d: p("d")?,
            },
            "sprott_d" => Self::SprottD,
            "harmonic" => Self::Harmonic { omega: p("omega")? },
            "polynomial" => {
                let terms = terms
                    .ok_or_else(|| invalid("polynomial system requires a `terms` list"))?
                    .to_vec();
                for t in &terms {
                    if t.eq >= dim || t.powers.len() != dim {
                        return Err(invalid(format!("polynomial term {t:?} does not match dimension {dim}")));
                    }
                }
                Self::Polynomial { dim, terms }
            }
            other => return Err(invalid(format!("unknown system kind `{other}`"))),
        };
        if field.dim() != dim {
            return Err(invalid(format!(
                "system kind `{kind}` has dimension {}, registry says {dim}",
                field.dim()
            )));
        }
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Harmonic { .. } => 2,
            Self::Polynomial { dim, .. } => *dim,
            _ => 3,
        }
    }

    /// Writes `dx/dt` at `x` into `out`. Both slices must have length `dim()`.
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Self::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }
            Self::Rossler { a, b, c } => {
                out[0] = -x[1] - x[2];
                out[1] = x[0] + a * x[1];
                out[2] = b + x[2] * (x[0] - c);
            }
            Self::Chen { a, b, c } => {
                out[0] = a * (x[1] - x[0]);
                out[1] = (c - a) * x[0] - x[0] * x[2] + c * x[1];
                out[2] = x[0] * x[1] - b * x[2];
            }
            Self::LuChen { a, b, c } => {
                out[0] = a * (x[1] - x[0]);
                out[1] = -x[0] * x[2] + c * x[1];
                out[2] = x[0] * x[1] - b * x[2];
            }
            Self::Halvorsen { a } => {
                out[0] = -a * x[0] - 4.0 * x[1] - 4.0 * x[2] - x[1] * x[1];
                out[1] = -a * x[1] - 4.0 * x[2] - 4.0 * x[0] - x[2] * x[2];
                out[2] = -a * x[2] - 4.0 * x[0] - 4.0 * x[1] - x[0] * x[0];
            }
            Self::SprottB => {
                out[0] = x[1] * x[2];
                out[1] = x[0] - x[1];
                out[2] = 1.0 - x[0] * x[1];
            }
            Self::Rucklidge { kappa, lambda } => {
                out[0] = -kappa * x[0] + lambda * x[1] - x[1] * x[2];
                out[1] = x[0];
                out[2] = -x[2] + x[1] * x[1];
            }
            Self::Hadley { a, b, f, g } => {
                out[0] = -x[1] * x[1] - x[2] * x[2] - a * x[0] + a * f;
                out[1] = x[0] * x[1] - b * x[0] * x[2] - x[1] + g;
                out[2] = b * x[0] * x[1] + x[0] * x[2] - x[2];
            }
            Self::Dadras { a, b, c, d, h } => {
                out[0] = x[1] - a * x[0] + b * x[1] * x[2];
                out[1] = c * x[1] - x[0] * x[2] + x[2];
                out[2] = d * x[0] * x[1] - h * x[2];
            }
            Self::Thomas { b } => {
                out[0] = x[1].sin() - b * x[0];
                out[1] = x[2].sin() - b * x[1];
                out[2] = x[0].sin() - b * x[2];
            }
            Self::ShimizuMorioka { a, b } => {
                out[0] = x[1];
                out[1] = x[0] - a * x[1] - x[0] * x[2];
                out[2] = -b * x[2] + x[0] * x[0];
            }
            Self::Arneodo { a, b, c, d } => {
                out[0] = x[1];
                out[1] = x[2];
                out[2] = -a * x[0] - b * x[1] - c * x[2] + d * x[0] * x[0] * x[0];
            }
            Self::SprottD => {
                out[0] = -x[1];
                out[1] = x[0] + x[2];
                out[2] = x[0] * x[2] + 3.0 * x[1] * x[1];
            }
            Self::Harmonic { omega } => {
                out[0] = -omega * x[1];
                out[1] = omega * x[0];
            }
            Self::Polynomial { ref terms, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for t in terms {
                    let mono: f64 = t.powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product();
                    out[t.eq] += t.coeff * mono;
                }
            }
        }
    }
}
