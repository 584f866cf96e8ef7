//! Unary functions shared by symbolic edges, formula trees and the custom
//! expression parser.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Guard used where an operator is evaluated outside its natural domain.
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Func {
    #[serde(rename = "x")]
    Identity,
    #[serde(rename = "x^2")]
    Square,
    #[serde(rename = "x^3")]
    Cube,
    #[serde(rename = "x^4")]
    Quartic,
    #[serde(rename = "1/x")]
    Reciprocal,
    #[serde(rename = "1/x^2")]
    InvSquare,
    #[serde(rename = "1/x^4")]
    InvQuartic,
    #[serde(rename = "sqrt")]
    Sqrt,
    #[serde(rename = "1/sqrt")]
    InvSqrt,
    #[serde(rename = "exp")]
    Exp,
    #[serde(rename = "log")]
    Log,
    #[serde(rename = "sin")]
    Sin,
    #[serde(rename = "cos")]
    Cos,
    #[serde(rename = "tan")]
    Tan,
    #[serde(rename = "tanh")]
    Tanh,
    #[serde(rename = "sgn")]
    Sgn,
    #[serde(rename = "arctan")]
    Arctan,
    #[serde(rename = "arctanh")]
    Arctanh,
    #[serde(rename = "abs")]
    Abs,
    #[serde(rename = "sigmoid")]
    Sigmoid,
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "cosh")]
    Cosh,
    #[serde(rename = "sinh")]
    Sinh,
}

#[inline]
fn nonzero(u: f64) -> f64 {
    if u.abs() < TINY {
        if u < 0.0 {
            -TINY
        } else {
            TINY
        }
    } else {
        u
    }
}

#[inline]
fn sgn(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Identity => "x",
            Func::Square => "x^2",
            Func::Cube => "x^3",
            Func::Quartic => "x^4",
            Func::Reciprocal => "1/x",
            Func::InvSquare => "1/x^2",
            Func::InvQuartic => "1/x^4",
            Func::Sqrt => "sqrt",
            Func::InvSqrt => "1/sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Sgn => "sgn",
            Func::Arctan => "arctan",
            Func::Arctanh => "arctanh",
            Func::Abs => "abs",
            Func::Sigmoid => "sigmoid",
            Func::Gaussian => "gaussian",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
        }
    }

    /// Whether `u` lies in the natural domain of the function.
    pub fn in_domain(self, u: f64) -> bool {
        match self {
            Func::Log | Func::InvSqrt => u > 0.0,
            Func::Sqrt => u >= 0.0,
            Func::Reciprocal | Func::InvSquare | Func::InvQuartic => u != 0.0,
            Func::Arctanh => u.abs() < 1.0,
            Func::Tan => u.cos() != 0.0,
            _ => true,
        }
    }

    /// Value at `u`. Outside the natural domain the argument is pulled to
    /// the nearest admissible point so the result stays finite.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Func::Identity => u,
            Func::Square => u * u,
            Func::Cube => u * u * u,
            Func::Quartic => {
                let s = u * u;
                s * s
            }
            Func::Reciprocal => 1.0 / nonzero(u),
            Func::InvSquare => {
                let v = nonzero(u);
                1.0 / (v * v)
            }
            Func::InvQuartic => {
                let v = nonzero(u);
                let s = v * v;
                1.0 / (s * s)
            }
            Func::Sqrt => u.max(0.0).sqrt(),
            Func::InvSqrt => 1.0 / u.max(TINY).sqrt(),
            Func::Exp => u.exp(),
            Func::Log => u.max(TINY).ln(),
            Func::Sin => u.sin(),
            Func::Cos => u.cos(),
            Func::Tan => u.tan(),
            Func::Tanh => u.tanh(),
            Func::Sgn => sgn(u),
            Func::Arctan => u.atan(),
            Func::Arctanh => u.max(-1.0 + TINY).min(1.0 - TINY).atanh(),
            Func::Abs => u.abs(),
            Func::Sigmoid => 1.0 / (1.0 + (-u).exp()),
            Func::Gaussian => (-u * u).exp(),
            Func::Cosh => u.cosh(),
            Func::Sinh => u.sinh(),
        }
    }

    /// First derivative, consistent with [`Func::eval`] inside the domain.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Func::Identity => 1.0,
            Func::Square => 2.0 * u,
            Func::Cube => 3.0 * u * u,
            Func::Quartic => 4.0 * u * u * u,
            Func::Reciprocal => {
                let v = nonzero(u);
                -1.0 / (v * v)
            }
            Func::InvSquare => {
                let v = nonzero(u);
                -2.0 / (v * v * v)
            }
            Func::InvQuartic => {
                let v = nonzero(u);
                -4.0 / (v * v * v * v * v)
            }
            Func::Sqrt => 0.5 / u.max(TINY).sqrt(),
            Func::InvSqrt => {
                let v = u.max(TINY);
                -0.5 / (v * v.sqrt())
            }
            Func::Exp => u.exp(),
            Func::Log => 1.0 / u.max(TINY),
            Func::Sin => u.cos(),
            Func::Cos => -u.sin(),
            Func::Tan => {
                let t = u.tan();
                1.0 + t * t
            }
            Func::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Func::Sgn => 0.0,
            Func::Arctan => 1.0 / (1.0 + u * u),
            Func::Arctanh => {
                let v = u.max(-1.0 + TINY).min(1.0 - TINY);
                1.0 / (1.0 - v * v)
            }
            Func::Abs => sgn(u),
            Func::Sigmoid => {
                let s = 1.0 / (1.0 + (-u).exp());
                s * (1.0 - s)
            }
            Func::Gaussian => -2.0 * u * (-u * u).exp(),
            Func::Cosh => u.sinh(),
            Func::Sinh => u.cosh(),
        }
    }

    /// Resolves a function name as written in custom expressions.
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "arctan" | "atan" => Func::Arctan,
            "arctanh" | "atanh" => Func::Arctanh,
            "sigmoid" => Func::Sigmoid,
            "sgn" | "sign" => Func::Sgn,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "gaussian" => Func::Gaussian,
            _ => return None,
        })
    }
}

/// How a library entry is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `a·x + b`, fitted in closed form before anything else.
    Linear,
    /// `c·f(a·x + b) + d`.
    Affine(Func),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Operator {
    pub name: &'static str,
    pub kind: OperatorKind,
    /// Simplicity rank used to break near-ties between fits; lower is
    /// simpler.
    pub complexity: u8,
}

const fn affine(name: &'static str, f: Func, complexity: u8) -> Operator {
    Operator { name, kind: OperatorKind::Affine(f), complexity }
}

static LIBRARY: [Operator; 22] = [
    Operator { name: "linear", kind: OperatorKind::Linear, complexity: 1 },
    affine("x", Func::Identity, 1),
    affine("x^2", Func::Square, 2),
    affine("x^3", Func::Cube, 3),
    affine("x^4", Func::Quartic, 4),
    affine("1/x", Func::Reciprocal, 2),
    affine("1/x^2", Func::InvSquare, 3),
    affine("1/x^4", Func::InvQuartic, 4),
    affine("sqrt", Func::Sqrt, 2),
    affine("1/sqrt", Func::InvSqrt, 3),
    affine("exp", Func::Exp, 2),
    affine("log", Func::Log, 2),
    affine("sin", Func::Sin, 3),
    affine("tan", Func::Tan, 4),
    affine("tanh", Func::Tanh, 3),
    affine("sgn", Func::Sgn, 3),
    affine("arctan", Func::Arctan, 4),
    affine("arctanh", Func::Arctanh, 4),
    affine("abs", Func::Abs, 3),
    affine("sigmoid", Func::Sigmoid, 4),
    affine("gaussian", Func::Gaussian, 3),
    affine("cosh", Func::Cosh, 4),
];

/// The registered operator library: the linear special case followed by the
/// 21 affine-wrapped unary operators.
pub fn operator_library() -> &'static [Operator] {
    &LIBRARY
}

/// Looks up a library operator by name.
pub fn operator(name: &str) -> Option<Operator> {
    LIBRARY.iter().copied().find(|o| o.name == name)
}
