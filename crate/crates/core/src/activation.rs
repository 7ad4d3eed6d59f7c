//! Activation functions with first and second derivatives and the constants
//! `L_σ` (Lipschitz), `σ(0)` and `γ(σ)` consumed by the approximation and
//! complexity bounds.
//!
//! Piecewise-linear kinds carry an exact ReLU expansion, from which `γ` is
//! computed. Smooth kinds get `γ` from the `γ₀` quadrature
//! `∫|σ''(x)|(|x|+1) dx`.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fmt;

use crate::error::{Error, Result};

/// Default quadrature settings used by [`Activation::calibrated`].
pub const GAMMA0_HALF_WIDTH: f64 = 40.0;
pub const GAMMA0_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    LeakyRelu(f64),
    HardSigmoid,
    HardTanh,
    Sigmoid,
    Tanh,
    Softplus,
    Silu,
    Gelu,
    /// `(1 - (x/h)^2)^3` on `[-h, h]`, zero elsewhere.
    Bump(f64),
}

/// One term `a · ReLU(w x + b)` of an exact ReLU expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluTerm {
    pub a: f64,
    pub w: f64,
    pub b: f64,
}

impl ReluTerm {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (self.w * x + self.b).max(0.0)
    }

    fn weight(&self) -> f64 {
        self.a.abs() * (self.w.abs() + self.b.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    kind: ActivationKind,
    gamma: Option<f64>,
}

/// `(L_σ, σ(0), γ(σ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationConstants {
    pub lipschitz: f64,
    pub value_at_zero: f64,
    pub gamma: f64,
}

impl ActivationConstants {
    /// `L_σ + |σ(0)|`, the factor in the uniform and approximation bounds.
    pub fn scale(&self) -> f64 {
        self.lipschitz + self.value_at_zero.abs()
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Maximiser of SiLU' on x > 0: the root of `x tanh(x/2) = 2`.
fn silu_lipschitz() -> f64 {
    let f = |x: f64| x * (0.5 * x).tanh() - 2.0;
    let (mut lo, mut hi) = (1.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let s = logistic(x);
    s + x * s * (1.0 - s)
}

impl Activation {
    /// A descriptor without a populated `γ` for smooth kinds.
    pub fn new(kind: ActivationKind) -> Result<Self> {
        match kind {
            ActivationKind::LeakyRelu(l) if !(l > 0.0 && l < 1.0) => {
                return Err(Error::InvalidArgument(format!("leaky_relu slope {l} not in (0,1)")))
            }
            ActivationKind::Bump(h) if !(h > 0.0 && h.is_finite()) => {
                return Err(Error::InvalidArgument(format!("bump width {h} must be positive")))
            }
            _ => {}
        }
        let mut act = Self { kind, gamma: None };
        if let Some(terms) = act.relu_expansion() {
            act.gamma = Some(terms.iter().map(ReluTerm::weight).sum());
        }
        Ok(act)
    }

    /// A descriptor with `γ` populated: exact for piecewise-linear kinds,
    /// the default `γ₀` quadrature otherwise.
    pub fn calibrated(kind: ActivationKind) -> Result<Self> {
        let act = Self::new(kind)?;
        if act.gamma.is_some() {
            return Ok(act);
        }
        let g = act.estimate_gamma0(GAMMA0_HALF_WIDTH, GAMMA0_POINTS)?;
        Ok(act.with_gamma(g))
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu).expect("relu is valid")
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    /// Parses `relu`, `leaky_relu:0.1`, `sigmoid`, `tanh`, `hard_tanh`,
    /// `hard_sigmoid`, `softplus`, `silu`, `gelu`, `bump:0.25`, returning a
    /// calibrated descriptor.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::ActivationSpec(spec.to_string());
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim().parse::<f64>().map_err(|_| bad())?)),
            None => (spec.trim(), None),
        };
        let kind = match (name, arg) {
            ("relu", None) => ActivationKind::Relu,
            ("leaky_relu", Some(l)) => ActivationKind::LeakyRelu(l),
            ("hard_sigmoid", None) => ActivationKind::HardSigmoid,
            ("hard_tanh", None) => ActivationKind::HardTanh,
            ("sigmoid", None) => ActivationKind::Sigmoid,
            ("tanh", None) => ActivationKind::Tanh,
            ("softplus", None) => ActivationKind::Softplus,
            ("silu", None) => ActivationKind::Silu,
            ("gelu", None) => ActivationKind::Gelu,
            ("bump", Some(h)) => ActivationKind::Bump(h),
            _ => return Err(bad()),
        };
        Self::calibrated(kind)
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(
            self.kind,
            ActivationKind::Relu
                | ActivationKind::LeakyRelu(_)
                | ActivationKind::HardSigmoid
                | ActivationKind::HardTanh
        )
    }

    /// Points where the derivative jumps.
    pub fn kinks(&self) -> &'static [f64] {
        match self.kind {
            ActivationKind::Relu | ActivationKind::LeakyRelu(_) => &[0.0],
            ActivationKind::HardSigmoid | ActivationKind::HardTanh => &[-1.0, 1.0],
            _ => &[],
        }
    }

    /// Exact ReLU expansion `Σ a_k ReLU(w_k x + b_k)` for piecewise-linear kinds.
    /// A constant offset `c` is written as `c · ReLU(0·x + 1)`.
    pub fn relu_expansion(&self) -> Option<Vec<ReluTerm>> {
        let t = |a, w, b| ReluTerm { a, w, b };
        match self.kind {
            ActivationKind::Relu => Some(vec![t(1.0, 1.0, 0.0)]),
            // λx + (1-λ)ReLU(x) = ReLU(x) - λ ReLU(-x)
            ActivationKind::LeakyRelu(l) => Some(vec![t(1.0, 1.0, 0.0), t(-l, -1.0, 0.0)]),
            ActivationKind::HardSigmoid => Some(vec![t(1.0, 0.5, 0.5), t(-1.0, 0.5, -0.5)]),
            ActivationKind::HardTanh => {
                Some(vec![t(1.0, 1.0, 1.0), t(-1.0, 1.0, -1.0), t(-1.0, 0.0, 1.0)])
            }
            _ => None,
        }
    }

    /// `σ(x)`; NaN input is a domain error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain(self.to_string()));
        }
        Ok(self.value(x))
    }

    /// `σ'(x)` with the right-derivative at kinks.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain(self.to_string()));
        }
        Ok(self.derivative(x))
    }

    /// Unchecked `σ(x)` for hot loops.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu(l) => {
                if x >= 0.0 {
                    x
                } else {
                    l * x
                }
            }
            ActivationKind::HardSigmoid => (0.5 * (x + 1.0)).clamp(0.0, 1.0),
            ActivationKind::HardTanh => x.clamp(-1.0, 1.0),
            ActivationKind::Sigmoid => logistic(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Softplus => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            ActivationKind::Silu => x * logistic(x),
            ActivationKind::Gelu => x * normal_cdf(x),
            ActivationKind::Bump(h) => {
                let u = x / h;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - u * u).powi(3)
                }
            }
        }
    }

    /// Unchecked `σ'(x)`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu(l) => {
                if x >= 0.0 {
                    1.0
                } else {
                    l
                }
            }
            ActivationKind::HardSigmoid => {
                if (-1.0..1.0).contains(&x) {
                    0.5
                } else {
                    0.0
                }
            }
            ActivationKind::HardTanh => {
                if (-1.0..1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Softplus => logistic(x),
            ActivationKind::Silu => {
                let s = logistic(x);
                s + x * s * (1.0 - s)
            }
            ActivationKind::Gelu => normal_cdf(x) + x * normal_pdf(x),
            ActivationKind::Bump(h) => {
                let u = x / h;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - u * u;
                    -6.0 * u * q * q / h
                }
            }
        }
    }

    /// `σ''(x)` for the twice-differentiable kinds (zero for piecewise-linear
    /// kinds away from their kinks).
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu
            | ActivationKind::LeakyRelu(_)
            | ActivationKind::HardSigmoid
            | ActivationKind::HardTanh => 0.0,
            ActivationKind::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            ActivationKind::Softplus => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            ActivationKind::Silu => {
                let s = logistic(x);
                s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))
            }
            ActivationKind::Gelu => normal_pdf(x) * (2.0 - x * x),
            ActivationKind::Bump(h) => {
                let u = x / h;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    -6.0 * (1.0 - u * u) * (1.0 - 5.0 * u * u) / (h * h)
                }
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ActivationKind::Relu
            | ActivationKind::LeakyRelu(_)
            | ActivationKind::HardTanh
            | ActivationKind::Tanh
            | ActivationKind::Softplus => 1.0,
            ActivationKind::HardSigmoid => 0.5,
            ActivationKind::Sigmoid => 0.25,
            ActivationKind::Silu => silu_lipschitz(),
            // GELU'' = φ(x)(2 - x²) vanishes at √2
            ActivationKind::Gelu => normal_cdf(SQRT_2) + SQRT_2 * normal_pdf(SQRT_2),
            // max of 6u(1-u²)²/h at u² = 1/5
            ActivationKind::Bump(h) => 96.0 / (25.0 * 5f64.sqrt() * h),
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid | ActivationKind::HardSigmoid => 0.5,
            ActivationKind::Softplus => LN_2,
            ActivationKind::Bump(_) => 1.0,
            _ => 0.0,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn constants(&self) -> Result<ActivationConstants> {
        let gamma = self.gamma.ok_or_else(|| Error::MissingConstant(self.to_string()))?;
        Ok(ActivationConstants {
            lipschitz: self.lipschitz(),
            value_at_zero: self.value_at_zero(),
            gamma,
        })
    }

    /// Composite-Simpson estimate of `∫_{-W}^{W} |σ''(x)| (|x| + 1) dx`.
    pub fn estimate_gamma0(&self, half_width: f64, n_points: usize) -> Result<f64> {
        if self.is_piecewise_linear() {
            return Err(Error::NotApplicable(format!("gamma0 quadrature for piecewise-linear `{self}`")));
        }
        if !(half_width >= 20.0) {
            return Err(Error::InvalidArgument(format!("half_width {half_width} < 20")));
        }
        if n_points < 10_000 {
            return Err(Error::InvalidArgument(format!("n_points {n_points} < 10^4")));
        }
        let n = n_points + n_points % 2;
        let h = 2.0 * half_width / n as f64;
        let f = |x: f64| self.second_derivative(x).abs() * (x.abs() + 1.0);
        let mut acc = f(-half_width) + f(half_width);
        for i in 1..n {
            let x = -half_width + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        Ok(acc * h / 3.0)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::LeakyRelu(l) => write!(f, "leaky_relu:{l}"),
            ActivationKind::HardSigmoid => write!(f, "hard_sigmoid"),
            ActivationKind::HardTanh => write!(f, "hard_tanh"),
            ActivationKind::Sigmoid => write!(f, "sigmoid"),
            ActivationKind::Tanh => write!(f, "tanh"),
            ActivationKind::Softplus => write!(f, "softplus"),
            ActivationKind::Silu => write!(f, "silu"),
            ActivationKind::Gelu => write!(f, "gelu"),
            ActivationKind::Bump(h) => write!(f, "bump:{h}"),
        }
    }
}

/// Every kind in the zoo with representative parameters.
pub fn zoo() -> Vec<ActivationKind> {
    vec![
        ActivationKind::Relu,
        ActivationKind::LeakyRelu(0.1),
        ActivationKind::HardSigmoid,
        ActivationKind::HardTanh,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Softplus,
        ActivationKind::Silu,
        ActivationKind::Gelu,
        ActivationKind::Bump(0.25),
        ActivationKind::Bump(1.0),
    ]
}
