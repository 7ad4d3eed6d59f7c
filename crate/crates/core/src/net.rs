//! Width-`m` two-layer networks
//! `f_m(x) = (1/m) Σ a_i σ(w_i·x + b_i)`, their group-averaged form
//! `f_m^G(x) = (1/(m|G|)) Σ_i a_i Σ_g σ(w_i·gx + b_i)`, the path norm and the
//! regularized empirical risk with its analytic (sub)gradient.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{check_dim, Error, Result};
use crate::group::GroupAction;
use crate::measure::{dot, l1};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet")]
pub struct NetParams {
    m: usize,
    a: Vec<f64>,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    m: usize,
    a: Vec<f64>,
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<RawNet> for NetParams {
    type Error = Error;

    fn try_from(raw: RawNet) -> Result<Self> {
        check_dim(raw.m, raw.a.len())?;
        Self::new(raw.a, raw.w, raw.b)
    }
}

impl NetParams {
    pub fn new(a: Vec<f64>, w: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let m = a.len();
        if m == 0 {
            return Err(Error::InvalidArgument("network width must be >= 1".into()));
        }
        check_dim(m, w.len())?;
        check_dim(m, b.len())?;
        let d = w[0].len();
        for wi in &w {
            check_dim(d, wi.len())?;
        }
        Ok(Self { m, a, w, b })
    }

    pub fn zeros(m: usize, d: usize) -> Self {
        Self { m, a: vec![0.0; m], w: vec![vec![0.0; d]; m], b: vec![0.0; m] }
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Flat view `[a_1, w_1.., b_1, a_2, ...]`, used by finite-difference checks.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * (self.input_dim() + 2));
        for i in 0..self.m {
            out.push(self.a[i]);
            out.extend_from_slice(&self.w[i]);
            out.push(self.b[i]);
        }
        out
    }

    pub fn from_flat(m: usize, d: usize, flat: &[f64]) -> Result<Self> {
        check_dim(m * (d + 2), flat.len())?;
        let mut net = Self::zeros(m, d);
        for (i, chunk) in flat.chunks(d + 2).enumerate() {
            net.a[i] = chunk[0];
            net.w[i].copy_from_slice(&chunk[1..=d]);
            net.b[i] = chunk[d + 1];
        }
        Ok(net)
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &NetParams) {
        for i in 0..self.m {
            self.a[i] += scale * other.a[i];
            for (w, g) in self.w[i].iter_mut().zip(&other.w[i]) {
                *w += scale * g;
            }
            self.b[i] += scale * other.b[i];
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `f_m(x)`.
    pub fn forward(&self, act: &Activation, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_unchecked(act, x))
    }

    #[inline]
    pub(crate) fn forward_unchecked(&self, act: &Activation, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.m {
            acc += self.a[i] * act.value(dot(&self.w[i], x) + self.b[i]);
        }
        acc / self.m as f64
    }

    /// `f_m^G(x)`.
    pub fn forward_invariant(&self, act: &Activation, group: &GroupAction, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        check_dim(self.input_dim(), group.dim())?;
        Ok(self.forward_orbit_of(act, group, x))
    }

    pub(crate) fn forward_orbit_of(&self, act: &Activation, group: &GroupAction, x: &[f64]) -> f64 {
        let mut orbit = vec![0.0; group.order() * group.dim()];
        group.orbit_flat_into(x, &mut orbit);
        self.forward_orbit(act, &orbit, group.order())
    }

    /// `f_m^G` evaluated from a precomputed flat orbit `[g_0 x, g_1 x, ...]`.
    #[inline]
    pub(crate) fn forward_orbit(&self, act: &Activation, orbit: &[f64], order: usize) -> f64 {
        let d = self.input_dim();
        let mut acc = 0.0;
        for i in 0..self.m {
            let mut inner = 0.0;
            for gx in orbit.chunks_exact(d) {
                inner += act.value(dot(&self.w[i], gx) + self.b[i]);
            }
            acc += self.a[i] * inner;
        }
        acc / (self.m as f64 * order as f64)
    }

    /// `‖Θ‖_P = sqrt((1/m) Σ (|a_i| (‖w_i‖₁ + |b_i| + 1))²)`.
    pub fn path_norm(&self) -> f64 {
        self.path_norm_sq().sqrt()
    }

    pub fn path_norm_sq(&self) -> f64 {
        (0..self.m).map(|i| (self.a[i].abs() * self.path_factor(i)).powi(2)).sum::<f64>() / self.m as f64
    }

    /// `‖w_i‖₁ + |b_i| + 1`.
    #[inline]
    fn path_factor(&self, i: usize) -> f64 {
        l1(&self.w[i]) + self.b[i].abs() + 1.0
    }

    /// `J_λ(Θ) = (1/M) Σ (f^G(x_k) - y_k)² + λ(‖Θ‖_P² + 1)`.
    pub fn objective(
        &self,
        act: &Activation,
        group: &GroupAction,
        xs: &[Vec<f64>],
        ys: &[f64],
        lambda: f64,
    ) -> Result<f64> {
        let batch = OrbitBatch::new(group, xs, ys)?;
        check_dim(self.input_dim(), batch.dim)?;
        Ok(batch.objective(self, act, lambda))
    }

    /// Analytic gradient of [`NetParams::objective`]; the ℓ₁ and `|·|` terms use
    /// `sign(0) = 0`.
    pub fn grad_objective(
        &self,
        act: &Activation,
        group: &GroupAction,
        xs: &[Vec<f64>],
        ys: &[f64],
        lambda: f64,
    ) -> Result<NetParams> {
        let batch = OrbitBatch::new(group, xs, ys)?;
        check_dim(self.input_dim(), batch.dim)?;
        Ok(batch.objective_and_grad(self, act, lambda).1)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A batch with all group orbits precomputed, reused across optimizer steps.
#[derive(Debug, Clone)]
pub struct OrbitBatch {
    dim: usize,
    order: usize,
    /// `len * order * dim` entries, sample-major.
    orbits: Vec<f64>,
    ys: Vec<f64>,
}

impl OrbitBatch {
    pub fn new(group: &GroupAction, xs: &[Vec<f64>], ys: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        check_dim(xs.len(), ys.len())?;
        let (dim, order) = (group.dim(), group.order());
        let mut orbits = vec![0.0; xs.len() * order * dim];
        for (k, x) in xs.iter().enumerate() {
            check_dim(dim, x.len())?;
            group.orbit_flat_into(x, &mut orbits[k * order * dim..(k + 1) * order * dim]);
        }
        Ok(Self { dim, order, orbits, ys: ys.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    fn orbit(&self, k: usize) -> &[f64] {
        let n = self.order * self.dim;
        &self.orbits[k * n..(k + 1) * n]
    }

    /// Mean squared residual `L̂_M(Θ)`.
    pub fn loss(&self, net: &NetParams, act: &Activation) -> f64 {
        (0..self.len())
            .map(|k| (net.forward_orbit(act, self.orbit(k), self.order) - self.ys[k]).powi(2))
            .sum::<f64>()
            / self.len() as f64
    }

    pub fn objective(&self, net: &NetParams, act: &Activation, lambda: f64) -> f64 {
        self.loss(net, act) + lambda * (net.path_norm_sq() + 1.0)
    }

    /// `(J_λ(Θ), ∇J_λ(Θ))`.
    pub fn objective_and_grad(&self, net: &NetParams, act: &Activation, lambda: f64) -> (f64, NetParams) {
        let (m, d, order) = (net.width(), self.dim, self.order);
        let mut grad = NetParams::zeros(m, d);
        let scale = 1.0 / (m as f64 * order as f64);
        // per neuron: Σ_g σ, then σ'(w_i·gx + b_i) for each g
        let mut sig = vec![0.0; m];
        let mut dz = vec![0.0; m * order];
        let mut loss = 0.0;
        for k in 0..self.len() {
            let orbit = self.orbit(k);
            let mut f = 0.0;
            for i in 0..m {
                let mut acc = 0.0;
                for (s, gx) in orbit.chunks_exact(d).enumerate() {
                    let zi = dot(&net.w[i], gx) + net.b[i];
                    acc += act.value(zi);
                    dz[i * order + s] = act.derivative(zi);
                }
                sig[i] = acc;
                f += net.a[i] * acc;
            }
            let r = f * scale - self.ys[k];
            loss += r * r;
            // d/dΘ of (1/M) r² is (2/M) r df/dΘ
            let c = 2.0 * r / self.len() as f64 * scale;
            for i in 0..m {
                grad.a[i] += c * sig[i];
                let ca = c * net.a[i];
                let mut dsum = 0.0;
                for (s, gx) in orbit.chunks_exact(d).enumerate() {
                    let g = ca * dz[i * order + s];
                    dsum += dz[i * order + s];
                    for (gw, xv) in grad.w[i].iter_mut().zip(gx) {
                        *gw += g * xv;
                    }
                }
                grad.b[i] += ca * dsum;
            }
        }
        let loss = loss / self.len() as f64;
        if lambda != 0.0 {
            let two_over_m = 2.0 / m as f64;
            for i in 0..m {
                let s = net.path_factor(i);
                let a = net.a[i];
                grad.a[i] += lambda * two_over_m * a * s * s;
                let c = lambda * two_over_m * a * a * s;
                for (gw, w) in grad.w[i].iter_mut().zip(&net.w[i]) {
                    *gw += c * sign(*w);
                }
                grad.b[i] += c * sign(net.b[i]);
            }
        }
        (loss + lambda * (net.path_norm_sq() + 1.0), grad)
    }
}
