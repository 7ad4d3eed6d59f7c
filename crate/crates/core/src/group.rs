//! Finite linear group actions stored as explicit matrix sets.
//!
//! Every group is a list of dense row-major `d x d` matrices with the
//! identity first. Constructors produce a deterministic element order
//! (identity, then generator powers or lexicographic permutations) so
//! experiment outputs are reproducible.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{check_dim, Error, Result};

/// Tolerance for matrix equality in closure / inverse / distinctness checks.
pub const GROUP_TOL: f64 = 1e-12;

/// Largest `d` accepted by [`GroupAction::symmetric`].
pub const MAX_SYMMETRIC_DIM: usize = 7;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::identity(dim);
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Matrix { dim: d, data }
    }

    /// `M x`, written into `out`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.data[i * d..(i + 1) * d];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `M^T x`, written into `out`.
    pub fn apply_transpose_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (j, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|i| self.data[i * d + j] * x[i]).sum();
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn snap(mut self) -> Self {
        for v in &mut self.data {
            for target in [-1.0, 0.0, 1.0] {
                if (*v - target).abs() < 1e-15 {
                    *v = target;
                }
            }
        }
        self
    }
}

/// A finite group acting linearly on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    name: String,
    dim: usize,
    elements: Vec<Matrix>,
}

impl GroupAction {
    /// Builds a group from explicit matrices. Shapes are validated; the group
    /// axioms are not (use [`GroupAction::verify`]).
    pub fn from_matrices(name: impl Into<String>, dim: usize, elements: Vec<Matrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidOrder(0));
        }
        for m in &elements {
            check_dim(dim, m.dim())?;
        }
        Ok(Self { name: name.into(), dim, elements })
    }

    /// The trivial group `{I_d}`.
    pub fn trivial(dim: usize) -> Self {
        Self { name: format!("trivial:{dim}"), dim, elements: vec![Matrix::identity(dim)] }
    }

    /// `{I, -I}` acting on `R^d`.
    pub fn reflection(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("reflection dimension must be >= 1".into()));
        }
        Ok(Self {
            name: format!("reflection:{dim}"),
            dim,
            elements: vec![Matrix::identity(dim), Matrix::scaled_identity(dim, -1.0)],
        })
    }

    /// The rotation group `C_n ⊂ SO(2)`, elements `R_{2πk/n}` for `k = 0..n`.
    pub fn cyclic_2d(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let elements = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (s, c) = t.sin_cos();
                Matrix { dim: 2, data: vec![c, -s, s, c] }.snap()
            })
            .collect();
        Ok(Self { name: format!("cyclic2d:{n}"), dim: 2, elements })
    }

    /// All `d!` coordinate permutations, `(τx)_i = x_{τ(i)}`, in lexicographic
    /// order of `τ` (identity first).
    pub fn symmetric(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("symmetric dimension must be >= 1".into()));
        }
        if dim > MAX_SYMMETRIC_DIM {
            return Err(Error::OrderCap(dim));
        }
        let elements = permutations(dim)
            .into_iter()
            .map(|perm| {
                let mut data = vec![0.0; dim * dim];
                for (i, &p) in perm.iter().enumerate() {
                    data[i * dim + p] = 1.0;
                }
                Matrix { dim, data }
            })
            .collect();
        Ok(Self { name: format!("symmetric:{dim}"), dim, elements })
    }

    /// Parses `reflection:d`, `cyclic2d:n`, `symmetric:d` or `trivial:d`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, arg) = spec.split_once(':').ok_or_else(|| Error::GroupSpec(spec.into()))?;
        let n: usize = arg.trim().parse().map_err(|_| Error::GroupSpec(spec.into()))?;
        match kind.trim() {
            "reflection" => Self::reflection(n),
            "cyclic2d" => Self::cyclic_2d(n),
            "symmetric" => Self::symmetric(n),
            "trivial" if n >= 1 => Ok(Self::trivial(n)),
            _ => Err(Error::GroupSpec(spec.into())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    /// `g_s x`.
    pub fn apply(&self, s: usize, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.elements[s].apply_into(x, &mut out);
        Ok(out)
    }

    /// `g_s^T w`, the dual action used to move a neuron's weight instead of
    /// its input: `w · (g x) = (g^T w) · x`.
    pub fn apply_transpose(&self, s: usize, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, w.len())?;
        let mut out = vec![0.0; self.dim];
        self.elements[s].apply_transpose_into(w, &mut out);
        Ok(out)
    }

    /// The orbit `[g_0 x, g_1 x, ...]` in element order.
    pub fn orbit(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim, x.len())?;
        Ok(self.orbit_unchecked(x))
    }

    pub(crate) fn orbit_unchecked(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.elements
            .iter()
            .map(|g| {
                let mut out = vec![0.0; self.dim];
                g.apply_into(x, &mut out);
                out
            })
            .collect()
    }

    /// Orbit written into a flat buffer of `order * dim` entries.
    #[inline]
    pub(crate) fn orbit_flat_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (s, g) in self.elements.iter().enumerate() {
            g.apply_into(x, &mut out[s * d..(s + 1) * d]);
        }
    }

    /// Checks identity, closure, inverses and distinctness. Never panics.
    pub fn verify(&self) -> VerificationReport {
        let id = Matrix::identity(self.dim);
        let identity_first = self.elements[0].max_abs_diff(&id) <= GROUP_TOL;

        let nearest = |m: &Matrix| -> f64 {
            self.elements.iter().map(|e| e.max_abs_diff(m)).fold(f64::INFINITY, f64::min)
        };

        let mut closure_dev: f64 = 0.0;
        for a in &self.elements {
            for b in &self.elements {
                closure_dev = closure_dev.max(nearest(&a.mul(b)));
            }
        }

        let mut inverse_dev: f64 = 0.0;
        for a in &self.elements {
            let best = self
                .elements
                .iter()
                .map(|b| a.mul(b).max_abs_diff(&id))
                .fold(f64::INFINITY, f64::min);
            inverse_dev = inverse_dev.max(best);
        }

        let mut distinct = true;
        for (i, a) in self.elements.iter().enumerate() {
            for b in &self.elements[i + 1..] {
                if a.max_abs_diff(b) <= GROUP_TOL {
                    distinct = false;
                }
            }
        }

        VerificationReport {
            identity: identity_first,
            closure: closure_dev <= GROUP_TOL,
            inverses: inverse_dev <= GROUP_TOL,
            distinct,
            max_deviation: closure_dev.max(inverse_dev),
        }
    }
}

impl fmt::Display for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Outcome of [`GroupAction::verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    pub identity: bool,
    pub closure: bool,
    pub inverses: bool,
    pub distinct: bool,
    /// Worst entrywise deviation seen in the closure and inverse searches.
    pub max_deviation: f64,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.identity && self.closure && self.inverses && self.distinct
    }
}

/// All permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}
