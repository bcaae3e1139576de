//! Legendre polynomial kernel.
//!
//! Evaluation by the three-term recurrence
//! `(n+1) L_{n+1}(x) = (2n+1) x L_n(x) - n L_{n-1}(x)`, Legendre-Gauss
//! rules, product linearization, and the conversions between the
//! boundary-adapted basis `phi_k = L_k - L_{k+2}` and the Legendre basis.

use crate::error::{Error, Result};

/// `L_n(x)` by upward recurrence from `L_0 = 1`, `L_1 = x`.
pub fn eval_legendre(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// `[L_0(x), ..., L_nmax(x)]` in a single upward sweep.
pub fn eval_legendre_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax == 0 {
        return out;
    }
    out.push(x);
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// `(L_n(x), L_{n-1}(x))` for `n >= 1`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut curr = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    (curr, prev)
}

/// `L'_n(x)` from `(1 - x^2) L'_n = n (L_{n-1} - x L_n)`, valid for `|x| < 1`.
pub fn eval_legendre_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (ln, lnm1) = legendre_pair(n, x);
    n as f64 * (lnm1 - x * ln) / (1.0 - x * x)
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre-Gauss quadrature rule with `order` nodes on `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Builds the rule by Newton iteration on `L_order`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "Gauss rule order must be at least 1".into(),
            ));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // i-th largest root; the guess is the matching Chebyshev-type point
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            if n % 2 == 1 && i == half - 1 {
                x = 0.0;
            }
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (ln, lnm1) = legendre_pair(n, x);
                let dl = nf * (lnm1 - x * ln) / (1.0 - x * x);
                let dx = ln / dl;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::GaussNoConvergence { order, index: i });
            }
            let (ln, lnm1) = legendre_pair(n, x);
            let dl = nf * (lnm1 - x * ln) / (1.0 - x * x);
            let w = 2.0 / ((1.0 - x * x) * dl * dl);
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes in strictly increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Shorthand for [`GaussRule::new`].
pub fn gauss_rule(order: usize) -> Result<GaussRule> {
    GaussRule::new(order)
}

/// Table of `C_r = (1·3···(2r-1)) / (r! 2^r)` with `C_0 = 1`, built by the
/// ratio `C_r = C_{r-1} (2r-1)/(2r)` so it never overflows.
#[derive(Debug, Clone)]
pub struct LinearizationTable {
    c: Vec<f64>,
}

impl LinearizationTable {
    pub fn new(rmax: usize) -> Self {
        let mut c = Vec::with_capacity(rmax + 1);
        c.push(1.0);
        for r in 1..=rmax {
            let rf = r as f64;
            c.push(c[r - 1] * (2.0 * rf - 1.0) / (2.0 * rf));
        }
        Self { c }
    }

    pub fn max_index(&self) -> usize {
        self.c.len() - 1
    }

    pub fn c(&self, r: usize) -> f64 {
        self.c[r]
    }

    /// Coefficient of `L_{m+n-2s}` in `L_m L_n`.
    pub fn product_coefficient(&self, m: usize, n: usize, s: usize) -> f64 {
        let mn = (m + n) as f64;
        let sf = s as f64;
        (mn + 0.5 - 2.0 * sf) / (mn + 0.5 - sf) * self.c[s] * self.c[m - s] * self.c[n - s]
            / self.c[m + n - s]
    }

    /// `∫_{-1}^{1} L_a L_b L_c dx`, zero unless `a + b + c` is even and the
    /// triangle inequality holds.
    pub fn triple_integral(&self, a: usize, b: usize, c: usize) -> f64 {
        let sum = a + b + c;
        if sum % 2 == 1 {
            return 0.0;
        }
        let s = sum / 2;
        if a > s || b > s || c > s {
            return 0.0;
        }
        2.0 / (2.0 * s as f64 + 1.0) * self.c[s - a] * self.c[s - b] * self.c[s - c] / self.c[s]
    }
}

/// Legendre expansion of the product `L_m L_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationExpansion {
    pub m: usize,
    pub n: usize,
    /// `coeffs[s]` multiplies `L_{m+n-2s}`, `s = 0..=min(m, n)`.
    pub coeffs: Vec<f64>,
}

impl LinearizationExpansion {
    pub fn degree_of(&self, s: usize) -> usize {
        self.m + self.n - 2 * s
    }

    /// Evaluates the expansion at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let values = eval_legendre_all(self.m + self.n, x);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, &c)| c * values[self.degree_of(s)])
            .sum()
    }
}

pub fn product_linearization(m: usize, n: usize) -> LinearizationExpansion {
    let table = LinearizationTable::new(m + n);
    let coeffs = (0..=m.min(n))
        .map(|s| table.product_coefficient(m, n, s))
        .collect();
    LinearizationExpansion { m, n, coeffs }
}

/// Legendre coefficients of `sum_k u_k phi_k`; output length `K + 2`.
pub fn phi_to_legendre(u_phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u_phi.len() + 2];
    phi_to_legendre_into(u_phi, &mut out);
    out
}

pub(crate) fn phi_to_legendre_into(u_phi: &[f64], out: &mut [f64]) {
    let k = u_phi.len();
    debug_assert_eq!(out.len(), k + 2);
    for (j, o) in out.iter_mut().enumerate() {
        let a = if j < k { u_phi[j] } else { 0.0 };
        let b = if j >= 2 { u_phi[j - 2] } else { 0.0 };
        *o = a - b;
    }
}

/// Legendre coefficients of `d/dx sum_k u_k phi_k`, using
/// `phi'_k = -(2k+3) L_{k+1}`. Output is padded to length `K + 2`.
pub fn dphi_to_legendre(u_phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u_phi.len() + 2];
    dphi_to_legendre_into(u_phi, &mut out);
    out
}

pub(crate) fn dphi_to_legendre_into(u_phi: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), u_phi.len() + 2);
    out[0] = 0.0;
    *out.last_mut().unwrap() = 0.0;
    for (k, &u) in u_phi.iter().enumerate() {
        out[k + 1] = -(2.0 * k as f64 + 3.0) * u;
    }
}

/// Pairs a Legendre series `v` (length `K + 2`) with each `phi_k`:
/// `(sum v_n L_n, phi_k) = 2 v_k/(2k+1) - 2 v_{k+2}/(2k+5)`.
pub(crate) fn pair_with_phi_into(v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len() + 2);
    for (k, o) in out.iter_mut().enumerate() {
        let kf = k as f64;
        *o = 2.0 * v[k] / (2.0 * kf + 1.0) - 2.0 * v[k + 2] / (2.0 * kf + 5.0);
    }
}

/// Pairs a Legendre series with each `phi'_k`: `-2 v_{k+1}`.
pub(crate) fn pair_with_dphi_into(v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len(), out.len() + 2);
    for (k, o) in out.iter_mut().enumerate() {
        *o = -2.0 * v[k + 1];
    }
}

/// `phi_k(x)` for `k = 0..kmax`.
pub fn eval_phi_all(kmax: usize, x: f64) -> Vec<f64> {
    let l = eval_legendre_all(kmax + 2, x);
    (0..kmax).map(|k| l[k] - l[k + 2]).collect()
}

/// `phi'_k(x) = -(2k+3) L_{k+1}(x)` for `k = 0..kmax`.
pub fn eval_dphi_all(kmax: usize, x: f64) -> Vec<f64> {
    let l = eval_legendre_all(kmax + 1, x);
    (0..kmax)
        .map(|k| -(2.0 * k as f64 + 3.0) * l[k + 1])
        .collect()
}

/// Evaluates the Legendre series `sum c_n L_n(x)` by Clenshaw's recurrence.
pub fn eval_series(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for n in (0..coeffs.len()).rev() {
        let nf = n as f64;
        // alpha_n = (2n+1)/(n+1) x, beta_{n+1} = -(n+1)/(n+2)
        let alpha = (2.0 * nf + 1.0) / (nf + 1.0) * x;
        let beta = -(nf + 1.0) / (nf + 2.0);
        let b0 = coeffs[n] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}
