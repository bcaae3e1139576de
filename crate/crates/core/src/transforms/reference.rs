//! Dense `O(P^2)` transforms through the Legendre-Vandermonde matrix.

use crate::legendre::GaussRule;

/// Above this order the table `L_n(x_k)` is regenerated by recurrence on
/// every call. Once the table falls out of cache the interleaved recurrence
/// is faster than streaming it from memory.
pub(crate) const TABLE_LIMIT: usize = 512;

#[derive(Debug)]
pub(crate) struct ReferenceEngine {
    order: usize,
    nodes: Vec<f64>,
    /// Row `k` holds `L_0(x_k) .. L_{P-1}(x_k)`; empty when above the limit.
    table: Vec<f64>,
    rec: Vec<(f64, f64)>,
}

impl ReferenceEngine {
    pub(crate) fn new(rule: &GaussRule) -> Self {
        let p = rule.order();
        let mut table = Vec::new();
        if p <= TABLE_LIMIT {
            table.reserve(p * p);
            for &x in rule.nodes() {
                table.extend(crate::legendre::eval_legendre_all(p - 1, x));
            }
        }
        Self {
            order: p,
            nodes: rule.nodes().to_vec(),
            table,
            rec: recurrence_coefficients(p),
        }
    }

    /// `f_k = sum_n c_n L_n(x_k)`.
    pub(crate) fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        let p = self.order;
        if !self.table.is_empty() {
            for (k, o) in out.iter_mut().enumerate() {
                let row = &self.table[k * p..(k + 1) * p];
                *o = row.iter().zip(coeffs).map(|(l, c)| l * c).sum();
            }
        } else {
            for (o, xs) in out.chunks_mut(LANES).zip(self.nodes.chunks(LANES)) {
                recurrence_synthesize(xs, coeffs, &self.rec, o);
            }
        }
    }

    /// `g_n = sum_k v_k L_n(x_k)` (transpose of [`Self::synthesize`]).
    pub(crate) fn synthesize_transpose(&self, values: &[f64], out: &mut [f64]) {
        let p = self.order;
        out.iter_mut().for_each(|o| *o = 0.0);
        if !self.table.is_empty() {
            for (k, &v) in values.iter().enumerate() {
                let row = &self.table[k * p..(k + 1) * p];
                for (o, l) in out.iter_mut().zip(row) {
                    *o += v * l;
                }
            }
        } else {
            for (vs, xs) in values.chunks(LANES).zip(self.nodes.chunks(LANES)) {
                recurrence_transpose(xs, vs, &self.rec, out);
            }
        }
    }
}

/// Nodes processed together by the recurrence kernels.
const LANES: usize = 8;

/// `(a_n, b_n)` with `L_{n+1} = a_n x L_n - b_n L_{n-1}`.
fn recurrence_coefficients(p: usize) -> Vec<(f64, f64)> {
    (0..p)
        .map(|n| {
            let nf = n as f64;
            ((2.0 * nf + 1.0) / (nf + 1.0), nf / (nf + 1.0))
        })
        .collect()
}

/// `out_k = sum_n c_n L_n(x_k)` for a group of at most `LANES` nodes.
fn recurrence_synthesize(xs: &[f64], coeffs: &[f64], rec: &[(f64, f64)], out: &mut [f64]) {
    let p = coeffs.len();
    let mut x = [0.0; LANES];
    x[..xs.len()].copy_from_slice(xs);
    let mut prev = [1.0; LANES];
    let mut curr = x;
    let mut acc = [coeffs[0]; LANES];
    if p > 1 {
        for j in 0..LANES {
            acc[j] += coeffs[1] * x[j];
        }
    }
    for n in 1..p.saturating_sub(1) {
        let (a, b) = rec[n];
        let c = coeffs[n + 1];
        for j in 0..LANES {
            let next = a * x[j] * curr[j] - b * prev[j];
            acc[j] += c * next;
            prev[j] = curr[j];
            curr[j] = next;
        }
    }
    out.copy_from_slice(&acc[..xs.len()]);
}

/// `out_n += sum_k v_k L_n(x_k)` for a group of at most `LANES` nodes.
fn recurrence_transpose(xs: &[f64], vs: &[f64], rec: &[(f64, f64)], out: &mut [f64]) {
    let p = out.len();
    let mut x = [0.0; LANES];
    let mut v = [0.0; LANES];
    x[..xs.len()].copy_from_slice(xs);
    v[..vs.len()].copy_from_slice(vs);
    out[0] += v.iter().sum::<f64>();
    if p > 1 {
        out[1] += (0..LANES).map(|j| v[j] * x[j]).sum::<f64>();
    }
    let mut prev = [1.0; LANES];
    let mut curr = x;
    for n in 1..p.saturating_sub(1) {
        let (a, b) = rec[n];
        let mut s = 0.0;
        for j in 0..LANES {
            let next = a * x[j] * curr[j] - b * prev[j];
            s += v[j] * next;
            prev[j] = curr[j];
            curr[j] = next;
        }
        out[n + 1] += s;
    }
}
