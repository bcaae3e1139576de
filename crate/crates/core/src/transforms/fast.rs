//! FFT-based discrete Legendre transform.
//!
//! The synthesis `f_k = sum_n c_n L_n(x_k)` is split into two stages:
//!
//! 1. Legendre to Chebyshev coefficients. The connection matrix has entries
//!    `M_{kn} = c_k Λ((n-k)/2) Λ((n+k)/2)` for `n - k` even, with
//!    `Λ(z) = Γ(z+1/2)/Γ(z+1)`. Inside one parity class this is the
//!    Hadamard product of an upper-triangular Toeplitz matrix and a positive
//!    semidefinite Hankel matrix. The Hankel factor is replaced by a pivoted
//!    Cholesky factorization of low numerical rank, so the product costs a
//!    handful of FFT-based Toeplitz products.
//! 2. Chebyshev series at the Gauss angles `θ_k = arccos x_k`. Each angle is
//!    snapped to the nearest point of an equispaced grid and the offset is
//!    absorbed by a Taylor expansion of `exp(i n δ_k)`; every Taylor term is
//!    one FFT on the grid.
//!
//! The forward transform runs the transposed pipeline.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::legendre::GaussRule;

/// Relative truncation level of the Hankel factorization.
const HANKEL_TOL: f64 = 1e-15;
/// Bound on the neglected Taylor remainder `t^M / M!`.
const TAYLOR_TOL: f64 = 1e-17;

/// `Λ(i) = Γ(i+1/2)/Γ(i+1)` for `i = 0..=imax`.
fn lambda_table(imax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(imax + 1);
    out.push(PI.sqrt());
    for i in 1..=imax {
        let f = (i - 1) as f64;
        out.push(out[i - 1] * (f + 0.5) / (f + 1.0));
    }
    out
}

struct ToeplitzHankel {
    m: usize,
    factors: Vec<Vec<f64>>,
    len: usize,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ToeplitzHankel {
    fn new(m: usize, parity: usize, lambda: &[f64], planner: &mut FftPlanner<f64>) -> Self {
        let len = (2 * m).next_power_of_two().max(2);
        let factors = pivoted_cholesky(m, |a, b| lambda[a + b + parity]);
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); len];
        let scale = 1.0 / len as f64;
        for s in 0..m {
            kernel_hat[s] = Complex64::new(lambda[s] * scale, 0.0);
        }
        fwd.process(&mut kernel_hat);
        Self {
            m,
            factors,
            len,
            kernel_hat,
            fwd,
            inv,
        }
    }

    fn rank(&self) -> usize {
        self.factors.len()
    }

    /// `out_a = sum_{b >= a} Λ(b-a) H_{ab} y_b` (`transpose = false`) or
    /// `out_b = sum_{a <= b} Λ(b-a) H_{ab} y_a` (`transpose = true`).
    fn apply(&self, y: &[f64], out: &mut [f64], transpose: bool) {
        let m = self.m;
        out.iter_mut().for_each(|o| *o = 0.0);
        if m == 0 {
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            self.fwd
                .get_inplace_scratch_len()
                .max(self.inv.get_inplace_scratch_len())
        ];
        for pair in self.factors.chunks(2) {
            let u0 = &pair[0];
            let u1 = pair.get(1);
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for b in 0..m {
                let re = u0[b] * y[b];
                let im = u1.map_or(0.0, |u| u[b] * y[b]);
                let slot = if transpose { b } else { m - 1 - b };
                buf[slot] = Complex64::new(re, im);
            }
            self.fwd.process_with_scratch(&mut buf, &mut scratch);
            for (z, k) in buf.iter_mut().zip(&self.kernel_hat) {
                *z *= k;
            }
            self.inv.process_with_scratch(&mut buf, &mut scratch);
            for (a, o) in out.iter_mut().enumerate() {
                let v = if transpose { buf[a] } else { buf[m - 1 - a] };
                *o += u0[a] * v.re + u1.map_or(0.0, |u| u[a] * v.im);
            }
        }
    }
}

/// Greedy pivoted Cholesky of a positive semidefinite matrix given entrywise.
fn pivoted_cholesky<F: Fn(usize, usize) -> f64>(m: usize, entry: F) -> Vec<Vec<f64>> {
    let mut residual: Vec<f64> = (0..m).map(|a| entry(a, a)).collect();
    let dmax = residual.iter().cloned().fold(0.0, f64::max);
    let mut factors: Vec<Vec<f64>> = Vec::new();
    while factors.len() < m {
        let (piv, &rmax) = match residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            Some(v) => v,
            None => break,
        };
        if rmax <= HANKEL_TOL * dmax {
            break;
        }
        let inv_root = 1.0 / rmax.sqrt();
        let mut col: Vec<f64> = (0..m).map(|a| entry(a, piv)).collect();
        for f in &factors {
            let fp = f[piv];
            for (c, fa) in col.iter_mut().zip(f) {
                *c -= fa * fp;
            }
        }
        for (a, c) in col.iter_mut().enumerate() {
            *c *= inv_root;
            residual[a] -= *c * *c;
        }
        residual[piv] = 0.0;
        factors.push(col);
    }
    factors
}

#[inline]
fn re_i_pow(m: usize, z: Complex64) -> f64 {
    match m % 4 {
        0 => z.re,
        1 => -z.im,
        2 => -z.re,
        _ => z.im,
    }
}

pub(crate) struct FastEngine {
    order: usize,
    blocks: [ToeplitzHankel; 2],
    /// `1/π` for `k = 0`, `2/π` otherwise.
    cheb_scale: Vec<f64>,
    grid_len: usize,
    bins: Vec<usize>,
    /// `P δ_k`, the scaled distance from each angle to its grid point.
    offsets: Vec<f64>,
    taylor_terms: usize,
    grid_fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FastEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastEngine")
            .field("order", &self.order)
            .field("hankel_rank", &[self.blocks[0].rank(), self.blocks[1].rank()])
            .field("grid_len", &self.grid_len)
            .field("taylor_terms", &self.taylor_terms)
            .finish()
    }
}

impl FastEngine {
    pub(crate) fn new(rule: &GaussRule) -> Self {
        let p = rule.order();
        let mut planner = FftPlanner::new();
        let lambda = lambda_table(p + 2);
        let m_even = p.div_ceil(2);
        let m_odd = p / 2;
        let blocks = [
            ToeplitzHankel::new(m_even, 0, &lambda, &mut planner),
            ToeplitzHankel::new(m_odd, 1, &lambda, &mut planner),
        ];
        let cheb_scale = (0..p)
            .map(|k| if k == 0 { 1.0 / PI } else { 2.0 / PI })
            .collect();

        let grid_len = (4 * p).next_power_of_two();
        let step = 2.0 * PI / grid_len as f64;
        let mut bins = Vec::with_capacity(p);
        let mut offsets = Vec::with_capacity(p);
        for &x in rule.nodes() {
            let theta = x.acos();
            let q = (theta / step).round();
            bins.push(q as usize);
            offsets.push(p as f64 * (theta - q * step));
        }
        let tmax = offsets.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        let mut taylor_terms = 1;
        let mut bound = tmax;
        while bound > TAYLOR_TOL && taylor_terms < 64 {
            taylor_terms += 1;
            bound *= tmax / taylor_terms as f64;
        }
        let grid_fft = planner.plan_fft_inverse(grid_len);
        Self {
            order: p,
            blocks,
            cheb_scale,
            grid_len,
            bins,
            offsets,
            taylor_terms,
            grid_fft,
        }
    }

    pub(crate) fn hankel_ranks(&self) -> [usize; 2] {
        [self.blocks[0].rank(), self.blocks[1].rank()]
    }

    fn leg_to_cheb(&self, c: &[f64], out: &mut [f64]) {
        for (parity, block) in self.blocks.iter().enumerate() {
            let y: Vec<f64> = c.iter().skip(parity).step_by(2).copied().collect();
            let mut z = vec![0.0; block.m];
            block.apply(&y, &mut z, false);
            for (a, v) in z.into_iter().enumerate() {
                let k = 2 * a + parity;
                out[k] = self.cheb_scale[k] * v;
            }
        }
    }

    fn leg_to_cheb_transpose(&self, g: &[f64], out: &mut [f64]) {
        for (parity, block) in self.blocks.iter().enumerate() {
            let y: Vec<f64> = (0..block.m)
                .map(|a| {
                    let k = 2 * a + parity;
                    self.cheb_scale[k] * g[k]
                })
                .collect();
            let mut z = vec![0.0; block.m];
            block.apply(&y, &mut z, true);
            for (b, v) in z.into_iter().enumerate() {
                out[2 * b + parity] = v;
            }
        }
    }

    fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.grid_fft.get_inplace_scratch_len()]
    }

    /// `out_k = sum_n a_n cos(n θ_k)`.
    fn cheb_eval(&self, a: &[f64], out: &mut [f64]) {
        let p = self.order;
        let l = self.grid_len;
        let inv_p = 1.0 / p as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut weighted: Vec<f64> = a.to_vec();
        let mut node_coef = vec![1.0; p];
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        let mut scratch = self.scratch();
        let mut m = 0;
        while m < self.taylor_terms {
            let pair = m + 1 < self.taylor_terms;
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (n, w) in weighted.iter_mut().enumerate() {
                let s = n as f64 * inv_p;
                let re = *w;
                *w *= s;
                let im = if pair { *w } else { 0.0 };
                if pair {
                    *w *= s;
                }
                buf[n] = Complex64::new(re, im);
            }
            self.grid_fft.process_with_scratch(&mut buf, &mut scratch);
            for (j, o) in out.iter_mut().enumerate() {
                let q = self.bins[j];
                let z = buf[q];
                let zc = buf[(l - q) % l].conj();
                let first = (z + zc) * 0.5;
                let t = self.offsets[j];
                let c0 = node_coef[j];
                *o += re_i_pow(m, first) * c0;
                let mut c = c0 * t / (m + 1) as f64;
                if pair {
                    let second = (z - zc) * Complex64::new(0.0, -0.5);
                    *o += re_i_pow(m + 1, second) * c;
                    c *= t / (m + 2) as f64;
                }
                node_coef[j] = c;
            }
            m += if pair { 2 } else { 1 };
        }
    }

    /// `out_n = sum_k g_k cos(n θ_k)` for `n < P`.
    fn cheb_eval_transpose(&self, g: &[f64], out: &mut [f64]) {
        let p = self.order;
        let l = self.grid_len;
        let inv_p = 1.0 / p as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut weighted: Vec<f64> = g.to_vec();
        let mut mode_coef = vec![1.0; p];
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        let mut scratch = self.scratch();
        let mut m = 0;
        while m < self.taylor_terms {
            let pair = m + 1 < self.taylor_terms;
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (j, w) in weighted.iter_mut().enumerate() {
                let t = self.offsets[j];
                let re = *w;
                *w *= t;
                let im = if pair { *w } else { 0.0 };
                if pair {
                    *w *= t;
                }
                buf[self.bins[j]] += Complex64::new(re, im);
            }
            self.grid_fft.process_with_scratch(&mut buf, &mut scratch);
            for (n, o) in out.iter_mut().enumerate() {
                let z = buf[n];
                let zc = buf[(l - n) % l].conj();
                let first = (z + zc) * 0.5;
                let s = n as f64 * inv_p;
                let c0 = mode_coef[n];
                *o += re_i_pow(m, first) * c0;
                let mut c = c0 * s / (m + 1) as f64;
                if pair {
                    let second = (z - zc) * Complex64::new(0.0, -0.5);
                    *o += re_i_pow(m + 1, second) * c;
                    c *= s / (m + 2) as f64;
                }
                mode_coef[n] = c;
            }
            m += if pair { 2 } else { 1 };
        }
    }

    pub(crate) fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        let mut cheb = vec![0.0; self.order];
        self.leg_to_cheb(coeffs, &mut cheb);
        self.cheb_eval(&cheb, out);
    }

    pub(crate) fn synthesize_transpose(&self, values: &[f64], out: &mut [f64]) {
        let mut cheb = vec![0.0; self.order];
        self.cheb_eval_transpose(values, &mut cheb);
        self.leg_to_cheb_transpose(&cheb, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::{eval_legendre_all, gauss_rule};

    #[test]
    fn lambda_values() {
        let l = lambda_table(3);
        assert!((l[0] - PI.sqrt()).abs() < 1e-15);
        assert!((l[1] - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((l[2] - 3.0 * PI.sqrt() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn leg_to_cheb_small_degrees() {
        // L_2 = 1/4 T_0 + 3/4 T_2, L_3 = 3/8 T_1 + 5/8 T_3
        let rule = gauss_rule(6).unwrap();
        let eng = FastEngine::new(&rule);
        let mut out = vec![0.0; 6];
        eng.leg_to_cheb(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &mut out);
        let expect = [0.25, 0.0, 0.75, 0.0, 0.0, 0.0];
        for k in 0..6 {
            assert!((out[k] - expect[k]).abs() < 1e-14, "{out:?}");
        }
        eng.leg_to_cheb(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &mut out);
        let expect = [0.0, 0.375, 0.0, 0.625, 0.0, 0.0];
        for k in 0..6 {
            assert!((out[k] - expect[k]).abs() < 1e-14, "{out:?}");
        }
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        for p in [1usize, 2, 3, 7, 64, 301] {
            let rule = gauss_rule(p).unwrap();
            let eng = FastEngine::new(&rule);
            let c: Vec<f64> = (0..p).map(|n| ((n * 37 % 17) as f64 - 8.0) / 8.0).collect();
            let mut fast = vec![0.0; p];
            eng.synthesize(&c, &mut fast);
            for (k, &x) in rule.nodes().iter().enumerate() {
                let l = eval_legendre_all(p - 1, x);
                let direct: f64 = l.iter().zip(&c).map(|(a, b)| a * b).sum();
                assert!((fast[k] - direct).abs() < 1e-12, "p={p} k={k}");
            }
            let mut tr = vec![0.0; p];
            eng.synthesize_transpose(&c, &mut tr);
            let mut direct_tr = vec![0.0; p];
            for (k, &x) in rule.nodes().iter().enumerate() {
                for (n, l) in eval_legendre_all(p - 1, x).iter().enumerate() {
                    direct_tr[n] += c[k] * l;
                }
            }
            for n in 0..p {
                assert!((tr[n] - direct_tr[n]).abs() < 1e-11, "p={p} n={n}");
            }
        }
    }
}
