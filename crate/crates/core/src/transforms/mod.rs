//! Discrete Legendre transforms between coefficients and Gauss-node values.
//!
//! Tensors are stored with the first axis fastest: entry `(i, j, l)` of a
//! `P^3` tensor lives at `i + P (j + P l)`.

mod fast;
mod reference;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::GaussRule;

use fast::FastEngine;
use reference::ReferenceEngine;

/// Implementation strategy of a [`TransformPlan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformMode {
    /// Dense `O(P^2)` Vandermonde products.
    Reference,
    /// FFT based, `O(P log P)` per transform up to the Hankel rank factor.
    Accelerated,
}

impl TransformMode {
    /// Picks the faster mode for a given order. The crossover is machine
    /// dependent; 192 is a conservative point on ordinary hardware.
    pub fn auto(order: usize) -> Self {
        if order >= 192 {
            TransformMode::Accelerated
        } else {
            TransformMode::Reference
        }
    }
}

impl std::str::FromStr for TransformMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reference" => Ok(Self::Reference),
            "accelerated" | "fast" => Ok(Self::Accelerated),
            other => Err(Error::InvalidArgument(format!(
                "unknown transform mode '{other}' (expected reference or accelerated)"
            ))),
        }
    }
}

#[derive(Debug)]
enum Engine {
    Reference(ReferenceEngine),
    Accelerated(FastEngine),
}

/// Precomputed data for transforms of one order `P`.
///
/// The plan is immutable apart from an instrumentation counter of tensor
/// transforms, which is atomic so plans may be shared across threads.
#[derive(Debug)]
pub struct TransformPlan {
    rule: GaussRule,
    mode: TransformMode,
    engine: Engine,
    /// `(2n+1)/2` normalization of the forward transform.
    norms: Vec<f64>,
    tensor_calls: AtomicUsize,
}

impl TransformPlan {
    pub fn new(order: usize, mode: TransformMode) -> Result<Self> {
        let rule = GaussRule::new(order)?;
        let engine = match mode {
            TransformMode::Reference => Engine::Reference(ReferenceEngine::new(&rule)),
            TransformMode::Accelerated => Engine::Accelerated(FastEngine::new(&rule)),
        };
        let norms = (0..order).map(|n| (2 * n + 1) as f64 / 2.0).collect();
        Ok(Self {
            rule,
            mode,
            engine,
            norms,
            tensor_calls: AtomicUsize::new(0),
        })
    }

    /// Plan for polynomial cutoff `N`, i.e. `P = N + 1` nodes.
    pub fn for_cutoff(n: usize, mode: TransformMode) -> Result<Self> {
        Self::new(n + 1, mode)
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn mode(&self) -> TransformMode {
        self.mode
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    /// Ranks of the even/odd Hankel factorizations (accelerated mode only).
    pub fn hankel_ranks(&self) -> Option<[usize; 2]> {
        match &self.engine {
            Engine::Accelerated(e) => Some(e.hankel_ranks()),
            Engine::Reference(_) => None,
        }
    }

    /// Number of tensor transforms performed through this plan so far.
    pub fn transform_count(&self) -> usize {
        self.tensor_calls.load(Ordering::Relaxed)
    }

    pub fn reset_transform_count(&self) {
        self.tensor_calls.store(0, Ordering::Relaxed);
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.order() {
            return Err(Error::LengthMismatch {
                expected: self.order(),
                got: len,
            });
        }
        Ok(())
    }

    fn bdlt_into(&self, coeffs: &[f64], out: &mut [f64]) {
        match &self.engine {
            Engine::Reference(e) => e.synthesize(coeffs, out),
            Engine::Accelerated(e) => e.synthesize(coeffs, out),
        }
    }

    fn fdlt_into(&self, values: &[f64], out: &mut [f64]) {
        let weighted: Vec<f64> = values
            .iter()
            .zip(self.rule.weights())
            .map(|(f, w)| f * w)
            .collect();
        match &self.engine {
            Engine::Reference(e) => e.synthesize_transpose(&weighted, out),
            Engine::Accelerated(e) => e.synthesize_transpose(&weighted, out),
        }
        for (o, s) in out.iter_mut().zip(&self.norms) {
            *o *= s;
        }
    }

    /// `f_k = sum_n c_n L_n(x_k)`.
    pub fn bdlt(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut out = vec![0.0; self.order()];
        self.bdlt_into(coeffs, &mut out);
        Ok(out)
    }

    /// `c_n = (2n+1)/2 sum_k w_k f_k L_n(x_k)`.
    pub fn fdlt(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let mut out = vec![0.0; self.order()];
        self.fdlt_into(values, &mut out);
        Ok(out)
    }

    pub fn tensor_bdlt(&self, coeffs: &[f64], dim: usize) -> Result<Vec<f64>> {
        self.tensor_apply(coeffs, dim, false)
    }

    pub fn tensor_fdlt(&self, values: &[f64], dim: usize) -> Result<Vec<f64>> {
        self.tensor_apply(values, dim, true)
    }

    /// In-place tensor transform of a buffer already known to be `P^d`.
    pub(crate) fn tensor_in_place(&self, data: &mut [f64], dim: usize, forward: bool) {
        self.tensor_calls.fetch_add(1, Ordering::Relaxed);
        let p = self.order();
        let mut line = vec![0.0; p];
        let mut res = vec![0.0; p];
        let mut stride = 1;
        for _ in 0..dim {
            let block = stride * p;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[base + k * stride];
                    }
                    if forward {
                        self.fdlt_into(&line, &mut res);
                    } else {
                        self.bdlt_into(&line, &mut res);
                    }
                    for (k, v) in res.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
            stride = block;
        }
    }

    fn tensor_apply(&self, input: &[f64], dim: usize, forward: bool) -> Result<Vec<f64>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let p = self.order();
        let expected = p.pow(dim as u32);
        if input.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "tensor of {} entries cannot have shape {p}^{dim}",
                input.len()
            )));
        }
        let mut data = input.to_vec();
        self.tensor_in_place(&mut data, dim, forward);
        Ok(data)
    }
}

pub fn bdlt(plan: &TransformPlan, coeffs: &[f64]) -> Result<Vec<f64>> {
    plan.bdlt(coeffs)
}

pub fn fdlt(plan: &TransformPlan, values: &[f64]) -> Result<Vec<f64>> {
    plan.fdlt(values)
}

pub fn tensor_bdlt(plan: &TransformPlan, coeffs: &[f64], dim: usize) -> Result<Vec<f64>> {
    plan.tensor_bdlt(coeffs, dim)
}

pub fn tensor_fdlt(plan: &TransformPlan, values: &[f64], dim: usize) -> Result<Vec<f64>> {
    plan.tensor_fdlt(values, dim)
}
