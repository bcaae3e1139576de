//! Coefficient fields, problem descriptions and coefficient tensors.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parity of a function in one coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Whether a Legendre degree `t` has this parity.
    pub fn admits(self, t: usize) -> bool {
        match self {
            Parity::Even => t % 2 == 0,
            Parity::Odd => t % 2 == 1,
        }
    }

    fn combine(a: Option<Parity>, b: Option<Parity>) -> Option<Parity> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if x == y { Parity::Even } else { Parity::Odd }),
            _ => None,
        }
    }
}

pub type FieldFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// How a field was constructed, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Constant(f64),
    Preset(String),
    Separable(Vec<String>),
    Custom,
}

/// Scalar function on `(-1, 1)^d`.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    kind: FieldKind,
    name: String,
    parity: Vec<Option<Parity>>,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("parity", &self.parity)
            .finish()
    }
}

/// One-dimensional building blocks for presets and separable fields.
const PRESETS_1D: &[(&str, Option<Parity>)] = &[
    ("one", Some(Parity::Even)),
    ("x", Some(Parity::Odd)),
    ("quartic", Some(Parity::Even)),
    ("exp", None),
    ("exp2", None),
    ("cos", Some(Parity::Even)),
    ("cos_sin", Some(Parity::Even)),
    ("runge", Some(Parity::Even)),
];

fn eval_1d(name: &str, x: f64) -> f64 {
    match name {
        "one" => 1.0,
        "x" => x,
        "quartic" => (2.0 * x * x + 1.0).powi(4),
        "exp" => x.exp(),
        "exp2" => (2.0 * x).exp(),
        "cos" => x.cos(),
        "cos_sin" => x.sin().cos(),
        "runge" => 1.0 / (100.0 * x * x + 1.0),
        _ => unreachable!("unknown 1d preset {name}"),
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

impl CoefficientField {
    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            kind: FieldKind::Constant(value),
            name: format!("{value}"),
            parity: vec![Some(Parity::Even); dim],
            eval: Arc::new(move |_| value),
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::constant(dim, 0.0)
    }

    /// Names accepted by [`Self::preset`].
    pub fn preset_names() -> &'static [&'static str] {
        &[
            "quartic", "exp", "exp2", "cos", "cos_sin", "runge", "x", "one", "zero",
        ]
    }

    /// Named radial or diagonal preset in `dim` variables.
    ///
    /// | name | formula |
    /// |---|---|
    /// | `quartic` | `(2 |x|^2 + 1)^4` |
    /// | `exp` | `exp(x + y + z)` |
    /// | `exp2` | `exp(2(x + y + z))` |
    /// | `cos` | `cos(x + y + z)` |
    /// | `cos_sin` | `cos(sin(x + y + z))` |
    /// | `runge` | `1 / (100 |x|^2 + 1)` |
    /// | `x` | `x + y + z` |
    pub fn preset(name: &str, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let lname = name.to_ascii_lowercase();
        let radial = |f: fn(f64) -> f64| -> Arc<FieldFn> {
            Arc::new(move |p: &[f64]| f(p.iter().map(|x| x * x).sum()))
        };
        let diagonal = |f: fn(f64) -> f64| -> Arc<FieldFn> {
            Arc::new(move |p: &[f64]| f(p.iter().sum()))
        };
        let even = vec![Some(Parity::Even); dim];
        let along_sum = |p1: Option<Parity>| -> Vec<Option<Parity>> {
            if dim == 1 {
                vec![p1]
            } else {
                vec![None; dim]
            }
        };
        let (eval, parity) = match lname.as_str() {
            "one" => return Self::constant(dim, 1.0),
            "zero" => return Self::zero(dim),
            "quartic" => (radial(|r2| (2.0 * r2 + 1.0).powi(4)), even),
            "runge" => (radial(|r2| 1.0 / (100.0 * r2 + 1.0)), even),
            "exp" => (diagonal(f64::exp), vec![None; dim]),
            "exp2" => (diagonal(|s| (2.0 * s).exp()), vec![None; dim]),
            "cos" => (diagonal(f64::cos), along_sum(Some(Parity::Even))),
            "cos_sin" => (diagonal(|s| s.sin().cos()), along_sum(Some(Parity::Even))),
            "x" => (diagonal(|s| s), along_sum(Some(Parity::Odd))),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown coefficient preset '{name}' (known: {})",
                    Self::preset_names().join(", ")
                )))
            }
        };
        Ok(Self {
            dim,
            kind: FieldKind::Preset(lname.clone()),
            name: lname,
            parity,
            eval,
        })
    }

    /// Product `f_1(x) f_2(y) f_3(z)` of one-dimensional presets, one name
    /// per axis (`one` for a constant factor).
    pub fn separable(factors: &[&str]) -> Result<Self> {
        let dim = factors.len();
        check_dim(dim)?;
        let mut names = Vec::with_capacity(dim);
        let mut parity = Vec::with_capacity(dim);
        for f in factors {
            let lname = f.to_ascii_lowercase();
            match PRESETS_1D.iter().find(|(n, _)| *n == lname) {
                Some(&(n, p)) => {
                    names.push(n.to_string());
                    parity.push(p);
                }
                None => {
                    let known: Vec<&str> = PRESETS_1D.iter().map(|p| p.0).collect();
                    return Err(Error::InvalidArgument(format!(
                        "unknown separable factor '{f}' (known: {})",
                        known.join(", ")
                    )));
                }
            }
        }
        let owned = names.clone();
        let eval: Arc<FieldFn> = Arc::new(move |p: &[f64]| {
            owned
                .iter()
                .zip(p)
                .map(|(n, &x)| eval_1d(n, x))
                .product()
        });
        Ok(Self {
            dim,
            name: names.join("*"),
            kind: FieldKind::Separable(names),
            parity,
            eval,
        })
    }

    /// Parses `"2.5"` (constant), `"exp2*one*cos"` (separable, one factor
    /// per axis) or a preset name.
    pub fn parse(expr: &str, dim: usize) -> Result<Self> {
        let e = expr.trim();
        if let Ok(v) = e.parse::<f64>() {
            return Self::constant(dim, v);
        }
        if e.contains('*') {
            let factors: Vec<&str> = e.split('*').map(str::trim).collect();
            if factors.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "separable coefficient '{e}' has {} factors, dimension is {dim}",
                    factors.len()
                )));
            }
            return Self::separable(&factors);
        }
        Self::preset(e, dim)
    }

    /// User supplied callable. Parity is unknown, which selects the
    /// conservative band everywhere.
    pub fn custom<F>(dim: usize, name: &str, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(Self {
            dim,
            kind: FieldKind::Custom,
            name: name.to_string(),
            parity: vec![None; dim],
            eval: Arc::new(f),
        })
    }

    /// Declares the parity of a custom field in every direction.
    pub fn with_parity(mut self, parity: Vec<Option<Parity>>) -> Result<Self> {
        if parity.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: parity.len(),
            });
        }
        self.parity = parity;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Declared parity per axis, `None` where no symmetry is known.
    pub fn parity(&self) -> &[Option<Parity>] {
        &self.parity
    }

    /// Parity of the field viewed as a function of all variables jointly
    /// when every axis parity is known.
    pub fn total_parity(&self) -> Option<Parity> {
        self.parity.iter().fold(Some(Parity::Even), |acc, &p| Parity::combine(acc, p))
    }

    pub fn is_identically_zero(&self) -> bool {
        matches!(self.kind, FieldKind::Constant(v) if v == 0.0)
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            FieldKind::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        (self.eval)(point)
    }

    /// Samples on the tensor grid `nodes^d`, first axis fastest.
    pub fn sample_tensor(&self, nodes: &[f64]) -> Vec<f64> {
        let p = nodes.len();
        let total = p.pow(self.dim as u32);
        let mut out = Vec::with_capacity(total);
        let mut point = vec![0.0; self.dim];
        for idx in 0..total {
            let mut rest = idx;
            for c in point.iter_mut() {
                *c = nodes[rest % p];
                rest /= p;
            }
            out.push(self.eval(&point));
        }
        out
    }
}

/// Diffusion term: `div(β ∇u)` or `sum_i (β_i u_{x_i})_{x_i}`.
#[derive(Debug, Clone)]
pub enum Diffusion {
    Isotropic(CoefficientField),
    PerAxis(Vec<CoefficientField>),
}

impl Diffusion {
    pub fn dim(&self) -> usize {
        match self {
            Diffusion::Isotropic(f) => f.dim(),
            Diffusion::PerAxis(v) => v.len(),
        }
    }

    /// Coefficient multiplying the derivative along `axis`.
    pub fn axis(&self, axis: usize) -> &CoefficientField {
        match self {
            Diffusion::Isotropic(f) => f,
            Diffusion::PerAxis(v) => &v[axis],
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, Diffusion::Isotropic(_))
    }

    /// Distinct coefficient fields (one, or one per axis).
    pub fn fields(&self) -> Vec<&CoefficientField> {
        match self {
            Diffusion::Isotropic(f) => vec![f],
            Diffusion::PerAxis(v) => v.iter().collect(),
        }
    }
}

/// `-div(β ∇u) + α u = f` on `(-1,1)^d` with homogeneous Dirichlet data,
/// discretized with polynomials of degree `N`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    dim: usize,
    n: usize,
    diffusion: Diffusion,
    alpha: CoefficientField,
    rhs: CoefficientField,
}

impl ProblemSpec {
    pub fn new(
        n: usize,
        diffusion: Diffusion,
        alpha: CoefficientField,
        rhs: CoefficientField,
    ) -> Result<Self> {
        let dim = diffusion.dim();
        check_dim(dim)?;
        if n < 3 {
            return Err(Error::InvalidArgument(format!("N = {n}, need N >= 3")));
        }
        if let Diffusion::PerAxis(v) = &diffusion {
            for f in v {
                if f.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: f.dim(),
                    });
                }
            }
        }
        for f in [&alpha, &rhs] {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        if let Diffusion::Isotropic(f) = &diffusion {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        Ok(Self {
            dim,
            n,
            diffusion,
            alpha,
            rhs,
        })
    }

    /// Isotropic problem with `f ≡ 1`.
    pub fn isotropic(n: usize, beta: CoefficientField, alpha: CoefficientField) -> Result<Self> {
        let rhs = CoefficientField::constant(beta.dim(), 1.0)?;
        Self::new(n, Diffusion::Isotropic(beta), alpha, rhs)
    }

    pub fn with_rhs(mut self, rhs: CoefficientField) -> Result<Self> {
        if rhs.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rhs.dim(),
            });
        }
        self.rhs = rhs;
        Ok(self)
    }

    pub fn with_n(mut self, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("N = {n}, need N >= 3")));
        }
        self.n = n;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Polynomial cutoff `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Basis functions per axis, `K = N - 1`.
    pub fn modes(&self) -> usize {
        self.n - 1
    }

    /// Number of unknowns `K^d`.
    pub fn unknowns(&self) -> usize {
        self.modes().pow(self.dim as u32)
    }

    /// Gauss nodes per axis, `P = N + 1`.
    pub fn grid_order(&self) -> usize {
        self.n + 1
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    pub fn alpha(&self) -> &CoefficientField {
        &self.alpha
    }

    pub fn rhs(&self) -> &CoefficientField {
        &self.rhs
    }
}

/// Coefficients of a function in the tensor φ basis (first axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    dim: usize,
    modes: usize,
    data: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn new(dim: usize, modes: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if modes == 0 {
            return Err(Error::ShapeMismatch("at least one mode per axis is required".into()));
        }
        let expected = modes.pow(dim as u32);
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("entry {i} is not finite")));
        }
        Ok(Self { dim, modes, data })
    }

    pub fn zeros(dim: usize, modes: usize) -> Self {
        Self {
            dim,
            modes,
            data: vec![0.0; modes.pow(dim as u32)],
        }
    }

    pub fn filled(dim: usize, modes: usize, value: f64) -> Self {
        Self {
            dim,
            modes,
            data: vec![value; modes.pow(dim as u32)],
        }
    }

    /// Entries uniform on `[0, 1)` from a ChaCha8 stream seeded with `seed`.
    pub fn random(dim: usize, modes: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..modes.pow(dim as u32)).map(|_| rng.gen::<f64>()).collect();
        Self { dim, modes, data }
    }

    /// Zero tensor shaped for a problem.
    pub fn zeros_for(spec: &ProblemSpec) -> Self {
        Self::zeros(spec.dim(), spec.modes())
    }

    pub(crate) fn from_parts(dim: usize, modes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), modes.pow(dim as u32));
        Self { dim, modes, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K`, the extent of every axis.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat index of a multi-index.
    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().rev().fold(0, |acc, &i| acc * self.modes + i)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.modes == other.modes
    }

    pub fn norm(&self) -> f64 {
        crate::pcg::compensated_dot(&self.data, &self.data).sqrt()
    }
}
