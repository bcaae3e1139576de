//! Benchmark problems with their tabulated iteration counts, and the sweep
//! driver that runs them.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CoefficientField, Diffusion, ProblemSpec, SpectralCoeffs};
use crate::pcg::{pcg_solve, SolveReport, SolverConfig};
use crate::precond::Truncation;
use crate::transforms::{TransformMode, TransformPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Example1a,
    Example1b,
    Example2a,
    Example2b,
    Example3a,
    Example3b,
    Example4a,
    Example4b,
}

/// One row of a reference iteration table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub truncation: Truncation,
    pub iterations: Vec<usize>,
}

impl Example {
    pub const ALL: [Example; 8] = [
        Example::Example1a,
        Example::Example1b,
        Example::Example2a,
        Example::Example2b,
        Example::Example3a,
        Example::Example3b,
        Example::Example4a,
        Example::Example4b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Example::Example1a => "example1a",
            Example::Example1b => "example1b",
            Example::Example2a => "example2a",
            Example::Example2b => "example2b",
            Example::Example3a => "example3a",
            Example::Example3b => "example3b",
            Example::Example4a => "example4a",
            Example::Example4b => "example4b",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Example::Example1a | Example::Example1b => 1,
            Example::Example2a | Example::Example2b | Example::Example4a => 2,
            Example::Example3a | Example::Example3b | Example::Example4b => 3,
        }
    }

    pub fn n_list(self) -> Vec<usize> {
        match self.dim() {
            1 => vec![320, 640, 1280, 2560, 5120, 10240],
            2 => vec![40, 60, 80, 100, 120],
            _ => vec![12, 16, 20, 24],
        }
    }

    /// Problem at cutoff `n` with `f ≡ 1`.
    pub fn spec(self, n: usize) -> Result<ProblemSpec> {
        let d = self.dim();
        let zero = CoefficientField::zero(d)?;
        match self {
            Example::Example1a | Example::Example2a | Example::Example3a => ProblemSpec::isotropic(
                n,
                CoefficientField::preset("quartic", d)?,
                CoefficientField::preset("cos", d)?,
            ),
            Example::Example1b | Example::Example2b | Example::Example3b => {
                ProblemSpec::isotropic(n, CoefficientField::preset("exp2", d)?, zero)
            }
            Example::Example4a | Example::Example4b => {
                let axis_factor = |axis: usize, name: &str| {
                    let mut f = vec!["one"; d];
                    f[axis] = name;
                    CoefficientField::separable(&f)
                };
                let mut fields = vec![axis_factor(0, "exp2")?];
                for a in 1..d {
                    fields.push(axis_factor(a, "cos")?);
                }
                let rhs = CoefficientField::constant(d, 1.0)?;
                ProblemSpec::new(n, Diffusion::PerAxis(fields), zero, rhs)
            }
        }
    }

    /// Rows of the reference table, in the order printed.
    pub fn table(self) -> Vec<TableRow> {
        let iso = |t1: usize, t2: usize, it: &[usize]| TableRow {
            truncation: Truncation::new(t1, t2),
            iterations: it.to_vec(),
        };
        let aniso = |t1: &[usize], it: &[usize]| TableRow {
            truncation: Truncation::per_axis(t1.to_vec(), 0),
            iterations: it.to_vec(),
        };
        match self {
            Example::Example1a => vec![
                iso(0, 0, &[130, 134, 138, 142, 145, 148]),
                iso(4, 2, &[16, 17, 17, 17, 18, 18]),
                iso(6, 2, &[7, 8, 8, 8, 8, 8]),
            ],
            Example::Example1b => vec![
                iso(0, 0, &[108, 110, 113, 116, 119, 121]),
                iso(4, 0, &[11, 11, 11, 12, 12, 12]),
                iso(5, 0, &[7, 7, 7, 8, 8, 8]),
            ],
            Example::Example2a => vec![
                iso(0, 0, &[242, 281, 288, 291, 292]),
                iso(4, 3, &[15, 17, 19, 21, 23]),
                iso(6, 3, &[6, 7, 9, 10, 10]),
            ],
            Example::Example2b => vec![
                iso(0, 0, &[545, 585, 602, 610, 615]),
                iso(5, 0, &[14, 18, 22, 26, 30]),
                iso(7, 0, &[8, 11, 13, 13, 13]),
            ],
            Example::Example3a => vec![
                iso(0, 0, &[256, 366, 436, 476]),
                iso(4, 3, &[15, 19, 22, 23]),
                iso(6, 3, &[7, 7, 8, 9]),
            ],
            Example::Example3b => vec![
                iso(0, 0, &[1484, 2186, 2564, 2744]),
                iso(5, 0, &[7, 9, 13, 16]),
                iso(6, 0, &[5, 8, 10, 12]),
            ],
            Example::Example4a => vec![
                aniso(&[0, 0], &[86, 89, 90, 92, 92]),
                aniso(&[4, 3], &[10, 11, 12, 12, 13]),
                aniso(&[5, 3], &[8, 10, 12, 13, 13]),
            ],
            Example::Example4b => vec![
                aniso(&[0, 0, 0], &[84, 92, 96, 98]),
                aniso(&[4, 3, 3], &[9, 10, 10, 11]),
                aniso(&[6, 3, 3], &[6, 6, 7, 8]),
            ],
        }
    }

    pub fn truncations(self) -> Vec<Truncation> {
        self.table().into_iter().map(|r| r.truncation).collect()
    }

    /// Tabulated count for `(trunc, n)`, when that cell exists.
    pub fn reference_iterations(self, trunc: &Truncation, n: usize) -> Option<usize> {
        let col = self.n_list().iter().position(|&m| m == n)?;
        self.table()
            .into_iter()
            .find(|r| &r.truncation == trunc)
            .map(|r| r.iterations[col])
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-' | '(' | ')'))
            .collect::<String>()
            .to_ascii_lowercase();
        let key = key.strip_prefix("example").unwrap_or(&key).to_string();
        Example::ALL
            .iter()
            .copied()
            .find(|e| e.name()["example".len()..] == key)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown example '{s}' (known: {})",
                    Example::ALL.map(|e| e.name()).join(", ")
                ))
            })
    }
}

/// The benchmark right-hand side: every coefficient equal to one.
pub fn benchmark_rhs(spec: &ProblemSpec) -> SpectralCoeffs {
    SpectralCoeffs::filled(spec.dim(), spec.modes(), 1.0)
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub example: Example,
    pub dim: usize,
    pub n: usize,
    pub truncation: Truncation,
    pub reference_iterations: Option<usize>,
    pub report: SolveReport,
}

/// Sweep options. `mode = None` picks the transform by grid size.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub config: SolverConfig,
    pub mode: Option<TransformMode>,
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            config: SolverConfig {
                record_history: false,
                ..SolverConfig::default()
            },
            mode: None,
            threads: 1,
        }
    }
}

/// Runs every `(N, truncation)` cell and returns rows ordered by
/// truncation, then `N`, the layout of the reference tables.
pub fn run_benchmark(
    case: Example,
    n_list: &[usize],
    truncations: &[Truncation],
    options: &SweepOptions,
) -> Result<Vec<BenchmarkRow>> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty N list".into()));
    }
    if truncations.is_empty() {
        return Err(Error::InvalidArgument("empty truncation list".into()));
    }
    options.config.validate()?;
    let threads = options.threads.max(1).min(n_list.len());
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<(usize, Result<Vec<BenchmarkRow>>)>> = Mutex::new(Vec::new());
    // One plan per N is shared by all truncations of that column.
    let work = || loop {
        let idx = {
            let mut g = next.lock().expect("poisoned work counter");
            let i = *g;
            *g += 1;
            i
        };
        if idx >= n_list.len() {
            break;
        }
        let out = run_column(case, n_list[idx], truncations, options);
        results.lock().expect("poisoned results").push((idx, out));
    };
    if threads == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    let mut cols = results.into_inner().expect("poisoned results");
    cols.sort_by_key(|c| c.0);
    let mut per_column = Vec::with_capacity(cols.len());
    for (_, c) in cols {
        per_column.push(c?);
    }
    let mut rows = Vec::with_capacity(n_list.len() * truncations.len());
    for ti in 0..truncations.len() {
        for col in &per_column {
            rows.push(col[ti].clone());
        }
    }
    Ok(rows)
}

fn run_column(
    case: Example,
    n: usize,
    truncations: &[Truncation],
    options: &SweepOptions,
) -> Result<Vec<BenchmarkRow>> {
    let spec = case.spec(n)?;
    let mode = options
        .mode
        .unwrap_or_else(|| TransformMode::auto(spec.grid_order()));
    let plan = TransformPlan::new(spec.grid_order(), mode)?;
    let f = benchmark_rhs(&spec);
    let x0 = SpectralCoeffs::zeros_for(&spec);
    truncations
        .iter()
        .map(|t| {
            let cfg = options.config.clone().with_truncation(t.clone());
            let (_, report) = pcg_solve(&spec, &cfg, &plan, &f, &x0)?;
            Ok(BenchmarkRow {
                example: case,
                dim: spec.dim(),
                n,
                truncation: t.clone(),
                reference_iterations: case.reference_iterations(t, n),
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("example1a".parse::<Example>().unwrap(), Example::Example1a);
        assert_eq!("Example 4(b)".parse::<Example>().unwrap(), Example::Example4b);
        assert_eq!("2b".parse::<Example>().unwrap(), Example::Example2b);
        assert!("example5".parse::<Example>().is_err());
    }

    #[test]
    fn table_shapes() {
        for e in Example::ALL {
            let cols = e.n_list().len();
            let t = e.table();
            assert_eq!(t.len(), 3);
            for r in &t {
                assert_eq!(r.iterations.len(), cols);
            }
            assert_eq!(e.spec(e.n_list()[0]).unwrap().dim(), e.dim());
        }
        assert_eq!(
            Example::Example2b.reference_iterations(&Truncation::new(7, 0), 120),
            Some(13)
        );
        assert_eq!(
            Example::Example4b.reference_iterations(&Truncation::per_axis(vec![4, 3, 3], 0), 24),
            Some(11)
        );
    }

    #[test]
    fn example_1a_smallest_cell() {
        let rows = run_benchmark(
            Example::Example1a,
            &[320],
            &[Truncation::new(6, 2)],
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let it = rows[0].report.iterations;
        assert!((5..=10).contains(&it), "iterations {it}");
    }

    #[test]
    fn empty_lists_rejected() {
        let o = SweepOptions::default();
        assert!(run_benchmark(Example::Example1a, &[], &[Truncation::new(0, 0)], &o).is_err());
        assert!(run_benchmark(Example::Example1a, &[40], &[], &o).is_err());
    }
}
