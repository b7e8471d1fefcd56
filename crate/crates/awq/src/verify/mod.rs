//! Numerical verification plumbing: torus quadrature, truncated lattice sums
//! with geometric tail certificates, Gram matrices, residuals, and reports.

mod suites;

pub use suites::{check_list, run_check, run_suite, CheckSpec, Outcome, Suite, SuiteConfig, SuiteParams};

use crate::error::{Error, Result};
use crate::operators::{ContinuousStencil, DiscreteStencil};
use crate::qseries::{QContext, C64};
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform-angle tensor grid on `𝕋^N`. Nodes sit at `θ_j = π(2j+1)/n`, so
/// `x = ±1` is never sampled; the per-axis weights `1/n` sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    axis: Vec<C64>,
}

impl QuadratureGrid {
    pub fn new(dim: usize, nodes: usize) -> Result<Self> {
        if dim == 0 || nodes == 0 {
            return Err(Error::InvalidParameter(format!("quadrature grid {nodes}^{dim} is empty")));
        }
        let axis = (0..nodes).map(|j| C64::from_polar(1.0, PI * (2 * j + 1) as f64 / nodes as f64)).collect();
        Ok(Self { dim, axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.axis.len()
    }

    pub fn len(&self) -> usize {
        self.nodes().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_nodes(&self) -> &[C64] {
        &self.axis
    }

    pub fn axis_weight(&self) -> f64 {
        1.0 / self.nodes() as f64
    }

    /// Tensor point with flat index `idx` (first coordinate fastest).
    pub fn point(&self, mut idx: usize) -> Vec<C64> {
        let n = self.nodes();
        (0..self.dim)
            .map(|_| {
                let x = self.axis[idx % n];
                idx /= n;
                x
            })
            .collect()
    }

    /// Weight of one tensor point for `(1/4πi)^N ∮ .. dx/x`: a factor `1/2`
    /// per axis on top of the trapezoid weight.
    pub fn measure(&self) -> f64 {
        (0.5 * self.axis_weight()).powi(self.dim as i32)
    }
}

pub type FamilyEval<'a> = &'a (dyn Fn(&[C64]) -> Result<Vec<C64>> + Sync);
pub type TorusWeight<'a> = &'a (dyn Fn(&[C64]) -> Result<f64> + Sync);

/// Gram matrix `G_ij = ⟨f_i, f_j⟩` of a family on `𝕋^N` and the node count used.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGram {
    pub matrix: Vec<Vec<C64>>,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: C64,
    pub nodes: usize,
}

/// One quadrature pass: the Gram matrix and the matching integrals of
/// `|f_i||f_j|w`, which set the roundoff scale of each entry.
fn torus_pass(family: FamilyEval, size: usize, weight: TorusWeight, grid: &QuadratureGrid) -> Result<(Vec<C64>, Vec<f64>)> {
    let zero = || (vec![C64::zero(); size * size], vec![0.0; size * size]);
    let (mut g, mut s) = (0..grid.len())
        .into_par_iter()
        .try_fold(zero, |(mut g, mut s), idx| -> Result<_> {
            let x = grid.point(idx);
            let vals = family(&x)?;
            if vals.len() != size {
                return Err(Error::InvalidParameter(format!("family returned {} values, expected {size}", vals.len())));
            }
            let w = weight(&x)?;
            for i in 0..size {
                for j in 0..size {
                    g[i * size + j] += vals[i] * vals[j].conj() * w;
                    s[i * size + j] += vals[i].norm() * vals[j].norm() * w.abs();
                }
            }
            Ok((g, s))
        })
        .try_reduce(zero, |(mut g, mut s), (g2, s2)| {
            g.iter_mut().zip(g2).for_each(|(a, b)| *a += b);
            s.iter_mut().zip(s2).for_each(|(a, b)| *a += b);
            Ok((g, s))
        })?;
    let m = grid.measure();
    g.iter_mut().for_each(|v| *v *= m);
    s.iter_mut().for_each(|v| *v *= m);
    Ok((g, s))
}

/// Gram matrix of `family` (evaluated jointly at each point) against `weight`
/// on `𝕋^dim`. Nodes per axis double from `quad_min_nodes` until every entry
/// moves by less than `tol_rel` times its absolute-integrand scale.
pub fn torus_gram(family: FamilyEval, size: usize, weight: TorusWeight, dim: usize, ctx: &QContext) -> Result<TorusGram> {
    let mut nodes = ctx.quad_min_nodes;
    let mut prev: Option<Vec<C64>> = None;
    loop {
        let grid = QuadratureGrid::new(dim, nodes)?;
        let (g, scale) = torus_pass(family, size, weight, &grid)?;
        if let Some(p) = &prev {
            let settled = g.iter().zip(p).zip(&scale).all(|((a, b), s)| (a - b).norm() <= ctx.tol_rel * s.max(f64::MIN_POSITIVE));
            if settled {
                let matrix = g.chunks(size).map(|r| r.to_vec()).collect();
                return Ok(TorusGram { matrix, nodes });
            }
        }
        if nodes * 2 > ctx.quad_max_nodes {
            return Err(Error::NoConvergence { nodes });
        }
        prev = Some(g);
        nodes *= 2;
    }
}

/// `⟨f, g⟩ = (1/4πi)^N ∮ f(x) conj(g(x)) w(x) dx/x` by node doubling.
pub fn torus_inner(
    f: &(dyn Fn(&[C64]) -> Result<C64> + Sync),
    g: &(dyn Fn(&[C64]) -> Result<C64> + Sync),
    weight: TorusWeight,
    dim: usize,
    ctx: &QContext,
) -> Result<Quadrature> {
    let pair = |x: &[C64]| -> Result<Vec<C64>> { Ok(vec![f(x)?, g(x)?]) };
    let gram = torus_gram(&pair, 2, weight, dim, ctx)?;
    Ok(Quadrature { value: gram.matrix[0][1], nodes: gram.nodes })
}

pub type LatticeFamily<'a> = &'a (dyn Fn(&[usize]) -> Result<Vec<C64>> + Sync);
pub type LatticeWeight<'a> = &'a (dyn Fn(&[usize]) -> Result<f64> + Sync);

/// Gram matrix of a family on `ℕ^dim` and the number of lattice points summed.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGram {
    pub matrix: Vec<Vec<C64>>,
    pub terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub value: C64,
    pub terms: usize,
}

/// All points of `ℕ^dim` with coordinate sum `d`.
fn shell(dim: usize, d: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        return vec![vec![d]];
    }
    (0..=d)
        .flat_map(|first| {
            shell(dim - 1, d - first).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// `G_ij = Σ_n f_i(n) conj(f_j(n)) w(n)` over `ℕ^dim`, summed in shells of
/// constant `|n|`. With `r` a bound on the asymptotic decay ratio of the terms,
/// summation stops once the larger of the last two shell magnitudes times
/// `r/(1-r)` falls below `tol_abs + tol_rel · Σ|terms|`.
pub fn lattice_gram(
    family: LatticeFamily,
    size: usize,
    weight: LatticeWeight,
    dim: usize,
    tail_ratio: f64,
    ctx: &QContext,
) -> Result<LatticeGram> {
    let term = |n: &[usize]| -> Result<Vec<C64>> {
        let vals = family(n)?;
        let w = weight(n)?;
        Ok((0..size * size).map(|ij| vals[ij / size] * vals[ij % size].conj() * w).collect())
    };
    let (g, terms) = lattice_accumulate(&term, size * size, dim, tail_ratio, ctx)?;
    Ok(LatticeGram { matrix: g.chunks(size).map(|r| r.to_vec()).collect(), terms })
}

/// Shells always summed before the tail test may stop the sum.
const MIN_SHELLS: usize = 8;

/// Sums vector-valued terms over `ℕ^dim` shell by shell. Stops once the last
/// two shells, continued geometrically with `tail_ratio`, fall below tolerance.
fn lattice_accumulate(
    term: &(dyn Fn(&[usize]) -> Result<Vec<C64>> + Sync),
    len: usize,
    dim: usize,
    tail_ratio: f64,
    ctx: &QContext,
) -> Result<(Vec<C64>, usize)> {
    if !(tail_ratio > 0.0 && tail_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("tail ratio {tail_ratio} must lie in (0,1)")));
    }
    let factor = tail_ratio / (1.0 - tail_ratio);
    let mut acc = vec![C64::zero(); len];
    let mut abs_total = 0.0;
    let mut last = [f64::INFINITY; 2];
    let mut terms = 0;
    for d in 0.. {
        let pts = shell(dim, d);
        let parts: Vec<Vec<C64>> = pts.par_iter().map(|n| term(n)).collect::<Result<_>>()?;
        let mut shell_mag = 0.0;
        for local in parts {
            shell_mag += local.iter().map(|t| t.norm()).sum::<f64>();
            acc.iter_mut().zip(local).for_each(|(a, b)| *a += b);
        }
        terms += pts.len();
        abs_total += shell_mag;
        last = [last[1], shell_mag];
        if d + 1 >= MIN_SHELLS && last[0].max(last[1]) * factor <= ctx.tol_abs + ctx.tol_rel * abs_total {
            return Ok((acc, terms));
        }
        if terms >= ctx.max_terms {
            break;
        }
    }
    Err(Error::NonConvergent { what: "lattice sum".into(), terms })
}

/// `⟨f, g⟩_H = Σ_n f(n) conj(g(n)) ω(n)` on `ℕ` with a certified tail.
pub fn h_inner(
    f: &(dyn Fn(usize) -> Result<C64> + Sync),
    g: &(dyn Fn(usize) -> Result<C64> + Sync),
    omega: &(dyn Fn(usize) -> f64 + Sync),
    tail_ratio: f64,
    ctx: &QContext,
) -> Result<LatticeSum> {
    let term = |n: &[usize]| -> Result<Vec<C64>> { Ok(vec![f(n[0])? * g(n[0])?.conj() * omega(n[0])]) };
    let (v, terms) = lattice_accumulate(&term, 1, 1, tail_ratio, ctx)?;
    Ok(LatticeSum { value: v[0], terms })
}

/// Deviation of a Gram matrix from `diag(predicted)`. Off-diagonal entries are
/// measured on the normalised family, `|G_ij|/sqrt(p_i p_j)`; diagonal entries
/// relative to `p_i`. The raw `max |G_ij|` is kept for reporting; it is not
/// scale-free, so [`GramError::max`] ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramError {
    pub off_diagonal: f64,
    pub off_diagonal_abs: f64,
    pub diagonal: f64,
}

impl GramError {
    pub fn max(&self) -> f64 {
        self.off_diagonal.max(self.diagonal)
    }
}

pub fn gram(matrix: &[Vec<C64>], predicted: &[f64]) -> Result<GramError> {
    if matrix.len() != predicted.len() || matrix.iter().any(|r| r.len() != predicted.len()) {
        return Err(Error::InvalidParameter("Gram matrix and prediction sizes differ".into()));
    }
    let mut err = GramError { off_diagonal: 0.0, off_diagonal_abs: 0.0, diagonal: 0.0 };
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i == j {
                err.diagonal = err.diagonal.max((v - predicted[i]).norm() / predicted[i].abs());
            } else {
                err.off_diagonal_abs = err.off_diagonal_abs.max(v.norm());
                err.off_diagonal = err.off_diagonal.max(v.norm() / (predicted[i] * predicted[j]).abs().sqrt());
            }
        }
    }
    Ok(err)
}

/// `max_p |(op f)(p) - λ f(p)| / (1 + |λ f(p)|)`.
pub fn residual<P: Sync>(
    samples: &[P],
    apply: impl Fn(&P) -> Result<C64> + Sync,
    f: impl Fn(&P) -> Result<C64> + Sync,
    eigenvalue: C64,
) -> Result<f64> {
    samples
        .par_iter()
        .map(|p| {
            let want = eigenvalue * f(p)?;
            Ok((apply(p)? - want).norm() / (1.0 + want.norm()))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

pub fn continuous_residual(
    op: &ContinuousStencil,
    f: &(dyn Fn(&[C64]) -> Result<C64> + Sync),
    eigenvalue: C64,
    samples: &[Vec<C64>],
) -> Result<f64> {
    residual(samples, |x| op.apply(f, x), |x| f(x), eigenvalue)
}

pub fn discrete_residual(
    op: &DiscreteStencil,
    f: &(dyn Fn(&[i64]) -> C64 + Sync),
    eigenvalue: C64,
    samples: &[Vec<i64>],
) -> Result<f64> {
    residual(samples, |n| Ok(op.apply_at(f, n)), |n| Ok(f(n)), eigenvalue)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub params: serde_json::Value,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub nodes: Option<usize>,
    pub seconds: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(check: &str, params: serde_json::Value, residual: f64, tol: f64, seed: u64) -> Self {
        Self {
            check: check.to_string(),
            params,
            residual,
            tol,
            pass: residual.is_finite() && residual <= tol,
            nodes: None,
            seconds: 0.0,
            seed,
            error: None,
        }
    }

    pub fn failed(check: &str, params: serde_json::Value, tol: f64, seed: u64, err: &Error) -> Self {
        let mut r = Self::new(check, params, f64::INFINITY, tol, seed);
        r.error = Some(err.to_string());
        r
    }
}

/// CSV summary `check,residual,tol,pass,nodes,seconds,seed`.
pub fn reports_to_csv(reports: &[Report]) -> Result<String> {
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "residual", "tol", "pass", "nodes", "seconds", "seed"]).map_err(io)?;
    for r in reports {
        let nodes = r.nodes.map(|n| n.to_string()).unwrap_or_default();
        w.write_record([
            r.check.clone(),
            format!("{:e}", r.residual),
            format!("{:e}", r.tol),
            r.pass.to_string(),
            nodes,
            format!("{:.3}", r.seconds),
            r.seed.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::{omega, v_sequence, weight_w};
    use proptest::prelude::*;

    fn ctx() -> QContext {
        QContext::default()
    }

    #[test]
    fn grid_layout() {
        let g = QuadratureGrid::new(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.axis_nodes().iter().map(|_| g.axis_weight()).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(g.axis_nodes().iter().all(|x| (x * x - 1.0).norm() > 1e-3));
        assert_eq!(g.point(9), vec![g.axis_nodes()[1], g.axis_nodes()[1]]);
        assert!(QuadratureGrid::new(0, 4).is_err());
    }

    #[test]
    fn weight_normalisation_and_norms() {
        let (k, q) = (1.3, 0.5);
        let s = C64::from_polar(1.0, 0.63);
        let w = move |x: &[C64]| weight_w(x[0], k, s, q, &ctx());
        let one = |_: &[C64]| Ok(C64::new(1.0, 0.0));
        let r = torus_inner(&one, &one, &w, 1, &ctx()).unwrap();
        assert!((r.value - 1.0).norm() < 1e-12, "{}", r.value);
        for n in [1usize, 4] {
            let f = move |x: &[C64]| Ok(v_sequence(x[0], s, k, q, n + 1)[n]);
            let r = torus_inner(&f, &f, &w, 1, &ctx()).unwrap();
            assert!((r.value * omega(n, k, q) - 1.0).norm() < 1e-11);
        }
    }

    #[test]
    fn fourier_orthogonality() {
        let one_w = |_: &[C64]| Ok(1.0);
        let g = |_: &[C64]| Ok(C64::new(1.0, 0.0));
        for i in 1..5 {
            let f = move |x: &[C64]| Ok(x[0].powi(i) + x[0].powi(-i));
            let r = torus_inner(&f, &g, &one_w, 1, &ctx()).unwrap();
            assert!(r.value.norm() < 1e-14);
        }
    }

    #[test]
    fn no_convergence_is_reported() {
        let c = QContext::new(0.5, 1e-17, 1e-13, 100, 4, 8).unwrap();
        // pole close to the circle
        let f = |x: &[C64]| Ok((x[0] - 1.02).inv());
        let w = |_: &[C64]| Ok(1.0);
        assert!(matches!(torus_inner(&f, &f, &w, 1, &c), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn h_inner_on_indicators() {
        let (k, q) = (1.3, 0.5);
        let om = move |n: usize| omega(n, k, q);
        for m in 0..4 {
            let d = move |n: usize| Ok(if n == m { C64::new(1.0, 0.0) } else { C64::zero() });
            let r = h_inner(&d, &d, &om, 0.5, &ctx()).unwrap();
            assert!((r.value - omega(m, k, q)).norm() <= 1e-15 * omega(m, k, q));
            let e = move |n: usize| Ok(if n == m + 1 { C64::new(1.0, 0.0) } else { C64::zero() });
            assert_eq!(h_inner(&d, &e, &om, 0.5, &ctx()).unwrap().value, C64::zero());
        }
        assert!(h_inner(&|_| Ok(C64::zero()), &|_| Ok(C64::zero()), &om, 1.5, &ctx()).is_err());
    }

    #[test]
    fn tail_certificate_is_sound() {
        let r: f64 = 0.3;
        let f = move |n: usize| Ok(C64::new(r.powi(n as i32), 0.0));
        let one = |_: usize| Ok(C64::new(1.0, 0.0));
        let w = |_: usize| 1.0;
        let s = h_inner(&f, &one, &w, r, &ctx()).unwrap();
        let exact = 1.0 / (1.0 - r);
        let bound = ctx().tol_abs + ctx().tol_rel * exact;
        assert!(s.value.re < exact && exact - s.value.re <= bound, "{} vs {exact}", s.value.re);
    }

    #[test]
    fn shells_partition_the_box() {
        assert_eq!(shell(3, 2).len(), 6);
        assert!(shell(3, 4).iter().all(|p| p.iter().sum::<usize>() == 4));
    }

    #[test]
    fn gram_errors() {
        let m = vec![vec![C64::new(2.0, 0.0), C64::new(1e-3, 0.0)], vec![C64::new(0.0, 0.0), C64::new(8.0, 0.0)]];
        let e = gram(&m, &[2.0, 8.0]).unwrap();
        assert!((e.off_diagonal - 1e-3 / 4.0).abs() < 1e-15);
        assert_eq!(e.off_diagonal_abs, 1e-3);
        assert_eq!(e.diagonal, 0.0);
        assert!(gram(&m, &[1.0]).is_err());
    }

    #[test]
    fn residual_of_zero_function_is_zero() {
        let samples: Vec<Vec<C64>> = (0..5).map(|i| vec![C64::from_polar(1.0, 0.3 + i as f64)]).collect();
        let op = crate::operators::rho_kminus2(1.3, C64::from_polar(1.0, 0.63), 0.5);
        let r = continuous_residual(&op, &|_| Ok(C64::zero()), C64::new(3.0, 0.0), &samples).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn report_serialisation() {
        let r = Report::new("demo", serde_json::json!({"q": 0.5}), 1e-12, 1e-10, 7);
        assert!(r.pass);
        let js = serde_json::to_value(&r).unwrap();
        for key in ["check", "params", "residual", "tol", "pass", "nodes", "seconds", "seed"] {
            assert!(js.get(key).is_some(), "{key}");
        }
        let csv = reports_to_csv(&[r]).unwrap();
        assert!(csv.starts_with("check,residual,tol,pass"));
        assert!(!Report::new("x", serde_json::Value::Null, f64::NAN, 1.0, 0).pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// The trapezoid rule is exact for Laurent polynomials of degree below the node count.
        #[test]
        fn trapezoid_exact_on_laurent_polynomials(coefs in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let grid = QuadratureGrid::new(1, 32).unwrap();
            let f = |x: C64| -> C64 {
                coefs.iter().enumerate().map(|(i, c)| *c * (x.powi(i as i32) + x.powi(-(i as i32)))).sum()
            };
            let val: C64 = grid.axis_nodes().iter().map(|x| f(*x) * grid.axis_weight()).sum();
            prop_assert!((val - 2.0 * coefs[0]).norm() < 1e-13);
        }
    }
}
