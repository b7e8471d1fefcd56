//! Multivariate eigenfunctions built as nested products of univariate factors,
//! their weights, the spectrum grid `S`, Gasper-Rahman polynomials and the
//! multivariate matrix elements `P_β`.

use crate::error::{Error, Result};
use crate::qseries::{qpoch, qpoch_inf, QContext, ScaledProduct, C64};
use crate::univariate::{
    aw, omega, pbeta_at_base, pbeta_sum, v_eig, v_eig_series, v_sequence, vtilde_grid, weight_w, weight_wtilde,
    BetaParams,
};
use num_traits::{One, Zero};
use serde::Serialize;

/// Unvalidated tuple `β = (s, t, u, k_1..k_N, q)`; also holds the dual
/// `β̃ = (t, s, u, k_N..k_1, 1/q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiBeta {
    pub s: C64,
    pub t: C64,
    pub u: C64,
    pub kvec: Vec<f64>,
    pub q: f64,
}

impl MultiBeta {
    pub fn n(&self) -> usize {
        self.kvec.len()
    }

    pub fn dual(&self) -> MultiBeta {
        let mut kvec = self.kvec.clone();
        kvec.reverse();
        MultiBeta { s: self.t, t: self.s, u: self.u, kvec, q: 1.0 / self.q }
    }

    pub fn alpha(&self) -> AlphaVector {
        AlphaVector::new(self)
    }
}

/// Validated `β`: `s, u ∈ 𝕋`, real `t` with `|t| ≥ 1/q`, positive `k_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiBetaParams {
    beta: MultiBeta,
}

impl MultiBetaParams {
    pub fn new(s: C64, t: f64, u: C64, kvec: Vec<f64>, q: f64) -> Result<Self> {
        if kvec.is_empty() {
            return Err(Error::InvalidParameter("kvec must have at least one entry".into()));
        }
        for &k in &kvec {
            // reuse the univariate domain rules slot by slot
            BetaParams::new(s, t, u, k, q)?;
        }
        Ok(Self { beta: MultiBeta { s, t: C64::new(t, 0.0), u, kvec, q } })
    }

    pub fn from_angles(theta_s: f64, t: f64, theta_u: f64, kvec: Vec<f64>, q: f64) -> Result<Self> {
        Self::new(C64::from_polar(1.0, theta_s), t, C64::from_polar(1.0, theta_u), kvec, q)
    }

    pub fn beta(&self) -> &MultiBeta {
        &self.beta
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }

    pub fn t(&self) -> f64 {
        self.beta.t.re
    }

    pub fn grid(&self) -> GridS {
        GridS::new(self.t(), self.beta.kvec.clone(), self.beta.q)
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n() {
            return Err(Error::InvalidParameter(format!("{what} has length {len}, expected {}", self.n())));
        }
        Ok(())
    }
}

/// Multi-index `m` with partial sums `M_j = m_1 + .. + m_j`, `M_0 = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MultiIndex {
    pub m: Vec<usize>,
}

impl MultiIndex {
    pub fn new(m: Vec<usize>) -> Self {
        Self { m }
    }

    /// `M_j` for `j = 0..=N`.
    pub fn partial(&self, j: usize) -> usize {
        self.m[..j].iter().sum()
    }

    pub fn total(&self) -> usize {
        self.m.iter().sum()
    }

    pub fn hat(&self) -> Self {
        Self { m: self.m.iter().rev().copied().collect() }
    }

    /// All multi-indices of length `n` with total degree at most `cap`.
    pub fn all_up_to(n: usize, cap: usize) -> Vec<MultiIndex> {
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            let mut next = Vec::new();
            for v in &out {
                let used: usize = v.iter().sum();
                for a in 0..=cap - used {
                    let mut w = v.clone();
                    w.push(a);
                    next.push(w);
                }
            }
            out = next;
        }
        out.into_iter().map(MultiIndex::new).collect()
    }
}

/// `α_0 = u`, `α_j = u q^{K_{j-1}+1}/t` for `j = 1..=N+1`, `α_{N+2} = s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaVector {
    pub values: Vec<C64>,
}

impl AlphaVector {
    pub fn new(beta: &MultiBeta) -> Self {
        let n = beta.n();
        let mut values = vec![beta.u];
        let mut kk = 0.0;
        for j in 1..=n + 1 {
            values.push(beta.u * beta.q.powf(kk + 1.0) / beta.t);
            if j <= n {
                kk += beta.kvec[j - 1];
            }
        }
        values.push(beta.s);
        Self { values }
    }

    /// Number of variables `N`.
    pub fn n(&self) -> usize {
        self.values.len() - 3
    }

    pub fn get(&self, j: usize) -> C64 {
        self.values[j]
    }
}

/// The spectrum `S = {t q^{-Σ(k) - 2Σ(m)}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridS {
    pub t: f64,
    pub kvec: Vec<f64>,
    pub q: f64,
}

impl GridS {
    pub fn new(t: f64, kvec: Vec<f64>, q: f64) -> Self {
        Self { t, kvec, q }
    }

    pub fn n(&self) -> usize {
        self.kvec.len()
    }

    /// `y_j = t q^{-K_j - 2M_j}` for `j = 0..=N` (so `y_0 = t`).
    pub fn point_with_t(&self, m: &[usize]) -> Vec<f64> {
        let mut out = vec![self.t];
        let (mut kk, mut mm) = (0.0, 0usize);
        for (k, mi) in self.kvec.iter().zip(m) {
            kk += k;
            mm += mi;
            out.push(self.t * self.q.powf(-kk - 2.0 * mm as f64));
        }
        out
    }

    /// `(y_1, .., y_N)`.
    pub fn point(&self, m: &[usize]) -> Vec<C64> {
        self.point_with_t(m)[1..].iter().map(|&y| C64::new(y, 0.0)).collect()
    }
}

/// `v_x(n) = ∏_j v_{x_j, x_{j+1}, k_j}(n_j)` with `x_{N+1} = s`.
pub fn mv_v(n: &[usize], x: &[C64], s: C64, kvec: &[f64], q: f64) -> Result<C64> {
    check_lengths(&[n.len(), x.len()], kvec.len())?;
    let mut out = C64::one();
    for j in 0..kvec.len() {
        let next = if j + 1 < x.len() { x[j + 1] } else { s };
        out *= v_eig(n[j], x[j], next, kvec[j], q)?;
    }
    Ok(out)
}

/// `ṽ_y(n) = ∏_j ṽ_{y_j, y_{j-1}, k_j}(n_j)` with `y_0 = t`. Each factor is
/// `v_{y_j, y_{j-1}, k_j}` in base `1/q`, summed exactly.
pub fn mv_vtilde(n: &[usize], y: &[C64], t: C64, kvec: &[f64], q: f64) -> Result<C64> {
    check_lengths(&[n.len(), y.len()], kvec.len())?;
    let mut out = C64::one();
    for j in 0..kvec.len() {
        let prev = if j == 0 { t } else { y[j - 1] };
        out *= v_eig_series(n[j], y[j], prev, kvec[j], 1.0 / q)?;
    }
    Ok(out)
}

/// `ṽ_y(n)` at the grid point of `m`, using the terminating form per factor.
pub fn mv_vtilde_grid(n: &[usize], m: &[usize], grid: &GridS) -> Result<C64> {
    check_lengths(&[n.len(), m.len()], grid.n())?;
    let ys = grid.point_with_t(m);
    let mut out = C64::one();
    for j in 0..grid.n() {
        out *= vtilde_grid(n[j], m[j], ys[j], grid.kvec[j], grid.q)?;
    }
    Ok(out)
}

pub fn mv_omega(n: &[usize], kvec: &[f64], q: f64) -> f64 {
    n.iter().zip(kvec).map(|(&nj, &k)| omega(nj, k, q)).product()
}

/// `w(x) = ∏_j w_{k_j, x_{j+1}}(x_j)`.
pub fn mv_w(x: &[C64], s: C64, kvec: &[f64], q: f64, ctx: &QContext) -> Result<f64> {
    check_lengths(&[x.len()], kvec.len())?;
    let mut out = 1.0;
    for j in 0..kvec.len() {
        let next = if j + 1 < x.len() { x[j + 1] } else { s };
        out *= weight_w(x[j], kvec[j], next, q, ctx)?;
    }
    Ok(out)
}

/// `w̃(y) = ∏_j w̃_{k_j, y_{j-1}}(y_j)` at the grid point of `m`; each factor
/// is evaluated in log space.
pub fn mv_wtilde(m: &[usize], grid: &GridS, ctx: &QContext) -> Result<f64> {
    check_lengths(&[m.len()], grid.n())?;
    let ys = grid.point_with_t(m);
    let mut out = 1.0;
    for j in 0..grid.n() {
        out *= weight_wtilde(m[j], grid.kvec[j], ys[j], grid.q, ctx)?;
    }
    Ok(out)
}

/// Gasper-Rahman polynomial: `∏_j p_{m_j}(x_j; α_j p^{M_{j-1}}, α_j p^{M_{j-1}}/α_0^2,
/// (α_{j+1}/α_j) x_{j+1}^{±1} | p)` with `x_{d+1} = α_{d+2}`.
pub fn gr_aw(m: &[usize], x: &[C64], alpha: &AlphaVector, p: f64) -> Result<C64> {
    let d = alpha.n();
    check_lengths(&[m.len(), x.len()], d)?;
    let mut out = C64::one();
    let mut big_m = 0usize;
    for j in 1..=d {
        let xn = if j < d { x[j] } else { alpha.get(d + 2) };
        let pm = p.powi(big_m as i32);
        let ratio = alpha.get(j + 1) / alpha.get(j);
        let a = alpha.get(j) * pm;
        let b = alpha.get(j) / (alpha.get(0) * alpha.get(0)) * pm;
        out *= aw(m[j - 1], x[j - 1], a, b, ratio * xn, ratio / xn, p)?;
        big_m += m[j - 1];
    }
    Ok(out)
}

/// Univariate parameters of slot `j` (0-based): `β_j = (x_{j+1}, y_{j-1}, u, k_j, q)`.
fn slot_params(beta: &MultiBeta, x: &[C64], ys: &[f64], j: usize) -> Result<BetaParams> {
    let next = if j + 1 < x.len() { x[j + 1] } else { beta.s };
    BetaParams::new(next, ys[j], beta.u, beta.kvec[j], beta.q)
}

/// `P_β(x, y)` as the product of univariate sums `∏_j P_{β_j}(x_j, y_j)`.
pub fn mv_pbeta_sum(x: &[C64], m: &[usize], beta: &MultiBetaParams, ctx: &QContext) -> Result<C64> {
    beta.check_len(x.len(), "x")?;
    beta.check_len(m.len(), "m")?;
    let b = beta.beta();
    let ys = beta.grid().point_with_t(m);
    let mut out = C64::one();
    for j in 0..beta.n() {
        out *= pbeta_sum(x[j], m[j], &slot_params(b, x, &ys, j)?, ctx)?;
    }
    Ok(out)
}

/// `P_β(x, y)` as a brute-force `N`-fold sum `Σ_n ω(n) v_x(n) ṽ_y(n) u^{|n|}`
/// over `n ∈ [0, terms)^N`; a cross-check for [`mv_pbeta_sum`].
pub fn mv_pbeta_direct(x: &[C64], m: &[usize], beta: &MultiBetaParams, terms: usize) -> Result<C64> {
    beta.check_len(x.len(), "x")?;
    beta.check_len(m.len(), "m")?;
    let b = beta.beta();
    let n_vars = beta.n();
    let grid = beta.grid();
    let ys = grid.point_with_t(m);
    // per-axis v sequences; ṽ and ω are evaluated per multi-index
    let vs: Vec<Vec<C64>> = (0..n_vars)
        .map(|j| {
            let next = if j + 1 < n_vars { x[j + 1] } else { b.s };
            v_sequence(x[j], next, b.kvec[j], b.q, terms)
        })
        .collect();
    let mut idx = vec![0usize; n_vars];
    let mut sum = C64::zero();
    loop {
        let mut term = C64::new(mv_omega(&idx, &b.kvec, b.q), 0.0) * b.u.powi(idx.iter().sum::<usize>() as i32);
        for j in 0..n_vars {
            term *= vs[j][idx[j]] * vtilde_grid(idx[j], m[j], ys[j], b.kvec[j], b.q)?;
        }
        sum += term;
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n_vars {
                return Ok(sum);
            }
            idx[pos] += 1;
            if idx[pos] < terms {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// `P_β(x, y)` at `m = 0`: `∏_j` of the univariate base values.
pub fn mv_pbeta_at_base(x: &[C64], beta: &MultiBetaParams, ctx: &QContext) -> Result<C64> {
    beta.check_len(x.len(), "x")?;
    let b = beta.beta();
    let ys = beta.grid().point_with_t(&vec![0; beta.n()]);
    let mut out = C64::one();
    for j in 0..beta.n() {
        out *= pbeta_at_base(x[j], slot_params(b, x, &ys, j)?.beta(), ctx)?;
    }
    Ok(out)
}

/// The prefactor `C_β(x, y)` relating `P_β` to the Gasper-Rahman polynomial.
pub fn c_beta(x: &[C64], m: &[usize], beta: &MultiBeta, ctx: &QContext) -> Result<C64> {
    let n = beta.n();
    check_lengths(&[x.len(), m.len()], n)?;
    let al = beta.alpha();
    let q2 = beta.q * beta.q;
    let mi = MultiIndex::new(m.to_vec());
    let q2mn = q2.powi(mi.total() as i32);
    let mut p = ScaledProduct::default();
    p.mul(qpoch_inf(al.get(n + 1) * al.get(n + 2) * q2mn, q2, ctx)?);
    p.mul(qpoch_inf(al.get(n + 1) * q2mn / al.get(n + 2), q2, ctx)?);
    p.div(qpoch_inf(al.get(1) * x[0], q2, ctx)?);
    p.div(qpoch_inf(al.get(1) / x[0], q2, ctx)?);
    for j in 1..=n {
        let mj = m[j - 1];
        let base = -al.get(0) * al.get(0) * q2.powi(-(mi.partial(j - 1) as i32)) / al.get(j);
        for _ in 0..mj {
            p.mul(base);
        }
        p.mul(C64::new(beta.q.powf(-((mj * mj) as f64 - mj as f64)), 0.0));
        let ratio = al.get(j + 1) / al.get(j);
        p.div(qpoch(ratio * ratio, q2, mj));
    }
    Ok(p.value())
}

/// `P_β(x, y) = C_β(x, y) P_N(m; x; α | q^2)`.
pub fn mv_pbeta_closed(x: &[C64], m: &[usize], beta: &MultiBeta, ctx: &QContext) -> Result<C64> {
    let c = c_beta(x, m, beta, ctx)?;
    Ok(c * gr_aw(m, x, &beta.alpha(), beta.q * beta.q)?)
}

fn check_lengths(lens: &[usize], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("at least one variable is required".into()));
    }
    if let Some(&bad) = lens.iter().find(|&&l| l != n) {
        return Err(Error::InvalidParameter(format!("vector of length {bad} where {n} was expected")));
    }
    Ok(())
}
