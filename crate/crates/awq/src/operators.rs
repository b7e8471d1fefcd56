//! Explicit operators: discrete `π` actions on sequence space and the
//! continuous `ρ`, `ρ̃` q-difference operators, stored as stencils.

use crate::error::{Error, Result};
use crate::hopf::{Gen, Mono, TensorElement};
use crate::multivariate::{AlphaVector, GridS, MultiBeta};
use crate::qseries::{qpoch_inf, ratio_to_f64, QContext, C64};
use crate::univariate::{aw, Beta};
use num_traits::{One, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Coefficient evaluations closer than this to a pole are refused.
pub const POLE_GUARD: f64 = 1e-8;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn guarded_div(num: C64, den: C64, point: C64) -> Result<C64> {
    if den.norm() < POLE_GUARD || !den.is_finite() {
        return Err(Error::PoleAtSample { point: format!("{point}") });
    }
    Ok(num / den)
}

/// `μ_x = (x + 1/x)/(q^{-1} - q)`.
pub fn mu(x: C64, q: f64) -> C64 {
    (x + x.inv()) / (1.0 / q - q)
}

/// `λ_{x,s} = μ_x - μ_s`.
pub fn lambda(x: C64, s: C64, q: f64) -> C64 {
    mu(x, q) - mu(s, q)
}

/// `A_k(x;s)` in base `q`; the tilde coefficients are this with `q -> 1/q`.
pub fn coef_a(x: C64, k: f64, s: C64, q: f64) -> Result<C64> {
    let qk = q.powf(k);
    let num = (1.0 - qk * s * x) * (1.0 - qk * x / s) / qk;
    guarded_div(num, (1.0 - x * x) * (1.0 - q * q * x * x), x)
}

pub fn coef_b(x: C64, k: f64, s: C64, q: f64) -> Result<C64> {
    let q2 = q * q;
    let num = q2 * (1.0 / q + q) * (q.powf(1.0 - k) + q.powf(k - 1.0)) - q2 * (x + x.inv()) * (s + s.inv());
    guarded_div(c(1.0) * num, (1.0 - q2 * x * x) * (1.0 - q2 / (x * x)), x)
}

/// Dynamical coefficient `C_k(x;s)`.
pub fn coef_c(x: C64, k: f64, s: C64, q: f64) -> Result<C64> {
    let qk = q.powf(k);
    let num = (1.0 - qk * x * s) * (1.0 - qk * q * q * x * s) / qk;
    guarded_div(num, (1.0 - x * x) * (1.0 - q * q * x * x), x)
}

/// Dynamical coefficient `D_k(x;s)`.
pub fn coef_d(x: C64, k: f64, s: C64, q: f64) -> Result<C64> {
    let qk = q.powf(k);
    let q2 = q * q;
    let num = q.powf(3.0 - k) * (1.0 / q + q) * (1.0 - qk * s * x) * (1.0 - qk * s / x);
    guarded_div(num, (1.0 - q2 * x * x) * (1.0 - q2 / (x * x)), x)
}

/// `(C_k(x;s), D_k(x;s))` of the dynamical action of `π(K^{-2})` on `v_{x,s}`.
pub fn dyn_cd(k: f64, x: C64, s: C64, q: f64) -> Result<(C64, C64)> {
    Ok((coef_c(x, k, s, q)?, coef_d(x, k, s, q)?))
}

/// `(C̃_k(y;t), D̃_k(y;t))` for `π(K^2)` on `ṽ_{y,t}`. The second denominator
/// factor of `D̃` is `1 - 1/(y^2 q^2)`.
pub fn dyn_cd_tilde(k: f64, y: C64, t: C64, q: f64) -> Result<(C64, C64)> {
    let qk = q.powf(k);
    let q2 = q * q;
    let cn = qk * (1.0 - t * y / qk) * (1.0 - t * y / (qk * q2));
    let ct = guarded_div(cn, (1.0 - y * y) * (1.0 - y * y / q2), y)?;
    let dn = q.powf(k - 3.0) * (1.0 / q + q) * (1.0 - t * y / qk) * (1.0 - t / (qk * y));
    let dt = guarded_div(dn, (1.0 - y * y / q2) * (1.0 - 1.0 / (y * y * q2)), y)?;
    Ok((ct, dt))
}

/// `A_β(x) = -A(x) t (1 - qx/(ut))(1 - u/(qtx))/(q^{-1} - q)`.
pub fn a_beta(x: C64, b: &Beta) -> Result<C64> {
    let q = b.q;
    let base = coef_a(x, b.k, b.s, q)?;
    Ok(-base * b.t * (1.0 - q * x / (b.u * b.t)) * (1.0 - b.u / (q * b.t * x)) / (1.0 / q - q))
}

pub fn b_beta(x: C64, b: &Beta) -> Result<C64> {
    let q = b.q;
    let qq = 1.0 / q + q;
    let uu = b.u + b.u.inv();
    let base = coef_b(x, b.k, b.s, q)?;
    Ok(base * (uu * mu(x, q) / qq - mu(b.t, q)) - uu * mu(b.s, q) / qq + mu(b.t, q))
}

/// `F(x)` of the alternate form `B_β(x) = const + F(x) + F(1/x)`.
pub fn f_beta(x: C64, b: &Beta) -> Result<C64> {
    let (q, k, s, t, u) = (b.q, b.k, b.s, b.t, b.u);
    let qk = q.powf(k);
    let num = t / qk * (1.0 - qk * s * x) * (1.0 - qk * x / s) * (1.0 - q * u * x / t) * (1.0 - q * x / (u * t));
    guarded_div(num, (1.0 / q - q) * (1.0 - x * x) * (1.0 - q * q * x * x), x)
}

/// Constant term of the alternate form, obtained from the `x -> ∞` limit:
/// `(t + 1/t - tq^{-k} - q^k/t)/(q^{-1} - q)`.
pub fn b_beta_constant(b: &Beta) -> C64 {
    let qk = b.q.powf(b.k);
    (b.t + b.t.inv() - b.t / qk - qk / b.t) / (1.0 / b.q - b.q)
}

/// The constant as displayed in the source: `(tq^{-k} + q^k/t + t + 1/t)/(q^{-1} - q)`.
pub fn b_beta_constant_displayed(b: &Beta) -> C64 {
    let qk = b.q.powf(b.k);
    (b.t / qk + qk / b.t + b.t + b.t.inv()) / (1.0 / b.q - b.q)
}

// ---------------------------------------------------------------------------
// Discrete side

pub type DiscreteCoef = Arc<dyn Fn(&[i64]) -> C64 + Send + Sync>;

/// Finitely supported function on `ℕ^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    arity: usize,
    values: BTreeMap<Vec<i64>, C64>,
}

impl DiscreteFunction {
    pub fn new(arity: usize) -> Self {
        assert!(arity >= 1, "a discrete function needs at least one variable");
        Self { arity, values: BTreeMap::new() }
    }

    /// The indicator of the single point `n`.
    pub fn indicator(n: &[i64]) -> Result<Self> {
        let mut f = Self::new(n.len());
        f.set(n, C64::one())?;
        Ok(f)
    }

    /// Random values in the unit square on the box `[0, max_index]^arity`.
    pub fn random<R: Rng>(arity: usize, max_index: i64, rng: &mut R) -> Self {
        let mut f = Self::new(arity);
        let mut idx = vec![0i64; arity];
        loop {
            f.values.insert(idx.clone(), C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let mut pos = 0;
            loop {
                if pos == arity {
                    return f;
                }
                idx[pos] += 1;
                if idx[pos] <= max_index {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn set(&mut self, n: &[i64], v: C64) -> Result<()> {
        if n.len() != self.arity || n.iter().any(|&i| i < 0) {
            return Err(Error::DomainViolation(format!("index {n:?} is not in N^{}", self.arity)));
        }
        self.values.insert(n.to_vec(), v);
        Ok(())
    }

    /// Value at `n`; zero off the support and at negative indices.
    pub fn get(&self, n: &[i64]) -> C64 {
        self.values.get(n).copied().unwrap_or_else(C64::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<i64>, &C64)> {
        self.values.iter()
    }

    /// `⟨f, g⟩_H = Σ_n f(n) conj(g(n)) ω(n)`.
    pub fn inner_h(&self, other: &Self, kvec: &[f64], q: f64) -> C64 {
        self.values
            .iter()
            .filter_map(|(n, v)| other.values.get(n).map(|w| (n, v * w.conj())))
            .map(|(n, p)| {
                let nn: Vec<usize> = n.iter().map(|&i| i as usize).collect();
                p * crate::multivariate::mv_omega(&nn, kvec, q)
            })
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, v) in &other.values {
            *out.values.entry(n.clone()).or_insert_with(C64::zero) -= v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Linear operator `[D f](n) = Σ_ν c_ν(n) f(n + ν)` on functions on `ℕ^N`,
/// with the convention that `f` vanishes at negative indices.
#[derive(Clone)]
pub struct DiscreteStencil {
    arity: usize,
    terms: Vec<(Vec<i64>, DiscreteCoef)>,
}

impl fmt::Debug for DiscreteStencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shifts: Vec<&Vec<i64>> = self.terms.iter().map(|(s, _)| s).collect();
        f.debug_struct("DiscreteStencil").field("arity", &self.arity).field("shifts", &shifts).finish()
    }
}

impl DiscreteStencil {
    pub fn new(arity: usize) -> Self {
        Self { arity, terms: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn push(&mut self, shift: Vec<i64>, coef: DiscreteCoef) {
        debug_assert_eq!(shift.len(), self.arity);
        self.terms.push((shift, coef));
    }

    /// Total coefficient of the shift `shift` at `n`.
    pub fn coefficient(&self, shift: &[i64], n: &[i64]) -> C64 {
        self.terms.iter().filter(|(s, _)| s.as_slice() == shift).map(|(_, c)| c(n)).sum()
    }

    /// `[D f](n)` for an arbitrary (not necessarily finitely supported) `f`.
    pub fn apply_at(&self, f: &dyn Fn(&[i64]) -> C64, n: &[i64]) -> C64 {
        let mut out = C64::zero();
        let mut shifted = vec![0i64; self.arity];
        for (shift, coef) in &self.terms {
            for ((d, a), b) in shifted.iter_mut().zip(n).zip(shift) {
                *d = a + b;
            }
            if shifted.iter().any(|&i| i < 0) {
                continue;
            }
            out += coef(n) * f(&shifted);
        }
        out
    }

    pub fn apply(&self, f: &DiscreteFunction) -> DiscreteFunction {
        let mut points = std::collections::BTreeSet::new();
        for (p, _) in f.support() {
            for (shift, _) in &self.terms {
                let n: Vec<i64> = p.iter().zip(shift).map(|(a, b)| a - b).collect();
                if n.iter().all(|&i| i >= 0) {
                    points.insert(n);
                }
            }
        }
        let mut out = DiscreteFunction::new(self.arity);
        for n in points {
            out.values.insert(n.clone(), self.apply_at(&|m| f.get(m), &n));
        }
        out
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    pub fn scale(&self, z: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(s, cf)| {
                let cf = cf.clone();
                let g: DiscreteCoef = Arc::new(move |n: &[i64]| z * cf(n));
                (s.clone(), g)
            })
            .collect();
        Self { arity: self.arity, terms }
    }

    /// `π_{k_1} ⊗ .. ⊗ π_{k_N}` applied to an element of `U_q^{⊗N}`, with
    /// `r = q^{1/2}` in floating point.
    pub fn from_tensor(elem: &TensorElement, kvec: &[f64], r: f64) -> Result<Self> {
        if elem.degree() != kvec.len() {
            return Err(Error::DegreeMismatch { lhs: elem.degree(), rhs: kvec.len() });
        }
        let mut out = Self::new(kvec.len());
        for (key, coef) in elem.terms() {
            let c0 = ratio_to_f64(coef);
            let monos: Vec<Mono> = key.clone();
            let ks = kvec.to_vec();
            let shift: Vec<i64> = monos.iter().map(|m| m.f as i64 - m.e as i64).collect();
            let cf: DiscreteCoef = Arc::new(move |n: &[i64]| {
                let mut v = C64::new(c0, 0.0);
                for ((m, &k), &ni) in monos.iter().zip(&ks).zip(n) {
                    v *= mono_coefficient(*m, k, ni, r);
                }
                v
            });
            out.push(shift, cf);
        }
        Ok(out)
    }
}

/// Coefficient of `f(n + a - c)` in `[π(F^a K^b E^c) f](n)`.
fn mono_coefficient(m: Mono, k: f64, n: i64, r: f64) -> C64 {
    let q = r * r;
    let qq = 1.0 / q - q;
    let e_coef = |j: i64| -(q.powf(k + j as f64 - 1.0) - q.powf(-k - j as f64 + 1.0)) / qq;
    let f_coef = |j: i64| (q.powf(j as f64 + 1.0) - q.powf(-(j as f64) - 1.0)) / qq;
    let (a, c_) = (m.f as i64, m.e as i64);
    let mut v = 1.0;
    for i in 0..a {
        v *= f_coef(n + i);
    }
    v *= r.powf(m.k as f64 * (k + 2.0 * (n + a) as f64));
    for i in 0..c_ {
        v *= e_coef(n + a - i);
    }
    c(v)
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("k = {k} must be positive")));
    }
    Ok(())
}

/// The representation `π_k` on a single generator.
pub fn pi_generator(g: Gen, k: f64, q: f64) -> Result<DiscreteStencil> {
    check_k(k)?;
    let qq = 1.0 / q - q;
    let mut st = DiscreteStencil::new(1);
    match g {
        Gen::K => st.push(vec![0], Arc::new(move |n: &[i64]| c(q.powf(k / 2.0 + n[0] as f64)))),
        Gen::Kinv => st.push(vec![0], Arc::new(move |n: &[i64]| c(q.powf(-k / 2.0 - n[0] as f64)))),
        Gen::E => st.push(
            vec![-1],
            Arc::new(move |n: &[i64]| {
                let m = n[0] as f64;
                c(-(q.powf(k + m - 1.0) - q.powf(-k - m + 1.0)) / qq)
            }),
        ),
        Gen::F => st.push(
            vec![1],
            Arc::new(move |n: &[i64]| {
                let m = n[0] as f64;
                c((q.powf(m + 1.0) - q.powf(-m - 1.0)) / qq)
            }),
        ),
    }
    Ok(st)
}

/// `π(K^p)`: multiplication by `q^{p(k/2 + n)}`.
pub fn pi_k_power(p: i32, k: f64, q: f64) -> Result<DiscreteStencil> {
    check_k(k)?;
    let mut st = DiscreteStencil::new(1);
    st.push(vec![0], Arc::new(move |n: &[i64]| c(q.powf(p as f64 * (k / 2.0 + n[0] as f64)))));
    Ok(st)
}

/// Three-term pieces of `π(Y_{s,u})` on one coordinate, multiplied by `pre(n)`.
/// Back step `f(n-1)` carries `u`, forward step `f(n+1)` carries `1/u`.
fn push_y_slot(st: &mut DiscreteStencil, i: usize, s: C64, u: C64, k: f64, q: f64, pre: Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>) {
    let arity = st.arity();
    let qq = 1.0 / q - q;
    let ss = s + s.inv();
    let unit = |d: i64| {
        let mut v = vec![0i64; arity];
        v[i] = d;
        v
    };
    let p = pre.clone();
    st.push(
        unit(-1),
        Arc::new(move |n: &[i64]| {
            let m = n[i] as f64;
            u * p(n) * q.powf(-(k - 1.0) / 2.0) * (1.0 - q.powf(2.0 * k + 2.0 * m - 2.0)) / qq
        }),
    );
    let p = pre.clone();
    st.push(unit(0), Arc::new(move |n: &[i64]| p(n) * ss * (q.powf(k + 2.0 * n[i] as f64) - 1.0) / qq));
    let p = pre;
    st.push(
        unit(1),
        Arc::new(move |n: &[i64]| {
            let m = n[i] as f64;
            p(n) * q.powf((k - 1.0) / 2.0) * (1.0 - q.powf(2.0 * m + 2.0)) / (u * qq)
        }),
    );
}

/// `π(Y_{s,u})`, the three-term operator whose `u = 1` case is the
/// eigen-operator of `v_{x,s}`.
pub fn pi_y(s: C64, u: C64, k: f64, q: f64) -> Result<DiscreteStencil> {
    check_k(k)?;
    let mut st = DiscreteStencil::new(1);
    push_y_slot(&mut st, 0, s, u, k, q, Arc::new(|_: &[i64]| 1.0));
    Ok(st)
}

/// `π(Ỹ_{t,u})`: `π(Y_{t,u})` with `q` replaced by `1/q`.
pub fn pi_ytilde(t: C64, u: C64, k: f64, q: f64) -> Result<DiscreteStencil> {
    pi_y(t, u, k, 1.0 / q)
}

fn check_j(j: usize, n: usize) -> Result<()> {
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange { index: j, max: n });
    }
    Ok(())
}

/// `π(Y^{(j)}_{s,u})` on `F(ℕ^N)`: for `i = N-j+1..N` the slot-`i` operator
/// `π(Y_{s,u})` weighted by `q^{Σ_{l=N-j+1}^{i-1} (k_l + 2 n_l)}`, the
/// eigenvalue of the `K^2` factors to its left.
pub fn pi_yj(s: C64, u: C64, j: usize, kvec: &[f64], q: f64) -> Result<DiscreteStencil> {
    let n = kvec.len();
    check_j(j, n)?;
    kvec.iter().try_for_each(|&k| check_k(k))?;
    let mut st = DiscreteStencil::new(n);
    for i in (n - j)..n {
        let ks = kvec.to_vec();
        let lo = n - j;
        let pre = Arc::new(move |nn: &[i64]| {
            let e: f64 = (lo..i).map(|l| ks[l] + 2.0 * nn[l] as f64).sum();
            q.powf(e)
        });
        push_y_slot(&mut st, i, s, u, kvec[i], q, pre);
    }
    Ok(st)
}

/// `π(Ỹ^{(j)}_{t,u})`: for `i = 1..j` the slot-`i` operator `π(Ỹ_{t,u})`
/// weighted by `q^{-Σ_{l=i+1}^{j} (k_l + 2 n_l)}` from the `K^{-2}` factors
/// to its right.
pub fn pi_ytildej(t: C64, u: C64, j: usize, kvec: &[f64], q: f64) -> Result<DiscreteStencil> {
    let n = kvec.len();
    check_j(j, n)?;
    kvec.iter().try_for_each(|&k| check_k(k))?;
    let mut st = DiscreteStencil::new(n);
    for i in 0..j {
        let ks = kvec.to_vec();
        let pre = Arc::new(move |nn: &[i64]| {
            let e: f64 = (i + 1..j).map(|l| ks[l] + 2.0 * nn[l] as f64).sum();
            q.powf(-e)
        });
        push_y_slot(&mut st, i, t, u, kvec[i], 1.0 / q, pre);
    }
    Ok(st)
}

// ---------------------------------------------------------------------------
// Continuous side

pub type ContinuousCoef = Arc<dyn Fn(&[C64]) -> Result<C64> + Send + Sync>;

/// `Σ_ν c_ν(x) 𝒯_ν + c_0(x) Id` where `𝒯_i` multiplies `x_i` by `q^2`.
/// The base `q` is stored, so `q > 1` gives the tilde operators.
#[derive(Clone)]
pub struct ContinuousStencil {
    dim: usize,
    q: f64,
    terms: Vec<(Vec<i8>, ContinuousCoef)>,
    offset: Option<ContinuousCoef>,
}

impl fmt::Debug for ContinuousStencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shifts: Vec<&Vec<i8>> = self.terms.iter().map(|(s, _)| s).collect();
        f.debug_struct("ContinuousStencil")
            .field("dim", &self.dim)
            .field("q", &self.q)
            .field("shifts", &shifts)
            .field("offset", &self.offset.is_some())
            .finish()
    }
}

/// Result of applying a stencil on the grid `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridApplication {
    pub value: C64,
    /// Largest coefficient multiplying a point outside `S` (taken as zero).
    pub outside_coefficient: f64,
}

impl ContinuousStencil {
    pub fn new(dim: usize, q: f64) -> Self {
        Self { dim, q, terms: Vec::new(), offset: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> f64 {
        self.q
    }

    pub fn push(&mut self, shift: Vec<i8>, coef: ContinuousCoef) {
        debug_assert_eq!(shift.len(), self.dim);
        self.terms.push((shift, coef));
    }

    pub fn set_offset(&mut self, coef: ContinuousCoef) {
        self.offset = Some(coef);
    }

    pub fn shifts(&self) -> impl Iterator<Item = &Vec<i8>> {
        self.terms.iter().map(|(s, _)| s)
    }

    /// Coefficient of `𝒯_ν` at `x` (the offset is reported separately).
    pub fn coefficient(&self, shift: &[i8], x: &[C64]) -> Result<C64> {
        let mut out = C64::zero();
        for (s, cf) in &self.terms {
            if s.as_slice() == shift {
                out += cf(x)?;
            }
        }
        Ok(out)
    }

    pub fn offset_at(&self, x: &[C64]) -> Result<C64> {
        self.offset.as_ref().map_or(Ok(C64::zero()), |o| o(x))
    }

    fn shifted(&self, x: &[C64], shift: &[i8]) -> Vec<C64> {
        let q2 = self.q * self.q;
        x.iter().zip(shift).map(|(xi, &d)| xi * q2.powi(d as i32)).collect()
    }

    pub fn apply(&self, f: &dyn Fn(&[C64]) -> Result<C64>, x: &[C64]) -> Result<C64> {
        let mut out = self.offset_at(x)? * f(x)?;
        for (shift, cf) in &self.terms {
            out += cf(x)? * f(&self.shifted(x, shift))?;
        }
        Ok(out)
    }

    /// Apply at the grid point of `m` to a function of the multi-index.
    /// Shifts leaving `S` contribute zero; their coefficients are reported.
    pub fn apply_on_grid(
        &self,
        grid: &GridS,
        f: &dyn Fn(&[usize]) -> Result<C64>,
        m: &[usize],
    ) -> Result<GridApplication> {
        if grid.n() != self.dim || m.len() != self.dim {
            return Err(Error::InvalidParameter("grid and stencil dimensions differ".into()));
        }
        // multiplying y_i by q^{∓2} moves M_i by ±1
        let dir: i64 = if (self.q * grid.q - 1.0).abs() < 1e-12 {
            1
        } else if (self.q - grid.q).abs() < 1e-12 {
            -1
        } else {
            return Err(Error::InvalidParameter("stencil base does not match the grid".into()));
        };
        let y = grid.point(m);
        let partial: Vec<i64> = m
            .iter()
            .scan(0i64, |acc, &v| {
                *acc += v as i64;
                Some(*acc)
            })
            .collect();
        let mut value = self.offset_at(&y)? * f(m)?;
        let mut outside = 0.0f64;
        for (shift, cf) in &self.terms {
            let coef = cf(&y)?;
            let moved: Vec<i64> = partial.iter().zip(shift).map(|(p, &d)| p + dir * d as i64).collect();
            let m2: Vec<i64> = (0..self.dim).map(|i| moved[i] - if i == 0 { 0 } else { moved[i - 1] }).collect();
            if m2.iter().any(|&v| v < 0) {
                outside = outside.max(coef.norm());
                continue;
            }
            let m2: Vec<usize> = m2.into_iter().map(|v| v as usize).collect();
            value += coef * f(&m2)?;
        }
        Ok(GridApplication { value, outside_coefficient: outside })
    }

    /// The same operator written in the reversed variables `x̂ = (x_N, .., x_1)`.
    fn reversed(self) -> Self {
        let dim = self.dim;
        let rev = |v: &[C64]| -> Vec<C64> { v.iter().rev().copied().collect() };
        let terms = self
            .terms
            .into_iter()
            .map(|(s, cf)| {
                let s2: Vec<i8> = s.iter().rev().copied().collect();
                let g: ContinuousCoef = Arc::new(move |x: &[C64]| cf(&rev(x)));
                (s2, g)
            })
            .collect();
        let offset = self.offset.map(|o| {
            let g: ContinuousCoef = Arc::new(move |x: &[C64]| o(&rev(x)));
            g
        });
        Self { dim, q: self.q, terms, offset }
    }
}

/// `ρ(K^{-2}) = A(x) 𝒯 + B(x) Id + A(1/x) 𝒯^{-1}`.
pub fn rho_kminus2(k: f64, s: C64, q: f64) -> ContinuousStencil {
    let mut st = ContinuousStencil::new(1, q);
    st.push(vec![1], Arc::new(move |x: &[C64]| coef_a(x[0], k, s, q)));
    st.push(vec![0], Arc::new(move |x: &[C64]| coef_b(x[0], k, s, q)));
    st.push(vec![-1], Arc::new(move |x: &[C64]| coef_a(x[0].inv(), k, s, q)));
    st
}

/// `ρ̃(K^2) = Ã(y) 𝒯^{-1} + B̃(y) Id + Ã(1/y) 𝒯`, i.e. `ρ(K^{-2})` in base `1/q`.
pub fn rho_tilde_k2(k: f64, t: C64, q: f64) -> ContinuousStencil {
    rho_kminus2(k, t, 1.0 / q)
}

/// `ρ(Ỹ_{t,u}) = A_β(x) 𝒯 + B_β(x) Id + A_β(1/x) 𝒯^{-1}`.
pub fn rho_ytilde_tu(beta: &Beta) -> ContinuousStencil {
    let b = *beta;
    let mut st = ContinuousStencil::new(1, b.q);
    st.push(vec![1], Arc::new(move |x: &[C64]| a_beta(x[0], &b)));
    st.push(vec![0], Arc::new(move |x: &[C64]| b_beta(x[0], &b)));
    st.push(vec![-1], Arc::new(move |x: &[C64]| a_beta(x[0].inv(), &b)));
    st
}

/// `ρ̃(Y_{s,u})`: the operator of [`rho_ytilde_tu`] at `β̃ = (t, s, u, k, 1/q)`,
/// acting in `y`; on `S` it is the three-term recurrence in `m`.
pub fn rho_tilde_ysu(beta: &Beta) -> ContinuousStencil {
    rho_ytilde_tu(&beta.dual())
}

fn pow_nu(x: C64, nu: i8) -> C64 {
    if nu < 0 {
        x.inv()
    } else {
        x
    }
}

/// `V_ν^{(j)}(x) = ∏_{i≤j} V_{ν,i}`, choosing `A, B, C, D` by `(ν_i, ν_{i+1})`
/// with `ν_{j+1} = 0`. `x` must hold `x_1..x_{j+1}`.
pub fn v_nu(nu: &[i8], x: &[C64], kvec: &[f64], q: f64) -> Result<C64> {
    let j = nu.len();
    let mut out = C64::one();
    for i in 0..j {
        let (ni, nn) = (nu[i], if i + 1 < j { nu[i + 1] } else { 0 });
        let (xi, xn, k) = (x[i], x[i + 1], kvec[i]);
        out *= match (ni != 0, nn != 0) {
            (true, false) => coef_a(pow_nu(xi, ni), k, xn, q)?,
            (false, false) => coef_b(xi, k, xn, q)?,
            (true, true) => coef_c(pow_nu(xi, ni), k, pow_nu(xn, nn), q)?,
            (false, true) => coef_d(xi, k, pow_nu(xn, nn), q)?,
        };
    }
    Ok(out)
}

fn all_shifts(j: usize, n: usize) -> Vec<Vec<i8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..j {
        out = out
            .into_iter()
            .flat_map(|v| {
                [-1i8, 0, 1].into_iter().map(move |d| {
                    let mut w = v.clone();
                    w.push(d);
                    w
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|mut v| {
            v.resize(n, 0);
            v
        })
        .collect()
}

fn extended(x: &[C64], last: C64) -> Vec<C64> {
    let mut v = x.to_vec();
    v.push(last);
    v
}

/// `ρ(K^{-2,(j)}) = Σ_{ν ∈ {-1,0,1}^j} V_ν^{(j)}(x) 𝒯_ν` on functions of `x ∈ ℂ^N`,
/// with `x_{N+1} = s`.
pub fn mv_rho_kminus2_j(j: usize, kvec: &[f64], s: C64, q: f64) -> Result<ContinuousStencil> {
    let n = kvec.len();
    check_j(j, n)?;
    let mut st = ContinuousStencil::new(n, q);
    for shift in all_shifts(j, n) {
        let ks = kvec.to_vec();
        let nu: Vec<i8> = shift[..j].to_vec();
        st.push(shift, Arc::new(move |x: &[C64]| v_nu(&nu, &extended(x, s), &ks, q)));
    }
    Ok(st)
}

/// `ρ̃(K^{2,(j)}) = Σ_ν Ṽ_ν^{(j)}(y) 𝒯̂_ν`, the operator of [`mv_rho_kminus2_j`]
/// for `(k̂, t, 1/q)` written in `ŷ`.
pub fn mv_rho_tilde_k2_j(j: usize, kvec: &[f64], t: C64, q: f64) -> Result<ContinuousStencil> {
    let khat: Vec<f64> = kvec.iter().rev().copied().collect();
    Ok(mv_rho_kminus2_j(j, &khat, t, 1.0 / q)?.reversed())
}

/// The bracket multiplying `V_ν^{(j)}` in `V_{ν,β}^{(j)}`.
fn beta_bracket(x1: C64, nu1: i8, u: C64, t: C64, q: f64) -> C64 {
    let xp = x1 * (q * q).powi(nu1 as i32);
    let (qm, qp) = (1.0 / q - q, 1.0 / q + q);
    (u + u.inv()) * mu(xp, q) / qp + (q * u - (q * u).inv()) * (mu(xp, q) - mu(x1, q)) / (qm * qp) - mu(t, q)
}

/// `V_{ν,β}^{(j)}(x)`; `x` must hold `x_1..x_{j+1}`.
pub fn v_nu_beta(nu: &[i8], x: &[C64], beta: &MultiBeta) -> Result<C64> {
    Ok(v_nu(nu, x, &beta.kvec, beta.q)? * beta_bracket(x[0], nu[0], beta.u, beta.t, beta.q))
}

/// `ρ(Ỹ^{(j)}_{t,u}) = Σ_ν V_{ν,β}^{(j)}(x) 𝒯_ν - ((u + 1/u) μ_{x_{j+1}}/(q^{-1} + q) - μ_t) Id`.
pub fn mv_rho_ytilde_j(j: usize, beta: &MultiBeta) -> Result<ContinuousStencil> {
    let n = beta.n();
    check_j(j, n)?;
    let mut st = ContinuousStencil::new(n, beta.q);
    for shift in all_shifts(j, n) {
        let b = beta.clone();
        let nu: Vec<i8> = shift[..j].to_vec();
        st.push(shift, Arc::new(move |x: &[C64]| v_nu_beta(&nu, &extended(x, b.s), &b)));
    }
    let b = beta.clone();
    st.set_offset(Arc::new(move |x: &[C64]| {
        let xn = if j < x.len() { x[j] } else { b.s };
        let qp = 1.0 / b.q + b.q;
        Ok(-((b.u + b.u.inv()) * mu(xn, b.q) / qp - mu(b.t, b.q)))
    }));
    Ok(st)
}

/// `ρ̃(Y^{(j)}_{s,u})`: the operator of [`mv_rho_ytilde_j`] at the dual tuple
/// `β̃ = (t, s, u, k̂, 1/q)`, written in `y` (coefficients `V_{ν,β̃}(ŷ)`).
pub fn mv_rho_tilde_y_j(j: usize, beta: &MultiBeta) -> Result<ContinuousStencil> {
    Ok(mv_rho_ytilde_j(j, &beta.dual())?.reversed())
}

/// `V_{ν,β}^{(j)}(x)` in terms of the parameters `α_0..α_{N+2}`;
/// `x` holds `x_1..x_N` and `x_{N+1} = α_{N+2}`.
pub fn v_nu_beta_alpha(nu: &[i8], x: &[C64], alpha: &AlphaVector, q: f64) -> Result<C64> {
    let j = nu.len();
    let n = alpha.n();
    check_j(j, n)?;
    let xs = extended(x, alpha.get(n + 2));
    let al = |i: usize| alpha.get(i);
    let q2 = q * q;
    let (a0, a1, x1) = (al(0), al(1), xs[0]);
    let mut out = if nu[0] != 0 {
        let xn = pow_nu(x1, nu[0]);
        -q * a0 / a1 * (1.0 - a1 / (a0 * a0) * xn) * (1.0 - a1 / (q2 * xn))
    } else {
        (a0 + a0.inv()) * (x1 + x1.inv()) / (1.0 / q + q) - (q * a0 / a1 + a1 / (q * a0))
    };
    for i in 1..=j {
        let (ni, nn) = (nu[i - 1], if i < j { nu[i] } else { 0 });
        let (xi, xn) = (xs[i - 1], xs[i]);
        let r = al(i + 1) / al(i);
        let f = match (ni != 0, nn != 0) {
            (true, false) => {
                let xp = pow_nu(xi, ni);
                guarded_div((1.0 - r * xn * xp) * (1.0 - r * xp / xn) / r, (1.0 - xp * xp) * (1.0 - q2 * xp * xp), xi)?
            }
            (false, false) => guarded_div(
                q2 * (1.0 / q + q) * (q / r + r / q) - q2 * (xi + xi.inv()) * (xn + xn.inv()),
                (1.0 - q2 * xi * xi) * (1.0 - q2 / (xi * xi)),
                xi,
            )?,
            (true, true) => {
                let (xp, xnp) = (pow_nu(xi, ni), pow_nu(xn, nn));
                guarded_div((1.0 - r * xnp * xp) * (1.0 - r * q2 * xnp * xp) / r, (1.0 - xp * xp) * (1.0 - q2 * xp * xp), xi)?
            }
            (false, true) => {
                let xnp = pow_nu(xn, nn);
                guarded_div(
                    q.powi(3) / r * (1.0 / q + q) * (1.0 - r * xnp * xi) * (1.0 - r * xnp / xi),
                    (1.0 - q2 * xi * xi) * (1.0 - q2 / (xi * xi)),
                    xi,
                )?
            }
        };
        out *= f;
    }
    Ok(out / (1.0 / q - q))
}

/// Standard Askey-Wilson operator `A(x)(f(px) - f(x)) + A(1/x)(f(x/p) - f(x))`,
/// `A(z) = (1-az)(1-bz)(1-cz)(1-dz)/((1-z^2)(1-pz^2))`.
pub fn aw_standard_operator(f: &dyn Fn(C64) -> Result<C64>, x: C64, params: [C64; 4], p: f64) -> Result<C64> {
    let a_std = |z: C64| -> Result<C64> {
        let num: C64 = params.iter().map(|&a| 1.0 - a * z).product();
        guarded_div(num, (1.0 - z * z) * (1.0 - p * z * z), z)
    };
    let fx = f(x)?;
    Ok(a_std(x)? * (f(x * p)? - fx) + a_std(x.inv())? * (f(x / p)? - fx))
}

/// Both sides of `M^{-1} ρ(Ỹ_{t,u}) M = κ D_AW + λ_{t, tq^{-k}}` on `p_n(x; a, b, c, d | q^2)`,
/// where `M` multiplies by `1/(c x^{±1}; q^2)_∞` and `κ = -t q^{-k}/(q^{-1} - q)`.
pub fn conjugated_aw_pair(beta: &Beta, n: usize, x: C64, ctx: &QContext) -> Result<(C64, C64)> {
    let q = beta.q;
    let q2 = q * q;
    let params = beta.aw_parameters();
    let cc = params[2];
    let pn = |z: C64| aw(n, z, params[0], params[1], params[2], params[3], q2);
    let m = |z: C64| -> Result<C64> { Ok((qpoch_inf(cc * z, q2, ctx)? * qpoch_inf(cc / z, q2, ctx)?).inv()) };
    let op = rho_ytilde_tu(beta);
    let lhs = op.apply(&|z: &[C64]| Ok(m(z[0])? * pn(z[0])?), &[x])? / m(x)?;
    let kappa = -beta.t * q.powf(-beta.k) / (1.0 / q - q);
    let c0 = lambda(beta.t, beta.t * q.powf(-beta.k), q);
    let rhs = kappa * aw_standard_operator(&pn, x, params, q2)? + c0 * pn(x)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopf::{Specialization, TwistedKind};
    use crate::multivariate::{mv_pbeta_closed, mv_v, mv_vtilde, MultiBetaParams, MultiIndex};
    use crate::univariate::{omega, pbeta_closed, v_eig, v_eig_series, vtilde_grid, BetaParams};
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const Q: f64 = 0.5;
    const K: f64 = 1.3;

    fn tor(theta: f64) -> C64 {
        C64::from_polar(1.0, theta)
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / (1.0 + b.norm())
    }

    fn beta(t: f64) -> Beta {
        *BetaParams::from_angles(0.63, t, 1.2, K, Q).unwrap().beta()
    }

    #[test]
    fn generator_examples() {
        let k = pi_generator(Gen::K, K, Q).unwrap();
        let d0 = DiscreteFunction::indicator(&[0]).unwrap();
        let kd = k.apply(&d0);
        assert!((kd.get(&[0]) - Q.powf(K / 2.0)).norm() < 1e-15);
        let ed = pi_generator(Gen::E, K, Q).unwrap().apply(&d0);
        let want = -(Q.powf(K) - Q.powf(-K)) / (1.0 / Q - Q);
        assert!((ed.get(&[1]) - want).norm() < 1e-14);
        assert_eq!(ed.get(&[0]), C64::zero());
        assert!(pi_generator(Gen::F, -1.0, Q).is_err());
    }

    #[test]
    fn e_is_adjoint_to_minus_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = pi_generator(Gen::E, K, Q).unwrap();
        let mf = pi_generator(Gen::F, K, Q).unwrap().scale(c(-1.0));
        for _ in 0..5 {
            let f = DiscreteFunction::random(1, 8, &mut rng);
            let g = DiscreteFunction::random(1, 8, &mut rng);
            let a = e.apply(&f).inner_h(&g, &[K], Q);
            let b = f.inner_h(&mf.apply(&g), &[K], Q);
            assert!(rel(a, b) < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn self_adjoint_elements_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (s, u) = (tor(0.63), tor(1.2));
        let ops = [
            pi_y(s, u, K, Q).unwrap(),
            pi_ytilde(C64::new(-2.7, 0.0), u, K, Q).unwrap(),
            pi_k_power(2, K, Q).unwrap(),
            pi_k_power(-2, K, Q).unwrap(),
        ];
        for op in &ops {
            let f = DiscreteFunction::random(1, 10, &mut rng);
            let g = DiscreteFunction::random(1, 10, &mut rng);
            let a = op.apply(&f).inner_h(&g, &[K], Q);
            let b = f.inner_h(&op.apply(&g), &[K], Q);
            assert!(rel(a, b) < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pi_y_eigenfunction() {
        let (x, s) = (tor(0.37), tor(0.63));
        let op = pi_y(s, C64::one(), K, Q).unwrap();
        let lam = lambda(x, s, Q);
        for n in 0..=20 {
            let got = op.apply_at(&|m| v_eig(m[0] as usize, x, s, K, Q).unwrap(), &[n]);
            let want = lam * v_eig(n as usize, x, s, K, Q).unwrap();
            assert!(rel(got, want) < 1e-11, "n={n}");
        }
        // twisted version with M_u
        let u = tor(1.2);
        let opu = pi_y(s, u, K, Q).unwrap();
        for n in 0..=12 {
            let f = |m: &[i64]| u.powi(m[0] as i32) * v_eig(m[0] as usize, x, s, K, Q).unwrap();
            assert!(rel(opu.apply_at(&f, &[n]), lam * f(&[n])) < 1e-11);
        }
    }

    #[test]
    fn pi_ytilde_eigenfunction_on_grid() {
        let t = -2.7;
        let u = tor(1.2);
        let op = pi_ytilde(c(t), u, K, Q).unwrap();
        for m in 0..4 {
            let y = c(t * Q.powf(-K - 2.0 * m as f64));
            let lam = lambda(c(t), y, Q);
            let f = |n: &[i64]| u.powi(n[0] as i32) * vtilde_grid(n[0] as usize, m, t, K, Q).unwrap();
            for n in 0..12i64 {
                let got = op.apply_at(&f, &[n]);
                let scale: f64 = (-1..=1)
                    .filter(|d| n + d >= 0)
                    .map(|d| (op.coefficient(&[d], &[n]) * f(&[n + d])).norm())
                    .sum();
                assert!((got - lam * f(&[n])).norm() < 1e-13 * (1.0 + scale), "m={m} n={n}");
            }
        }
    }

    #[test]
    fn ytilde_is_y_in_inverse_base() {
        let (t, u) = (c(2.5), tor(0.4));
        let a = pi_y(t, u, K, 1.0 / Q).unwrap();
        let b = pi_ytilde(t, u, K, Q).unwrap();
        for n in 0..8 {
            for d in [-1, 0, 1] {
                let (x, y) = (a.coefficient(&[d], &[n]), b.coefficient(&[d], &[n]));
                assert!((x - y).norm() <= 1e-15 * x.norm().max(1.0));
            }
        }
    }

    /// `π` of the exact algebra elements reproduces the hand-written stencils.
    #[test]
    fn stencils_match_algebra_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = BigRational::new(7.into(), 10.into());
        let s = BigRational::new(3.into(), 2.into());
        let u = BigRational::new((-5).into(), 4.into());
        let spec = Specialization::new(r.clone(), s.clone(), BigRational::new(5.into(), 2.into()), u.clone()).unwrap();
        let alg = spec.algebra();
        let rf = 0.7;
        let q = rf * rf;
        let (sc, uc) = (c(1.5), c(-1.25));
        let kvec = [1.3, 0.8, 1.1];
        for (kind, j) in [(TwistedKind::Y, 1), (TwistedKind::Y, 2), (TwistedKind::Y, 3), (TwistedKind::Ytilde, 1), (TwistedKind::Ytilde, 3)] {
            let elem = alg.y_j(kind, j, 3, &s, &u).unwrap();
            let from_alg = DiscreteStencil::from_tensor(&elem, &kvec, rf).unwrap();
            let direct = match kind {
                TwistedKind::Y => pi_yj(sc, uc, j, &kvec, q).unwrap(),
                TwistedKind::Ytilde => pi_ytildej(sc, uc, j, &kvec, q).unwrap(),
            };
            let f = DiscreteFunction::random(3, 3, &mut rng);
            let d = from_alg.apply(&f).sub(&direct.apply(&f));
            assert!(d.max_abs() < 1e-9 * (1.0 + from_alg.apply(&f).max_abs()), "{kind:?} j={j}");
        }
    }

    #[test]
    fn multivariate_stencils_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kvec = [1.3, 0.8, 1.1];
        let (s, t, u) = (tor(0.63), c(-2.7), tor(1.2));
        let f = DiscreteFunction::random(3, 3, &mut rng);
        for j in 1..=3 {
            for jp in 1..=3 {
                for (a, b) in [
                    (pi_yj(s, u, j, &kvec, Q).unwrap(), pi_yj(s, u, jp, &kvec, Q).unwrap()),
                    (pi_ytildej(t, u, j, &kvec, Q).unwrap(), pi_ytildej(t, u, jp, &kvec, Q).unwrap()),
                ] {
                    let ab = a.apply(&b.apply(&f));
                    let ba = b.apply(&a.apply(&f));
                    assert!(ab.sub(&ba).max_abs() < 1e-11 * (1.0 + ab.max_abs()));
                }
            }
        }
    }

    #[test]
    fn multivariate_discrete_eigenfunctions() {
        let kvec = [1.3, 0.8, 1.1];
        let (s, u) = (tor(0.63), tor(1.2));
        let t = -2.7;
        let x = [tor(0.37), tor(1.9), tor(-0.8)];
        let grid = GridS::new(t, kvec.to_vec(), Q);
        let m = [1usize, 0, 2];
        let y = grid.point(&m);
        let ys = grid.point_with_t(&m);
        let fv = |n: &[i64]| {
            let nn: Vec<usize> = n.iter().map(|&i| i as usize).collect();
            u.powi(n.iter().sum::<i64>() as i32) * mv_v(&nn, &x, s, &kvec, Q).unwrap()
        };
        let ft = |n: &[i64]| {
            let nn: Vec<usize> = n.iter().map(|&i| i as usize).collect();
            u.powi(n.iter().sum::<i64>() as i32) * mv_vtilde(&nn, &y, c(t), &kvec, Q).unwrap()
        };
        for j in 1..=3 {
            let op = pi_yj(s, u, j, &kvec, Q).unwrap();
            let opt = pi_ytildej(c(t), u, j, &kvec, Q).unwrap();
            let lam = lambda(x[3 - j], s, Q);
            let lamt = lambda(c(t), c(ys[j]), Q);
            for n in [[0i64, 0, 0], [1, 2, 0], [2, 1, 3], [3, 3, 1]] {
                assert!(rel(op.apply_at(&fv, &n), lam * fv(&n)) < 1e-10, "Y j={j} n={n:?}");
                let want = lamt * ft(&n);
                let got = opt.apply_at(&ft, &n);
                assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()), "Yt j={j} n={n:?}");
            }
        }
        // j = 1 acts on the last coordinate only
        let one = pi_yj(s, u, 1, &kvec, Q).unwrap();
        let uni = pi_y(s, u, 1.1, Q).unwrap();
        for d in [-1i64, 0, 1] {
            assert!((one.coefficient(&[0, 0, d], &[2, 1, 3]) - uni.coefficient(&[d], &[3])).norm() < 1e-15);
        }
        assert!(pi_yj(s, u, 4, &kvec, Q).is_err());
    }

    /// Coefficients with the steps swapped and diagonal
    /// exponent `2n - k` do not annihilate the eigenfunction residual.
    #[test]
    fn swapped_u_coefficients_fail() {
        let (x, s) = (tor(0.37), tor(0.63));
        let k = 1.1;
        let qq = 1.0 / Q - Q;
        let mut st = DiscreteStencil::new(1);
        st.push(vec![1], Arc::new(move |n: &[i64]| c(Q.powf(-(k - 1.0) / 2.0) * (1.0 - Q.powf(2.0 * k + 2.0 * n[0] as f64 - 2.0)) / qq)));
        st.push(vec![-1], Arc::new(move |n: &[i64]| c(Q.powf((k - 1.0) / 2.0) * (1.0 - Q.powf(2.0 * n[0] as f64 + 2.0)) / qq)));
        st.push(vec![0], Arc::new(move |n: &[i64]| (s + s.inv()) * (Q.powf(2.0 * n[0] as f64 - k) - 1.0) / qq));
        let lam = lambda(x, s, Q);
        let f = |m: &[i64]| v_eig(m[0] as usize, x, s, k, Q).unwrap();
        let worst = (0..6).map(|n| rel(st.apply_at(&f, &[n]), lam * f(&[n]))).fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn intertwining_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let s = tor(0.63);
        let op = pi_y(s, C64::one(), K, Q).unwrap();
        let f = DiscreteFunction::random(1, 8, &mut rng);
        let pf = op.apply(&f);
        let lam_f = |g: &DiscreteFunction, x: C64| -> C64 {
            g.support().map(|(n, v)| v * v_eig(n[0] as usize, x, s, K, Q).unwrap().conj() * omega(n[0] as usize, K, Q)).sum()
        };
        for i in 0..20 {
            let x = tor(0.1 + 0.31 * i as f64);
            let a = lam_f(&pf, x);
            let b = lambda(x, s, Q) * lam_f(&f, x);
            assert!(rel(a, b) < 1e-11, "x={x}");
        }
        // dual transform on the grid
        let t = 2.5;
        let opt = pi_ytilde(c(t), C64::one(), K, Q).unwrap();
        let pf = opt.apply(&f);
        let lt = |g: &DiscreteFunction, m: usize| -> C64 {
            g.support().map(|(n, v)| v * vtilde_grid(n[0] as usize, m, t, K, Q).unwrap() * omega(n[0] as usize, K, Q)).sum()
        };
        for m in 0..5 {
            let y = c(t * Q.powf(-K - 2.0 * m as f64));
            let want = lambda(c(t), y, Q) * lt(&f, m);
            assert!((lt(&pf, m) - want).norm() < 1e-11 * (1.0 + want.norm()));
        }
    }

    fn lambda_delta(m: usize, x: C64, s: C64, k: f64) -> C64 {
        v_eig(m, x, s, k, Q).unwrap()
    }

    #[test]
    fn rho_kminus2_examples() {
        let s = tor(0.63);
        let op = rho_kminus2(K, s, Q);
        for i in 0..10 {
            let x = tor(0.2 + 0.6 * i as f64);
            let one = op.apply(&|_| Ok(C64::one()), &[x]).unwrap();
            assert!((one - Q.powf(-K)).norm() < 1e-12);
            for m in 0..=6 {
                let f = |z: &[C64]| Ok(lambda_delta(m, z[0], s, K));
                let got = op.apply(&f, &[x]).unwrap();
                let want = Q.powf(-K - 2.0 * m as f64) * lambda_delta(m, x, s, K);
                assert!(rel(got, want) < 1e-11, "m={m}");
            }
        }
        // tilde: the same operator with (s, q) -> (t, 1/q); Ã(y) multiplies f(y/q^2)
        let t = c(2.5);
        let tl = rho_tilde_k2(K, t, Q);
        let y = c(0.9);
        assert!((tl.coefficient(&[1], &[y]).unwrap() - coef_a(y, K, t, 1.0 / Q).unwrap()).norm() < 1e-15);
        // restriction of Ã to S; the forward coefficient carries q^{k+4m+2},
        // a bare q^{k+2} only agrees at m = 0
        for m in 0..4usize {
            let mm = m as f64;
            let y = c(2.5 * Q.powf(-K - 2.0 * mm));
            let t2 = 6.25;
            let shape = (1.0 - Q.powf(2.0 * K + 2.0 * mm) / t2) * (1.0 - Q.powf(2.0 * K + 2.0 * mm))
                / (t2 * (1.0 - Q.powf(2.0 * K + 4.0 * mm) / t2) * (1.0 - Q.powf(2.0 * K + 4.0 * mm + 2.0) / t2));
            let want = Q.powf(K + 4.0 * mm + 2.0) * shape;
            let got = coef_a(y, K, t, 1.0 / Q).unwrap();
            assert!((got - want).norm() < 1e-12 * want.abs().max(1.0));
            if m > 0 {
                assert!((got - Q.powf(K + 2.0) * shape).norm() > 1e-3 * want.abs());
            }
            let want2 = Q.powf(K) * (1.0 - Q.powf(2.0 * mm) / t2) * (1.0 - Q.powf(2.0 * mm))
                / ((1.0 - Q.powf(2.0 * K + 4.0 * mm) / t2) * (1.0 - Q.powf(2.0 * K + 4.0 * mm - 2.0) / t2));
            assert!((coef_a(y.inv(), K, t, 1.0 / Q).unwrap() - want2).norm() < 1e-12);
        }
    }

    #[test]
    fn rho_tilde_k2_eigen_on_grid() {
        let t = -2.7;
        let grid = GridS::new(t, vec![K], Q);
        let op = rho_tilde_k2(K, c(t), Q);
        for n in 0..6usize {
            for m in 0..5usize {
                let f = |mm: &[usize]| vtilde_grid(n, mm[0], t, K, Q);
                let r = op.apply_on_grid(&grid, &f, &[m]).unwrap();
                let want = Q.powf(K + 2.0 * n as f64) * f(&[m]).unwrap();
                assert!((r.value - want).norm() < 1e-11 * (1.0 + want.norm()), "n={n} m={m}");
                assert!(r.outside_coefficient < 1e-12);
            }
        }
    }

    #[test]
    fn dynamic_rows_agree() {
        let s = tor(0.63);
        let q2 = Q * Q;
        for i in 0..6 {
            let x = tor(0.3 + 0.9 * i as f64);
            for n in 0..=10 {
                let lhs = Q.powf(-K - 2.0 * n as f64) * v_eig(n, x, s, K, Q).unwrap();
                let row = |s: C64, sh: C64| -> C64 {
                    let (cx, d) = dyn_cd(K, x, s, Q).unwrap();
                    let (cxi, _) = dyn_cd(K, x.inv(), s, Q).unwrap();
                    cx * v_eig(n, x * q2, sh, K, Q).unwrap()
                        + d * v_eig(n, x, sh, K, Q).unwrap()
                        + cxi * v_eig(n, x / q2, sh, K, Q).unwrap()
                };
                assert!(rel(row(s, s * q2), lhs) < 1e-11, "row 1 n={n}");
                assert!(rel(row(s.inv(), s / q2), lhs) < 1e-11, "row 2 n={n}");
            }
        }
        // zeros of C
        let s = c(1.7);
        assert!(coef_c(c(Q.powf(-K) / 1.7), K, s, Q).unwrap().norm() < 1e-14);
        assert!(coef_c(c(Q.powf(-K - 2.0) / 1.7), K, s, Q).unwrap().norm() < 1e-14);
    }

    #[test]
    fn dynamic_tilde_rows_agree() {
        let t = 2.5;
        let q2 = Q * Q;
        let k = K;
        for i in 0..4 {
            let y = c(0.7 + 0.45 * i as f64);
            for n in 0..=8 {
                let vt = |yy: C64, tt: C64| v_eig_series(n, yy, tt, k, 1.0 / Q).unwrap();
                let lhs = Q.powf(k + 2.0 * n as f64) * vt(y, c(t));
                // residual relative to the size of the individual terms
                let row = |tp: C64, tsh: C64| -> f64 {
                    let (cy, d) = dyn_cd_tilde(k, y, tp, Q).unwrap();
                    let (cyi, _) = dyn_cd_tilde(k, y.inv(), tp, Q).unwrap();
                    let terms = [cy * vt(y / q2, tsh), d * vt(y, tsh), cyi * vt(y * q2, tsh)];
                    let scale: f64 = terms.iter().map(|z| z.norm()).sum::<f64>() + lhs.norm();
                    (terms.iter().sum::<C64>() - lhs).norm() / scale
                };
                assert!(row(c(t), c(t / q2)) < 1e-11, "row 1 n={n}");
                assert!(row(c(1.0 / t), c(t * q2)) < 1e-11, "row 2 n={n}");
            }
            let (ct, dt) = dyn_cd_tilde(k, y, c(t), Q).unwrap();
            let (cq, dq) = dyn_cd(k, y, c(t), 1.0 / Q).unwrap();
            assert!(rel(ct, cq) < 1e-13 && rel(dt, dq) < 1e-13);
        }
    }

    #[test]
    fn rho_ytilde_eigen_and_alternate_form() {
        let ctx = QContext::default();
        for t in [2.7, -3.1] {
            let b = beta(t);
            let op = rho_ytilde_tu(&b);
            for i in 0..8 {
                let x = tor(0.2 + 0.7 * i as f64);
                for m in 0..=4 {
                    let y = c(t * Q.powf(-K - 2.0 * m as f64));
                    let f = |z: &[C64]| pbeta_closed(z[0], m, &b, &ctx);
                    let want = lambda(b.t, y, Q) * f(&[x]).unwrap();
                    assert!(rel(op.apply(&f, &[x]).unwrap(), want) < 1e-10, "t={t} m={m}");
                }
                let alt = b_beta_constant(&b) + f_beta(x, &b).unwrap() + f_beta(x.inv(), &b).unwrap();
                assert!(rel(alt, b_beta(x, &b).unwrap()) < 1e-12);
                // F(x) = -A_β(x)(1 - qux/t)/(1 - u/(qtx))
                let f2 = -a_beta(x, &b).unwrap() * (1.0 - Q * b.u * x / b.t) / (1.0 - b.u / (Q * b.t * x));
                assert!(rel(f_beta(x, &b).unwrap(), f2) < 1e-12);
            }
        }
    }

    #[test]
    fn displayed_b_beta_constant_fails() {
        let b = beta(2.7);
        let x = tor(0.8);
        let alt = b_beta_constant_displayed(&b) + f_beta(x, &b).unwrap() + f_beta(x.inv(), &b).unwrap();
        assert!(rel(alt, b_beta(x, &b).unwrap()) > 1e-3);
    }

    #[test]
    fn conjugated_operator_is_standard_aw() {
        let ctx = QContext::default();
        for t in [2.7, -3.1] {
            let b = beta(t);
            for n in 0..=6 {
                for i in 0..5 {
                    let x = tor(0.3 + 1.1 * i as f64);
                    let (l, r) = conjugated_aw_pair(&b, n, x, &ctx).unwrap();
                    assert!(rel(l, r) < 1e-10, "t={t} n={n}: {l} vs {r}");
                }
            }
        }
    }

    #[test]
    fn rho_tilde_ysu_on_grid() {
        let ctx = QContext::default();
        for t in [2.7, -3.1] {
            let b = beta(t);
            let op = rho_tilde_ysu(&b);
            let grid = GridS::new(t, vec![K], Q);
            let x = tor(0.37);
            let lam = lambda(x, b.s, Q);
            for m in 0..=4 {
                let f = |mm: &[usize]| pbeta_closed(x, mm[0], &b, &ctx);
                let r = op.apply_on_grid(&grid, &f, &[m]).unwrap();
                let want = lam * f(&[m]).unwrap();
                assert!(rel(r.value, want) < 1e-10, "t={t} m={m}");
                assert!(r.outside_coefficient < 1e-12);
            }
            // m = 0 with the boundary value zero determines P_1 from P_0
            let y0 = c(t * Q.powf(-K));
            let p0 = pbeta_closed(x, 0, &b, &ctx).unwrap();
            let up = op.coefficient(&[1], &[y0]).unwrap();
            let p1 = (lam - op.coefficient(&[0], &[y0]).unwrap()) * p0 / up;
            assert!(rel(p1, pbeta_closed(x, 1, &b, &ctx).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn recurrence_coefficients_match_aw_display() {
        let b = beta(2.7);
        let dual = b.dual();
        let [a, bb, cc, d] = b.aw_parameters();
        let q2 = Q * Q;
        let abcd = a * bb * cc * d;
        let qm = 1.0 / Q - Q;
        for m in 1..5 {
            let p = q2.powi(m);
            let y = b.t * Q.powf(-K - 2.0 * m as f64);
            let ap = -(1.0 - a * bb * p) * (1.0 - a * cc * p) * (1.0 - bb * cc * p) * (1.0 - abcd * p / q2)
                / (d.inv() / p * qm * (1.0 - abcd * p * p) * (1.0 - abcd * p * p / q2));
            assert!(rel(a_beta(y, &dual).unwrap(), ap) < 1e-12, "A+ m={m}");
            let am = -(1.0 - p) * (1.0 - a * d * p / q2) * (1.0 - bb * d * p / q2) * (1.0 - cc * d * p / q2)
                / (d * p / q2 * qm * (1.0 - abcd * p * p / (q2 * q2)) * (1.0 - abcd * p * p / q2));
            assert!(rel(a_beta(y.inv(), &dual).unwrap(), am) < 1e-12, "A- m={m}");
        }
    }

    fn mbeta(t: f64) -> MultiBeta {
        MultiBetaParams::from_angles(0.63, t, 1.2, vec![1.3, 0.8, 1.1], Q).unwrap().beta().clone()
    }

    #[test]
    fn mv_kminus2_eigen_and_constant() {
        let kvec = [1.3, 0.8, 1.1];
        let s = tor(0.63);
        let x = [tor(0.37), tor(1.9), tor(-0.8)];
        for j in 1..=3 {
            let op = mv_rho_kminus2_j(j, &kvec, s, Q).unwrap();
            let one = op.apply(&|_| Ok(C64::one()), &x).unwrap();
            let kk: f64 = kvec[..j].iter().sum();
            assert!((one - Q.powf(-kk)).norm() < 1e-11);
            for n in [[0usize, 0, 0], [1, 2, 0], [2, 1, 3], [3, 3, 3]] {
                let f = |z: &[C64]| mv_v(&n, z, s, &kvec, Q);
                let e: f64 = (0..j).map(|i| kvec[i] + 2.0 * n[i] as f64).sum();
                let want = Q.powf(-e) * f(&x).unwrap();
                assert!(rel(op.apply(&f, &x).unwrap(), want) < 1e-10, "j={j} n={n:?}");
            }
        }
        // j = 1 is the univariate operator in x_1 with s-slot x_2
        let op = mv_rho_kminus2_j(1, &kvec, s, Q).unwrap();
        let uni = rho_kminus2(1.3, x[1], Q);
        for d in [-1i8, 0, 1] {
            let a = op.coefficient(&[d, 0, 0], &x).unwrap();
            assert!((a - uni.coefficient(&[d], &x[..1]).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn mv_tilde_k2_eigen() {
        let kvec = [1.3, 0.8, 1.1];
        let t = -2.7;
        let grid = GridS::new(t, kvec.to_vec(), Q);
        let y = grid.point(&[1, 0, 2]);
        for j in 1..=3 {
            let op = mv_rho_tilde_k2_j(j, &kvec, c(t), Q).unwrap();
            for n in [[0usize, 0, 0], [1, 2, 0], [2, 1, 3]] {
                let f = |z: &[C64]| mv_vtilde(&n, z, c(t), &kvec, Q);
                let e: f64 = (3 - j..3).map(|i| kvec[i] + 2.0 * n[i] as f64).sum();
                let want = Q.powf(e) * f(&y).unwrap();
                let got = op.apply(&f, &y).unwrap();
                assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()), "j={j} n={n:?}");
            }
        }
    }

    #[test]
    fn mv_ytilde_eigen_on_pbeta() {
        let ctx = QContext::default();
        for t in [2.5, -2.7] {
            let b = mbeta(t);
            let grid = GridS::new(t, b.kvec.clone(), Q);
            let x = [tor(0.37), tor(1.9), tor(-0.8)];
            for j in 1..=3 {
                let op = mv_rho_ytilde_j(j, &b).unwrap();
                for m in [[0usize, 0, 0], [1, 0, 1], [2, 1, 0], [0, 1, 2]] {
                    let f = |z: &[C64]| mv_pbeta_closed(z, &m, &b, &ctx);
                    let ys = grid.point_with_t(&m);
                    let want = lambda(b.t, c(ys[j]), Q) * f(&x).unwrap();
                    assert!(rel(op.apply(&f, &x).unwrap(), want) < 1e-9, "t={t} j={j} m={m:?}");
                }
            }
        }
    }

    #[test]
    fn mv_tilde_y_recurrence_on_grid() {
        let ctx = QContext::default();
        for t in [2.5, -2.7] {
            let b = mbeta(t);
            let grid = GridS::new(t, b.kvec.clone(), Q);
            let x = [tor(0.37), tor(1.9), tor(-0.8)];
            let xs = [x[0], x[1], x[2], b.s];
            for j in 1..=3 {
                let op = mv_rho_tilde_y_j(j, &b).unwrap();
                for m in MultiIndex::all_up_to(3, 2) {
                    let f = |mm: &[usize]| mv_pbeta_closed(&x, mm, &b, &ctx);
                    let r = op.apply_on_grid(&grid, &f, &m.m).unwrap();
                    let want = lambda(xs[3 - j], b.s, Q) * f(&m.m).unwrap();
                    assert!(rel(r.value, want) < 1e-9, "t={t} j={j} m={:?}", m.m);
                    assert!(r.outside_coefficient < 1e-10, "outside {:?}: {}", m.m, r.outside_coefficient);
                }
            }
        }
    }

    #[test]
    fn single_variable_operator_matches_univariate() {
        let b1 = beta(2.7);
        let mb = MultiBeta { s: b1.s, t: b1.t, u: b1.u, kvec: vec![K], q: Q };
        let op = mv_rho_ytilde_j(1, &mb).unwrap();
        for i in 0..6 {
            let x = tor(0.25 + 0.8 * i as f64);
            let a = op.coefficient(&[1], &[x]).unwrap();
            assert!(rel(a, a_beta(x, &b1).unwrap()) < 1e-12);
            let d = op.coefficient(&[0], &[x]).unwrap() + op.offset_at(&[x]).unwrap();
            assert!(rel(d, b_beta(x, &b1).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn alpha_form_matches_beta_form() {
        for t in [2.5, -2.7] {
            let b = mbeta(t);
            let al = b.alpha();
            let x = [tor(0.37), tor(1.9), tor(-0.8)];
            let xs = [x[0], x[1], x[2], b.s];
            for j in 1..=3 {
                for shift in all_shifts(j, j) {
                    let a = v_nu_beta_alpha(&shift, &x, &al, Q).unwrap();
                    let bb = v_nu_beta(&shift, &xs[..=j], &b).unwrap();
                    assert!((a - bb).norm() < 1e-12 * (1.0 + bb.norm()), "j={j} nu={shift:?}");
                }
            }
        }
    }

    #[test]
    fn dual_coefficients_are_reversed_beta_tilde() {
        let b = mbeta(2.5);
        let grid = GridS::new(2.5, b.kvec.clone(), Q);
        let y = grid.point(&[1, 2, 0]);
        let yhat: Vec<C64> = y.iter().rev().copied().collect();
        let dual = b.dual();
        let op = mv_rho_tilde_y_j(2, &b).unwrap();
        for shift in all_shifts(2, 2) {
            let mut full = vec![0i8; 3];
            full[2] = shift[0];
            full[1] = shift[1];
            let a = op.coefficient(&full, &y).unwrap();
            let ext = [yhat[0], yhat[1], yhat[2]];
            let want = v_nu_beta(&shift, &ext, &dual).unwrap();
            assert!((a - want).norm() < 1e-13 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn continuous_stencils_commute() {
        let ctx = QContext::default();
        let p = MultiBetaParams::from_angles(0.63, 2.5, 1.2, vec![1.3, 0.8], Q).unwrap();
        let b = p.beta().clone();
        let a1 = mv_rho_ytilde_j(1, &b).unwrap();
        let a2 = mv_rho_ytilde_j(2, &b).unwrap();
        // symmetric Laurent polynomial test function
        let f = |z: &[C64]| -> Result<C64> {
            let (e1, e2) = (z[0] + z[0].inv(), z[1] + z[1].inv());
            Ok(1.0 + 0.3 * e1 - 0.7 * e2 * e2 + 0.2 * e1 * e2 + 0.1 * e1 * e1 * e2)
        };
        let x = [tor(0.37), tor(1.9)];
        let lhs = a1.apply(&|z| a2.apply(&f, z), &x).unwrap();
        let rhs = a2.apply(&|z| a1.apply(&f, z), &x).unwrap();
        assert!(rel(lhs, rhs) < 1e-10, "{lhs} vs {rhs}");
        let _ = ctx;
    }

    #[test]
    fn pole_guard_fires() {
        assert!(matches!(coef_a(c(1.0), K, tor(0.3), Q), Err(Error::PoleAtSample { .. })));
        let op = rho_kminus2(K, tor(0.3), Q);
        assert!(op.apply(&|_| Ok(C64::one()), &[c(1.0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn discrete_application_is_linear(seed in 0u64..1000, a in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let op = pi_yj(tor(0.4), tor(1.0), 2, &[1.3, 0.8], Q).unwrap();
            let f = DiscreteFunction::random(2, 3, &mut rng);
            let g = DiscreteFunction::random(2, 3, &mut rng);
            let mut comb = f.clone();
            for (n, v) in g.support() {
                comb.set(n, f.get(n) + a * v).unwrap();
            }
            let lhs = op.apply(&comb);
            let (of, og) = (op.apply(&f), op.apply(&g));
            for (n, v) in lhs.support() {
                prop_assert!((v - of.get(n) - a * og.get(n)).norm() < 1e-10);
            }
        }
    }
}
