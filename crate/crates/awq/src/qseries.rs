//! q-shifted factorials and basic hypergeometric series.
//!
//! Terminating series are summed exactly: floating inputs are converted to
//! dyadic rationals, summed in `Complex<BigRational>` and rounded once at the
//! end. This sidesteps the catastrophic cancellation that terminating series
//! in base `q^2` suffer for moderate degree.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::ops::Neg;

pub type C64 = Complex64;
pub type ExactC = Complex<BigRational>;

/// Global numeric policy shared by all evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QContext {
    pub q: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_terms: usize,
    pub quad_min_nodes: usize,
    pub quad_max_nodes: usize,
}

impl QContext {
    pub fn new(
        q: f64,
        tol_abs: f64,
        tol_rel: f64,
        max_terms: usize,
        quad_min_nodes: usize,
        quad_max_nodes: usize,
    ) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must lie in (0,1)")));
        }
        for (name, tol) in [("tol_abs", tol_abs), ("tol_rel", tol_rel)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::InvalidParameter(format!("{name} = {tol} must lie in (0, 1e-3]")));
            }
        }
        if max_terms < 64 {
            return Err(Error::InvalidParameter(format!("max_terms = {max_terms} must be at least 64")));
        }
        if quad_min_nodes == 0 || quad_max_nodes < quad_min_nodes {
            return Err(Error::InvalidParameter(format!(
                "quadrature node range {quad_min_nodes}..{quad_max_nodes} is empty"
            )));
        }
        Ok(Self { q, tol_abs, tol_rel, max_terms, quad_min_nodes, quad_max_nodes })
    }

    /// Default policy for a given base.
    pub fn with_q(q: f64) -> Result<Self> {
        Self::new(q, 1e-17, 1e-13, 10_000, 32, 512)
    }
}

impl Default for QContext {
    fn default() -> Self {
        Self::with_q(0.5).expect("default context is valid")
    }
}

/// Product accumulator that renormalises into a log-scale whenever the running
/// magnitude leaves `[1e-150, 1e150]`. The mantissa carries the phase.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProduct {
    mant: C64,
    log_scale: f64,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        Self { mant: C64::new(1.0, 0.0), log_scale: 0.0 }
    }
}

impl ScaledProduct {
    pub fn mul(&mut self, z: C64) {
        self.mant *= z;
        let m = self.mant.norm();
        if m != 0.0 && !(1e-150..=1e150).contains(&m) {
            self.log_scale += m.ln();
            self.mant /= m;
        }
    }

    pub fn div(&mut self, z: C64) {
        self.mul(z.inv());
    }

    /// Multiply by `exp(l)` without ever forming `exp(l)`.
    pub fn mul_exp(&mut self, l: C64) {
        self.log_scale += l.re;
        self.mant *= C64::from_polar(1.0, l.im);
    }

    pub fn value(&self) -> C64 {
        self.mant * self.log_scale.exp()
    }

    /// Complex logarithm of the accumulated product.
    pub fn ln(&self) -> C64 {
        self.mant.ln() + self.log_scale
    }
}

/// `(a;q)_n = prod_{i<n} (1 - a q^i)` for any commutative number type.
pub fn qpoch_finite<T: Clone + Num>(a: &T, q: &T, n: usize) -> T {
    let mut acc = T::one();
    let mut aq = a.clone();
    for _ in 0..n {
        acc = acc * (T::one() - aq.clone());
        aq = aq * q.clone();
    }
    acc
}

/// Floating `(a;q)_n`, accumulated with [`ScaledProduct`].
pub fn qpoch(a: C64, q: f64, n: usize) -> C64 {
    let mut acc = ScaledProduct::default();
    let mut aq = a;
    for _ in 0..n {
        acc.mul(1.0 - aq);
        aq *= q;
    }
    acc.value()
}

/// `(A;q^{-1})_n` rewritten in base `q`: `(-A)^n q^{-n(n-1)/2} (A^{-1};q)_n`.
pub fn qpoch_inverted<T: Clone + Num + Neg<Output = T>>(a: &T, q: &T, n: usize) -> T {
    let inv_a = T::one() / a.clone();
    let mut acc = qpoch_finite(&inv_a, q, n);
    let minus_a = -a.clone();
    let inv_q = T::one() / q.clone();
    for i in 0..n {
        acc = acc * minus_a.clone();
        for _ in 0..i {
            acc = acc * inv_q.clone();
        }
    }
    acc
}

/// Infinite product `(a;q)_inf`, truncated once `|a| q^M < tol_abs (1-q)`.
pub fn qpoch_inf(a: C64, q: f64, ctx: &QContext) -> Result<C64> {
    Ok(qpoch_inf_scaled(a, q, ctx)?.value())
}

/// Logarithm of `(a;q)_inf` (principal branch per factor).
pub fn ln_qpoch_inf(a: C64, q: f64, ctx: &QContext) -> Result<C64> {
    Ok(qpoch_inf_scaled(a, q, ctx)?.ln())
}

fn qpoch_inf_scaled(a: C64, q: f64, ctx: &QContext) -> Result<ScaledProduct> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("infinite product needs 0 < q < 1, got {q}")));
    }
    let mut acc = ScaledProduct::default();
    let cutoff = ctx.tol_abs * (1.0 - q);
    let mut aq = a;
    for _ in 0..ctx.max_terms {
        if aq.norm() < cutoff {
            return Ok(acc);
        }
        acc.mul(1.0 - aq);
        aq *= q;
    }
    Err(Error::NonConvergent { what: "infinite q-product".into(), terms: ctx.max_terms })
}

/// Product of `(base * v1^{±1} * ... * vr^{±1}; q)_inf` over all sign choices.
pub fn qpoch_pm(base: C64, vars: &[C64], q: f64, ctx: &QContext) -> Result<C64> {
    Ok(ln_qpoch_pm(base, vars, q, ctx)?.exp())
}

pub fn ln_qpoch_pm(base: C64, vars: &[C64], q: f64, ctx: &QContext) -> Result<C64> {
    let mut total = C64::new(0.0, 0.0);
    for mask in 0..(1usize << vars.len()) {
        let mut arg = base;
        for (i, v) in vars.iter().enumerate() {
            arg *= if mask >> i & 1 == 1 { v.inv() } else { *v };
        }
        total += ln_qpoch_inf(arg, q, ctx)?;
    }
    Ok(total)
}

/// Input of a basic hypergeometric series `_r phi_s(num; den; q, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    pub num: Vec<C64>,
    pub den: Vec<C64>,
    pub z: C64,
    pub base: f64,
}

impl SeriesSpec {
    pub fn new(num: Vec<C64>, den: Vec<C64>, z: C64, base: f64) -> Self {
        Self { num, den, z, base }
    }

    /// Degree `n` if some numerator parameter equals `base^{-n}`.
    pub fn terminating_degree(&self) -> Option<usize> {
        self.num.iter().filter_map(|a| terminating_index(*a, self.base)).min()
    }
}

fn terminating_index(a: C64, q: f64) -> Option<usize> {
    if a.re <= 0.0 || a.im.abs() > 1e-14 * a.re {
        return None;
    }
    let n = (-a.re.ln() / q.ln()).round();
    if n < 0.0 || n > 10_000.0 {
        return None;
    }
    let n = n as usize;
    ((a.re * q.powi(n as i32) - 1.0).abs() < 1e-12).then_some(n)
}

/// Sum of the first `terms` terms of `_r phi_s(num; den; q, z)` in any number
/// type, using the standard `[(-1)^j q^{j(j-1)/2}]^{1+s-r}` normalisation.
pub fn rphi_sum<T: Clone + Num + Neg<Output = T>>(
    num: &[T],
    den: &[T],
    q: &T,
    z: &T,
    terms: usize,
) -> Result<T> {
    let excess = 1 + den.len() as i64 - num.len() as i64;
    let mut term = T::one();
    let mut sum = T::zero();
    let mut qj = T::one();
    for j in 0..terms {
        sum = sum + term.clone();
        if j + 1 == terms {
            break;
        }
        let mut numer = z.clone();
        for a in num {
            numer = numer * (T::one() - a.clone() * qj.clone());
        }
        let mut denom = T::one() - qj.clone() * q.clone();
        for b in den {
            denom = denom * (T::one() - b.clone() * qj.clone());
        }
        if denom.is_zero() {
            return Err(Error::PoleInDenominator { index: j + 1 });
        }
        let sign_pow = -qj.clone();
        if excess >= 0 {
            for _ in 0..excess {
                numer = numer * sign_pow.clone();
            }
        } else {
            for _ in 0..(-excess) {
                denom = denom * sign_pow.clone();
            }
        }
        term = term * numer / denom;
        qj = qj * q.clone();
    }
    Ok(sum)
}

/// [`rphi_sum`] over complex rationals without per-operation reduction: every
/// parameter is written as a Gaussian integer over an integer, the series is
/// folded Horner-style from the last term as one fraction of Gaussian
/// integers, and the single division happens at the end.
pub fn rphi_sum_exact(num: &[ExactC], den: &[ExactC], q: &ExactC, z: &ExactC, terms: usize) -> Result<ExactC> {
    let conv = |v: &[ExactC]| v.iter().map(GaussFrac::from_exact).collect::<Vec<_>>();
    let (a, b) = horner_fraction(&conv(num), &conv(den), &GaussFrac::from_exact(q), &GaussFrac::from_exact(z), terms)?;
    let nrm = &b.re * &b.re + &b.im * &b.im;
    let top = a * b.conj();
    Ok(ExactC::new(BigRational::new(top.re, nrm.clone()), BigRational::new(top.im, nrm)))
}

/// [`rphi_sum_exact`] rounded once to floating point, skipping the reduction
/// of the (large) final fraction.
pub fn rphi_sum_exact_c64(num: &[ExactC], den: &[ExactC], q: &ExactC, z: &ExactC, terms: usize) -> Result<C64> {
    let conv = |v: &[ExactC]| v.iter().map(GaussFrac::from_exact).collect::<Vec<_>>();
    rphi_sum_frac(&conv(num), &conv(den), &GaussFrac::from_exact(q), &GaussFrac::from_exact(z), terms)
}

/// [`rphi_sum_exact_c64`] with parameters already in unreduced form.
pub fn rphi_sum_frac(num: &[GaussFrac], den: &[GaussFrac], q: &GaussFrac, z: &GaussFrac, terms: usize) -> Result<C64> {
    let (a, b) = horner_fraction(num, den, q, z, terms)?;
    let nrm = &b.re * &b.re + &b.im * &b.im;
    let top = a * b.conj();
    Ok(C64::new(big_quotient_f64(&top.re, &nrm), big_quotient_f64(&top.im, &nrm)))
}

/// `n / d` correctly rounded to within one ulp, for `d > 0`, without a gcd.
fn big_quotient_f64(n: &BigInt, d: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    // scale so the integer quotient carries at least 64 significant bits
    let shift = d.bits() as i64 - n.bits() as i64 + 66;
    let quot = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let mut v = quot.to_f64().unwrap_or(f64::NAN);
    let mut e = -shift;
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        v *= 2f64.powi(step as i32);
        e -= step;
    }
    v
}

/// The series as one unreduced fraction `A / B` of Gaussian integers.
fn horner_fraction(num: &[GaussFrac], den: &[GaussFrac], q: &GaussFrac, z: &GaussFrac, terms: usize) -> Result<(GaussInt, GaussInt)> {
    if terms == 0 {
        return Ok((GaussInt::zero(), GaussInt::one()));
    }
    let excess = 1 + den.len() as i64 - num.len() as i64;
    let num: Vec<_> = num.iter().map(|f| (&f.num, &f.den)).collect();
    let den: Vec<_> = den.iter().map(|f| (&f.num, &f.den)).collect();
    let (gq, dq) = (&q.num, &q.den);
    let (gz, dz) = (&z.num, &z.den);
    // q^j as gq_j / dq_j
    let mut gqj = GaussInt::one();
    let mut dqj = BigInt::one();
    let mut ratios = Vec::with_capacity(terms - 1);
    for j in 0..terms - 1 {
        let mut n = gz.clone();
        let mut m = GaussInt::from((*dz).clone());
        let mut n_scale = BigInt::one();
        let mut m_scale = BigInt::one();
        for &(g, d) in &num {
            let dd = d * &dqj;
            n = n * (GaussInt::from(dd.clone()) - g * &gqj);
            m_scale *= dd;
        }
        for &(g, d) in &den {
            let dd = d * &dqj;
            m = m * (GaussInt::from(dd.clone()) - g * &gqj);
            n_scale *= dd;
        }
        let next_d = &dqj * dq;
        m = m * (GaussInt::from(next_d.clone()) - &gqj * gq);
        n_scale *= next_d;
        for _ in 0..excess.unsigned_abs() {
            if excess > 0 {
                n = -(n * &gqj);
                m_scale *= &dqj;
            } else {
                m = -(m * &gqj);
                n_scale *= &dqj;
            }
        }
        let (n, m) = (n * GaussInt::from(n_scale), m * GaussInt::from(m_scale));
        if m.is_zero() {
            return Err(Error::PoleInDenominator { index: j + 1 });
        }
        ratios.push((n, m));
        gqj = gqj * gq;
        dqj *= dq;
    }
    let (mut a, mut b) = (GaussInt::one(), GaussInt::one());
    for (n, m) in ratios.into_iter().rev() {
        let mb = m * &b;
        a = &mb + n * &a;
        b = mb;
    }
    Ok((a, b))
}

pub type GaussInt = Complex<BigInt>;

/// An exact complex rational `num / den` with `den > 0`, kept unreduced so
/// that products and quotients never need a gcd.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussFrac {
    pub num: GaussInt,
    pub den: BigInt,
}

impl GaussFrac {
    pub fn one() -> Self {
        Self { num: GaussInt::one(), den: BigInt::one() }
    }

    pub fn from_exact(c: &ExactC) -> Self {
        let (rd, id) = (c.re.denom(), c.im.denom());
        let l = num_integer::Integer::lcm(rd, id);
        Self { num: GaussInt::new(c.re.numer() * (&l / rd), c.im.numer() * (&l / id)), den: l }
    }

    pub fn from_c64(z: C64) -> Result<Self> {
        Ok(Self::from_exact(&to_exact(z)?))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { num: &self.num * &other.num, den: &self.den * &other.den }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.num.is_zero() {
            return Err(Error::InvalidParameter("division by an exact zero".into()));
        }
        let nrm = &other.num.re * &other.num.re + &other.num.im * &other.num.im;
        Ok(Self { num: &self.num * other.num.conj() * GaussInt::from(other.den.clone()), den: &self.den * nrm })
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { Self::one().div(self)? } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

pub fn to_exact_real(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("non-finite value {x}")))
}

pub fn to_exact(z: C64) -> Result<ExactC> {
    Ok(Complex::new(to_exact_real(z.re)?, to_exact_real(z.im)?))
}

pub fn from_exact(z: &ExactC) -> C64 {
    C64::new(ratio_to_f64(&z.re), ratio_to_f64(&z.im))
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact integer power, negative exponents allowed.
pub fn pow_exact<T: Clone + Num>(x: &T, e: i64) -> T {
    let base = if e < 0 { T::one() / x.clone() } else { x.clone() };
    let mut acc = T::one();
    for _ in 0..e.unsigned_abs() {
        acc = acc * base.clone();
    }
    acc
}

/// `_r phi_s` in floating point. Terminating input is summed exactly over
/// `n+1` terms; otherwise the series is summed until five consecutive terms
/// fall below `tol_abs`.
pub fn rphi(spec: &SeriesSpec, ctx: &QContext) -> Result<C64> {
    if let Some(n) = spec.terminating_degree() {
        return rphi_terminating_exact(spec, n);
    }
    let (r, s) = (spec.num.len(), spec.den.len());
    if r > s + 1 || (r == s + 1 && spec.z.norm() >= 1.0) {
        return Err(Error::DivergentSeries(format!(
            "{r}phi{s} with |z| = {} does not converge",
            spec.z.norm()
        )));
    }
    let q = spec.base;
    let excess = 1 + s as i32 - r as i32;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut qj = 1.0;
    let mut small = 0;
    for j in 0..ctx.max_terms {
        sum += term;
        if term.norm() < ctx.tol_abs * sum.norm().max(1.0) {
            small += 1;
            if small >= 5 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        let mut ratio = spec.z / (1.0 - qj * q);
        for a in &spec.num {
            ratio *= 1.0 - a * qj;
        }
        for b in &spec.den {
            let d = 1.0 - b * qj;
            if d == C64::new(0.0, 0.0) {
                return Err(Error::PoleInDenominator { index: j + 1 });
            }
            ratio /= d;
        }
        ratio *= (-qj).powi(excess);
        term *= ratio;
        qj *= q;
    }
    Err(Error::NonConvergent { what: "basic hypergeometric series".into(), terms: ctx.max_terms })
}

fn rphi_terminating_exact(spec: &SeriesSpec, n: usize) -> Result<C64> {
    let q = to_exact_real(spec.base)?;
    let qc = Complex::new(q.clone(), BigRational::zero());
    let exact_qn = Complex::new(pow_exact(&q, -(n as i64)), BigRational::zero());
    let mut replaced = false;
    let mut num = Vec::with_capacity(spec.num.len());
    for a in &spec.num {
        if !replaced && terminating_index(*a, spec.base) == Some(n) {
            num.push(exact_qn.clone());
            replaced = true;
        } else {
            num.push(to_exact(*a)?);
        }
    }
    let den = spec.den.iter().map(|b| to_exact(*b)).collect::<Result<Vec<_>>>()?;
    let z = to_exact(spec.z)?;
    rphi_sum_exact_c64(&num, &den, &qc, &z, n + 1)
}

/// Exact terminating `_r phi_s` from floating parameters; the caller supplies
/// the number of terms.
pub fn rphi_exact_terms(num: &[C64], den: &[C64], q: f64, z: C64, terms: usize) -> Result<C64> {
    let num = num.iter().map(|a| to_exact(*a)).collect::<Result<Vec<_>>>()?;
    let den = den.iter().map(|b| to_exact(*b)).collect::<Result<Vec<_>>>()?;
    let qc = Complex::new(to_exact_real(q)?, BigRational::zero());
    rphi_sum_exact_c64(&num, &den, &qc, &to_exact(z)?, terms)
}

/// Exact `q^{-n}` as a complex rational, for building terminating parameters.
pub fn exact_qpow(q: f64, e: i64) -> Result<ExactC> {
    Ok(Complex::new(pow_exact(&to_exact_real(q)?, e), BigRational::zero()))
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn exact_one() -> ExactC {
    Complex::new(BigRational::one(), BigRational::zero())
}
