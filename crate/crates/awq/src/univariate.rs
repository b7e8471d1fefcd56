//! Univariate special functions: Al-Salam-Chihara polynomials in base `q`
//! and `q^{-1}`, their weights, the eigenfunctions `v` and `ṽ`, Askey-Wilson
//! polynomials and the matrix elements `P_β` computed by three routes.

use crate::error::{Error, Result};
use crate::operators::{a_beta, b_beta, lambda, mu};
use crate::qseries::{
    pow_exact, qpoch, qpoch_inf, qpoch_inverted, rphi_sum, rphi_sum_exact_c64, rphi_sum_frac, to_exact_real,
    ExactC, GaussFrac, QContext, ScaledProduct, C64,
};
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-12;

/// Unvalidated parameter tuple `(s, t, u, k, q)`. Used directly for the dual
/// tuple `β̃ = (t, s, u, k, 1/q)`, which leaves the validated domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta {
    pub s: C64,
    pub t: C64,
    pub u: C64,
    pub k: f64,
    pub q: f64,
}

impl Beta {
    pub fn dual(&self) -> Beta {
        Beta { s: self.t, t: self.s, u: self.u, k: self.k, q: 1.0 / self.q }
    }

    /// Askey-Wilson parameters `(a, b, c, d) = (q^k s, q^k/s, qu/t, q/(ut))`.
    pub fn aw_parameters(&self) -> [C64; 4] {
        let qk = self.q.powf(self.k);
        [qk * self.s, qk / self.s, self.q * self.u / self.t, self.q / (self.u * self.t)]
    }
}

/// Validated `β`: `s, u` on the unit circle, `t` real with `|t| ≥ 1/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    beta: Beta,
}

impl BetaParams {
    pub fn new(s: C64, t: f64, u: C64, k: f64, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q = {q} must lie in (0,1)")));
        }
        if (s.norm() - 1.0).abs() > UNIT_TOL || (u.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter("s and u must lie on the unit circle".into()));
        }
        if !t.is_finite() || t.abs() < 1.0 / q - UNIT_TOL {
            return Err(Error::InvalidParameter(format!("|t| = {} is below 1/q", t.abs())));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k = {k} must be positive")));
        }
        Ok(Self { beta: Beta { s, t: C64::new(t, 0.0), u, k, q } })
    }

    /// `s = e^{iθ_s}`, `u = e^{iθ_u}`.
    pub fn from_angles(theta_s: f64, t: f64, theta_u: f64, k: f64, q: f64) -> Result<Self> {
        Self::new(C64::from_polar(1.0, theta_s), t, C64::from_polar(1.0, theta_u), k, q)
    }

    pub fn beta(&self) -> &Beta {
        &self.beta
    }

    pub fn s(&self) -> C64 {
        self.beta.s
    }

    pub fn t(&self) -> f64 {
        self.beta.t.re
    }

    pub fn u(&self) -> C64 {
        self.beta.u
    }

    pub fn k(&self) -> f64 {
        self.beta.k
    }

    pub fn q(&self) -> f64 {
        self.beta.q
    }

    pub fn grid_point(&self, m: usize) -> GridPointY {
        GridPointY::new(m, self.t(), self.k(), self.q())
    }
}

/// Point `y = t q^{-k-2m}` of the discrete spectrum `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPointY {
    pub m: usize,
    pub value: f64,
}

impl GridPointY {
    pub fn new(m: usize, t: f64, k: f64, q: f64) -> Self {
        Self { m, value: t * q.powf(-k - 2.0 * m as f64) }
    }
}

/// `λ_{x,s} = μ_x - μ_s` with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueLambda {
    pub value: C64,
    pub mu_x: C64,
    pub mu_s: C64,
}

impl EigenvalueLambda {
    pub fn new(x: C64, s: C64, q: f64) -> Self {
        let (mu_x, mu_s) = (mu(x, q), mu(s, q));
        Self { value: mu_x - mu_s, mu_x, mu_s }
    }
}

fn exact_real(x: f64) -> Result<ExactC> {
    Ok(Complex::new(to_exact_real(x)?, BigRational::zero()))
}

fn check_nonzero(x: C64, what: &str) -> Result<()> {
    if x.norm() == 0.0 || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be finite and nonzero")));
    }
    Ok(())
}

/// `Q_n(x; a, b | p)` as the terminating `₃φ₂`, summed exactly.
pub fn asc(n: usize, x: C64, a: C64, b: C64, p: f64) -> Result<C64> {
    check_nonzero(x, "x")?;
    let [x, a, b, p] = [x, a, b, C64::new(p, 0.0)].map(GaussFrac::from_c64);
    asc_frac(n, &x?, &a?, &b?, &p?)
}

fn asc_frac(n: usize, x: &GaussFrac, a: &GaussFrac, b: &GaussFrac, p: &GaussFrac) -> Result<C64> {
    let num = [p.pow(-(n as i64))?, a.mul(x), a.div(x)?];
    let den = [a.mul(b), GaussFrac::from_exact(&ExactC::zero())];
    rphi_sum_frac(&num, &den, p, p, n + 1)
}

/// `Q_n(y; a, b | q^{-1})`, summed exactly with the reciprocal base formed exactly.
pub fn asc_qinv(n: usize, y: C64, a: C64, b: C64, q: f64) -> Result<C64> {
    check_nonzero(y, "y")?;
    let [y, a, b, q] = [y, a, b, C64::new(q, 0.0)].map(GaussFrac::from_c64);
    let qinv = GaussFrac::one().div(&q?)?;
    asc_frac(n, &y?, &a?, &b?, &qinv)
}

/// `Q_n(a q^{-m}; a, b | q^{-1})` with the grid point formed exactly.
pub fn asc_qinv_grid(n: usize, m: usize, a: C64, b: C64, q: f64) -> Result<C64> {
    let qinv = GaussFrac::one().div(&GaussFrac::from_c64(C64::new(q, 0.0))?)?;
    let ae = GaussFrac::from_c64(a)?;
    let y = ae.mul(&qinv.pow(m as i64)?);
    asc_frac(n, &y, &ae, &GaussFrac::from_c64(b)?, &qinv)
}

/// One step of `(x+1/x)Q_n = (1/a)(1-ab p^n)Q_{n+1} + (a+b)p^n Q_n + a(1-p^n)Q_{n-1}`.
pub fn recurrence_step(n: usize, x: C64, a: C64, b: C64, p: f64, qn: C64, qn_minus_1: C64) -> Result<C64> {
    let pn = p.powi(n as i32);
    let lead = 1.0 - a * b * pn;
    if lead.norm() < 1e-300 {
        return Err(Error::CoefficientVanishes { n });
    }
    let rhs = (x + x.inv()) * qn - (a + b) * pn * qn - a * (1.0 - pn) * qn_minus_1;
    Ok(a * rhs / lead)
}

/// `w(x; a, b | p) = (p, ab, x^{±2}; p)_∞ / (a x^{±1}, b x^{±1}; p)_∞`, real on `𝕋`.
pub fn asc_weight_w(x: C64, a: C64, b: C64, p: f64, ctx: &QContext) -> Result<f64> {
    if a.norm() >= 1.0 || b.norm() >= 1.0 {
        return Err(Error::PoleOnTorus(format!("|a| = {}, |b| = {}", a.norm(), b.norm())));
    }
    let mut acc = ScaledProduct::default();
    for arg in [C64::new(p, 0.0), a * b, x * x, (x * x).inv()] {
        acc.mul_exp(crate::qseries::ln_qpoch_inf(arg, p, ctx)?);
    }
    for arg in [a * x, a / x, b * x, b / x] {
        acc.mul_exp(-crate::qseries::ln_qpoch_inf(arg, p, ctx)?);
    }
    Ok(acc.value().re)
}

/// Discrete weight `W(a p^{-m}; a, b; p)` for `ab > 1`, `pb < a`, in log space.
pub fn asc_weight_discrete(m: usize, a: f64, b: f64, p: f64, ctx: &QContext) -> Result<f64> {
    if a * b <= 1.0 {
        return Err(Error::DomainViolation(format!("ab = {} must exceed 1", a * b)));
    }
    // pb < a for positive a; the (a, b) -> (-a, -b) mirror covers negative t
    if p * b / a >= 1.0 {
        return Err(Error::DomainViolation(format!("pb = {} must be below a = {a}", p * b)));
    }
    let r = |v: f64| C64::new(v, 0.0);
    let mut acc = ScaledProduct::default();
    let pm = p.powi(m as i32);
    acc.mul(r((1.0 - pm * pm / (a * a)) / (1.0 - 1.0 / (a * a))));
    acc.mul(qpoch(r(1.0 / (a * a)), p, m));
    acc.mul(qpoch(r(1.0 / (a * b)), p, m));
    acc.div(qpoch(r(p), p, m));
    acc.div(qpoch(r(b * p / a), p, m));
    acc.mul_exp(crate::qseries::ln_qpoch_inf(r(b * p / a), p, ctx)?);
    acc.mul_exp(-crate::qseries::ln_qpoch_inf(r(p / (a * a)), p, ctx)?);
    acc.mul_exp(r(m as f64 * (b / a).abs().ln() + (m * m) as f64 * p.ln()));
    let sign = if b / a < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * acc.value().re)
}

/// `w_{k,s}(x) = w(x; q^k s, q^k/s | q^2)`.
pub fn weight_w(x: C64, k: f64, s: C64, q: f64, ctx: &QContext) -> Result<f64> {
    let qk = q.powf(k);
    asc_weight_w(x, qk * s, qk / s, q * q, ctx)
}

/// `w̃_{k,t}(t q^{-k-2m})` as displayed for the grid `S`.
pub fn weight_wtilde(m: usize, k: f64, t: f64, q: f64, ctx: &QContext) -> Result<f64> {
    let r = |v: f64| C64::new(v, 0.0);
    let q2 = q * q;
    let (t2, q2k) = (t * t, q.powf(2.0 * k));
    let mut acc = ScaledProduct::default();
    acc.mul(r((1.0 - q.powf(4.0 * m as f64 + 2.0 * k) / t2) / (1.0 - q2k / t2)));
    acc.mul(qpoch(r(q2k / t2), q2, m));
    acc.mul(qpoch(r(q2k), q2, m));
    acc.div(qpoch(r(q2), q2, m));
    acc.mul_exp(crate::qseries::ln_qpoch_inf(r(q.powi(2 * m as i32 + 2) / t2), q2, ctx)?);
    acc.mul_exp(-crate::qseries::ln_qpoch_inf(r(q2k * q2 / t2), q2, ctx)?);
    acc.mul_exp(r(-(m as f64) * t2.ln() + 2.0 * (m * m) as f64 * q.ln()));
    Ok(acc.value().re)
}

/// `ω(n) = q^{n(k-1)} (q^2;q^2)_n / (q^{2k};q^2)_n`; valid for any `q > 0`, `q ≠ 1`.
pub fn omega(n: usize, k: f64, q: f64) -> f64 {
    let q2 = q * q;
    let ratio = qpoch(C64::new(q2, 0.0), q2, n) / qpoch(C64::new(q.powf(2.0 * k), 0.0), q2, n);
    q.powf(n as f64 * (k - 1.0)) * ratio.re
}

/// `v_{x,s}(0..len)` from the three-term action of `π(Y_s)`, which `v` solves
/// with `v(0) = 1`, `v(-1) = 0`.
pub fn v_sequence(x: C64, s: C64, k: f64, q: f64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut vs = VSeq::new(x, s, k, q);
    for _ in 0..len {
        out.push(vs.next_value());
    }
    out
}

/// Streaming generator for `v_{x,s}(n)`.
#[derive(Debug, Clone)]
pub struct VSeq {
    lam: C64,
    ss: C64,
    k: f64,
    q: f64,
    n: usize,
    prev: C64,
    cur: C64,
}

impl VSeq {
    pub fn new(x: C64, s: C64, k: f64, q: f64) -> Self {
        Self { lam: x + x.inv() - s - s.inv(), ss: s + s.inv(), k, q, n: 0, prev: C64::zero(), cur: C64::one() }
    }

    /// Returns `v(n)` and advances to `n + 1`.
    pub fn next_value(&mut self) -> C64 {
        let out = self.cur;
        let (q, k) = (self.q, self.k);
        let nf = self.n as f64;
        let back = q.powf(-(k - 1.0) / 2.0) * (1.0 - q.powf(2.0 * k + 2.0 * nf - 2.0));
        let diag = self.ss * (q.powf(k + 2.0 * nf) - 1.0);
        let fwd = q.powf((k - 1.0) / 2.0) * (1.0 - q.powf(2.0 * nf + 2.0));
        let next = (self.lam * self.cur - back * self.prev - diag * self.cur) / fwd;
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        out
    }
}

/// `v_{x,s}(n)`, generated by the eigenvalue recurrence.
pub fn v_eig(n: usize, x: C64, s: C64, k: f64, q: f64) -> Result<C64> {
    check_nonzero(x, "x")?;
    Ok(v_sequence(x, s, k, q, n + 1)[n])
}

/// `v_{x,s}(n)` from its defining `₃φ₂` (exact sum); the independent oracle
/// for [`v_eig`]. Accepts any base `q > 0`, `q ≠ 1`.
pub fn v_eig_series(n: usize, x: C64, s: C64, k: f64, q: f64) -> Result<C64> {
    let qk = q.powf(k);
    let q2 = q * q;
    let pre = (q.powf(-(3.0 * k - 1.0) / 2.0) / s).powi(n as i32) * qpoch(C64::new(q.powf(2.0 * k), 0.0), q2, n)
        / qpoch(C64::new(q2, 0.0), q2, n);
    Ok(pre * asc(n, x, s * qk, qk / s, q2)?)
}

/// `ṽ_{y,t}(n)` at the grid point `y = t q^{-k-2m}` in the terminating `₂φ₁` form
/// `γ̃_n c̃_m ₂φ₁(q^{-2m}, q^{2m+2k}/t^2; q^2/t^2; q^2, q^{2n+2})`.
pub fn vtilde_grid(n: usize, m: usize, t: f64, k: f64, q: f64) -> Result<C64> {
    let q2 = q * q;
    let r = |v: f64| C64::new(v, 0.0);
    let gamma = r(t).powi(-(n as i32)) * q.powf(n as f64 * (3.0 - k) / 2.0) * qpoch(r(q.powf(2.0 * k)), q2, n)
        / qpoch(r(q2), q2, n);
    let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
    let cm = sign * t.powi(2 * m as i32) * q.powf(-((m * (m + 1)) as f64)) * qpoch(r(q2 / (t * t)), q2, m)
        / qpoch(r(q.powf(2.0 * k)), q2, m);
    let pe = exact_real(q)?;
    let p = &pe * &pe;
    let t2 = exact_real(t * t)?;
    let q2k = exact_real(q.powf(2.0 * k))?;
    let num = [pow_exact(&p, -(m as i64)), pow_exact(&p, m as i64) * &q2k / &t2];
    let den = [&p / &t2];
    let z = pow_exact(&p, n as i64 + 1);
    let phi = rphi_sum_exact_c64(&num, &den, &p, &z, m + 1)?;
    Ok(gamma * cm * phi)
}

/// `ṽ_{y,t}(n) = v_{y,t,k,1/q}(n)` for arbitrary nonzero `y`, via the base-inverted
/// Al-Salam-Chihara polynomial (no summation in a base above one).
pub fn vtilde_eig(n: usize, y: C64, t: f64, k: f64, q: f64) -> Result<C64> {
    check_nonzero(y, "y")?;
    let qk = q.powf(k);
    let q2 = q * q;
    let r = |v: f64| C64::new(v, 0.0);
    // (q^{-2k};q^{-2})_n / (q^{-2};q^{-2})_n via base inversion
    let ratio = qpoch_inverted(&r(q.powf(2.0 * k).recip()), &r(q2), n) / qpoch_inverted(&r(q2.recip()), &r(q2), n);
    let pre = (r(q.powf((3.0 * k - 1.0) / 2.0) / t)).powi(n as i32) * ratio;
    Ok(pre * asc_qinv(n, y, r(t / qk), r(1.0 / (qk * t)), q2)?)
}

/// Askey-Wilson `p_n(x; a, b, c, d | p)` from the terminating `₄φ₃`, summed exactly.
pub fn aw(n: usize, x: C64, a: C64, b: C64, c: C64, d: C64, p: f64) -> Result<C64> {
    check_nonzero(x, "x")?;
    check_nonzero(a, "a")?;
    for (name, v) in [("ab", a * b), ("ac", a * c), ("ad", a * d)] {
        for j in 0..n {
            if (1.0 - v * p.powi(j as i32)).norm() < 1e-14 {
                return Err(Error::ParameterPole(format!("{name} = p^-{j}")));
            }
        }
    }
    let [pe, xe, ae, be, ce, de] = [C64::new(p, 0.0), x, a, b, c, d].map(GaussFrac::from_c64);
    let (pe, xe, ae, be, ce, de) = (pe?, xe?, ae?, be?, ce?, de?);
    let (ab, ac, ad) = (ae.mul(&be), ae.mul(&ce), ae.mul(&de));
    let num = [pe.pow(-(n as i64))?, ab.mul(&ce).mul(&de).mul(&pe.pow(n as i64 - 1)?), ae.mul(&xe), ae.div(&xe)?];
    let den = [ab, ac, ad];
    let phi = rphi_sum_frac(&num, &den, &pe, &pe, n + 1)?;
    // a pure product: floating point loses nothing here
    let pre = qpoch(a * b, p, n) * qpoch(a * c, p, n) * qpoch(a * d, p, n) / a.powi(n as i32);
    Ok(pre * phi)
}

/// Rate `ρ = q max(|x|, 1/|x|)/|t|` of geometric decay of the `P_β` summand.
pub fn pbeta_rate(x: C64, beta: &Beta) -> f64 {
    let r = x.norm().max(1.0 / x.norm());
    beta.q * r / beta.t.norm()
}

/// Tail policy: stop once five consecutive terms are below `tol_abs (1 - ρ)`
/// relative to the running sum and the last observed ratios are consistent
/// with the asymptotic rate `ρ` (slack 0.1).
#[derive(Debug, Clone)]
struct Tail {
    rho: f64,
    tol: f64,
    last: Vec<f64>,
}

impl Tail {
    fn new(rho: f64, tol_abs: f64) -> Self {
        Self { rho, tol: tol_abs * (1.0 - rho), last: Vec::new() }
    }

    fn done(&mut self, term: f64, scale: f64) -> bool {
        self.last.push(term);
        if self.last.len() > 6 {
            self.last.remove(0);
        }
        if self.last.len() < 6 {
            return false;
        }
        let bound = self.tol * scale.max(1.0);
        if self.last[1..].iter().any(|t| *t >= bound) {
            return false;
        }
        let max_ratio = self.last.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
        // near-zero terms make ratios meaningless; accept once far below the bound
        max_ratio <= self.rho + 0.1 || self.last[1..].iter().all(|t| *t < bound * 1e-6)
    }
}

/// `P_β(x, t q^{-k-2m}) = Σ_n ω(n) v_{x,s}(n) ṽ_{y,t}(n) u^n`.
///
/// For `|x| ≠ 1` the summand decays like `ρ^n` with `ρ` from [`pbeta_rate`];
/// at `x = s q^{k+2m'}` this is the condition `|t| > q^{1-k-2m'}`.
pub fn pbeta_sum(x: C64, m: usize, beta: &BetaParams, ctx: &QContext) -> Result<C64> {
    let b = beta.beta();
    check_nonzero(x, "x")?;
    let rho = pbeta_rate(x, b);
    if rho >= 1.0 - 1e-9 {
        return Err(Error::NonConvergent { what: format!("P_beta sum at |x| = {} (rate {rho})", x.norm()), terms: 0 });
    }
    let (k, q, t) = (b.k, b.q, beta.t());
    let mut vs = VSeq::new(x, b.s, k, q);
    let mut tail = Tail::new(rho, ctx.tol_abs);
    let mut sum = C64::zero();
    let mut un = C64::one();
    for n in 0..ctx.max_terms {
        let term = omega(n, k, q) * vs.next_value() * vtilde_grid(n, m, t, k, q)? * un;
        sum += term;
        if !sum.is_finite() {
            break;
        }
        if tail.done(term.norm(), sum.norm()) {
            return Ok(sum);
        }
        un *= b.u;
    }
    Err(Error::NonConvergent { what: "P_beta sum".into(), terms: ctx.max_terms })
}

/// `P_β(x, t q^{-k}) = (q^{k+1} u s^{±1}/t; q^2)_∞ / (q u x^{±1}/t; q^2)_∞`.
pub fn pbeta_at_base(x: C64, beta: &Beta, ctx: &QContext) -> Result<C64> {
    let (q, k, s, t, u) = (beta.q, beta.k, beta.s, beta.t, beta.u);
    let q2 = q * q;
    let base = q.powf(k + 1.0) * u / t;
    let num = qpoch_inf(base * s, q2, ctx)? * qpoch_inf(base / s, q2, ctx)?;
    let den = qpoch_inf(q * u * x / t, q2, ctx)? * qpoch_inf(q * u / (x * t), q2, ctx)?;
    Ok(num / den)
}

/// Closed form `(-1)^m d^{-m} q^{-m(m-1)} (ac q^{2m}, bc q^{2m}; q^2)_∞ /
/// ((ab;q^2)_m (c x^{±1};q^2)_∞) p_m(x; a, c, b, d | q^2)`.
pub fn pbeta_closed(x: C64, m: usize, beta: &Beta, ctx: &QContext) -> Result<C64> {
    let q = beta.q;
    let q2 = q * q;
    let [a, b, c, d] = beta.aw_parameters();
    let q2m = q2.powi(m as i32);
    let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
    let pre = sign * d.powi(-(m as i32)) * q.powf(-((m * m) as f64 - m as f64))
        * qpoch_inf(a * c * q2m, q2, ctx)?
        * qpoch_inf(b * c * q2m, q2, ctx)?
        / (qpoch(a * b, q2, m) * qpoch_inf(c * x, q2, ctx)? * qpoch_inf(c / x, q2, ctx)?);
    Ok(pre * aw(m, x, a, c, b, d, q2)?)
}

/// `P_β(x, y_j)` for `j = 0..=m` by the recurrence in `y` (difference operator
/// `ρ̃(Y_{s,u})` with coefficients at `β̃`), started from the base value and
/// the boundary `P_β(x, t q^{-k+2}) = 0`.
pub fn pbeta_recurrence(x: C64, m: usize, beta: &Beta, ctx: &QContext) -> Result<Vec<C64>> {
    let dual = beta.dual();
    let q = beta.q;
    let lam = lambda(x, beta.s, q);
    let mut out = vec![pbeta_at_base(x, beta, ctx)?];
    let mut prev = C64::zero();
    for j in 0..m {
        let y = beta.t * q.powf(-beta.k - 2.0 * j as f64);
        let up = a_beta(y, &dual)?;
        let down = if j == 0 { C64::zero() } else { a_beta(y.inv(), &dual)? };
        let cur = out[j];
        let next = ((lam - b_beta(y, &dual)?) * cur - down * prev) / up;
        prev = cur;
        out.push(next);
    }
    Ok(out)
}

/// Both sides of the duality `P_β(s q^{k+2m'}, t q^{-k-2m}) = P_β̃(t q^{-k-2m}, s q^{k+2m'})`.
///
/// The left side is the closed Askey-Wilson form. The right side starts from the
/// defining sum at `m' = 0` (convergent iff `|t| > q^{1-k}`) and climbs in `m'`
/// with the recurrence of `ρ̃(Y)` for `β̃`, which is the difference equation of
/// `ρ(Ỹ_{t,u})` for `β` at `x = s q^{k+2j}`.
pub fn duality_pair(m: usize, m_prime: usize, beta: &BetaParams, ctx: &QContext) -> Result<(C64, C64)> {
    let b = beta.beta();
    let (q, k, s) = (b.q, b.k, b.s);
    let x_at = |j: usize| s * q.powf(k + 2.0 * j as f64);
    let lhs = pbeta_closed(x_at(m_prime), m, b, ctx)?;
    let y = beta.grid_point(m).value;
    let lam = lambda(b.t, C64::new(y, 0.0), q);
    let mut cur = pbeta_sum(x_at(0), m, beta, ctx)?;
    let mut prev = C64::zero();
    for j in 0..m_prime {
        let x = x_at(j);
        let down = if j == 0 { C64::zero() } else { a_beta(x.inv(), b)? };
        let next = ((lam - b_beta(x, b)?) * cur - down * prev) / a_beta(x, b)?;
        prev = cur;
        cur = next;
    }
    Ok((lhs, cur))
}

/// Both sides of the terminating `₄φ₃` inversion identity
/// `₄φ₃(q^{-m}, q^{-m'}, a1, a2; b1, b2, b3; q, q) = ₄φ₃(q^m, q^{m'}, 1/a1, 1/a2; 1/b1, 1/b2, 1/b3; 1/q, 1/q)`
/// with `b3 = a1 a2 / (b1 b2 q^{m+m'-1})` (balanced), evaluated exactly at
/// rational data. Term-by-term base inversion multiplies the `j`-th term by
/// `(b1 b2 b3 q^{m+m'-1}/(a1 a2))^j`, so balance is exactly what is needed.
pub fn phi43_inversion(
    m: usize,
    m_prime: usize,
    a1: &BigRational,
    a2: &BigRational,
    b1: &BigRational,
    b2: &BigRational,
    q: &BigRational,
) -> Result<(BigRational, BigRational)> {
    let b3 = a1 * a2 / (b1 * b2 * pow_exact(q, m as i64 + m_prime as i64 - 1));
    phi43_pair(m, m_prime, a1, a2, b1, b2, &b3, q)
}

/// Both sides of the `₄φ₃` inversion for an explicit `b3`.
#[allow(clippy::too_many_arguments)]
pub fn phi43_pair(
    m: usize,
    m_prime: usize,
    a1: &BigRational,
    a2: &BigRational,
    b1: &BigRational,
    b2: &BigRational,
    b3: &BigRational,
    q: &BigRational,
) -> Result<(BigRational, BigRational)> {
    let qm = pow_exact(q, m as i64);
    let qmp = pow_exact(q, m_prime as i64);
    let terms = m.min(m_prime) + 1;
    let lhs = rphi_sum(
        &[qm.recip(), qmp.recip(), a1.clone(), a2.clone()],
        &[b1.clone(), b2.clone(), b3.clone()],
        q,
        q,
        terms,
    )?;
    let qi = q.recip();
    let rhs = rphi_sum(
        &[qm, qmp, a1.recip(), a2.recip()],
        &[b1.recip(), b2.recip(), b3.recip()],
        &qi,
        &qi,
        terms,
    )?;
    Ok((lhs, rhs))
}
