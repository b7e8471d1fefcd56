//! Exact model of `U_q(su(1,1))` in PBW normal form `F^a K^b E^c`.
//!
//! The formal parameters `(q, s, t, u)` are specialised to rationals; `q` is
//! stored as `r^2` so that `q^{1/2} = r` stays rational. Identities are
//! checked at several random specialisations (Schwartz-Zippel style).

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub type Rat = BigRational;

/// PBW monomial `F^f K^k E^e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Mono {
    pub f: u32,
    pub k: i32,
    pub e: u32,
}

impl Mono {
    pub const ONE: Mono = Mono { f: 0, k: 0, e: 0 };

    pub fn new(f: u32, k: i32, e: u32) -> Self {
        Self { f, k, e }
    }

    /// The generator word `F..F K..K E..E` spelling this monomial.
    pub fn word(&self) -> Vec<Gen> {
        let mut w = vec![Gen::F; self.f as usize];
        let kg = if self.k >= 0 { Gen::K } else { Gen::Kinv };
        w.extend(std::iter::repeat(kg).take(self.k.unsigned_abs() as usize));
        w.extend(std::iter::repeat(Gen::E).take(self.e as usize));
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Gen {
    K,
    Kinv,
    E,
    F,
}

/// Rational values for the formal parameters. `r` is `q^{1/2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Specialization {
    pub r: Rat,
    pub s: Rat,
    pub t: Rat,
    pub u: Rat,
}

impl Specialization {
    pub fn new(r: Rat, s: Rat, t: Rat, u: Rat) -> Result<Self> {
        if !(r.is_positive() && r < Rat::one()) {
            return Err(Error::InvalidParameter(format!("q^(1/2) = {r} must lie in (0,1)")));
        }
        if s.is_zero() || t.is_zero() || u.is_zero() {
            return Err(Error::InvalidParameter("s, t, u must be nonzero".into()));
        }
        Ok(Self { r, s, t, u })
    }

    pub fn q(&self) -> Rat {
        &self.r * &self.r
    }

    /// Unit-circle conjugation model: `s -> 1/s`, `u -> 1/u`, `t` real.
    pub fn conjugate(&self) -> Self {
        Self { r: self.r.clone(), s: self.s.recip(), t: self.t.clone(), u: self.u.recip() }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let den: i64 = rng.gen_range(2..=13);
        let num: i64 = rng.gen_range(1..den);
        let r = Rat::new(BigInt::from(num), BigInt::from(den));
        let mut nonzero = || loop {
            let p: i64 = rng.gen_range(-19..=19);
            let d: i64 = rng.gen_range(1..=17);
            if p != 0 {
                break Rat::new(BigInt::from(p), BigInt::from(d));
            }
        };
        let (s, t, u) = (nonzero(), nonzero(), nonzero());
        Self { r, s, t, u }
    }

    pub fn algebra(&self) -> Uq {
        Uq::new(self.r.clone())
    }
}

impl fmt::Display for Specialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q^(1/2)={} s={} t={} u={}", self.r, self.s, self.t, self.u)
    }
}

/// Canonical element: map from PBW monomials to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlgebraElement {
    terms: BTreeMap<Mono, Rat>,
}

impl AlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(Mono::ONE, Rat::one())
    }

    pub fn monomial(m: Mono, c: Rat) -> Self {
        let mut x = Self::zero();
        x.add_term(m, c);
        x
    }

    pub fn scalar(c: Rat) -> Self {
        Self::monomial(Mono::ONE, c)
    }

    pub fn add_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: Mono) -> Rat {
        self.terms.get(&m).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_term(*m, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn as_tensor(&self) -> TensorElement {
        let mut t = TensorElement::zero(1);
        for (m, c) in &self.terms {
            t.add_term(vec![*m], c.clone());
        }
        t
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> =
            self.terms.iter().map(|(m, c)| format!("({c}) F^{} K^{} E^{}", m.f, m.k, m.e)).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Element of `U_q^{⊗d}`: map from `d`-tuples of monomials to coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorElement {
    degree: usize,
    terms: BTreeMap<Vec<Mono>, Rat>,
}

impl TensorElement {
    pub fn zero(degree: usize) -> Self {
        Self { degree, terms: BTreeMap::new() }
    }

    pub fn one(degree: usize) -> Self {
        let mut t = Self::zero(degree);
        t.add_term(vec![Mono::ONE; degree], Rat::one());
        t
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Mono>, &Rat)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, key: Vec<Mono>, c: Rat) {
        debug_assert_eq!(key.len(), self.degree);
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_degree(self, other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self::zero(self.degree);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    /// Outer tensor product `self ⊗ other`.
    pub fn otimes(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.degree + other.degree);
        for (k1, c1) in &self.terms {
            for (k2, c2) in &other.terms {
                let mut key = k1.clone();
                key.extend_from_slice(k2);
                out.add_term(key, c1 * c2);
            }
        }
        out
    }

    /// Tensor product of single-slot factors.
    pub fn product_of(factors: &[AlgebraElement]) -> Self {
        factors.iter().fold(Self::one(0), |acc, x| acc.otimes(&x.as_tensor()))
    }

    /// `1^{⊗left} ⊗ self ⊗ 1^{⊗right}`.
    pub fn pad(&self, left: usize, right: usize) -> Self {
        Self::one(left).otimes(self).otimes(&Self::one(right))
    }
}

fn check_degree(a: &TensorElement, b: &TensorElement) -> Result<()> {
    if a.degree != b.degree {
        return Err(Error::DegreeMismatch { lhs: a.degree, rhs: b.degree });
    }
    Ok(())
}

/// Multiplication context for a fixed rational `q = r^2`.
#[derive(Debug, Clone)]
pub struct Uq {
    pub r: Rat,
    pub q: Rat,
    qinv: Rat,
    /// `1/(q - q^{-1})`
    comm: Rat,
}

impl Uq {
    pub fn new(r: Rat) -> Self {
        let q = &r * &r;
        let qinv = q.recip();
        let comm = (&q - &qinv).recip();
        Self { r, q, qinv, comm }
    }

    fn qpow(&self, e: i64) -> Rat {
        crate::qseries::pow_exact(&self.q, e)
    }

    pub fn generator(&self, g: Gen) -> AlgebraElement {
        let m = match g {
            Gen::K => Mono::new(0, 1, 0),
            Gen::Kinv => Mono::new(0, -1, 0),
            Gen::E => Mono::new(0, 0, 1),
            Gen::F => Mono::new(1, 0, 0),
        };
        AlgebraElement::monomial(m, Rat::one())
    }

    /// `K^k` for any integer `k`.
    pub fn k_power(&self, k: i32) -> AlgebraElement {
        AlgebraElement::monomial(Mono::new(0, k, 0), Rat::one())
    }

    /// Right multiplication by one generator, rewriting into PBW order.
    pub fn mul_gen(&self, x: &AlgebraElement, g: Gen) -> AlgebraElement {
        let mut out = AlgebraElement::zero();
        for (m, c) in x.terms() {
            match g {
                Gen::E => out.add_term(Mono::new(m.f, m.k, m.e + 1), c.clone()),
                Gen::K => out.add_term(Mono::new(m.f, m.k + 1, m.e), c * self.qpow(-(m.e as i64))),
                Gen::Kinv => out.add_term(Mono::new(m.f, m.k - 1, m.e), c * self.qpow(m.e as i64)),
                Gen::F => {
                    // K^k F = q^{-k} F K^k and E^e F = F E^e + sum_i E^i [E,F] E^{e-1-i}
                    out.add_term(Mono::new(m.f + 1, m.k, m.e), c * self.qpow(-(m.k as i64)));
                    for i in 0..m.e as i64 {
                        let base = c * &self.comm;
                        out.add_term(Mono::new(m.f, m.k + 2, m.e - 1), &base * self.qpow(-2 * i));
                        out.add_term(Mono::new(m.f, m.k - 2, m.e - 1), -(&base * self.qpow(2 * i)));
                    }
                }
            }
        }
        out
    }

    pub fn normal_form(&self, word: &[Gen]) -> AlgebraElement {
        word.iter().fold(AlgebraElement::one(), |acc, g| self.mul_gen(&acc, *g))
    }

    pub fn mul(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        let mut out = AlgebraElement::zero();
        for (m, c) in y.terms() {
            let mut part = x.scale(c);
            for _ in 0..m.f {
                part = self.mul_gen(&part, Gen::F);
            }
            let mut shifted = AlgebraElement::zero();
            for (pm, pc) in part.terms() {
                // E^e K^k = q^{-e k} K^k E^e
                let factor = self.qpow(-(pm.e as i64) * m.k as i64);
                shifted.add_term(Mono::new(pm.f, pm.k + m.k, pm.e + m.e), pc * factor);
            }
            out = out.add(&shifted);
        }
        out
    }

    pub fn mul_tensor(&self, x: &TensorElement, y: &TensorElement) -> Result<TensorElement> {
        check_degree(x, y)?;
        let mut out = TensorElement::zero(x.degree);
        for (k1, c1) in &x.terms {
            for (k2, c2) in &y.terms {
                let mut partial: Vec<(Vec<Mono>, Rat)> = vec![(Vec::new(), c1 * c2)];
                for (a, b) in k1.iter().zip(k2) {
                    let prod = self.mul(
                        &AlgebraElement::monomial(*a, Rat::one()),
                        &AlgebraElement::monomial(*b, Rat::one()),
                    );
                    let mut next = Vec::with_capacity(partial.len() * prod.len());
                    for (key, c) in &partial {
                        for (m, v) in prod.terms() {
                            let mut nk = key.clone();
                            nk.push(*m);
                            next.push((nk, c * v));
                        }
                    }
                    partial = next;
                }
                for (k, c) in partial {
                    out.add_term(k, c);
                }
            }
        }
        Ok(out)
    }

    /// `Δ(F^f K^k E^e) = Δ(F)^f Δ(K)^k Δ(E)^e`.
    pub fn coproduct_mono(&self, m: Mono) -> TensorElement {
        let g = |a: Mono, b: Mono| {
            let mut t = TensorElement::zero(2);
            t.add_term(vec![a, b], Rat::one());
            t
        };
        let (k, kinv) = (Mono::new(0, 1, 0), Mono::new(0, -1, 0));
        let mut delta_f = g(k, Mono::new(1, 0, 0));
        delta_f = delta_f.add(&g(Mono::new(1, 0, 0), kinv)).expect("same degree");
        let mut delta_e = g(k, Mono::new(0, 0, 1));
        delta_e = delta_e.add(&g(Mono::new(0, 0, 1), kinv)).expect("same degree");
        let mut acc = TensorElement::one(2);
        for _ in 0..m.f {
            acc = self.mul_tensor(&acc, &delta_f).expect("same degree");
        }
        acc = self.mul_tensor(&acc, &g(Mono::new(0, m.k, 0), Mono::new(0, m.k, 0))).expect("same degree");
        for _ in 0..m.e {
            acc = self.mul_tensor(&acc, &delta_e).expect("same degree");
        }
        acc
    }

    pub fn coproduct(&self, x: &AlgebraElement) -> TensorElement {
        self.apply_coproduct_at(&x.as_tensor(), 0)
    }

    /// Apply `Δ` to tensor slot `slot`, raising the degree by one.
    pub fn apply_coproduct_at(&self, x: &TensorElement, slot: usize) -> TensorElement {
        assert!(slot < x.degree, "slot {slot} outside degree {}", x.degree);
        let mut cache: HashMap<Mono, TensorElement> = HashMap::new();
        let mut out = TensorElement::zero(x.degree + 1);
        for (key, c) in &x.terms {
            let d = cache.entry(key[slot]).or_insert_with(|| self.coproduct_mono(key[slot]));
            for (dk, dc) in &d.terms {
                let mut nk = key[..slot].to_vec();
                nk.extend_from_slice(dk);
                nk.extend_from_slice(&key[slot + 1..]);
                out.add_term(nk, c * dc);
            }
        }
        out
    }

    /// `Δ^0 = id`, `Δ^n = (Δ ⊗ 1^{⊗(n-1)}) Δ^{n-1}`.
    pub fn coproduct_n(&self, x: &AlgebraElement, n: usize) -> TensorElement {
        let mut t = x.as_tensor();
        for _ in 0..n {
            t = self.apply_coproduct_at(&t, 0);
        }
        t
    }

    /// Rational-linear antihomomorphism with `K* = K`, `E* = -F`, `F* = -E`.
    /// Complex conjugation of the parameters is modelled by building the input
    /// under [`Specialization::conjugate`].
    pub fn star(&self, x: &AlgebraElement) -> AlgebraElement {
        let mut out = AlgebraElement::zero();
        for (m, c) in x.terms() {
            // (F^a K^b E^c)* = (-F)^c K^b (-E)^a, already in PBW order
            let sign = if (m.f + m.e) % 2 == 0 { c.clone() } else { -c.clone() };
            out.add_term(Mono::new(m.e, m.k, m.f), sign);
        }
        out
    }

    pub fn star_tensor(&self, x: &TensorElement) -> TensorElement {
        let mut out = TensorElement::zero(x.degree);
        for (key, c) in &x.terms {
            let mut coeff = c.clone();
            let mut nk = Vec::with_capacity(key.len());
            for m in key {
                if (m.f + m.e) % 2 == 1 {
                    coeff = -coeff;
                }
                nk.push(Mono::new(m.e, m.k, m.f));
            }
            out.add_term(nk, coeff);
        }
        out
    }

    pub fn mu(&self, s: &Rat) -> Rat {
        mu_exact(s, &self.q)
    }

    pub fn twisted_primitive(&self, kind: TwistedKind, s: &Rat, u: &Rat) -> AlgebraElement {
        let (e, f, k, kinv) = (Gen::E, Gen::F, Gen::K, Gen::Kinv);
        let mu = self.mu(s);
        match kind {
            TwistedKind::Y => {
                let ek = self.normal_form(&[e, k]).scale(&(u * &self.r));
                let fk = self.normal_form(&[f, k]).scale(&-(u.recip() * self.r.recip()));
                let k2 = self.k_power(2).sub(&AlgebraElement::one()).scale(&mu);
                ek.add(&fk).add(&k2)
            }
            TwistedKind::Ytilde => {
                let ek = self.normal_form(&[e, kinv]).scale(&(u * self.r.recip()));
                let fk = self.normal_form(&[f, kinv]).scale(&-(u.recip() * &self.r));
                let k2 = self.k_power(-2).sub(&AlgebraElement::one()).scale(&-mu);
                ek.add(&fk).add(&k2)
            }
        }
    }

    /// The auxiliary elements of the `Y_s`/`Ỹ_t` rewriting identity.
    pub fn build_st(&self, kind: StKind, param: &Rat) -> AlgebraElement {
        let one = AlgebraElement::one();
        let km2 = self.k_power(-2);
        let k2 = self.k_power(2);
        let mu = self.mu(param);
        let denom = (&self.qinv - &self.q).recip();
        match kind {
            StKind::S => {
                let y = self.twisted_primitive(TwistedKind::Y, param, &Rat::one());
                self.mul(&km2, &y.add(&one.scale(&mu))).sub(&one.scale(&mu))
            }
            StKind::T => {
                let y = self.twisted_primitive(TwistedKind::Y, param, &Rat::one());
                self.mul(&km2, &y).sub(&self.mul(&y, &km2)).scale(&denom)
            }
            StKind::Stilde => {
                let y = self.twisted_primitive(TwistedKind::Ytilde, param, &Rat::one());
                self.mul(&k2, &y.sub(&one.scale(&mu))).add(&one.scale(&mu))
            }
            StKind::Ttilde => {
                let y = self.twisted_primitive(TwistedKind::Ytilde, param, &Rat::one());
                self.mul(&y, &k2).sub(&self.mul(&k2, &y)).scale(&denom)
            }
        }
    }

    /// `Y^{(j)}_{s,u} = 1^{⊗(N-j)} ⊗ Δ^{j-1}(Y_{s,u})` and
    /// `Ỹ^{(j)}_{t,u} = Δ^{j-1}(Ỹ_{t,u}) ⊗ 1^{⊗(N-j)}`.
    pub fn y_j(&self, kind: TwistedKind, j: usize, n: usize, s: &Rat, u: &Rat) -> Result<TensorElement> {
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, max: n });
        }
        let d = self.coproduct_n(&self.twisted_primitive(kind, s, u), j - 1);
        Ok(match kind {
            TwistedKind::Y => d.pad(n - j, 0),
            TwistedKind::Ytilde => d.pad(0, n - j),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwistedKind {
    Y,
    Ytilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StKind {
    S,
    T,
    Stilde,
    Ttilde,
}

/// `μ_s = (s + 1/s)/(q^{-1} - q)`.
pub fn mu_exact(s: &Rat, q: &Rat) -> Rat {
    (s + s.recip()) / (q.recip() - q)
}

/// Outcome of an identity check over random specialisations.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub passed: usize,
    pub counterexample: Option<String>,
}

impl IdentityReport {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none() && self.passed == self.trials
    }
}

/// Compare two tensor-valued constructions exactly at `trials` random
/// specialisations; stops at the first counterexample.
pub fn verify_identity<R, L, Rh>(lhs: L, rhs: Rh, trials: usize, rng: &mut R) -> Result<IdentityReport>
where
    R: Rng,
    L: Fn(&Specialization) -> Result<TensorElement>,
    Rh: Fn(&Specialization) -> Result<TensorElement>,
{
    let mut passed = 0;
    for _ in 0..trials {
        let spec = Specialization::random(rng);
        let (a, b) = (lhs(&spec)?, rhs(&spec)?);
        check_degree(&a, &b)?;
        if a != b {
            let diff = a.sub(&b)?;
            return Ok(IdentityReport {
                trials,
                passed,
                counterexample: Some(format!("{spec}: difference has {} terms", diff.len())),
            });
        }
        passed += 1;
    }
    Ok(IdentityReport { trials, passed, counterexample: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qseries::rational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uq_half() -> Uq {
        Uq::new(rational(1, 2))
    }

    #[test]
    fn normal_form_examples() {
        let a = uq_half();
        let q = a.q.clone();
        let ke = a.normal_form(&[Gen::K, Gen::E]);
        assert_eq!(ke, AlgebraElement::monomial(Mono::new(0, 1, 1), Rat::one()));
        let ek = a.normal_form(&[Gen::E, Gen::K]);
        assert_eq!(ek, AlgebraElement::monomial(Mono::new(0, 1, 1), q.recip()));
        assert_eq!(a.normal_form(&[Gen::K, Gen::Kinv]), AlgebraElement::one());
        assert_eq!(a.normal_form(&[Gen::Kinv, Gen::K]), AlgebraElement::one());
        // EF = FE + (K^2 - K^{-2})/(q - q^{-1})
        let ef = a.normal_form(&[Gen::E, Gen::F]);
        let c = (&q - q.recip()).recip();
        let mut expect = AlgebraElement::monomial(Mono::new(1, 0, 1), Rat::one());
        expect.add_term(Mono::new(0, 2, 0), c.clone());
        expect.add_term(Mono::new(0, -2, 0), -c);
        assert_eq!(ef, expect);
        // KF = q^{-1} FK
        assert_eq!(a.normal_form(&[Gen::K, Gen::F]), AlgebraElement::monomial(Mono::new(1, 1, 0), q.recip()));
    }

    #[test]
    fn star_examples() {
        let a = uq_half();
        assert_eq!(a.star(&a.generator(Gen::K)), a.generator(Gen::K));
        assert_eq!(a.star(&a.generator(Gen::E)), a.generator(Gen::F).scale(&-Rat::one()));
        assert_eq!(a.star(&a.generator(Gen::F)), a.generator(Gen::E).scale(&-Rat::one()));
        assert_eq!(a.star(&a.generator(Gen::Kinv)), a.generator(Gen::Kinv));
    }

    #[test]
    fn mu_at_one() {
        assert_eq!(mu_exact(&Rat::one(), &rational(1, 2)), rational(4, 3));
        assert_eq!(uq_half().mu(&Rat::one()), rational(8, 15));
    }

    #[test]
    fn twisted_primitives_are_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let sp = Specialization::random(&mut rng);
            let cj = sp.conjugate();
            let a = sp.algebra();
            for kind in [TwistedKind::Y, TwistedKind::Ytilde] {
                let y = a.twisted_primitive(kind, &sp.s, &sp.u);
                let y_conj = a.twisted_primitive(kind, &cj.s, &cj.u);
                assert_eq!(a.star(&y_conj), y);
            }
        }
    }

    #[test]
    fn coproduct_examples() {
        let a = uq_half();
        let k = a.generator(Gen::K);
        let mut kk = TensorElement::zero(2);
        kk.add_term(vec![Mono::new(0, 1, 0); 2], Rat::one());
        assert_eq!(a.coproduct_n(&k, 1), kk);
        let x = a.twisted_primitive(TwistedKind::Y, &rational(2, 3), &rational(5, 7));
        assert_eq!(a.coproduct_n(&x, 0), x.as_tensor());
        let rhs = TensorElement::product_of(&[a.k_power(2), x.clone()])
            .add(&TensorElement::product_of(&[x.clone(), AlgebraElement::one()]))
            .unwrap();
        assert_eq!(a.coproduct_n(&x, 1), rhs);
    }

    #[test]
    fn y_has_three_pbw_shapes() {
        let a = uq_half();
        let y = a.twisted_primitive(TwistedKind::Y, &rational(3, 4), &Rat::one());
        let keys: Vec<Mono> = y.terms().map(|(m, _)| *m).collect();
        assert!(keys.contains(&Mono::new(0, 1, 1)));
        assert!(keys.contains(&Mono::new(1, 1, 0)));
        assert!(keys.contains(&Mono::new(0, 2, 0)));
    }

    #[test]
    fn st_closed_forms() {
        let a = Uq::new(rational(2, 3));
        let r = a.r.clone();
        let r3 = &r * &r * &r;
        let s1 = a.build_st(StKind::S, &rational(2, 3));
        let s2 = a.build_st(StKind::S, &rational(5, 7));
        assert_eq!(s1, s2);
        let ek = a.normal_form(&[Gen::E, Gen::Kinv]);
        let fk = a.normal_form(&[Gen::F, Gen::Kinv]);
        assert_eq!(s1, ek.scale(&r3.recip()).sub(&fk.scale(&r3)));
        let t = a.build_st(StKind::T, &rational(-4, 9));
        assert_eq!(t, ek.scale(&r.recip()).add(&fk.scale(&r)));
    }

    #[test]
    fn y_j_index_guard() {
        let a = uq_half();
        assert!(matches!(
            a.y_j(TwistedKind::Y, 4, 3, &Rat::one(), &Rat::one()),
            Err(Error::IndexOutOfRange { index: 4, max: 3 })
        ));
    }

    #[test]
    fn degree_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = verify_identity(|_| Ok(TensorElement::one(2)), |_| Ok(TensorElement::one(3)), 2, &mut rng);
        assert!(matches!(r, Err(Error::DegreeMismatch { lhs: 2, rhs: 3 })));
    }

    #[test]
    fn counterexample_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rep = verify_identity(
            |s| Ok(s.algebra().normal_form(&[Gen::E, Gen::F]).as_tensor()),
            |s| Ok(s.algebra().normal_form(&[Gen::F, Gen::E]).as_tensor()),
            5,
            &mut rng,
        )
        .unwrap();
        assert!(!rep.holds());
        assert!(rep.counterexample.is_some());
    }

    fn arb_element() -> impl Strategy<Value = Vec<(u32, i32, u32, i64, i64)>> {
        prop::collection::vec((0u32..3, -2i32..3, 0u32..3, -9i64..10, 1i64..6), 1..5)
    }

    fn build(spec: &[(u32, i32, u32, i64, i64)]) -> AlgebraElement {
        let mut x = AlgebraElement::zero();
        for (f, k, e, n, d) in spec {
            x.add_term(Mono::new(*f, *k, *e), rational(*n, *d));
        }
        x
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn multiplication_is_associative(x in arb_element(), y in arb_element(), z in arb_element()) {
            let a = Uq::new(rational(2, 5));
            let (x, y, z) = (build(&x), build(&y), build(&z));
            prop_assert_eq!(a.mul(&a.mul(&x, &y), &z), a.mul(&x, &a.mul(&y, &z)));
        }

        #[test]
        fn normal_form_is_idempotent(x in arb_element()) {
            let a = Uq::new(rational(3, 7));
            let x = build(&x);
            let mut again = AlgebraElement::zero();
            for (m, c) in x.terms() {
                again = again.add(&a.normal_form(&m.word()).scale(c));
            }
            prop_assert_eq!(again, x);
        }

        #[test]
        fn star_is_involutive_antihomomorphism(x in arb_element(), y in arb_element()) {
            let a = Uq::new(rational(1, 3));
            let (x, y) = (build(&x), build(&y));
            prop_assert_eq!(a.star(&a.star(&x)), x.clone());
            prop_assert_eq!(a.star(&a.mul(&x, &y)), a.mul(&a.star(&y), &a.star(&x)));
        }
    }
}
