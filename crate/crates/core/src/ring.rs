//! Exact arithmetic in `Z/qZ` and in the ring
//! `R = (Z/qZ)[t, (t+l_1)^-1, ..., (t+l_{d-1})^-1]`.
//!
//! Elements of `R` are kept in a canonical form: a numerator polynomial over a
//! product of powers of the linear factors `(t+l_i)`, with no factor cancelling.
//! Since `Z/qZ` is not a domain in general, the only division ever performed
//! is synthetic division by a monic linear factor.
//!
//! Tree indices are zero-based throughout: `0..d-1` are the finite places
//! `(t+l_i)`, and `d-1` is the place at infinity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};

/// An element of `Z/qZ`, always stored reduced into `0..q`.
pub type Residue = u32;

/// Largest number of trees supported; `d!` permutations are enumerated.
pub const MAX_TREES: usize = 7;

/// Validated ring parameters `(d, q, l_1..l_{d-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    d: usize,
    q: u32,
    residues: Vec<Residue>,
    prime_warning: bool,
}

impl RingParams {
    /// Validates `(d, q)` and the residues `l_1..l_{d-1}`, which default to
    /// `0, 1, ..., d-2`.
    pub fn new(d: usize, q: u32, residues: Option<Vec<Residue>>) -> Result<Self> {
        if d < 2 {
            return Err(DlError::InvalidParams(format!(
                "d must be at least 2, got {d}"
            )));
        }
        if d > MAX_TREES {
            return Err(DlError::InvalidParams(format!(
                "d must be at most {MAX_TREES}, got {d}"
            )));
        }
        if q < 2 {
            return Err(DlError::InvalidParams(format!(
                "q must be at least 2, got {q}"
            )));
        }
        let residues = match residues {
            Some(r) => r,
            None => (0..(d as u32 - 1)).collect(),
        };
        if residues.len() != d - 1 {
            return Err(DlError::InvalidParams(format!(
                "expected {} residues for d = {d}, got {}",
                d - 1,
                residues.len()
            )));
        }
        if let Some(&r) = residues.iter().find(|&&r| r >= q) {
            return Err(DlError::InvalidParams(format!(
                "residue {r} is not below q = {q}"
            )));
        }
        for (a, &la) in residues.iter().enumerate() {
            for &lb in &residues[a + 1..] {
                if la == lb {
                    return Err(DlError::InvalidParams(format!("residue {la} repeated")));
                }
                let diff = (la + q - lb) % q;
                if gcd(diff as u64, q as u64) != 1 {
                    return Err(DlError::InvalidParams(format!(
                        "difference {la} - {lb} = {diff} is not invertible mod {q}"
                    )));
                }
            }
        }
        let prime_warning = d >= 4 && prime_factors(q).iter().any(|&p| p < d as u64);
        Ok(RingParams {
            d,
            q,
            residues,
            prime_warning,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn residues(&self) -> &[Residue] {
        &self.residues
    }

    /// Set when `d >= 4` and some prime factor of `q` is at most `d-1`: the
    /// arithmetic is still well defined but the Cayley graph identification
    /// is not guaranteed.
    pub fn prime_warning(&self) -> bool {
        self.prime_warning
    }

    /// Index of the tree at infinity.
    pub fn infinite_tree(&self) -> usize {
        self.d - 1
    }

    // --- Z/qZ -------------------------------------------------------------

    pub fn add(&self, a: Residue, b: Residue) -> Residue {
        ((a as u64 + b as u64) % self.q as u64) as Residue
    }

    pub fn sub(&self, a: Residue, b: Residue) -> Residue {
        ((a as u64 + self.q as u64 - b as u64) % self.q as u64) as Residue
    }

    pub fn neg(&self, a: Residue) -> Residue {
        self.sub(0, a)
    }

    pub fn mul(&self, a: Residue, b: Residue) -> Residue {
        ((a as u64 * b as u64) % self.q as u64) as Residue
    }

    pub fn inv(&self, a: Residue) -> Option<Residue> {
        mod_inverse(a as i64, self.q as i64).map(|x| x as Residue)
    }

    pub fn reduce(&self, a: i64) -> Residue {
        a.rem_euclid(self.q as i64) as Residue
    }

    // --- polynomials ------------------------------------------------------

    /// Divides `p` by the monic factor `t + l_i`, returning quotient and
    /// remainder `p(-l_i)`.
    pub fn divrem_linear(&self, p: &Poly, i: usize) -> (Poly, Residue) {
        let root = self.neg(self.residues[i]);
        let c = &p.0;
        if c.is_empty() {
            return (Poly::zero(), 0);
        }
        let mut quot = vec![0; c.len() - 1];
        let mut acc = 0;
        for j in (0..c.len()).rev() {
            acc = self.add(self.mul(acc, root), c[j]);
            if j > 0 {
                quot[j - 1] = acc;
            }
        }
        (Poly::from_coeffs(quot), acc)
    }

    fn mul_linear(&self, p: &Poly, i: usize) -> Poly {
        let l = self.residues[i];
        let c = &p.0;
        if c.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0; c.len() + 1];
        for (j, &a) in c.iter().enumerate() {
            out[j + 1] = self.add(out[j + 1], a);
            out[j] = self.add(out[j], self.mul(a, l));
        }
        Poly::from_coeffs(out)
    }

    fn mul_linear_pow(&self, p: &Poly, i: usize, n: u32) -> Poly {
        let mut out = p.clone();
        for _ in 0..n {
            out = self.mul_linear(&out, i);
        }
        out
    }

    fn poly_add(&self, a: &Poly, b: &Poly) -> Poly {
        let n = a.0.len().max(b.0.len());
        let out = (0..n).map(|j| self.add(a.coeff(j), b.coeff(j))).collect();
        Poly::from_coeffs(out)
    }

    fn poly_scale(&self, a: &Poly, c: Residue) -> Poly {
        Poly::from_coeffs(a.0.iter().map(|&x| self.mul(x, c)).collect())
    }

    fn poly_mul(&self, a: &Poly, b: &Poly) -> Poly {
        if a.is_zero() || b.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0; a.0.len() + b.0.len() - 1];
        for (i, &x) in a.0.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.0.iter().enumerate() {
                out[i + j] = self.add(out[i + j], self.mul(x, y));
            }
        }
        Poly::from_coeffs(out)
    }

    /// Coefficients of `p` in the basis of powers of `t + l_i`.
    fn taylor_shift(&self, p: &Poly, i: usize) -> Vec<Residue> {
        let mut out = Vec::with_capacity(p.0.len());
        let mut cur = p.clone();
        while !cur.is_zero() {
            let (quot, rem) = self.divrem_linear(&cur, i);
            out.push(rem);
            cur = quot;
        }
        out
    }

    // --- rational forms ---------------------------------------------------

    /// Cancels linear factors until no `(t+l_i)` with positive exponent
    /// divides the numerator.
    pub fn normalize(&self, num: Poly, den_exp: Vec<u32>) -> RationalForm {
        let order: Vec<usize> = (0..self.d - 1).collect();
        self.normalize_in_order(num, den_exp, &order)
    }

    /// [`normalize`](Self::normalize), attempting the factors in the given
    /// order. The result does not depend on the order.
    pub fn normalize_in_order(
        &self,
        num: Poly,
        mut den_exp: Vec<u32>,
        order: &[usize],
    ) -> RationalForm {
        debug_assert_eq!(den_exp.len(), self.d - 1);
        if num.is_zero() {
            return RationalForm::zero(self.d);
        }
        let mut num = num;
        for &i in order {
            while den_exp[i] > 0 {
                let (quot, rem) = self.divrem_linear(&num, i);
                if rem != 0 {
                    break;
                }
                num = quot;
                den_exp[i] -= 1;
            }
        }
        RationalForm { num, den_exp }
    }

    /// The constant `c` as an element of `R`.
    pub fn rat_const(&self, c: Residue) -> RationalForm {
        self.normalize(Poly::from_coeffs(vec![c % self.q]), vec![0; self.d - 1])
    }

    pub fn rat_add(&self, a: &RationalForm, b: &RationalForm) -> RationalForm {
        if a.is_zero() {
            return b.clone();
        }
        if b.is_zero() {
            return a.clone();
        }
        let mut na = a.num.clone();
        let mut nb = b.num.clone();
        let mut den = Vec::with_capacity(self.d - 1);
        for i in 0..self.d - 1 {
            let (ea, eb) = (a.den_exp[i], b.den_exp[i]);
            let e = ea.max(eb);
            na = self.mul_linear_pow(&na, i, e - ea);
            nb = self.mul_linear_pow(&nb, i, e - eb);
            den.push(e);
        }
        self.normalize(self.poly_add(&na, &nb), den)
    }

    pub fn rat_neg(&self, a: &RationalForm) -> RationalForm {
        RationalForm {
            num: Poly::from_coeffs(a.num.0.iter().map(|&x| self.neg(x)).collect()),
            den_exp: a.den_exp.clone(),
        }
    }

    pub fn rat_sub(&self, a: &RationalForm, b: &RationalForm) -> RationalForm {
        self.rat_add(a, &self.rat_neg(b))
    }

    /// Multiplies `a` by `c * prod (t+l_i)^{k_i}`, `k_i` of either sign.
    pub fn rat_scale(&self, a: &RationalForm, k: &[i64], c: Residue) -> RationalForm {
        debug_assert_eq!(k.len(), self.d - 1);
        let c = c % self.q;
        if a.is_zero() || c == 0 {
            return RationalForm::zero(self.d);
        }
        let mut num = self.poly_scale(&a.num, c);
        let mut den = a.den_exp.clone();
        for (i, &ki) in k.iter().enumerate() {
            if ki > 0 {
                num = self.mul_linear_pow(&num, i, ki as u32);
            } else {
                den[i] += (-ki) as u32;
            }
        }
        self.normalize(num, den)
    }

    /// Multiplies two ring elements.
    pub fn rat_mul(&self, a: &RationalForm, b: &RationalForm) -> RationalForm {
        let den = a
            .den_exp
            .iter()
            .zip(&b.den_exp)
            .map(|(x, y)| x + y)
            .collect();
        self.normalize(self.poly_mul(&a.num, &b.num), den)
    }

    /// Valuation of `p` at tree `i`: the `(t+l_i)`-adic valuation for finite
    /// places, and `deg(den) - deg(num) - 1` at infinity.
    pub fn valuation(&self, p: &RationalForm, i: usize) -> Valuation {
        if p.is_zero() {
            return Valuation::Infinite;
        }
        if i == self.d - 1 {
            let den_deg: i64 = p.den_exp.iter().map(|&e| e as i64).sum();
            let num_deg = p.num.degree().expect("nonzero numerator") as i64;
            return Valuation::Finite(den_deg - num_deg - 1);
        }
        let mut mult = 0i64;
        let mut cur = p.num.clone();
        loop {
            let (quot, rem) = self.divrem_linear(&cur, i);
            if rem != 0 {
                break;
            }
            mult += 1;
            cur = quot;
        }
        Valuation::Finite(mult - p.den_exp[i] as i64)
    }

    /// Digits of the expansion of `p` in tree `i` at positions `lo..hi`.
    ///
    /// For a finite place the digit at position `k` is the coefficient of
    /// `(t+l_i)^k`. At infinity the digit at position `k` is the coefficient
    /// of `t^{-(k+1)}`.
    pub fn digits(&self, p: &RationalForm, i: usize, lo: i64, hi: i64) -> Vec<Residue> {
        assert!(lo <= hi, "digit range must satisfy lo <= hi");
        let len = (hi - lo) as usize;
        if p.is_zero() || len == 0 {
            return vec![0; len];
        }
        if i == self.d - 1 {
            self.digits_at_infinity(p, lo, hi)
        } else {
            self.digits_finite(p, i, lo, hi)
        }
    }

    fn digits_finite(&self, p: &RationalForm, i: usize, lo: i64, hi: i64) -> Vec<Residue> {
        // p = u^{-e_i} * S(u), u = t + l_i; position k <-> S-coefficient k + e_i.
        let shift = p.den_exp[i] as i64;
        let top = hi + shift;
        if top <= 0 {
            return vec![0; (hi - lo) as usize];
        }
        let n = top as usize;
        let mut series = truncate(self.taylor_shift(&p.num, i), n);
        let li = self.residues[i];
        for (j, &e) in p.den_exp.iter().enumerate() {
            if j == i || e == 0 {
                continue;
            }
            // (u + c)^{-1} with c = l_j - l_i a unit.
            let c = self.sub(self.residues[j], li);
            let cinv = self.inv(c).expect("residue differences are invertible");
            let step = self.neg(cinv);
            let mut inv_series = Vec::with_capacity(n);
            let mut term = cinv;
            for _ in 0..n {
                inv_series.push(term);
                term = self.mul(term, step);
            }
            for _ in 0..e {
                series = self.series_mul(&series, &inv_series, n);
            }
        }
        (lo..hi)
            .map(|k| {
                let idx = k + shift;
                if idx < 0 {
                    0
                } else {
                    series.get(idx as usize).copied().unwrap_or(0)
                }
            })
            .collect()
    }

    fn digits_at_infinity(&self, p: &RationalForm, lo: i64, hi: i64) -> Vec<Residue> {
        // With s = 1/t: p = t^{N-D} * num_rev(s) / den_rev(s), and the digit at
        // position k is the series coefficient r = k + 1 + N - D.
        let num_deg = p.num.degree().expect("nonzero numerator") as i64;
        let den = self.den_poly(&p.den_exp);
        let den_deg = den.degree().expect("monic denominator") as i64;
        let offset = 1 + num_deg - den_deg;
        let top = hi + offset;
        if top <= 0 {
            return vec![0; (hi - lo) as usize];
        }
        let n = top as usize;
        let num_rev: Vec<Residue> = p.num.0.iter().rev().copied().collect();
        let den_rev: Vec<Residue> = den.0.iter().rev().copied().collect();
        let den_inv = self.series_inverse_unit(&den_rev, n);
        let series = self.series_mul(&truncate(num_rev, n), &den_inv, n);
        (lo..hi)
            .map(|k| {
                let r = k + offset;
                if r < 0 {
                    0
                } else {
                    series.get(r as usize).copied().unwrap_or(0)
                }
            })
            .collect()
    }

    /// `prod (t+l_i)^{e_i}` as a polynomial.
    pub fn den_poly(&self, den_exp: &[u32]) -> Poly {
        let mut out = Poly::from_coeffs(vec![1]);
        for (i, &e) in den_exp.iter().enumerate() {
            out = self.mul_linear_pow(&out, i, e);
        }
        out
    }

    fn series_mul(&self, a: &[Residue], b: &[Residue], n: usize) -> Vec<Residue> {
        let mut out = vec![0; n];
        for (i, &x) in a.iter().enumerate().take(n) {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate().take(n - i) {
                out[i + j] = self.add(out[i + j], self.mul(x, y));
            }
        }
        out
    }

    /// Inverse of a power series with constant term 1.
    fn series_inverse_unit(&self, a: &[Residue], n: usize) -> Vec<Residue> {
        debug_assert_eq!(a.first(), Some(&1));
        let mut out = vec![0; n];
        if n == 0 {
            return out;
        }
        out[0] = 1;
        for k in 1..n {
            let mut acc = 0;
            for j in 1..=k.min(a.len() - 1) {
                acc = self.add(acc, self.mul(a[j], out[k - j]));
            }
            out[k] = self.neg(acc);
        }
        out
    }
}

fn truncate(mut v: Vec<Residue>, n: usize) -> Vec<Residue> {
    v.truncate(n);
    v
}

/// Polynomial over `Z/qZ` with ascending coefficients and no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly(Vec<Residue>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    /// Builds a polynomial from ascending coefficients, trimming trailing
    /// zeros. Coefficients must already be reduced.
    pub fn from_coeffs(mut coeffs: Vec<Residue>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn coeffs(&self) -> &[Residue] {
        &self.0
    }

    pub fn coeff(&self, j: usize) -> Residue {
        self.0.get(j).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }
}

/// Canonical element `num / prod (t+l_i)^{e_i}` of `R`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalForm {
    num: Poly,
    den_exp: Vec<u32>,
}

impl RationalForm {
    pub fn zero(d: usize) -> Self {
        RationalForm {
            num: Poly::zero(),
            den_exp: vec![0; d - 1],
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den_exp(&self) -> &[u32] {
        &self.den_exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

/// A valuation, possibly `+inf` (for the zero element).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m))
}

fn prime_factors(mut n: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u32;
    while (p as u64) * (p as u64) <= n as u64 {
        if n.is_multiple_of(p) {
            out.push(p as u64);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n as u64);
    }
    out
}
