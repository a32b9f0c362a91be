//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function about a chart
//! point, one coefficient per monomial of total degree `<= order`. Monomials are
//! kept in graded order so that the coefficients of a lower-order jet are a
//! prefix of the higher-order ones; truncation and mixed-order arithmetic are
//! then plain slicing.
//!
//! Partial derivatives are recovered from the coefficients by multiplying with
//! the multi-index factorial, so every mixed partial is stored once per
//! multiset of differentiation variables.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Largest number of chart variables a jet can carry.
pub const MAX_VARS: usize = 6;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum JetError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive value")]
    NonPositiveLog,
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("real power of a non-positive base")]
    NonPositivePowBase,
    #[error("jet order exhausted: cannot differentiate an order-0 jet")]
    InsufficientOrder,
}

pub struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<[u8; MAX_VARS]>,
    index: HashMap<[u8; MAX_VARS], usize>,
    fact: Vec<f64>,
    // (a, b, c): monomial a times monomial b is monomial c
    mul: Vec<(u16, u16, u16)>,
    // per variable: (target idx in order-1 layout, source idx here, factor)
    deriv: Vec<Vec<(u16, u16, f64)>>,
    // per variable: (target idx in order+1 layout, source idx here, 1/(e_k+1))
    integ: Vec<Vec<(u16, u16, f64)>>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps: Vec<[u8; MAX_VARS]> = Vec::new();
        for d in 0..=order {
            let mut cur = [0u8; MAX_VARS];
            push_degree(nvars, 0, d, &mut cur, &mut exps);
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let fact = exps
            .iter()
            .map(|e| e.iter().map(|&x| factorial(x as usize)).product())
            .collect();
        let index: HashMap<[u8; MAX_VARS], usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let find = |e: &[u8; MAX_VARS]| index.get(e).copied();
        let mut mul = Vec::new();
        for (a, ea) in exps.iter().enumerate() {
            for (b, eb) in exps.iter().enumerate() {
                if degree[a] + degree[b] > order {
                    continue;
                }
                let mut ec = [0u8; MAX_VARS];
                for k in 0..MAX_VARS {
                    ec[k] = ea[k] + eb[k];
                }
                let c = find(&ec).expect("product monomial within order");
                mul.push((a as u16, b as u16, c as u16));
            }
        }
        let mut deriv = vec![Vec::new(); nvars];
        let mut integ = vec![Vec::new(); nvars];
        for (k, (dk, ik)) in deriv.iter_mut().zip(integ.iter_mut()).enumerate() {
            for (s, es) in exps.iter().enumerate() {
                if es[k] > 0 {
                    let mut et = *es;
                    et[k] -= 1;
                    let t = find(&et).unwrap();
                    dk.push((t as u16, s as u16, es[k] as f64));
                }
                // integration target lives in the order+1 layout, which shares the prefix
                let mut eu = *es;
                eu[k] += 1;
                ik.push((u16::MAX, s as u16, 1.0 / (eu[k] as f64)));
            }
        }
        Layout { nvars, order, exps, index, fact, mul, deriv, integ }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn index_of(&self, e: &[u8; MAX_VARS]) -> Option<usize> {
        self.index.get(e).copied()
    }
}

fn push_degree(nvars: usize, k: usize, left: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
    if k + 1 == nvars || nvars == 0 {
        if nvars == 0 {
            if left == 0 {
                out.push(*cur);
            }
            return;
        }
        cur[k] = left as u8;
        out.push(*cur);
        cur[k] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e as u8;
        push_degree(nvars, k + 1, left - e, cur, out);
    }
    cur[k] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn layouts() -> &'static Vec<Layout> {
    static CELL: OnceLock<Vec<Layout>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut v = Vec::new();
        for n in 0..=MAX_VARS {
            for o in 0..=MAX_ORDER + 1 {
                v.push(Layout::build(n, o));
            }
        }
        // resolve integration targets now that order+1 layouts exist
        for n in 0..=MAX_VARS {
            for o in 0..=MAX_ORDER {
                let up_index = v[n * (MAX_ORDER + 2) + o + 1].index.clone();
                let l = &mut v[n * (MAX_ORDER + 2) + o];
                let exps = l.exps.clone();
                for (k, ik) in l.integ.iter_mut().enumerate() {
                    for entry in ik.iter_mut() {
                        let mut eu = exps[entry.1 as usize];
                        eu[k] += 1;
                        entry.0 = up_index[&eu] as u16;
                    }
                }
            }
        }
        v
    })
}

fn layout(nvars: usize, order: usize) -> &'static Layout {
    assert!(nvars <= MAX_VARS, "at most {MAX_VARS} chart variables supported");
    assert!(order <= MAX_ORDER + 1, "jet order above {}", MAX_ORDER + 1);
    &layouts()[nvars * (MAX_ORDER + 2) + order]
}

/// Truncated Taylor expansion of a scalar at a chart point.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.c)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars() && self.order() == other.order() && self.c == other.c
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Jet {
        let layout = layout(nvars, order);
        let mut c = vec![0.0; layout.len()];
        c[0] = value;
        Jet { layout, c }
    }

    pub fn zero(nvars: usize, order: usize) -> Jet {
        Jet::constant(nvars, order, 0.0)
    }

    /// The coordinate function `x_k` expanded about a point where it equals `value`.
    pub fn variable(nvars: usize, order: usize, k: usize, value: f64) -> Jet {
        assert!(k < nvars);
        let mut j = Jet::constant(nvars, order, value);
        if order >= 1 {
            let mut e = [0u8; MAX_VARS];
            e[k] = 1;
            let idx = j.layout.index_of(&e).unwrap();
            j.c[idx] = 1.0;
        }
        j
    }

    /// Builds a jet from Taylor coefficients listed in the internal graded order.
    pub fn from_taylor(nvars: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let layout = layout(nvars, order);
        assert_eq!(coeffs.len(), layout.len(), "coefficient count");
        Jet { layout, c: coeffs }
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn taylor(&self) -> &[f64] {
        &self.c
    }

    /// Exponent vectors of the stored monomials, in storage order.
    pub fn monomials(&self) -> impl Iterator<Item = &[u8]> {
        let n = self.nvars();
        self.layout.exps.iter().map(move |e| &e[..n])
    }

    /// Mixed partial derivative; `vars` lists the differentiation variables with
    /// repetition, e.g. `[0, 0, 1]` for the third derivative in x0, x0, x1.
    pub fn partial(&self, vars: &[usize]) -> f64 {
        let mut e = [0u8; MAX_VARS];
        for &k in vars {
            assert!(k < self.nvars());
            e[k] += 1;
        }
        if vars.len() > self.order() {
            return f64::NAN;
        }
        let idx = self.layout.index_of(&e).unwrap();
        self.c[idx] * self.layout.fact[idx]
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|k| self.partial(&[k])).collect()
    }

    /// Exact partial derivative in variable `k`, one order lower.
    pub fn derivative(&self, k: usize) -> Result<Jet, JetError> {
        if self.order() == 0 {
            return Err(JetError::InsufficientOrder);
        }
        let target = layout(self.nvars(), self.order() - 1);
        let mut c = vec![0.0; target.len()];
        for &(t, s, f) in &self.layout.deriv[k] {
            if (t as usize) < c.len() {
                c[t as usize] += f * self.c[s as usize];
            }
        }
        Ok(Jet { layout: target, c })
    }

    /// Antiderivative in variable `k` with zero constant of integration, one
    /// order higher.
    pub fn antiderivative(&self, k: usize) -> Jet {
        assert!(self.order() <= MAX_ORDER, "antiderivative would exceed the maximal order");
        let target = layout(self.nvars(), self.order() + 1);
        let mut c = vec![0.0; target.len()];
        for &(t, s, f) in &self.layout.integ[k] {
            c[t as usize] += f * self.c[s as usize];
        }
        Jet { layout: target, c }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.nvars(), order);
        Jet { layout, c: self.c[..layout.len()].to_vec() }
    }

    /// Same shape, all coefficients zero.
    pub fn zero_like(&self) -> Jet {
        Jet { layout: self.layout, c: vec![0.0; self.c.len()] }
    }

    pub fn constant_like(&self, value: f64) -> Jet {
        let mut j = self.zero_like();
        j.c[0] = value;
        j
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { layout: self.layout, c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    fn check_vars(&self, other: &Jet) {
        assert_eq!(self.nvars(), other.nvars(), "jets over different variable counts");
    }

    fn lin(&self, other: &Jet, b: f64) -> Jet {
        self.check_vars(other);
        let order = self.order().min(other.order());
        let layout = layout(self.nvars(), order);
        let c = (0..layout.len()).map(|i| self.c[i] + b * other.c[i]).collect();
        Jet { layout, c }
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_vars(other);
        let order = self.order().min(other.order());
        let layout = layout(self.nvars(), order);
        let mut c = vec![0.0; layout.len()];
        for &(a, b, t) in &layout.mul {
            c[t as usize] += self.c[a as usize] * other.c[b as usize];
        }
        Jet { layout, c }
    }

    /// `self += a * b`, truncated to `self`'s order.
    pub fn fma_assign(&mut self, a: &Jet, b: &Jet) {
        let order = self.order().min(a.order()).min(b.order());
        if order < self.order() {
            *self = self.truncate(order);
        }
        let layout = self.layout;
        for &(i, j, t) in &layout.mul {
            self.c[t as usize] += a.c[i as usize] * b.c[j as usize];
        }
    }

    /// `self += s * a`.
    pub fn axpy_assign(&mut self, s: f64, a: &Jet) {
        if a.order() < self.order() {
            *self = self.truncate(a.order());
        }
        for (x, y) in self.c.iter_mut().zip(a.c.iter()) {
            *x += s * y;
        }
    }

    /// Evaluates `sum_k coeffs[k] * (self - value)^k`, i.e. composes a
    /// univariate Taylor series (expanded about `self.value()`) with this jet.
    pub fn compose(&self, coeffs: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let top = coeffs.len().min(self.order() + 1);
        let mut acc = self.constant_like(coeffs[top - 1]);
        for k in (0..top - 1).rev() {
            acc = acc.mul_jet(&h).add_scalar(coeffs[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let mut coeffs = Vec::with_capacity(self.order() + 1);
        let mut t = 1.0 / a;
        for _ in 0..=self.order() {
            coeffs.push(t);
            t *= -1.0 / a;
        }
        Ok(self.compose(&coeffs))
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let coeffs: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose(&coeffs)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a <= 0.0 {
            return Err(JetError::NonPositiveLog);
        }
        let mut coeffs = vec![a.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            coeffs.push(sign / (k as f64 * a.powi(k as i32)));
        }
        Ok(self.compose(&coeffs))
    }

    fn periodic(&self, cycle: [f64; 4]) -> Jet {
        let coeffs: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&coeffs)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.periodic([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.periodic([c, -s, -c, s])
    }

    pub fn sinh(&self) -> Jet {
        let a = self.value();
        self.periodic([a.sinh(), a.cosh(), a.sinh(), a.cosh()])
    }

    pub fn cosh(&self) -> Jet {
        let a = self.value();
        self.periodic([a.cosh(), a.sinh(), a.cosh(), a.sinh()])
    }

    pub fn tan(&self) -> Result<Jet, JetError> {
        let (s, c) = self.value().sin_cos();
        if c == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let num: Vec<f64> = (0..=self.order()).map(|k| [s, c, -s, -c][k % 4] / factorial(k)).collect();
        let den: Vec<f64> = (0..=self.order()).map(|k| [c, -s, -c, s][k % 4] / factorial(k)).collect();
        Ok(self.compose(&series_div(&num, &den)))
    }

    pub fn tanh(&self) -> Jet {
        let a = self.value();
        let (sh, ch) = (a.sinh(), a.cosh());
        let num: Vec<f64> = (0..=self.order()).map(|k| [sh, ch][k % 2] / factorial(k)).collect();
        let den: Vec<f64> = (0..=self.order()).map(|k| [ch, sh][k % 2] / factorial(k)).collect();
        self.compose(&series_div(&num, &den))
    }

    /// Real power with a positive base.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        let a = self.value();
        if a <= 0.0 {
            return Err(JetError::NonPositivePowBase);
        }
        let mut coeffs = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for k in 0..=self.order() {
            coeffs.push(binom * a.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        Ok(self.compose(&coeffs))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        if self.value() < 0.0 || (self.value() == 0.0 && self.order() > 0) {
            return Err(JetError::NegativeSqrt);
        }
        if self.value() == 0.0 {
            return Ok(self.zero_like());
        }
        self.powf(0.5)
    }

    pub fn powi(&self, k: i32) -> Result<Jet, JetError> {
        if k < 0 {
            return self.powi(-k)?.recip();
        }
        let mut base = self.clone();
        let mut acc = self.constant_like(1.0);
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Ok(acc)
    }

    /// Largest absolute Taylor coefficient.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn series_div(num: &[f64], den: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; num.len()];
    for k in 0..num.len() {
        let mut s = num[k];
        for j in 1..=k {
            s -= den[j] * q[k - j];
        }
        q[k] = s / den[0];
    }
    q
}

macro_rules! jet_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.lin(b, 1.0));
jet_binop!(Sub, sub, |a, b| a.lin(b, -1.0));
jet_binop!(Mul, mul, |a, b| a.mul_jet(b));

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
