//! Dense all-covariant tensors over a scalar type (reals or jets).

use crate::expr::Jet;
use std::fmt::Debug;

pub trait Scalar: Clone + Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
    /// `self += a * b`
    fn fma(&mut self, a: &Self, b: &Self);
    /// `self += s * a`
    fn axpy(&mut self, s: f64, a: &Self);
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> f64 {
        0.0
    }
    fn plus(&self, o: &f64) -> f64 {
        self + o
    }
    fn minus(&self, o: &f64) -> f64 {
        self - o
    }
    fn times(&self, o: &f64) -> f64 {
        self * o
    }
    fn scale(&self, s: f64) -> f64 {
        self * s
    }
    fn fma(&mut self, a: &f64, b: &f64) {
        *self += a * b;
    }
    fn axpy(&mut self, s: f64, a: &f64) {
        *self += s * a;
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Jet {
        Jet::zero_like(self)
    }
    fn plus(&self, o: &Jet) -> Jet {
        self + o
    }
    fn minus(&self, o: &Jet) -> Jet {
        self - o
    }
    fn times(&self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
    fn scale(&self, s: f64) -> Jet {
        Jet::scale(self, s)
    }
    fn fma(&mut self, a: &Jet, b: &Jet) {
        self.fma_assign(a, b);
    }
    fn axpy(&mut self, s: f64, a: &Jet) {
        self.axpy_assign(s, a);
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
}

/// Rank-`rank` tensor on an `n`-dimensional space, components in row-major
/// order over coordinate (or frame) indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    n: usize,
    rank: usize,
    c: Vec<T>,
}

pub type RTensor = Tensor<f64>;
pub type JTensor = Tensor<Jet>;

fn unflatten(mut flat: usize, n: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, rank: usize, proto: &T) -> Tensor<T> {
        let z = proto.zero_like();
        Tensor { n, rank, c: vec![z; n.pow(rank as u32)] }
    }

    pub fn from_vec(n: usize, rank: usize, c: Vec<T>) -> Tensor<T> {
        assert_eq!(c.len(), n.pow(rank as u32), "component count");
        Tensor { n, rank, c }
    }

    /// Builds a tensor by evaluating `f` on every multi-index.
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Tensor<T> {
        let mut idx = vec![0; rank];
        let len = n.pow(rank as u32);
        let mut c = Vec::with_capacity(len);
        for flat in 0..len {
            unflatten(flat, n, &mut idx);
            c.push(f(&idx));
        }
        Tensor { n, rank, c }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn components(&self) -> &[T] {
        &self.c
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn at(&self, idx: &[usize]) -> &T {
        &self.c[self.offset(idx)]
    }

    pub fn at_mut(&mut self, idx: &[usize]) -> &mut T {
        let o = self.offset(idx);
        &mut self.c[o]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Tensor<U> {
        Tensor { n: self.n, rank: self.rank, c: self.c.iter().map(f).collect() }
    }

    pub fn values(&self) -> RTensor {
        self.map(|x| x.value())
    }

    pub fn plus(&self, o: &Tensor<T>) -> Tensor<T> {
        self.check(o);
        Tensor { n: self.n, rank: self.rank, c: self.c.iter().zip(&o.c).map(|(a, b)| a.plus(b)).collect() }
    }

    pub fn minus(&self, o: &Tensor<T>) -> Tensor<T> {
        self.check(o);
        Tensor { n: self.n, rank: self.rank, c: self.c.iter().zip(&o.c).map(|(a, b)| a.minus(b)).collect() }
    }

    pub fn scale(&self, s: f64) -> Tensor<T> {
        self.map(|x| x.scale(s))
    }

    /// Multiplies every component by the scalar `s`.
    pub fn times_scalar(&self, s: &T) -> Tensor<T> {
        self.map(|x| x.times(s))
    }

    /// `self += s * o`
    pub fn axpy(&mut self, s: f64, o: &Tensor<T>) {
        self.check(o);
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            a.axpy(s, b);
        }
    }

    fn check(&self, o: &Tensor<T>) {
        assert_eq!((self.n, self.rank), (o.n, o.rank), "tensor shape mismatch");
    }

    /// Outer product, slots of `self` first.
    pub fn outer(&self, o: &Tensor<T>) -> Tensor<T> {
        let mut c = Vec::with_capacity(self.c.len() * o.c.len());
        for a in &self.c {
            for b in &o.c {
                c.push(a.times(b));
            }
        }
        Tensor { n: self.n, rank: self.rank + o.rank, c }
    }

    /// Reorders slots: slot `a` of the result is slot `perm[a]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Tensor<T> {
        assert_eq!(perm.len(), self.rank);
        let mut src = vec![0; self.rank];
        Tensor::from_fn(self.n, self.rank, |idx| {
            for (a, &p) in perm.iter().enumerate() {
                src[p] = idx[a];
            }
            self.at(&src).clone()
        })
    }

    /// Metric trace over slots `a < b` using the inverse metric `ginv`.
    pub fn trace(&self, a: usize, b: usize, ginv: &Tensor<T>) -> Tensor<T> {
        assert!(a < b && b < self.rank);
        let n = self.n;
        let proto = &self.c[0];
        let mut src = vec![0; self.rank];
        Tensor::from_fn(n, self.rank - 2, |idx| {
            let mut k = 0;
            for (s, slot) in src.iter_mut().enumerate() {
                if s != a && s != b {
                    *slot = idx[k];
                    k += 1;
                }
            }
            let mut acc = proto.zero_like();
            for i in 0..n {
                for j in 0..n {
                    src[a] = i;
                    src[b] = j;
                    acc.fma(&ginv.c[i * n + j], self.at(&src));
                }
            }
            acc
        })
    }

    /// Inserts the vector (contravariant components) into `slot`.
    pub fn contract_vector(&self, slot: usize, v: &[T]) -> Tensor<T> {
        assert!(slot < self.rank && v.len() == self.n);
        let proto = &self.c[0];
        let mut src = vec![0; self.rank];
        Tensor::from_fn(self.n, self.rank - 1, |idx| {
            let mut k = 0;
            for (s, x) in src.iter_mut().enumerate() {
                if s != slot {
                    *x = idx[k];
                    k += 1;
                }
            }
            let mut acc = proto.zero_like();
            for (i, vi) in v.iter().enumerate() {
                src[slot] = i;
                acc.fma(vi, self.at(&src));
            }
            acc
        })
    }

    /// Raises one slot with `ginv`, leaving it in place (the result is then a
    /// mixed tensor with that slot contravariant).
    pub fn raise(&self, slot: usize, ginv: &Tensor<T>) -> Tensor<T> {
        let n = self.n;
        let proto = &self.c[0];
        let mut src = vec![0; self.rank];
        Tensor::from_fn(n, self.rank, |idx| {
            src.copy_from_slice(idx);
            let mut acc = proto.zero_like();
            for j in 0..n {
                src[slot] = j;
                acc.fma(&ginv.c[idx[slot] * n + j], self.at(&src));
            }
            acc
        })
    }

    /// Kulkarni–Nomizu product of two symmetric 2-tensors:
    /// `(h∧k)(x,y,z,w) = h(x,z)k(y,w) + h(y,w)k(x,z) − h(x,w)k(y,z) − h(y,z)k(x,w)`.
    pub fn kulkarni_nomizu(&self, k: &Tensor<T>) -> Tensor<T> {
        assert!(self.rank == 2 && k.rank == 2);
        let h = self;
        Tensor::from_fn(self.n, 4, |i| {
            let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
            let mut acc = h.at(&[x, z]).times(k.at(&[y, w]));
            acc.fma(h.at(&[y, w]), k.at(&[x, z]));
            acc.minus(&h.at(&[x, w]).times(k.at(&[y, z]))).minus(&h.at(&[y, z]).times(k.at(&[x, w])))
        })
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Components in a frame whose `a`-th vector has coordinate components
    /// `frame[i * n + a]`.
    pub fn in_frame(&self, frame: &[f64]) -> RTensor {
        let n = self.n;
        let mut cur = self.clone();
        for slot in 0..self.rank {
            let mut src = vec![0; self.rank];
            cur = Tensor::from_fn(n, self.rank, |idx| {
                src.copy_from_slice(idx);
                let mut acc = 0.0;
                for i in 0..n {
                    src[slot] = i;
                    acc += frame[i * n + idx[slot]] * cur.at(&src);
                }
                acc
            });
        }
        cur
    }

    /// Euclidean norm of the components in an orthonormal frame, i.e. the
    /// metric norm of a covariant tensor.
    pub fn frame_norm(&self, frame: &[f64]) -> f64 {
        self.in_frame(frame).c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Tensor<Jet> {
    pub fn order(&self) -> usize {
        self.c.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn truncate(&self, order: usize) -> JTensor {
        self.map(|j| j.truncate(order))
    }
}
