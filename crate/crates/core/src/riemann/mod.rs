//! Pointwise Riemannian geometry of a coordinate chart.
//!
//! Curvature convention: with `R(x,y) = [∇_x, ∇_y] − ∇_{[x,y]}` the lowered
//! curvature stored here is `Rm(x,y,z,w) = −g(R(x,y)z, w)`, so the round sphere
//! has `Rm(x,y,x,y) = +1` for orthonormal `x, y`. The Ricci tensor contracts
//! slots 1 and 3, the Kulkarni–Nomizu product follows
//! [`Tensor::kulkarni_nomizu`], and `Rm − P∧g` is the Weyl tensor. Covariant
//! derivatives put the differentiation slot first.

mod tensor;

pub use tensor::{JTensor, RTensor, Scalar, Tensor};

use crate::expr::{ExprError, Jet, JetError, ScalarExpr};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue floor below which a metric is rejected.
pub const PD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiemannError {
    #[error("metric is not positive definite at {point:?} (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { point: Vec<f64>, eigenvalues: Vec<f64> },
    #[error("metric is not symmetric at {point:?}")]
    NotSymmetric { point: Vec<f64> },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("{kind} at point {point:?}")]
    Jet { kind: JetError, point: Vec<f64> },
    #[error("jet order {have} insufficient, {needed} required")]
    InsufficientOrder { needed: usize, have: usize },
    #[error("{0}")]
    Dimension(String),
}

/// Metric together with its inverse and Christoffel symbols as jets at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub n: usize,
    pub point: Vec<f64>,
    /// `g_ij`
    pub g: JTensor,
    /// `g^ij`
    pub ginv: JTensor,
    /// `Γ^k_ij`, stored with the upper index first.
    pub gamma: JTensor,
    pub sqrt_det: f64,
    /// Largest component of `∇g` in an orthonormal frame.
    pub compat_residual: f64,
    frame: Vec<f64>,
}

impl MetricJet {
    /// Evaluates the `n×n` metric expressions (row-major) at `point`.
    pub fn from_exprs(g: &[ScalarExpr], point: &[f64], order: usize) -> Result<MetricJet, RiemannError> {
        let n = point.len();
        if g.len() != n * n {
            return Err(RiemannError::Dimension(format!("metric needs {} entries, got {}", n * n, g.len())));
        }
        let mut c = Vec::with_capacity(n * n);
        for e in g {
            c.push(e.eval_jet(point, order)?);
        }
        MetricJet::new(point, JTensor::from_vec(n, 2, c))
    }

    pub fn new(point: &[f64], g: JTensor) -> Result<MetricJet, RiemannError> {
        let n = g.dim();
        let point = point.to_vec();
        let gv = g.values();
        let scale = gv.max_abs().max(1e-300);
        for i in 0..n {
            for j in 0..i {
                if (gv.at(&[i, j]) - gv.at(&[j, i])).abs() > 1e-12 * scale {
                    return Err(RiemannError::NotSymmetric { point });
                }
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| *gv.at(&[i, j]));
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        let max = eig.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let min = eig.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if !(min > PD_TOLERANCE * max) {
            return Err(RiemannError::NotPositiveDefinite { point, eigenvalues: eig.iter().copied().collect() });
        }
        let chol = m.clone().cholesky().ok_or_else(|| RiemannError::NotPositiveDefinite {
            point: point.clone(),
            eigenvalues: eig.iter().copied().collect(),
        })?;
        let l = chol.l();
        let sqrt_det = l.diagonal().iter().product();
        let linv_t = l.try_inverse().expect("cholesky factor invertible").transpose();
        let frame: Vec<f64> = (0..n * n).map(|k| linv_t[(k / n, k % n)]).collect();
        let ginv0 = m.try_inverse().expect("positive definite matrix invertible");
        let ginv = invert_jet_matrix(&g, &ginv0);
        let order = g.order();
        let gamma = if order == 0 {
            JTensor::zeros(n, 3, &g.components()[0])
        } else {
            christoffel(&g, &ginv)
        };
        let mut mj = MetricJet { n, point, g, ginv, gamma, sqrt_det, compat_residual: 0.0, frame };
        if order >= 1 {
            let ng = mj.covariant_derivative(&mj.g)?;
            mj.compat_residual = ng.values().in_frame(&mj.frame).max_abs();
        }
        Ok(mj)
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    /// Orthonormal frame, `frame[i * n + a]` being component `i` of vector `a`.
    pub fn frame(&self) -> &[f64] {
        &self.frame
    }

    pub fn g_values(&self) -> RTensor {
        self.g.values()
    }

    pub fn ginv_values(&self) -> RTensor {
        self.ginv.values()
    }

    pub fn constant(&self, c: f64) -> Jet {
        self.g.components()[0].constant_like(c)
    }

    /// Metric norm of a real covariant tensor at this point.
    pub fn norm(&self, t: &RTensor) -> f64 {
        t.frame_norm(&self.frame)
    }

    fn need(&self, t_order: usize, needed: usize) -> Result<(), RiemannError> {
        if t_order < needed {
            return Err(RiemannError::InsufficientOrder { needed, have: t_order });
        }
        Ok(())
    }

    /// `∇T` with the differentiation slot first; one jet order is consumed.
    pub fn covariant_derivative(&self, t: &JTensor) -> Result<JTensor, RiemannError> {
        self.need(t.order(), 1)?;
        self.need(self.order(), 1)?;
        let n = self.n;
        let r = t.rank();
        let dt: Vec<JTensor> = (0..n).map(|z| t.map(|x| x.derivative(z).expect("order checked"))).collect();
        let mut src = vec![0; r];
        Ok(JTensor::from_fn(n, r + 1, |idx| {
            let z = idx[0];
            let rest = &idx[1..];
            let mut acc = dt[z].at(rest).clone();
            for s in 0..r {
                src.copy_from_slice(rest);
                for l in 0..n {
                    src[s] = l;
                    let g = self.gamma.at(&[l, z, rest[s]]);
                    acc.fma(&(-g), t.at(&src));
                }
            }
            acc
        }))
    }

    /// Differential of a scalar as a 1-form.
    pub fn differential(&self, f: &Jet) -> Result<JTensor, RiemannError> {
        self.need(f.order(), 1)?;
        Ok(JTensor::from_vec(self.n, 1, (0..self.n).map(|k| f.derivative(k).unwrap()).collect()))
    }

    pub fn hessian(&self, f: &Jet) -> Result<JTensor, RiemannError> {
        self.covariant_derivative(&self.differential(f)?)
    }

    pub fn laplacian(&self, f: &Jet) -> Result<Jet, RiemannError> {
        Ok(self.hessian(f)?.trace(0, 1, &self.ginv).components()[0].clone())
    }

    /// Contravariant components of the metric dual of a 1-form.
    pub fn sharp(&self, w: &JTensor) -> Vec<Jet> {
        assert_eq!(w.rank(), 1);
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = w.components()[0].zero_like();
                for j in 0..n {
                    acc.fma(self.ginv.at(&[i, j]), w.at(&[j]));
                }
                acc
            })
            .collect()
    }

    /// Covariant components of a vector.
    pub fn flat(&self, v: &[Jet]) -> JTensor {
        let n = self.n;
        JTensor::from_fn(n, 1, |i| {
            let mut acc = v[0].zero_like();
            for j in 0..n {
                acc.fma(self.g.at(&[i[0], j]), &v[j]);
            }
            acc
        })
    }

    /// `g^{ij} a_i b_j` for 1-forms.
    pub fn dot_forms(&self, a: &JTensor, b: &JTensor) -> Jet {
        let mut acc = a.components()[0].zero_like();
        for i in 0..self.n {
            for j in 0..self.n {
                acc.fma(self.ginv.at(&[i, j]), &a.at(&[i]).mul_jet(b.at(&[j])));
            }
        }
        acc
    }

    /// Weighted divergence over `slot`:
    /// `Σ_i ∇_{e_i} T(.., e_i, ..) − T(.., ∇φ, ..)`. With `dphi = None` this is
    /// the ordinary divergence.
    pub fn divergence(&self, t: &JTensor, slot: usize, dphi: Option<&JTensor>) -> Result<JTensor, RiemannError> {
        let nt = self.covariant_derivative(t)?;
        let mut div = nt.trace(0, slot + 1, &self.ginv);
        if let Some(dphi) = dphi {
            let grad = self.sharp(dphi);
            let corr = t.contract_vector(slot, &grad);
            div = div.truncate(corr.order().min(div.order())).minus(&corr.truncate(div.order()));
        }
        Ok(div)
    }

    /// `Δ_φ u = Δu − ⟨∇φ, ∇u⟩`.
    pub fn weighted_laplacian(&self, u: &Jet, dphi: &JTensor) -> Result<Jet, RiemannError> {
        let du = self.differential(u)?;
        Ok(self.laplacian(u)? - self.dot_forms(dphi, &du))
    }

    /// Lowered curvature `Rm(x,y,z,w)`; two jet orders are consumed.
    pub fn riemann(&self) -> Result<JTensor, RiemannError> {
        self.need(self.order(), 2)?;
        let n = self.n;
        let dgam: Vec<JTensor> = (0..n).map(|z| self.gamma.map(|x| x.derivative(z).unwrap())).collect();
        // R^l_{ijk} = ∂_iΓ^l_jk − ∂_jΓ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik
        let rstd = JTensor::from_fn(n, 4, |idx| {
            let (l, i, j, k) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = dgam[i].at(&[l, j, k]).minus(dgam[j].at(&[l, i, k]));
            for m in 0..n {
                acc.fma(self.gamma.at(&[l, i, m]), self.gamma.at(&[m, j, k]));
                acc.fma(&(-self.gamma.at(&[l, j, m])), self.gamma.at(&[m, i, k]));
            }
            acc
        });
        Ok(JTensor::from_fn(n, 4, |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = rstd.components()[0].zero_like();
            for m in 0..n {
                acc.fma(self.g.at(&[l, m]), rstd.at(&[m, i, j, k]));
            }
            -acc
        }))
    }

    pub fn ricci(&self, rm: &JTensor) -> JTensor {
        rm.trace(0, 2, &self.ginv)
    }

    pub fn trace2(&self, t: &JTensor) -> Jet {
        t.trace(0, 1, &self.ginv).components()[0].clone()
    }

    /// Ricci, scalar curvature, Schouten tensor and its trace.
    pub fn ricci_scalar_schouten(&self, rm: &JTensor) -> Result<Schouten, RiemannError> {
        let n = self.n;
        if n < 3 {
            return Err(RiemannError::Dimension("the Schouten tensor needs dimension at least 3".into()));
        }
        let ric = self.ricci(rm);
        let r = self.trace2(&ric);
        let o = ric.order();
        let g = self.g.truncate(o);
        let p = ric.minus(&g.times_scalar(&r.scale(1.0 / (2.0 * (n as f64 - 1.0))))).scale(1.0 / (n as f64 - 2.0));
        let j = r.scale(1.0 / (2.0 * (n as f64 - 1.0)));
        Ok(Schouten { ric, r, p, j })
    }
}

#[derive(Debug, Clone)]
pub struct Schouten {
    pub ric: JTensor,
    pub r: Jet,
    pub p: JTensor,
    pub j: Jet,
}

fn christoffel(g: &JTensor, ginv: &JTensor) -> JTensor {
    let n = g.dim();
    let dg: Vec<JTensor> = (0..n).map(|z| g.map(|x| x.derivative(z).unwrap())).collect();
    let low = JTensor::from_fn(n, 3, |idx| {
        let (l, i, j) = (idx[0], idx[1], idx[2]);
        dg[i].at(&[j, l]).plus(dg[j].at(&[i, l])).minus(dg[l].at(&[i, j])).scale(0.5)
    });
    JTensor::from_fn(n, 3, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut acc = low.components()[0].zero_like();
        for l in 0..n {
            acc.fma(ginv.at(&[k, l]), low.at(&[l, i, j]));
        }
        acc
    })
}

fn matmul(a: &JTensor, b: &JTensor) -> JTensor {
    let n = a.dim();
    JTensor::from_fn(n, 2, |idx| {
        let mut acc = a.components()[0].zero_like();
        for k in 0..n {
            acc.fma(a.at(&[idx[0], k]), b.at(&[k, idx[1]]));
        }
        acc
    })
}

/// Inverse of a jet-valued matrix by Newton iteration from the inverse of its
/// value; each step doubles the number of correct Taylor degrees.
fn invert_jet_matrix(g: &JTensor, inv0: &DMatrix<f64>) -> JTensor {
    let n = g.dim();
    let proto = &g.components()[0];
    let mut x = JTensor::from_fn(n, 2, |i| proto.constant_like(inv0[(i[0], i[1])]));
    let mut correct = 1;
    while correct <= g.order() {
        let gx = matmul(g, &x);
        let two_minus = JTensor::from_fn(n, 2, |i| {
            let d = if i[0] == i[1] { 2.0 } else { 0.0 };
            gx.at(i).scale(-1.0).add_scalar(d)
        });
        x = matmul(&x, &two_minus);
        correct *= 2;
    }
    x
}

/// Opaque identifier of the scale (metric in the conformal class) in which
/// components are expressed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScaleTag(pub String);

/// Real tensor value at a point, tagged with its conformal weight and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    /// (contravariant, covariant) slot counts
    pub valence: (usize, usize),
    pub n: usize,
    pub components: Vec<f64>,
    pub weight: i32,
    pub scale: ScaleTag,
}

impl TensorValue {
    pub fn covariant(t: &RTensor, weight: i32, scale: ScaleTag) -> TensorValue {
        TensorValue { valence: (0, t.rank()), n: t.dim(), components: t.components().to_vec(), weight, scale }
    }

    /// Re-expresses a density-weighted quantity in the scale `e^{2s}g`, where
    /// `s` is the value of the conformal exponent at the point.
    pub fn to_scale(&self, s: f64, tag: ScaleTag) -> TensorValue {
        let f = (self.weight as f64 * s).exp();
        TensorValue { components: self.components.iter().map(|x| x * f).collect(), scale: tag, ..self.clone() }
    }

    pub fn tensor(&self) -> RTensor {
        RTensor::from_vec(self.n, self.valence.0 + self.valence.1, self.components.clone())
    }
}

/// Largest violation of the algebraic curvature symmetries (pair
/// antisymmetries, pair symmetry, first Bianchi), relative to the largest
/// component.
pub fn riemann_symmetry_residual(rm: &RTensor) -> f64 {
    let n = rm.dim();
    let scale = rm.max_abs().max(1e-300);
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let x = rm.at(&[a, b, c, d]);
                    worst = worst
                        .max((x + rm.at(&[b, a, c, d])).abs())
                        .max((x + rm.at(&[a, b, d, c])).abs())
                        .max((x - rm.at(&[c, d, a, b])).abs())
                        .max((x + rm.at(&[b, c, a, d]) + rm.at(&[c, a, b, d])).abs());
                }
            }
        }
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar;

    fn metric(src: &[&str], coords: &[&str]) -> Vec<ScalarExpr> {
        let c: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        src.iter().map(|s| parse_scalar(s, &c).unwrap()).collect()
    }

    #[test]
    fn flat_cartesian() {
        let g = metric(&["1", "0", "0", "0", "1", "0", "0", "0", "1"], &["x", "y", "z"]);
        let mj = MetricJet::from_exprs(&g, &[0.3, -1.0, 2.0], 4).unwrap();
        assert_eq!(mj.gamma.values().max_abs(), 0.0);
        assert_eq!(mj.riemann().unwrap().values().max_abs(), 0.0);
        let s = mj.ricci_scalar_schouten(&mj.riemann().unwrap()).unwrap();
        assert_eq!(s.p.values().max_abs(), 0.0);
    }

    #[test]
    fn polar_christoffel() {
        let g = metric(&["1", "0", "0", "r^2"], &["r", "t"]);
        let mj = MetricJet::from_exprs(&g, &[2.0, 0.4], 3).unwrap();
        assert!((mj.gamma.at(&[0, 1, 1]).value() + 2.0).abs() < 1e-14);
        assert!((mj.gamma.at(&[1, 0, 1]).value() - 0.5).abs() < 1e-14);
        assert!((mj.gamma.at(&[1, 1, 0]).value() - 0.5).abs() < 1e-14);
        assert!(mj.compat_residual < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let g = metric(&["1", "0", "0", "-1"], &["x", "y"]);
        assert!(matches!(
            MetricJet::from_exprs(&g, &[0.0, 0.0], 2),
            Err(RiemannError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn round_sphere_scalar_curvature() {
        let g = metric(&["1", "0", "0", "sin(t)^2"], &["t", "p"]);
        let mj = MetricJet::from_exprs(&g, &[0.9, 0.1], 2).unwrap();
        let rm = mj.riemann().unwrap();
        let r = mj.trace2(&mj.ricci(&rm));
        assert!((r.value() - 2.0).abs() < 1e-12);
        // orthonormal sectional value is +1
        let sec = rm.at(&[0, 1, 0, 1]).value() / (0.9f64.sin().powi(2));
        assert!((sec - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_half_plane() {
        let g = metric(&["1/y^2", "0", "0", "1/y^2"], &["x", "y"]);
        let mj = MetricJet::from_exprs(&g, &[0.2, 1.7], 2).unwrap();
        let rm = mj.riemann().unwrap();
        let r = mj.trace2(&mj.ricci(&rm));
        assert!((r.value() + 2.0).abs() < 1e-12);
        assert!(matches!(mj.ricci_scalar_schouten(&rm), Err(RiemannError::Dimension(_))));
    }

    #[test]
    fn three_sphere_schouten() {
        let g = metric(
            &["1", "0", "0", "0", "sin(r)^2", "0", "0", "0", "sin(r)^2*sin(t)^2"],
            &["r", "t", "p"],
        );
        let mj = MetricJet::from_exprs(&g, &[1.1, 0.7, 0.0], 2).unwrap();
        let rm = mj.riemann().unwrap();
        let s = mj.ricci_scalar_schouten(&rm).unwrap();
        let gv = mj.g_values();
        assert!(s.ric.values().minus(&gv.scale(2.0)).max_abs() < 1e-12);
        assert!((s.r.value() - 6.0).abs() < 1e-12);
        assert!(s.p.values().minus(&gv.scale(0.5)).max_abs() < 1e-12);
        assert!((s.j.value() - 1.5).abs() < 1e-12);
        let weyl = rm.values().minus(&s.p.values().kulkarni_nomizu(&gv));
        assert!(weyl.max_abs() < 1e-12);
    }

    #[test]
    fn leibniz_on_flat_chart() {
        let g = metric(&["1", "0", "0", "1"], &["x", "y"]);
        let mj = MetricJet::from_exprs(&g, &[0.5, 0.5], 3).unwrap();
        let f = Jet::variable(2, 3, 0, 0.5);
        let fg = mj.g.times_scalar(&f);
        let d = mj.covariant_derivative(&fg).unwrap().values();
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert_eq!(*d.at(&[0, a, b]), want);
                assert_eq!(*d.at(&[1, a, b]), 0.0);
            }
        }
    }

    #[test]
    fn weighted_divergence_examples() {
        let c = vec!["x".to_string(), "y".to_string()];
        let g = metric(&["1", "0", "0", "1"], &["x", "y"]);
        let p = [0.7, -0.3];
        let mj = MetricJet::from_exprs(&g, &p, 3).unwrap();
        let x = parse_scalar("x", &c).unwrap().eval_jet(&p, 3).unwrap();
        let zero = x.zero_like();
        let xi = JTensor::from_vec(2, 1, vec![x.clone(), zero.clone()]);
        let d0 = mj.divergence(&xi, 0, None).unwrap();
        assert_eq!(d0.components()[0].value(), 1.0);
        let dphi = mj.differential(&x).unwrap();
        let d1 = mj.divergence(&xi, 0, Some(&dphi)).unwrap();
        assert!((d1.components()[0].value() - (1.0 - 0.7)).abs() < 1e-15);
        let u = &x * &x;
        let lap = mj.weighted_laplacian(&u, &dphi).unwrap();
        assert!((lap.value() - (2.0 - 1.4)).abs() < 1e-15);
        assert!(matches!(
            mj.covariant_derivative(&mj.g.truncate(0)),
            Err(RiemannError::InsufficientOrder { .. })
        ));
    }

    #[test]
    fn weight_round_trip() {
        let t = RTensor::from_fn(3, 2, |i| (i[0] * 3 + i[1]) as f64 - 2.5);
        let v = TensorValue::covariant(&t, -2, ScaleTag("g".into()));
        let back = v.to_scale(0.37, ScaleTag("h".into())).to_scale(-0.37, ScaleTag("g".into()));
        for (a, b) in back.components.iter().zip(&v.components) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(back.scale, v.scale);
    }
}
