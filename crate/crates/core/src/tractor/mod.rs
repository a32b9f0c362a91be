//! Tractor calculus of a smooth conformal measure space in a chosen scale.
//!
//! A standard tractor is written `I = σY + Z(ω) + ρX` with `ω` stored as a
//! vector. The tractor metric is `⟨a,b⟩ = σ_a ρ_b + ρ_a σ_b + g(ω_a, ω_b)`.
//! Matrices acting on tractors use the component order `[σ, ω^0 … ω^{n−1}, ρ]`.
//! Curvature follows `R(x,y) = −[∇_x, ∇_y] + ∇_{[x,y]}`.

mod kform;

pub use kform::{wedge2, KFormField, KFormTractor};

use crate::expr::Jet;
use crate::riemann::{JTensor, MetricJet, RTensor, RiemannError, ScaleTag, Scalar};
use crate::smms::{CurvaturePack, SmmsError, SmmsJet, SmmsSpec};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TractorError {
    #[error("tractors expressed in different scales ({0:?} vs {1:?})")]
    ScaleMismatch(ScaleTag, ScaleTag),
    #[error("form degree mismatch: {0}")]
    Degree(String),
    #[error(transparent)]
    Smms(#[from] SmmsError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
}

fn same_scale(a: &ScaleTag, b: &ScaleTag) -> Result<(), TractorError> {
    if a != b {
        return Err(TractorError::ScaleMismatch(a.clone(), b.clone()));
    }
    Ok(())
}

/// Standard tractor value at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tractor {
    pub sigma: f64,
    pub omega: Vec<f64>,
    pub rho: f64,
    pub scale: ScaleTag,
}

impl Tractor {
    pub fn new(sigma: f64, omega: Vec<f64>, rho: f64, scale: ScaleTag) -> Tractor {
        Tractor { sigma, omega, rho, scale }
    }

    /// The projector `X`, with `ρ = 1`.
    pub fn x(n: usize, scale: ScaleTag) -> Tractor {
        Tractor::new(0.0, vec![0.0; n], 1.0, scale)
    }

    /// `Y`, with `σ = 1`.
    pub fn y(n: usize, scale: ScaleTag) -> Tractor {
        Tractor::new(1.0, vec![0.0; n], 0.0, scale)
    }

    pub fn z(omega: Vec<f64>, scale: ScaleTag) -> Tractor {
        Tractor::new(0.0, omega, 0.0, scale)
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.sigma);
        v.extend(&self.omega);
        v.push(self.rho);
        v
    }

    pub fn from_slice(c: &[f64], scale: ScaleTag) -> Tractor {
        let n = c.len() - 2;
        Tractor::new(c[0], c[1..=n].to_vec(), c[n + 1], scale)
    }

    pub fn inner(&self, o: &Tractor, g: &RTensor) -> Result<f64, TractorError> {
        same_scale(&self.scale, &o.scale)?;
        let n = self.dim();
        let mut acc = self.sigma * o.rho + self.rho * o.sigma;
        for i in 0..n {
            for j in 0..n {
                acc += g.at(&[i, j]) * self.omega[i] * o.omega[j];
            }
        }
        Ok(acc)
    }

    pub fn plus(&self, o: &Tractor) -> Result<Tractor, TractorError> {
        same_scale(&self.scale, &o.scale)?;
        Ok(Tractor::new(
            self.sigma + o.sigma,
            self.omega.iter().zip(&o.omega).map(|(a, b)| a + b).collect(),
            self.rho + o.rho,
            self.scale.clone(),
        ))
    }

    pub fn scaled(&self, c: f64) -> Tractor {
        Tractor::new(c * self.sigma, self.omega.iter().map(|x| c * x).collect(), c * self.rho, self.scale.clone())
    }

    /// Re-expresses the tractor in the scale `e^{2s} g`; `mj` is the metric of
    /// the current scale and `s` must carry first derivatives.
    pub fn transform(&self, s: &Jet, mj: &MetricJet, tag: ScaleTag) -> Result<Tractor, TractorError> {
        let ds = mj.differential(s)?;
        let grad: Vec<f64> = mj.sharp(&ds).iter().map(|j| j.value()).collect();
        let n = self.dim();
        let (es, ems) = (s.value().exp(), (-s.value()).exp());
        let mut g_ds_w = 0.0;
        let mut ds2 = 0.0;
        for i in 0..n {
            g_ds_w += ds.at(&[i]).value() * self.omega[i];
            ds2 += ds.at(&[i]).value() * grad[i];
        }
        Ok(Tractor::new(
            es * self.sigma,
            (0..n).map(|i| ems * (self.omega[i] + self.sigma * grad[i])).collect(),
            ems * (self.rho - g_ds_w - 0.5 * ds2 * self.sigma),
            tag,
        ))
    }

    /// Euclidean size `σ² + |ω|² + ρ²` in the scale, square-rooted.
    pub fn size(&self, g: &RTensor) -> f64 {
        let n = self.dim();
        let mut w2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                w2 += g.at(&[i, j]) * self.omega[i] * self.omega[j];
            }
        }
        (self.sigma * self.sigma + w2 + self.rho * self.rho).sqrt()
    }
}

/// Tractor field given by jets of its components.
#[derive(Debug, Clone)]
pub struct TractorField {
    pub sigma: Jet,
    pub omega: Vec<Jet>,
    pub rho: Jet,
    pub scale: ScaleTag,
}

impl TractorField {
    pub fn constant(t: &Tractor, proto: &Jet) -> TractorField {
        TractorField {
            sigma: proto.constant_like(t.sigma),
            omega: t.omega.iter().map(|&w| proto.constant_like(w)).collect(),
            rho: proto.constant_like(t.rho),
            scale: t.scale.clone(),
        }
    }

    pub fn value(&self) -> Tractor {
        Tractor::new(
            self.sigma.value(),
            self.omega.iter().map(|j| j.value()).collect(),
            self.rho.value(),
            self.scale.clone(),
        )
    }

    pub fn order(&self) -> usize {
        self.omega.iter().map(|j| j.order()).chain([self.sigma.order(), self.rho.order()]).min().unwrap()
    }

    /// Pointwise tractor inner product as a jet.
    pub fn inner(&self, o: &TractorField, mj: &MetricJet) -> Result<Jet, TractorError> {
        same_scale(&self.scale, &o.scale)?;
        let n = self.omega.len();
        let mut acc = &self.sigma * &o.rho + &self.rho * &o.sigma;
        for i in 0..n {
            for j in 0..n {
                acc.fma(mj.g.at(&[i, j]), &self.omega[i].mul_jet(&o.omega[j]));
            }
        }
        Ok(acc)
    }

    fn map(&self, f: impl Fn(&Jet) -> Jet) -> TractorField {
        TractorField {
            sigma: f(&self.sigma),
            omega: self.omega.iter().map(&f).collect(),
            rho: f(&self.rho),
            scale: self.scale.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> TractorField {
        self.map(|j| j.scale(c))
    }

    pub fn truncate(&self, order: usize) -> TractorField {
        self.map(|j| j.truncate(order))
    }
}

/// Tractor-valued output of `𝔻^W` applied to a tractor field: a tractor for
/// each of the top, middle (one per coordinate direction, index raised) and
/// bottom slots.
#[derive(Debug, Clone)]
pub struct DTractor {
    pub top: TractorField,
    pub middle: Vec<TractorField>,
    pub bottom: TractorField,
}

/// Tractor curvature of `∇^W`: `R^W(x,y) I = (0, −σ dP^W(x,y,·)^♯ + A^W(x,y,ω,·)^♯, dP^W(x,y,ω))`.
#[derive(Debug, Clone)]
pub struct TractorCurvature {
    pub a_w: RTensor,
    pub dp_w: RTensor,
    scale: ScaleTag,
}

impl TractorCurvature {
    pub fn apply(&self, x: usize, y: usize, t: &Tractor, mj: &MetricJet) -> Result<Tractor, TractorError> {
        same_scale(&self.scale, &t.scale)?;
        let n = t.dim();
        let ginv = mj.ginv_values();
        let mut low = vec![0.0; n];
        let mut rho = 0.0;
        for l in 0..n {
            low[l] = -t.sigma * self.dp_w.at(&[x, y, l]);
            for j in 0..n {
                low[l] += self.a_w.at(&[x, y, j, l]) * t.omega[j];
            }
            rho += self.dp_w.at(&[x, y, l]) * t.omega[l];
        }
        let omega = (0..n).map(|k| (0..n).map(|l| ginv.at(&[k, l]) * low[l]).sum()).collect();
        Ok(Tractor::new(0.0, omega, rho, self.scale.clone()))
    }
}

/// The weighted Weyl tractor, stored through its slot tensors.
#[derive(Debug, Clone)]
pub struct WeylTractor {
    /// `m + n − 4`
    pub c: f64,
    pub a_w: RTensor,
    pub dp_w: RTensor,
    pub b_w: RTensor,
    frame: Vec<f64>,
    scale: ScaleTag,
}

impl WeylTractor {
    /// `W(T1,T2) = c⟨A,Φ1⊗Φ2⟩ + B(α1,α2) − c⟨dP, Φ1⊗α2 + Φ2⊗α1⟩`.
    pub fn eval(&self, t1: &KFormTractor, t2: &KFormTractor) -> Result<f64, TractorError> {
        same_scale(&self.scale, &t1.scale)?;
        same_scale(&self.scale, &t2.scale)?;
        if t1.k != 2 || t2.k != 2 {
            return Err(TractorError::Degree("the Weyl tractor acts on adjoint tractors".into()));
        }
        let f = &self.frame;
        let (a1, p1) = (t1.alpha.in_frame(f), t1.big_phi.in_frame(f));
        let (a2, p2) = (t2.alpha.in_frame(f), t2.big_phi.in_frame(f));
        let a = self.a_w.in_frame(f);
        let dp = self.dp_w.in_frame(f);
        let b = self.b_w.in_frame(f);
        let n = a.dim();
        let mut aa = 0.0;
        let mut bb = 0.0;
        let mut dd = 0.0;
        for i in 0..n {
            for j in 0..n {
                bb += b.at(&[i, j]) * a1.at(&[i]) * a2.at(&[j]);
                for k in 0..n {
                    dd += dp.at(&[i, j, k]) * (p1.at(&[i, j]) * a2.at(&[k]) + p2.at(&[i, j]) * a1.at(&[k]));
                    for l in 0..n {
                        aa += a.at(&[i, j, k, l]) * p1.at(&[i, j]) * p2.at(&[k, l]);
                    }
                }
            }
        }
        // sums over ordered pairs i<j are a quarter (resp. half) of the full sums
        Ok(self.c * 0.25 * aa + bb - self.c * 0.5 * dd)
    }

    /// `W(I1,I2,I3,I4) = W(I1∧I2, I3∧I4)`.
    pub fn eval4(&self, i: [&Tractor; 4], mj: &MetricJet) -> Result<f64, TractorError> {
        self.eval(&wedge2(i[0], i[1], mj)?, &wedge2(i[2], i[3], mj)?)
    }

    /// Largest Euclidean size of `I` inserted into any one of the four slots,
    /// evaluated on the basis `Y, Z(e_a), X` with `e_a` orthonormal.
    pub fn annihilation(&self, t: &Tractor, mj: &MetricJet) -> Result<f64, TractorError> {
        let basis = frame_basis(mj, &self.scale);
        let nb = basis.len();
        let mut worst: f64 = 0.0;
        for slot in 0..4 {
            let mut s2 = 0.0;
            for a in 0..nb {
                for b in 0..nb {
                    for c in 0..nb {
                        let mut args: Vec<&Tractor> = vec![&basis[a], &basis[b], &basis[c]];
                        args.insert(slot, t);
                        let w = self.eval4([args[0], args[1], args[2], args[3]], mj)?;
                        s2 += w * w;
                    }
                }
            }
            worst = worst.max(s2.sqrt());
        }
        Ok(worst)
    }

    /// Residuals of the algebraic curvature symmetries on a set of tractors:
    /// pair symmetry and the cyclic identity, relative to the largest value.
    pub fn symmetry_residual(&self, ts: &[Tractor], mj: &MetricJet) -> Result<(f64, f64), TractorError> {
        let mut scale: f64 = 0.0;
        let mut pair: f64 = 0.0;
        let mut cyc: f64 = 0.0;
        for q in ts.windows(4) {
            let [a, b, c, d] = [&q[0], &q[1], &q[2], &q[3]];
            let w1 = self.eval4([a, b, c, d], mj)?;
            let w2 = self.eval4([c, d, a, b], mj)?;
            let s1 = self.eval4([b, c, a, d], mj)?;
            let s2 = self.eval4([c, a, b, d], mj)?;
            scale = scale.max(w1.abs()).max(w2.abs()).max(s1.abs()).max(s2.abs());
            pair = pair.max((w1 - w2).abs());
            cyc = cyc.max((w1 + s1 + s2).abs());
        }
        let scale = scale.max(f64::MIN_POSITIVE);
        Ok((pair / scale, cyc / scale))
    }
}

/// `Y, Z(e_0) … Z(e_{n−1}), X` with `e_a` an orthonormal frame.
pub fn frame_basis(mj: &MetricJet, scale: &ScaleTag) -> Vec<Tractor> {
    let n = mj.n;
    let f = mj.frame();
    let mut out = vec![Tractor::y(n, scale.clone())];
    for a in 0..n {
        out.push(Tractor::z((0..n).map(|i| f[i * n + a]).collect(), scale.clone()));
    }
    out.push(Tractor::x(n, scale.clone()));
    out
}

/// Tractor operations of a space at one point, in one scale.
#[derive(Debug, Clone)]
pub struct TractorCalc {
    pub sj: SmmsJet,
    pub pack: CurvaturePack,
    pub scale: ScaleTag,
}

impl TractorCalc {
    pub fn new(sj: SmmsJet, scale: ScaleTag) -> Result<TractorCalc, TractorError> {
        let pack = sj.curvature()?;
        Ok(TractorCalc { sj, pack, scale })
    }

    pub fn at(spec: &SmmsSpec, point: &[f64], order: usize, scale: ScaleTag) -> Result<TractorCalc, TractorError> {
        TractorCalc::new(spec.at(point, order)?, scale)
    }

    pub fn mj(&self) -> &MetricJet {
        &self.sj.mj
    }

    pub fn n(&self) -> usize {
        self.sj.n()
    }

    /// `m + n`
    pub fn mn(&self) -> f64 {
        self.pack.m + self.n() as f64
    }

    fn p_mixed(&self) -> JTensor {
        // P^k_z with the upper index first
        self.pack.p_w.raise(0, &self.mj().ginv)
    }

    /// `∇^W_z I` for every coordinate direction `z`.
    pub fn connection(&self, f: &TractorField) -> Result<Vec<TractorField>, TractorError> {
        same_scale(&self.scale, &f.scale)?;
        let mj = self.mj();
        let n = self.n();
        if f.order() == 0 {
            return Err(RiemannError::InsufficientOrder { needed: 1, have: 0 }.into());
        }
        let p = &self.pack.p_w;
        let pm = self.p_mixed();
        let mut out = Vec::with_capacity(n);
        for z in 0..n {
            let mut sigma = f.sigma.derivative(z).unwrap();
            let mut rho = f.rho.derivative(z).unwrap();
            let mut omega = Vec::with_capacity(n);
            for k in 0..n {
                sigma.fma(&(-mj.g.at(&[z, k])), &f.omega[k]);
                rho.fma(&(-p.at(&[z, k])), &f.omega[k]);
                let mut w = f.omega[k].derivative(z).unwrap();
                for j in 0..n {
                    w.fma(mj.gamma.at(&[k, z, j]), &f.omega[j]);
                }
                w.fma(pm.at(&[k, z]), &f.sigma);
                if k == z {
                    w.axpy_assign(1.0, &f.rho);
                }
                omega.push(w);
            }
            out.push(TractorField { sigma, omega, rho, scale: self.scale.clone() });
        }
        Ok(out)
    }

    /// Connection matrix `Ω_z` (values), so that `∇^W_z = ∂_z + Ω_z`.
    pub fn connection_matrix(&self, z: usize) -> DMatrix<f64> {
        let n = self.n();
        let mj = self.mj();
        let g = mj.g_values();
        let p = self.pack.p_w.values();
        let pm = self.p_mixed().values();
        let mut m = DMatrix::zeros(n + 2, n + 2);
        for k in 0..n {
            m[(0, 1 + k)] = -g.at(&[z, k]);
            m[(n + 1, 1 + k)] = -p.at(&[z, k]);
            m[(1 + k, 0)] = *pm.at(&[k, z]);
            for j in 0..n {
                m[(1 + k, 1 + j)] = mj.gamma.at(&[k, z, j]).value();
            }
        }
        m[(1 + z, n + 1)] = 1.0;
        m
    }

    /// `J̃` and `J = (1/n)𝔻v` as tractor fields.
    pub fn scale_tractor(&self) -> Result<(TractorField, TractorField), TractorError> {
        let mj = self.mj();
        let pack = &self.pack;
        let nf = self.n() as f64;
        let o = pack.ytilde.order();
        let omega: Vec<Jet> = mj.sharp(&pack.dv).into_iter().map(|j| j.truncate(o)).collect();
        let lap = mj.trace2(&pack.hess_v);
        let rm = &pack.rm;
        let r = mj.trace2(&mj.ricci(rm));
        let rho_j = (&lap + &(&r * &pack.v).scale(1.0 / (2.0 * (nf - 1.0)))).scale(-1.0 / nf);
        let sigma = pack.v.truncate(o);
        let jt = TractorField { sigma: sigma.clone(), omega: omega.clone(), rho: pack.ytilde.clone(), scale: self.scale.clone() };
        let j = TractorField { sigma, omega, rho: rho_j, scale: self.scale.clone() };
        Ok((jt, j))
    }

    /// `𝔻^W f` for a density `f` of weight `w`.
    pub fn d_density(&self, f: &Jet, w: f64) -> Result<TractorField, TractorError> {
        let mj = self.mj();
        let c = self.mn() + 2.0 * w - 2.0;
        let lap = self.sj.weighted_laplacian(f)?;
        let o = lap.order();
        let grad = mj.sharp(&mj.differential(f)?);
        let bottom = -(lap + (&self.pack.j_w * f).scale(w).truncate(o));
        Ok(TractorField {
            sigma: f.truncate(o).scale(w * c),
            omega: grad.iter().map(|j| j.truncate(o).scale(c)).collect(),
            rho: bottom,
            scale: self.scale.clone(),
        })
    }

    /// `(1/(m+n)) 𝔻^W u` for a weight-one density `u`.
    pub fn parallel_candidate(&self, u: &Jet) -> Result<TractorField, TractorError> {
        Ok(self.d_density(u, 1.0)?.scaled(1.0 / self.mn()))
    }

    /// `𝔻^W I` for a tractor field of weight `w`.
    pub fn d_tractor(&self, f: &TractorField, w: f64) -> Result<DTractor, TractorError> {
        let mj = self.mj();
        let n = self.n();
        let c = self.mn() + 2.0 * w - 2.0;
        let d1 = self.connection(f)?;
        let d2: Vec<Vec<TractorField>> = d1.iter().map(|t| self.connection(t)).collect::<Result<_, _>>()?;
        let o = d2[0][0].order();
        let dphi = self.sj.mj.sharp(&self.sj.dphi);
        // Δ_φ^W I = Σ g^{zy}(∇∇I)(z,y) − (∇I)(∇φ), with (∇∇I)(z,y) = ∇_z∇_y I − Γ^l_{zy} ∇_l I
        let zero = f.sigma.truncate(o).zero_like();
        let mut lap = TractorField { sigma: zero.clone(), omega: vec![zero.clone(); n], rho: zero, scale: self.scale.clone() };
        let acc = |lap: &mut TractorField, coef: &Jet, t: &TractorField| {
            lap.sigma.fma(coef, &t.sigma);
            lap.rho.fma(coef, &t.rho);
            for k in 0..n {
                lap.omega[k].fma(coef, &t.omega[k]);
            }
        };
        for z in 0..n {
            for y in 0..n {
                let gzy = mj.ginv.at(&[z, y]);
                acc(&mut lap, gzy, &d2[z][y]);
                for l in 0..n {
                    let coef = -(gzy * mj.gamma.at(&[l, z, y]));
                    acc(&mut lap, &coef, &d1[l]);
                }
            }
        }
        for l in 0..n {
            acc(&mut lap, &(-&dphi[l]), &d1[l]);
        }
        let j_w = &self.pack.j_w;
        let bottom = TractorField {
            sigma: -(&lap.sigma + &(j_w * &f.sigma).scale(w)),
            omega: (0..n).map(|k| -(&lap.omega[k] + &(j_w * &f.omega[k]).scale(w))).collect(),
            rho: -(&lap.rho + &(j_w * &f.rho).scale(w)),
            scale: self.scale.clone(),
        };
        let middle = (0..n)
            .map(|k| {
                let mut t = TractorField {
                    sigma: f.sigma.truncate(o).zero_like(),
                    omega: vec![f.sigma.truncate(o).zero_like(); n],
                    rho: f.sigma.truncate(o).zero_like(),
                    scale: self.scale.clone(),
                };
                for z in 0..n {
                    let gkz = mj.ginv.at(&[k, z]).scale(c);
                    t.sigma.fma(&gkz, &d1[z].sigma);
                    t.rho.fma(&gkz, &d1[z].rho);
                    for q in 0..n {
                        t.omega[q].fma(&gkz, &d1[z].omega[q]);
                    }
                }
                t
            })
            .collect();
        let top = f.scaled(w * c).truncate(o);
        Ok(DTractor { top, middle, bottom })
    }

    pub fn curvature(&self) -> Result<TractorCurvature, TractorError> {
        let dp = self.pack.dp_w.as_ref().ok_or(RiemannError::InsufficientOrder { needed: 3, have: self.mj().order() })?;
        Ok(TractorCurvature { a_w: self.pack.a_w.values(), dp_w: dp.values(), scale: self.scale.clone() })
    }

    /// Matrix of `R^W(x,y)` acting on `[σ, ω, ρ]`, as jets.
    fn curvature_matrix_jets(&self, x: usize, y: usize) -> Result<Vec<Jet>, TractorError> {
        let n = self.n();
        let mj = self.mj();
        let dp = self.pack.dp_w.as_ref().ok_or(RiemannError::InsufficientOrder { needed: 3, have: mj.order() })?;
        let a = &self.pack.a_w;
        let o = dp.order().min(a.order());
        let zero = dp.components()[0].truncate(o).zero_like();
        let d = n + 2;
        let mut mat = vec![zero.clone(); d * d];
        for k in 0..n {
            for l in 0..n {
                let gkl = mj.ginv.at(&[k, l]);
                let mut e = mat[(1 + k) * d].clone();
                e.fma(&(-gkl), dp.at(&[x, y, l]));
                mat[(1 + k) * d] = e;
                for j in 0..n {
                    mat[(1 + k) * d + 1 + j].fma(gkl, a.at(&[x, y, j, l]));
                }
            }
            mat[(n + 1) * d + 1 + k] = dp.at(&[x, y, k]).truncate(o);
        }
        Ok(mat)
    }

    pub fn curvature_matrix(&self, x: usize, y: usize) -> Result<DMatrix<f64>, TractorError> {
        let d = self.n() + 2;
        let m = self.curvature_matrix_jets(x, y)?;
        Ok(DMatrix::from_fn(d, d, |i, j| m[i * d + j].value()))
    }

    /// `(∇^W_z R^W)(x,y)` as a matrix.
    pub fn curvature_derivative(&self, z: usize, x: usize, y: usize) -> Result<DMatrix<f64>, TractorError> {
        let n = self.n();
        let d = n + 2;
        let mj = self.mj();
        let r = self.curvature_matrix_jets(x, y)?;
        if r[0].order() == 0 {
            return Err(RiemannError::InsufficientOrder { needed: 4, have: mj.order() }.into());
        }
        let dr = DMatrix::from_fn(d, d, |i, j| r[i * d + j].derivative(z).unwrap().value());
        let mut out = dr;
        for l in 0..n {
            let gx = mj.gamma.at(&[l, z, x]).value();
            let gy = mj.gamma.at(&[l, z, y]).value();
            if gx != 0.0 {
                out -= self.curvature_matrix(l, y)? * gx;
            }
            if gy != 0.0 {
                out -= self.curvature_matrix(x, l)? * gy;
            }
        }
        let om = self.connection_matrix(z);
        let rv = self.curvature_matrix(x, y)?;
        Ok(out + &om * &rv - &rv * &om)
    }

    pub fn weyl(&self) -> Result<WeylTractor, TractorError> {
        let mj = self.mj();
        let dp = self.pack.dp_w.as_ref().ok_or(RiemannError::InsufficientOrder { needed: 3, have: mj.order() })?;
        let b = self.pack.b_w.as_ref().ok_or(RiemannError::InsufficientOrder { needed: 4, have: mj.order() })?;
        Ok(WeylTractor {
            c: self.mn() - 4.0,
            a_w: self.pack.a_w.values(),
            dp_w: dp.values(),
            b_w: b.values(),
            frame: mj.frame().to_vec(),
            scale: self.scale.clone(),
        })
    }

    /// Euclidean size of `∇^W I` summed over an orthonormal frame.
    pub fn connection_size(&self, f: &TractorField) -> Result<f64, TractorError> {
        let d = self.connection(f)?;
        let mj = self.mj();
        let n = self.n();
        let fr = mj.frame();
        let g = mj.g_values();
        let mut s2 = 0.0;
        for a in 0..n {
            let mut comb = d[0].value().scaled(0.0);
            for z in 0..n {
                comb = comb.plus(&d[z].value().scaled(fr[z * n + a]))?;
            }
            s2 += comb.size(&g).powi(2);
        }
        Ok(s2.sqrt())
    }
}

/// Largest `‖∇^W I‖` and `|⟨I, J̃⟩|` over the points, with
/// `I = (1/(m+n))𝔻^W u`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ParallelResidual {
    pub nabla: f64,
    pub inner: f64,
}

pub fn check_parallel_correspondence(
    spec: &SmmsSpec,
    points: &[Vec<f64>],
    u: &crate::expr::ScalarExpr,
) -> Result<ParallelResidual, TractorError> {
    let mut res = ParallelResidual { nabla: 0.0, inner: 0.0 };
    let tag = ScaleTag("g".into());
    for p in points {
        let tc = TractorCalc::at(spec, p, 4, tag.clone())?;
        let uj = u.eval_jet(p, 4).map_err(SmmsError::from)?;
        let i = tc.parallel_candidate(&uj)?;
        let (jt, _) = tc.scale_tractor()?;
        res.nabla = res.nabla.max(tc.connection_size(&i)?);
        res.inner = res.inner.max(i.value().inner(&jt.value(), &tc.mj().g_values())?.abs());
    }
    Ok(res)
}
