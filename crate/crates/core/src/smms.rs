//! Weighted curvature of smooth metric measure spaces `(M, g, v^m dvol)`.
//!
//! For finite `m` the density is given by `v > 0` and the weight function is
//! `φ = −m log v`; for `m = ±∞` the density is given by `φ` directly.
//! Conformal changes act by `(g, v) ↦ (e^{2s}g, e^s v)`.

use crate::expr::{ExprError, Func, Jet, JetError, Node, ScalarExpr};
use crate::riemann::{JTensor, MetricJet, RTensor, RiemannError, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmmsError {
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("density v = {value} is not positive at {point:?}")]
    NonPositiveDensity { point: Vec<f64>, value: f64 },
    #[error("dimensional parameter m = {m} is excluded here: {why}")]
    ExcludedM { m: String, why: String },
    #[error("{0}")]
    Spec(String),
    #[error("{kind} at point {point:?}")]
    Jet { kind: JetError, point: Vec<f64> },
}

/// The dimensional parameter, an extended real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimParam {
    Finite(f64),
    PosInf,
    NegInf,
}

impl DimParam {
    pub fn finite(self) -> Option<f64> {
        match self {
            DimParam::Finite(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self.finite().is_none()
    }
}

impl std::fmt::Display for DimParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DimParam::Finite(m) => write!(f, "{m}"),
            DimParam::PosInf => write!(f, "inf"),
            DimParam::NegInf => write!(f, "-inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Density {
    /// `v`, used with finite `m`
    V(ScalarExpr),
    /// `φ`, used with `m = ±∞`
    Phi(ScalarExpr),
}

#[derive(Debug, Clone)]
pub struct SmmsSpec {
    pub coords: Vec<String>,
    /// row-major `n×n` metric entries
    pub g: Vec<ScalarExpr>,
    pub density: Density,
    pub m: DimParam,
    pub mu: f64,
    pub lambda: Option<f64>,
    conformal: Vec<ScalarExpr>,
}

impl PartialEq for SmmsSpec {
    fn eq(&self, o: &Self) -> bool {
        let dens = match (&self.density, &o.density) {
            (Density::V(a), Density::V(b)) | (Density::Phi(a), Density::Phi(b)) => a.node() == b.node(),
            _ => false,
        };
        self.coords == o.coords
            && dens
            && self.m == o.m
            && self.mu == o.mu
            && self.lambda == o.lambda
            && self.g.iter().zip(&o.g).all(|(a, b)| a.node() == b.node())
            && self.conformal.len() == o.conformal.len()
            && self.conformal.iter().zip(&o.conformal).all(|(a, b)| a.node() == b.node())
    }
}

impl SmmsSpec {
    pub fn new(
        coords: Vec<String>,
        g: Vec<ScalarExpr>,
        density: Density,
        m: DimParam,
        mu: f64,
    ) -> Result<SmmsSpec, SmmsError> {
        let n = coords.len();
        if n == 0 {
            return Err(SmmsError::Spec("at least one coordinate is required".into()));
        }
        if g.len() != n * n {
            return Err(SmmsError::Spec(format!("metric needs {} entries, got {}", n * n, g.len())));
        }
        match (&density, m) {
            (Density::V(_), DimParam::Finite(_)) | (Density::Phi(_), DimParam::PosInf | DimParam::NegInf) => {}
            (Density::V(_), _) => return Err(SmmsError::Spec("m = ±inf needs the density as phi, not v".into())),
            (Density::Phi(_), _) => return Err(SmmsError::Spec("finite m needs the density as v, not phi".into())),
        }
        Ok(SmmsSpec { coords, g, density, m, mu, lambda: None, conformal: Vec::new() })
    }

    pub fn with_lambda(mut self, lambda: Option<f64>) -> SmmsSpec {
        self.lambda = lambda;
        self
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Conformal exponents applied so far, in order.
    pub fn conformal_factors(&self) -> &[ScalarExpr] {
        &self.conformal
    }

    /// `(g, v) ↦ (e^{2s}g, e^s v)`. Applying `s` and then `−s` cancels the
    /// pair, so the original spec is recovered exactly.
    pub fn conformal_change(&self, s: &ScalarExpr) -> Result<SmmsSpec, SmmsError> {
        if self.m.is_infinite() {
            return Err(SmmsError::ExcludedM {
                m: self.m.to_string(),
                why: "conformal changes are only defined for finite m".into(),
            });
        }
        if s.coords() != &self.coords[..] {
            return Err(SmmsError::Spec("conformal exponent uses different coordinates".into()));
        }
        let mut out = self.clone();
        let cancels = |a: &ScalarExpr, b: &ScalarExpr| matches!(a.node(), Node::Neg(x) if **x == *b.node());
        match out.conformal.last() {
            Some(last) if cancels(s, last) || cancels(last, s) => {
                out.conformal.pop();
            }
            _ => {
                if !(matches!(s.node(), Node::Num(x) if *x == 0.0)) {
                    out.conformal.push(s.clone());
                }
            }
        }
        Ok(out)
    }

    fn total_exponent(&self) -> Option<ScalarExpr> {
        let mut it = self.conformal.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, s| acc.add(s)))
    }

    /// Same space with the conformal factors multiplied into `g` and `v`.
    pub fn baked(&self) -> SmmsSpec {
        let Some(s) = self.total_exponent() else {
            return self.clone();
        };
        let two = ScalarExpr::constant(2.0, &self.coords);
        let e2s = two.mul(&s).call(Func::Exp);
        let es = s.call(Func::Exp);
        let mut out = self.clone();
        out.g = self.g.iter().map(|gij| e2s.mul(gij)).collect();
        if let Density::V(v) = &self.density {
            out.density = Density::V(es.mul(v));
        }
        out.conformal.clear();
        out
    }

    /// Effective `v` expression, including conformal factors (finite m only).
    pub fn v_expr(&self) -> Option<ScalarExpr> {
        match &self.baked().density {
            Density::V(v) => Some(v.clone()),
            Density::Phi(_) => None,
        }
    }

    /// Evaluates all data as jets at `point`.
    pub fn at(&self, point: &[f64], order: usize) -> Result<SmmsJet, SmmsError> {
        let n = self.n();
        if point.len() != n {
            return Err(ExprError::DimensionMismatch { expected: n, got: point.len() }.into());
        }
        let s = match self.total_exponent() {
            Some(s) => Some(s.eval_jet(point, order)?),
            None => None,
        };
        let mut g = Vec::with_capacity(n * n);
        for e in &self.g {
            let gij = e.eval_jet(point, order)?;
            g.push(match &s {
                Some(s) => s.scale(2.0).exp() * gij,
                None => gij,
            });
        }
        let mj = MetricJet::new(point, JTensor::from_vec(n, 2, g))?;
        let (v, phi, dphi) = match (&self.density, self.m) {
            (Density::V(ve), DimParam::Finite(m)) => {
                let mut v = ve.eval_jet(point, order)?;
                if let Some(s) = &s {
                    v = s.exp() * v;
                }
                if !(v.value() > 0.0) {
                    return Err(SmmsError::NonPositiveDensity { point: point.to_vec(), value: v.value() });
                }
                let dphi = if order == 0 {
                    JTensor::zeros(n, 1, &v)
                } else {
                    let dv = mj.differential(&v)?;
                    let vinv = v.recip().map_err(|kind| SmmsError::Jet { kind, point: point.to_vec() })?;
                    dv.times_scalar(&vinv).scale(-m)
                };
                (Some(v), None, dphi)
            }
            (Density::Phi(pe), _) => {
                let phi = pe.eval_jet(point, order)?;
                let dphi = if order == 0 { JTensor::zeros(n, 1, &phi) } else { mj.differential(&phi)? };
                (None, Some(phi), dphi)
            }
            _ => unreachable!("density arm validated at construction"),
        };
        Ok(SmmsJet { mj, m: self.m, mu: self.mu, v, phi, dphi })
    }
}

/// A smooth metric measure space evaluated as jets at one point.
#[derive(Debug, Clone)]
pub struct SmmsJet {
    pub mj: MetricJet,
    pub m: DimParam,
    pub mu: f64,
    pub v: Option<Jet>,
    pub phi: Option<Jet>,
    /// `dφ` as a 1-form
    pub dphi: JTensor,
}

impl SmmsJet {
    pub fn n(&self) -> usize {
        self.mj.n
    }

    pub fn point(&self) -> &[f64] {
        &self.mj.point
    }

    fn jet_err(&self, kind: JetError) -> SmmsError {
        SmmsError::Jet { kind, point: self.point().to_vec() }
    }

    fn finite_m(&self) -> Result<f64, SmmsError> {
        self.m.finite().ok_or_else(|| SmmsError::ExcludedM {
            m: self.m.to_string(),
            why: "this operation needs a finite dimensional parameter".into(),
        })
    }

    /// Finite `m` with `m + n − 2 ≠ 0` and `m + n − 1 ≠ 0`.
    pub fn admissible_m(&self) -> Result<f64, SmmsError> {
        let m = self.finite_m()?;
        let n = self.n() as f64;
        if m + n - 2.0 == 0.0 || m + n - 1.0 == 0.0 {
            return Err(SmmsError::ExcludedM { m: m.to_string(), why: "m + n − 1 and m + n − 2 must be nonzero".into() });
        }
        Ok(m)
    }

    /// Bakry–Émery Ricci tensor and weighted scalar curvature.
    pub fn bakry_emery(&self) -> Result<(JTensor, Jet), SmmsError> {
        let mj = &self.mj;
        let rm = mj.riemann()?;
        let ric = mj.ricci(&rm);
        let r = mj.trace2(&ric);
        match self.m {
            DimParam::Finite(m) => {
                let v = self.v.as_ref().unwrap();
                if m == 0.0 {
                    return Ok((ric, r));
                }
                let vinv = v.recip().map_err(|k| self.jet_err(k))?;
                let hv = mj.hessian(v)?;
                let lap = mj.trace2(&hv);
                let dv = mj.differential(v)?;
                let dv2 = mj.dot_forms(&dv, &dv);
                let ric_be = ric.minus(&hv.times_scalar(&vinv).scale(m));
                let r_be = r - (&lap * &vinv).scale(2.0 * m) - (&dv2 * &(&vinv * &vinv)).scale(m * (m - 1.0));
                Ok((ric_be, r_be))
            }
            _ => {
                let phi = self.phi.as_ref().unwrap();
                let hphi = mj.hessian(phi)?;
                let lap = mj.trace2(&hphi);
                let d2 = mj.dot_forms(&self.dphi, &self.dphi);
                Ok((ric.plus(&hphi), r + lap.scale(2.0) - d2))
            }
        }
    }

    /// `Δ_φ u = Δu − ⟨∇φ, ∇u⟩`.
    pub fn weighted_laplacian(&self, u: &Jet) -> Result<Jet, SmmsError> {
        Ok(self.mj.weighted_laplacian(u, &self.dphi)?)
    }

    /// The full set of weighted curvature tensors. `B^W` is included when the
    /// jets carry order 4.
    pub fn curvature(&self) -> Result<CurvaturePack, SmmsError> {
        let m = self.admissible_m()?;
        let mj = &self.mj;
        let n = self.n();
        let nf = n as f64;
        let v = self.v.clone().unwrap();
        let vinv = v.recip().map_err(|k| self.jet_err(k))?;
        let rm = mj.riemann()?;
        let ric = mj.ricci(&rm);
        let r = mj.trace2(&ric);
        let (ric_be, r_w) = self.bakry_emery()?;
        let o = ric_be.order();
        let g = mj.g.truncate(o);
        let j_w = (&r_w + &(&vinv * &vinv).scale(m * self.mu)).scale(1.0 / (2.0 * (m + nf - 1.0)));
        let p_w = ric_be.minus(&g.times_scalar(&j_w)).scale(1.0 / (m + nf - 2.0));
        let a_w = rm.minus(&p_w.kulkarni_nomizu(&g));
        let dv = mj.differential(&v)?;
        let hess_v = mj.hessian(&v)?;
        let lap_v = mj.trace2(&hess_v);
        // J = (1/n) D v in the standard tractor calculus
        let rho_j = (&lap_v + &(&r * &v).scale(1.0 / (2.0 * (nf - 1.0)))).scale(-1.0 / nf);
        let j_norm2 = (&v * &rho_j).scale(2.0) + mj.dot_forms(&dv, &dv);
        let corr = (j_norm2.scale(-(m - 1.0)).add_scalar(self.mu) * &vinv)
            .scale((m + 2.0 * nf - 2.0) / (2.0 * (m + nf - 1.0) * (m + nf - 2.0)));
        let ytilde = &rho_j + &corr;
        let mut pack = CurvaturePack {
            m,
            mu: self.mu,
            rm,
            ric_be,
            r_w,
            j_w,
            p_w,
            a_w,
            dp_w: None,
            b_w: None,
            ytilde,
            v,
            dv,
            hess_v,
        };
        if mj.order() >= 3 {
            let np = mj.covariant_derivative(&pack.p_w)?;
            pack.dp_w = Some(np.minus(&np.permute(&[1, 0, 2])));
        }
        if mj.order() >= 4 {
            pack.b_w = Some(self.bach_from(&pack)?);
        }
        Ok(pack)
    }

    fn bach_from(&self, pack: &CurvaturePack) -> Result<JTensor, SmmsError> {
        let mj = &self.mj;
        let dp = pack.dp_w.as_ref().unwrap();
        let vinv = pack.v.recip().map_err(|k| self.jet_err(k))?;
        let div = mj.divergence(dp, 0, Some(&self.dphi))?;
        let o = div.order();
        let trdp = dp.trace(0, 2, &mj.ginv);
        let t1 = trdp.outer(&pack.dv).times_scalar(&vinv).truncate(o);
        let g = mj.g.truncate(2);
        let shifted = pack.p_w.minus(&g.times_scalar(&(&pack.ytilde * &vinv)));
        let t2 = pairing(mj, &pack.a_w, &shifted).truncate(o);
        Ok(div.plus(&t1).plus(&t2))
    }

    /// Weighted Bach tensor.
    pub fn weighted_bach(&self) -> Result<JTensor, SmmsError> {
        let pack = self.curvature()?;
        pack.b_w.ok_or(SmmsError::Riemann(RiemannError::InsufficientOrder { needed: 4, have: self.mj.order() }))
    }

    /// Both sides of the four trace and divergence identities satisfied by
    /// `dP^W` and `A^W`, reduced to relative residuals.
    pub fn verify_identities(&self) -> Result<IdentityResiduals, SmmsError> {
        let pack = self.curvature()?;
        let mj = &self.mj;
        let m = pack.m;
        let nf = self.n() as f64;
        let dp = pack
            .dp_w
            .as_ref()
            .ok_or(SmmsError::Riemann(RiemannError::InsufficientOrder { needed: 3, have: mj.order() }))?;
        let vinv = pack.v.recip().map_err(|k| self.jet_err(k))?;
        let v2inv = &vinv * &vinv;
        let g = mj.g.truncate(2);
        let dy = mj.differential(&pack.ytilde)?;
        let grad_v = mj.sharp(&pack.dv);
        let beta = dy.minus(&pack.p_w.contract_vector(0, &grad_v).truncate(1));
        let s = pack.p_w.times_scalar(&pack.v).plus(&pack.hess_v).plus(&g.times_scalar(&pack.ytilde));

        let tr_dp_l = dp.trace(0, 2, &mj.ginv).values();
        let tr_dp_r = beta.times_scalar(&vinv).scale(m).values();
        let tr_dp = rel(mj, &tr_dp_l, &tr_dp_r, &[&dp.values()]);

        let tr_a_l = pack.a_w.trace(0, 2, &mj.ginv).values();
        let tr_a_r = s.times_scalar(&vinv).scale(m).values();
        let tr_a = rel(mj, &tr_a_l, &tr_a_r, &[&pack.a_w.values()]);

        let na = mj.covariant_derivative(&pack.a_w)?;
        let div_a_l = mj.divergence(&pack.a_w, 2, Some(&self.dphi))?.values();
        let dv_s = wedge1(&pack.dv, &s);
        let div_a_r = dp.scale(m + nf - 3.0).minus(&dv_s.times_scalar(&v2inv).scale(m).truncate(1)).values();
        let div_a = rel(mj, &div_a_l, &div_a_r, &[&na.values()]);

        let ndp = mj.covariant_derivative(dp)?;
        let div_dp_l = mj.divergence(dp, 2, Some(&self.dphi))?.values();
        let anti = pack.dv.outer(&beta).minus(&beta.outer(&pack.dv));
        let div_dp_r = anti.times_scalar(&v2inv).scale(-m).values();
        let div_dp = rel(mj, &div_dp_l, &div_dp_r, &[&ndp.values()]);

        Ok(IdentityResiduals { tr_dp, tr_a, div_a, div_dp })
    }

    /// Relative residuals of the three quasi-Einstein scale equations for `u`
    /// with constants `λ` and `μ`.
    pub fn qe_residual(&self, u: &Jet, lambda: f64, mu: f64) -> Result<QeResidual, SmmsError> {
        let m = self.finite_m()?;
        let mj = &self.mj;
        let n = self.n();
        let nf = n as f64;
        let v = self.v.as_ref().unwrap();
        let rm = mj.riemann()?;
        let ric = mj.ricci(&rm);
        let r = mj.trace2(&ric).value();
        let hu = mj.hessian(u)?;
        let hv = mj.hessian(v)?;
        let (du, dv) = (mj.differential(u)?, mj.differential(v)?);
        let lap_u = mj.trace2(&hu).value();
        let lap_v = mj.trace2(&hv).value();
        let uv_dot = mj.dot_forms(&du, &dv).value();
        let du2 = mj.dot_forms(&du, &du).value();
        let dv2 = mj.dot_forms(&dv, &dv).value();
        let (u0, v0) = (u.value(), v.value());

        let t_terms = [
            ric.values().scale(u0 * v0),
            hu.values().scale((m + nf - 2.0) * v0),
            hv.values().scale(-m * u0),
        ];
        let t = t_terms[0].plus(&t_terms[1]).plus(&t_terms[2]);
        let gv = mj.g_values();
        let tr = t.trace(0, 1, &mj.ginv_values()).components()[0];
        let t0 = t.minus(&gv.scale(tr / nf));
        let tf = ratio(mj.norm(&t0), t_terms.iter().map(|x| mj.norm(x)));

        let l_terms = [
            nf * lambda * v0 * v0,
            (u0 * v0).powi(2) * r,
            (m + 2.0 * nf - 2.0) * u0 * v0 * v0 * lap_u,
            -m * u0 * u0 * v0 * lap_v,
            -(m + nf - 1.0) * nf * v0 * v0 * du2,
            m * nf * u0 * v0 * uv_dot,
        ];
        let lam = ratio((l_terms[0] - l_terms[1..].iter().sum::<f64>()).abs(), l_terms.iter().map(|x| x.abs()));

        let m_terms = [
            nf * mu * u0 * u0,
            (u0 * v0).powi(2) * r,
            (m + nf - 2.0) * u0 * v0 * v0 * lap_u,
            -(m - nf) * u0 * u0 * v0 * lap_v,
            -(m + nf - 2.0) * nf * u0 * v0 * uv_dot,
            nf * (m - 1.0) * u0 * u0 * dv2,
        ];
        let mu_res = ratio((m_terms[0] - m_terms[1..].iter().sum::<f64>()).abs(), m_terms.iter().map(|x| x.abs()));
        Ok(QeResidual { tf, lambda: lam, mu: mu_res })
    }
}

fn ratio(num: f64, terms: impl Iterator<Item = f64>) -> f64 {
    if num == 0.0 {
        return 0.0;
    }
    num / terms.fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// `‖L − R‖ / max(‖L‖, ‖R‖, ‖X‖)` over the listed ingredient tensors `X`.
fn rel(mj: &MetricJet, l: &RTensor, r: &RTensor, ingredients: &[&RTensor]) -> f64 {
    let num = mj.norm(&l.minus(r));
    let den = ingredients.iter().map(|x| mj.norm(x)).chain([mj.norm(l), mj.norm(r)]);
    ratio(num, den)
}

/// `(α∧T)(y,z,w) = α(y)T(z,w) − α(z)T(y,w)` for a 1-form and a 2-tensor.
pub fn wedge1(alpha: &JTensor, t: &JTensor) -> JTensor {
    let at = alpha.outer(t);
    at.minus(&at.permute(&[1, 0, 2]))
}

/// Natural pairing `⟨A, T⟩(x,y) = Σ A(e_i,x,e_j,y) T(e_i,e_j)`.
pub fn pairing(mj: &MetricJet, a: &JTensor, t: &JTensor) -> JTensor {
    let tu = t.raise(0, &mj.ginv).raise(1, &mj.ginv);
    let n = mj.n;
    JTensor::from_fn(n, 2, |xy| {
        let mut acc = a.components()[0].zero_like();
        for i in 0..n {
            for j in 0..n {
                acc.fma(a.at(&[i, xy[0], j, xy[1]]), tu.at(&[i, j]));
            }
        }
        acc
    })
}

/// Weighted curvature tensors at a point.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub m: f64,
    pub mu: f64,
    pub rm: JTensor,
    /// `Ric_φ^m`
    pub ric_be: JTensor,
    /// `R_φ^m`
    pub r_w: Jet,
    pub j_w: Jet,
    pub p_w: JTensor,
    pub a_w: JTensor,
    pub dp_w: Option<JTensor>,
    pub b_w: Option<JTensor>,
    /// bottom slot of the scale tractor in this scale
    pub ytilde: Jet,
    pub v: Jet,
    pub dv: JTensor,
    pub hess_v: JTensor,
}

impl CurvaturePack {
    /// `max |dP(x,y,z) + dP(y,z,x) + dP(z,x,y)|` relative to `max |dP|`.
    pub fn cyclic_residual(&self) -> f64 {
        let Some(dp) = &self.dp_w else { return f64::NAN };
        let d = dp.values();
        let s = d.plus(&d.permute(&[2, 0, 1])).plus(&d.permute(&[1, 2, 0]));
        ratio(s.max_abs(), [d.max_abs()].into_iter())
    }

    /// Antisymmetric part of `B^W` relative to its size.
    pub fn bach_asymmetry(&self) -> f64 {
        let Some(b) = &self.b_w else { return f64::NAN };
        let b = b.values();
        ratio(b.minus(&b.permute(&[1, 0])).max_abs(), [b.max_abs()].into_iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IdentityResiduals {
    pub tr_dp: f64,
    pub tr_a: f64,
    pub div_a: f64,
    pub div_dp: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.tr_dp.max(self.tr_a).max(self.div_a).max(self.div_dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QeResidual {
    pub tf: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl QeResidual {
    pub fn max(&self) -> f64 {
        self.tf.max(self.lambda).max(self.mu)
    }
}

/// Quasi-Einstein data: a space with characteristic constant `μ` and a scale
/// `u` with constant `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QeData {
    pub spec: SmmsSpec,
    pub u: ScalarExpr,
    pub lambda: f64,
}

impl QeData {
    pub fn residual(&self, point: &[f64]) -> Result<QeResidual, SmmsError> {
        let sj = self.spec.at(point, 2)?;
        let u = self.u.eval_jet(point, 2)?;
        sj.qe_residual(&u, self.lambda, self.spec.mu)
    }

    /// `(u, v, m, λ, μ) ↦ (v, u, 2 − m − n, μ, λ)`.
    pub fn dual(&self) -> Result<QeData, SmmsError> {
        let spec = self.spec.baked();
        let m = spec.m.finite().ok_or_else(|| SmmsError::ExcludedM {
            m: spec.m.to_string(),
            why: "duality needs a finite dimensional parameter".into(),
        })?;
        let Density::V(v) = &spec.density else { unreachable!() };
        let n = spec.n() as f64;
        let dual_spec = SmmsSpec {
            density: Density::V(self.u.clone()),
            m: DimParam::Finite(2.0 - m - n),
            mu: self.lambda,
            lambda: self.spec.lambda.map(|_| spec.mu),
            ..spec.clone()
        };
        Ok(QeData { spec: dual_spec, u: v.clone(), lambda: spec.mu })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar;

    fn coords(n: usize) -> Vec<String> {
        ["x", "y", "z", "w"][..n].iter().map(|s| s.to_string()).collect()
    }

    fn flat(n: usize) -> Vec<ScalarExpr> {
        let c = coords(n);
        (0..n * n).map(|k| ScalarExpr::constant(if k / n == k % n { 1.0 } else { 0.0 }, &c)).collect()
    }

    fn affine(m: f64) -> SmmsSpec {
        let c = coords(3);
        let v = parse_scalar("1 + x", &c).unwrap();
        SmmsSpec::new(c, flat(3), Density::V(v), DimParam::Finite(m), m - 1.0).unwrap()
    }

    #[test]
    fn flat_affine_be() {
        let m = 2.5;
        let sj = affine(m).at(&[0.4, 0.1, -0.3], 4).unwrap();
        let (ric, r) = sj.bakry_emery().unwrap();
        assert_eq!(ric.values().max_abs(), 0.0);
        assert!((r.value() + m * (m - 1.0) / 1.4f64.powi(2)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_soliton_be() {
        let c = coords(3);
        let phi = parse_scalar("(x^2 + y^2 + z^2)/2", &c).unwrap();
        let sj = SmmsSpec::new(c, flat(3), Density::Phi(phi), DimParam::PosInf, 0.0)
            .unwrap()
            .at(&[0.3, 0.2, 0.1], 2)
            .unwrap();
        let (ric, _) = sj.bakry_emery().unwrap();
        assert!(ric.values().minus(&sj.mj.g_values()).max_abs() < 1e-14);
    }

    #[test]
    fn flat_affine_pack_vanishes() {
        let sj = affine(2.5).at(&[0.4, 0.1, -0.3], 4).unwrap();
        let p = sj.curvature().unwrap();
        assert!(p.p_w.values().max_abs() < 1e-14);
        assert!(p.j_w.value().abs() < 1e-14);
        assert!(p.a_w.values().max_abs() < 1e-14);
        assert!(p.dp_w.as_ref().unwrap().values().max_abs() < 1e-14);
        assert!(p.b_w.as_ref().unwrap().values().max_abs() < 1e-14);
        let id = sj.verify_identities().unwrap();
        assert!(id.max() < 1e-12, "{id:?}");
    }

    #[test]
    fn negative_density_rejected() {
        let c = coords(3);
        let v = parse_scalar("x", &c).unwrap();
        let spec = SmmsSpec::new(c, flat(3), Density::V(v), DimParam::Finite(1.0), 0.0).unwrap();
        assert!(matches!(spec.at(&[-1.0, 0.0, 0.0], 2), Err(SmmsError::NonPositiveDensity { .. })));
    }

    #[test]
    fn excluded_m_rejected() {
        let sj = affine(-1.0).at(&[0.1, 0.0, 0.0], 4).unwrap();
        assert!(matches!(sj.curvature(), Err(SmmsError::ExcludedM { .. })));
    }

    #[test]
    fn conformal_round_trip_is_exact() {
        let spec = affine(2.0);
        let s = parse_scalar("x*y + sin(z)", &spec.coords).unwrap();
        let there = spec.conformal_change(&s).unwrap();
        assert_ne!(there, spec);
        let back = there.conformal_change(&s.neg()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(spec.conformal_change(&ScalarExpr::constant(0.0, &spec.coords)).unwrap(), spec);
    }

    #[test]
    fn conformal_rule() {
        let c = coords(3);
        let spec = SmmsSpec::new(
            c.clone(),
            flat(3),
            Density::V(ScalarExpr::constant(1.0, &c)),
            DimParam::Finite(3.0),
            0.0,
        )
        .unwrap();
        let s = parse_scalar("log(1 + x)", &c).unwrap();
        let sj = spec.conformal_change(&s).unwrap().at(&[0.5, 0.0, 0.0], 1).unwrap();
        assert!((sj.v.unwrap().value() - 1.5).abs() < 1e-15);
        assert!((sj.mj.g.at(&[1, 1]).value() - 2.25).abs() < 1e-14);
    }

    #[test]
    fn infinite_m_conformal_rejected() {
        let c = coords(2);
        let phi = parse_scalar("x", &c).unwrap();
        let spec = SmmsSpec::new(c.clone(), flat(2), Density::Phi(phi), DimParam::NegInf, 0.0).unwrap();
        assert!(spec.conformal_change(&parse_scalar("y", &c).unwrap()).is_err());
    }

    #[test]
    fn affine_qe_and_dual() {
        let spec = affine(2.5);
        let qe = QeData { u: ScalarExpr::constant(1.0, &spec.coords), lambda: 0.0, spec };
        let p = [0.3, -0.2, 0.9];
        assert!(qe.residual(&p).unwrap().max() < 1e-14);
        let d = qe.dual().unwrap();
        assert_eq!(d.spec.m, DimParam::Finite(2.0 - 2.5 - 3.0));
        assert_eq!(d.spec.mu, 0.0);
        assert!((d.lambda - 1.5).abs() < 1e-15);
        assert!(d.residual(&p).unwrap().max() < 1e-14);
        assert_eq!(d.dual().unwrap(), qe);
    }
}
