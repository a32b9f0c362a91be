//! `k`-form tractors in vector notation `(α; Φ | φ; β)`.
//!
//! Forms are stored as dense antisymmetric covariant tensors. The inner product
//! of `p`-forms sums over increasing index tuples, so `|e¹∧e²|² = 1`. For
//! `k = 1` the `φ` slot does not exist and the tractor `(σ, ω, ρ)` corresponds
//! to `(α, Φ, β) = (σ, ω♭, ρ)`.

use super::{same_scale, Tractor, TractorCalc, TractorError, TractorField};
use crate::expr::Jet;
use crate::riemann::{JTensor, MetricJet, RTensor, Scalar, ScaleTag};

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn form_inner(a: &RTensor, b: &RTensor, frame: &[f64]) -> f64 {
    let (fa, fb) = (a.in_frame(frame), b.in_frame(frame));
    let s: f64 = fa.components().iter().zip(fb.components()).map(|(x, y)| x * y).sum();
    s / factorial(a.rank())
}

/// `(a∧b)(x_0,…,x_p) = Σ_i (−1)^i a(x_i) b(x_0,…,x̂_i,…,x_p)` for a 1-form `a`.
fn wedge1<T: Scalar>(a: &crate::riemann::Tensor<T>, b: &crate::riemann::Tensor<T>) -> crate::riemann::Tensor<T> {
    let n = a.dim();
    let p = b.rank();
    let mut rest = vec![0; p];
    crate::riemann::Tensor::from_fn(n, p + 1, |idx| {
        let mut acc = b.components()[0].zero_like();
        for i in 0..=p {
            let mut k = 0;
            for (j, &x) in idx.iter().enumerate() {
                if j != i {
                    rest[k] = x;
                    k += 1;
                }
            }
            let term = a.at(&[idx[i]]).times(b.at(&rest));
            acc.axpy(if i % 2 == 0 { 1.0 } else { -1.0 }, &term);
        }
        acc
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KFormTractor {
    pub k: usize,
    pub alpha: RTensor,
    pub big_phi: RTensor,
    pub phi: Option<RTensor>,
    pub beta: RTensor,
    pub scale: ScaleTag,
}

impl KFormTractor {
    pub fn new(alpha: RTensor, big_phi: RTensor, phi: Option<RTensor>, beta: RTensor, scale: ScaleTag) -> Result<KFormTractor, TractorError> {
        let k = big_phi.rank();
        let ok = k >= 1
            && alpha.rank() == k - 1
            && beta.rank() == k - 1
            && match &phi {
                None => k == 1,
                Some(p) => k >= 2 && p.rank() == k - 2,
            };
        if !ok {
            return Err(TractorError::Degree(format!("inconsistent slot ranks for a {k}-form tractor")));
        }
        Ok(KFormTractor { k, alpha, big_phi, phi, beta, scale })
    }

    pub fn from_tractor(t: &Tractor, mj: &MetricJet) -> KFormTractor {
        let n = t.dim();
        let g = mj.g_values();
        let low = RTensor::from_fn(n, 1, |i| (0..n).map(|j| g.at(&[i[0], j]) * t.omega[j]).sum());
        KFormTractor {
            k: 1,
            alpha: RTensor::from_vec(n, 0, vec![t.sigma]),
            big_phi: low,
            phi: None,
            beta: RTensor::from_vec(n, 0, vec![t.rho]),
            scale: t.scale.clone(),
        }
    }

    pub fn to_tractor(&self, mj: &MetricJet) -> Result<Tractor, TractorError> {
        if self.k != 1 {
            return Err(TractorError::Degree(format!("a {}-form tractor is not a standard tractor", self.k)));
        }
        let n = self.big_phi.dim();
        let ginv = mj.ginv_values();
        let omega = (0..n).map(|i| (0..n).map(|j| ginv.at(&[i, j]) * self.big_phi.at(&[j])).sum()).collect();
        Ok(Tractor::new(self.alpha.components()[0], omega, self.beta.components()[0], self.scale.clone()))
    }

    /// `|Φ|² − |φ|² + 2⟨α,β⟩`, polarized.
    pub fn inner(&self, o: &KFormTractor, mj: &MetricJet) -> Result<f64, TractorError> {
        same_scale(&self.scale, &o.scale)?;
        if self.k != o.k {
            return Err(TractorError::Degree(format!("{}-form against {}-form", self.k, o.k)));
        }
        let f = mj.frame();
        let mut s = form_inner(&self.big_phi, &o.big_phi, f)
            + form_inner(&self.alpha, &o.beta, f)
            + form_inner(&self.beta, &o.alpha, f);
        if let (Some(a), Some(b)) = (&self.phi, &o.phi) {
            s -= form_inner(a, b, f);
        }
        Ok(s)
    }

    /// Contraction `ι_I` into a `(k−1)`-form tractor.
    pub fn contract(&self, t: &Tractor) -> Result<KFormTractor, TractorError> {
        same_scale(&self.scale, &t.scale)?;
        if self.k < 2 {
            return Err(TractorError::Degree("contraction needs k ≥ 2".into()));
        }
        let phi = self.phi.as_ref().unwrap();
        let iw = |f: &RTensor| f.contract_vector(0, &t.omega);
        // ι_X Ψ = (0; α|0; φ), ι_Z(ω) Ψ = (−ι_ωα; ι_ωΦ|ι_ωφ; −ι_ωβ), ι_Y Ψ = (−φ; β|0; 0)
        let mut alpha = phi.scale(-t.sigma);
        let mut big_phi = self.beta.scale(t.sigma);
        let mut beta = phi.scale(t.rho);
        big_phi.axpy(t.rho, &self.alpha);
        alpha.axpy(-1.0, &iw(&self.alpha));
        beta.axpy(-1.0, &iw(&self.beta));
        big_phi.axpy(1.0, &iw(&self.big_phi));
        let new_phi = if self.k == 2 { None } else { Some(iw(phi)) };
        KFormTractor::new(alpha, big_phi, new_phi, beta, self.scale.clone())
    }
}

/// `I1 ∧ I2` as an adjoint tractor.
pub fn wedge2(a: &Tractor, b: &Tractor, mj: &MetricJet) -> Result<KFormTractor, TractorError> {
    same_scale(&a.scale, &b.scale)?;
    let (fa, fb) = (KFormTractor::from_tractor(a, mj), KFormTractor::from_tractor(b, mj));
    let n = a.dim();
    let (wa, wb) = (&fa.big_phi, &fb.big_phi);
    let alpha = wb.scale(a.sigma).minus(&wa.scale(b.sigma));
    let big_phi = wedge1(wa, wb);
    let phi = RTensor::from_vec(n, 0, vec![a.sigma * b.rho - a.rho * b.sigma]);
    let beta = wb.scale(a.rho).minus(&wa.scale(b.rho));
    KFormTractor::new(alpha, big_phi, Some(phi), beta, a.scale.clone())
}

/// A `k`-form tractor field given by jets, `k ≥ 2`.
#[derive(Debug, Clone)]
pub struct KFormField {
    pub alpha: JTensor,
    pub big_phi: JTensor,
    pub phi: JTensor,
    pub beta: JTensor,
    pub scale: ScaleTag,
}

impl KFormField {
    /// `I1 ∧ I2` for tractor fields.
    pub fn wedge(a: &TractorField, b: &TractorField, mj: &MetricJet) -> Result<KFormField, TractorError> {
        same_scale(&a.scale, &b.scale)?;
        let o = a.order().min(b.order());
        let (a, b) = (a.truncate(o), b.truncate(o));
        let g = mj.g.truncate(o);
        let low = |w: &[Jet]| {
            let n = w.len();
            JTensor::from_fn(n, 1, |i| {
                let mut acc = w[0].zero_like();
                for j in 0..n {
                    acc.fma(g.at(&[i[0], j]), &w[j]);
                }
                acc
            })
        };
        let (wa, wb) = (low(&a.omega), low(&b.omega));
        let n = wa.dim();
        Ok(KFormField {
            alpha: wb.times_scalar(&a.sigma).minus(&wa.times_scalar(&b.sigma)),
            big_phi: wedge1(&wa, &wb),
            phi: JTensor::from_vec(n, 0, vec![a.sigma.mul_jet(&b.rho) - a.rho.mul_jet(&b.sigma)]),
            beta: wb.times_scalar(&a.rho).minus(&wa.times_scalar(&b.rho)),
            scale: a.scale.clone(),
        })
    }

    pub fn value(&self) -> Result<KFormTractor, TractorError> {
        KFormTractor::new(self.alpha.values(), self.big_phi.values(), Some(self.phi.values()), self.beta.values(), self.scale.clone())
    }
}

impl TractorCalc {
    /// The connection induced by `∇^W` on `k`-form tractors:
    /// `∇_z(α; Φ|φ; β) = (∇_zα − ι_zΦ + z♭∧φ; ∇_zΦ + P_z∧α + z♭∧β | ∇_zφ − ι_{P_z}α + ι_zβ; ∇_zβ − ι_{P_z}Φ − P_z∧φ)`
    /// with `P_z = P^W(z,·)`.
    pub fn kform_connection(&self, f: &KFormField) -> Result<Vec<KFormField>, TractorError> {
        same_scale(&self.scale, &f.scale)?;
        let mj = self.mj();
        let n = self.n();
        let nab = |t: &JTensor| mj.covariant_derivative(t);
        let (na, nf, np, nb) = (nab(&f.alpha)?, nab(&f.big_phi)?, nab(&f.phi)?, nab(&f.beta)?);
        let o = [&na, &nf, &np, &nb].iter().map(|t| t.order()).min().unwrap();
        let slice = |t: &JTensor, z: usize| {
            let r = t.rank() - 1;
            let mut idx = vec![z; 1];
            JTensor::from_fn(n, r, |rest| {
                idx.truncate(1);
                idx.extend_from_slice(rest);
                t.at(&idx).truncate(o)
            })
        };
        let proto: Jet = f.alpha.components()[0].truncate(o).zero_like();
        let p = self.pack.p_w.truncate(o);
        let pm = self.pack.p_w.raise(0, &mj.ginv).truncate(o);
        let unit = |z: usize| -> Vec<Jet> { (0..n).map(|i| proto.constant_like(if i == z { 1.0 } else { 0.0 })).collect() };
        let g = mj.g.truncate(o);
        let ins = |t: &JTensor, v: &[Jet]| -> Option<JTensor> {
            if t.rank() == 0 {
                None
            } else {
                Some(t.truncate(o).contract_vector(0, v))
            }
        };
        let add_opt = |a: JTensor, b: Option<JTensor>, s: f64| match b {
            Some(b) => {
                let mut a = a;
                a.axpy(s, &b);
                a
            }
            None => a,
        };
        let mut out = Vec::with_capacity(n);
        for z in 0..n {
            let zf = JTensor::from_fn(n, 1, |i| g.at(&[z, i[0]]).clone());
            let pz = JTensor::from_fn(n, 1, |i| p.at(&[z, i[0]]).clone());
            let pzv: Vec<Jet> = (0..n).map(|k| pm.at(&[k, z]).clone()).collect();
            let ez = unit(z);
            let alpha = slice(&na, z).minus(&f.big_phi.truncate(o).contract_vector(0, &ez)).plus(&wedge1(&zf, &f.phi.truncate(o)));
            let big_phi = slice(&nf, z).plus(&wedge1(&pz, &f.alpha.truncate(o))).plus(&wedge1(&zf, &f.beta.truncate(o)));
            let phi = add_opt(add_opt(slice(&np, z), ins(&f.alpha, &pzv), -1.0), ins(&f.beta, &ez), 1.0);
            let beta = slice(&nb, z).minus(&f.big_phi.truncate(o).contract_vector(0, &pzv)).minus(&wedge1(&pz, &f.phi.truncate(o)));
            out.push(KFormField { alpha, big_phi, phi, beta, scale: self.scale.clone() });
        }
        Ok(out)
    }
}
