//! The weighted Weyl tractor of `(M, g, 1^m dvol)` with `μ = −1/2` as `m → ∞`
//! and Hamilton's matrix Harnack quadratic form.
//!
//! Pairings use frame sums over ordered pairs: `⟨dP, Φ⊗α⟩ = ½ Σ dP_{ijk} Φ^{ij} α^k`
//! and `A(Φ,Φ) = ¼ Σ A_{ijkl} Φ^{ij} Φ^{kl}`.

use super::*;
use crate::expr::{parse_scalar, ScalarExpr};
use crate::smms::{pairing, DimParam, Density};
use crate::tractor::KFormTractor;
use rand::{Rng, SeedableRng};

pub const HARNACK_MU: f64 = -0.5;

/// The free data of the test tractor `((m+n−4)α; Φ | φ; β)`.
#[derive(Debug, Clone)]
pub struct HarnackData {
    pub alpha: Vec<f64>,
    /// 2-form in coordinates
    pub big_phi: RTensor,
    pub phi: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub point: Vec<f64>,
    pub m: Vec<f64>,
    /// relative residual of the evaluation identity at each `m`
    pub identity: Vec<f64>,
    /// relative change of `W(T,T)` when `φ, β` are set to zero
    pub gauge: Vec<f64>,
    /// `W(T,T)/(m+n−4)`
    pub weyl_value: Vec<f64>,
    /// `‖(m+n−2)B^W − B‖` with `B` Hamilton's tensor
    pub asymptotic: Vec<f64>,
    /// least-squares slope of `log asymptotic` against `log m`
    pub decay_exponent: Option<f64>,
    pub hamilton_value: f64,
    /// smallest eigenvalue of the Hamilton form on `T*M ⊕ Λ²T*M`
    pub hamilton_min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weitzenbock: Option<f64>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn unit_density(coords: &[String], g: &[ScalarExpr], m: f64) -> Result<SmmsSpec, ObstructionError> {
    Ok(SmmsSpec::new(
        coords.to_vec(),
        g.to_vec(),
        Density::V(ScalarExpr::constant(1.0, coords)),
        DimParam::Finite(m),
        HARNACK_MU,
    )?)
}

fn raise_all(t: &RTensor, ginv: &RTensor) -> RTensor {
    (0..t.rank()).fold(t.clone(), |acc, s| acc.raise(s, ginv))
}

/// `(B(α,α), ⟨D,Φ⊗α⟩, A(Φ,Φ))` for a symmetric 2-tensor `B`, a 3-tensor `D`
/// and a 4-tensor `A`, computed in coordinates.
fn quadratic_parts(b: &RTensor, d: &RTensor, a: &RTensor, alpha: &[f64], big_phi: &RTensor, ginv: &RTensor) -> (f64, f64, f64) {
    let n = alpha.len();
    let au: Vec<f64> = (0..n).map(|i| (0..n).map(|j| ginv.at(&[i, j]) * alpha[j]).sum()).collect();
    let pu = raise_all(big_phi, ginv);
    let mut bb = 0.0;
    let mut dd = 0.0;
    let mut aa = 0.0;
    for i in 0..n {
        for j in 0..n {
            bb += b.at(&[i, j]) * au[i] * au[j];
            for k in 0..n {
                dd += 0.5 * d.at(&[i, j, k]) * pu.at(&[i, j]) * au[k];
                for l in 0..n {
                    aa += 0.25 * a.at(&[i, j, k, l]) * pu.at(&[i, j]) * pu.at(&[k, l]);
                }
            }
        }
    }
    (bb, dd, aa)
}

/// Hamilton's `B = ΔRic − ½∇²R + 2⟨Rm,Ric⟩ − Ric² − μRic`, together with
/// `Rm` and `dRic`, at value level.
pub fn hamilton_tensors(mj: &MetricJet, mu: f64) -> Result<(RTensor, RTensor, RTensor), ObstructionError> {
    let n = mj.n;
    let rm = mj.riemann()?;
    let ric = mj.ricci(&rm);
    let r = mj.trace2(&ric);
    let nric = mj.covariant_derivative(&ric)?;
    let lap = mj.covariant_derivative(&nric)?.trace(0, 1, &mj.ginv).values();
    let hr = mj.hessian(&r)?.values();
    let rmv = rm.values();
    let ricv = ric.values();
    let ginv = mj.ginv_values();
    let pair = pairing(mj, &rm, &ric).values();
    let ric2 = RTensor::from_fn(n, 2, |i| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += ricv.at(&[i[0], a]) * ginv.at(&[a, b]) * ricv.at(&[b, i[1]]);
            }
        }
        s
    });
    let b = lap.minus(&hr.scale(0.5)).plus(&pair.scale(2.0)).minus(&ric2).minus(&ricv.scale(mu));
    let nv = nric.values();
    let dric = nv.minus(&nv.permute(&[1, 0, 2]));
    Ok((b, dric, rmv))
}

/// `max |(dδ + δd)T − ΔT + T∘Ric − ⟨Rm,T⟩|` relative to the largest term, for a
/// symmetric 2-tensor field `T` given by `n×n` expressions.
pub fn weitzenbock_residual(g: &[ScalarExpr], t: &[ScalarExpr], point: &[f64]) -> Result<f64, ObstructionError> {
    let n = point.len();
    let mj = MetricJet::from_exprs(g, point, 3)?;
    let tc: Vec<Jet> = t.iter().map(|e| e.eval_jet(point, 2)).collect::<Result<_, _>>().map_err(SmmsError::from)?;
    let tt = JTensor::from_vec(n, 2, tc);
    let nt = mj.covariant_derivative(&tt)?;
    let d = nt.minus(&nt.permute(&[1, 0, 2]));
    let delta_d = mj.divergence(&d, 0, None)?;
    let delta = mj.divergence(&tt, 0, None)?;
    let d_delta = mj.covariant_derivative(&delta)?;
    let lhs = delta_d.plus(&d_delta).values();
    let rm = mj.riemann()?;
    let ric = mj.ricci(&rm).values();
    let lap = mj.covariant_derivative(&nt)?.trace(0, 1, &mj.ginv).values();
    let tv = tt.values();
    let ginv = mj.ginv_values();
    let t_ric = RTensor::from_fn(n, 2, |i| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += ricv(&ric, i[0], a) * ginv.at(&[a, b]) * tv.at(&[b, i[1]]);
            }
        }
        s
    });
    let pair = pairing(&mj, &rm, &tt).values();
    let rhs = lap.minus(&t_ric).plus(&pair);
    let scale = [lhs.max_abs(), lap.max_abs(), t_ric.max_abs(), pair.max_abs()].into_iter().fold(f64::MIN_POSITIVE, f64::max);
    Ok(lhs.minus(&rhs).max_abs() / scale)
}

fn ricv(r: &RTensor, i: usize, j: usize) -> f64 {
    *r.at(&[i, j])
}

/// Smallest eigenvalue of `(α, Φ) ↦ B(α,α) − 2⟨D,Φ⊗α⟩ + A(Φ,Φ)` over an
/// orthonormal basis of `T*M ⊕ Λ²T*M`.
fn min_eigenvalue(b: &RTensor, d: &RTensor, a: &RTensor, frame: &[f64]) -> f64 {
    let n = b.dim();
    let (b, d, a) = (b.in_frame(frame), d.in_frame(frame), a.in_frame(frame));
    let ps = pairs(n);
    let dim = n + ps.len();
    let q = DMatrix::from_fn(dim, dim, |r, c| match (r < n, c < n) {
        (true, true) => *b.at(&[r, c]),
        (true, false) => {
            let (i, j) = ps[c - n];
            -d.at(&[i, j, r])
        }
        (false, true) => {
            let (i, j) = ps[r - n];
            -d.at(&[i, j, c])
        }
        (false, false) => {
            let ((i, j), (k, l)) = (ps[r - n], ps[c - n]);
            *a.at(&[i, j, k, l])
        }
    });
    q.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn harnack_at(
    coords: &[String],
    g: &[ScalarExpr],
    point: &[f64],
    m_list: &[f64],
    data: &HarnackData,
    t: Option<&[ScalarExpr]>,
) -> Result<HarnackReport, ObstructionError> {
    let n = coords.len();
    let nf = n as f64;
    let mj = MetricJet::from_exprs(g, point, 4)?;
    let (bh, dric, rm) = hamilton_tensors(&mj, HARNACK_MU)?;
    let ginv = mj.ginv_values();
    let (hb, hd, ha) = quadratic_parts(&bh, &dric, &rm, &data.alpha, &data.big_phi, &ginv);
    let mut rep = HarnackReport {
        point: point.to_vec(),
        m: m_list.to_vec(),
        identity: vec![],
        gauge: vec![],
        weyl_value: vec![],
        asymptotic: vec![],
        decay_exponent: None,
        hamilton_value: hb - 2.0 * hd + ha,
        hamilton_min_eigenvalue: min_eigenvalue(&bh, &dric, &rm, mj.frame()),
        weitzenbock: t.map(|t| weitzenbock_residual(g, t, point)).transpose()?,
    };
    let scale = ScaleTag("g".into());
    for &m in m_list {
        let c = m + nf - 4.0;
        if c == 0.0 {
            return Err(ObstructionError::Input(format!("m = {m} makes m + n − 4 vanish")));
        }
        let spec = unit_density(coords, g, m)?;
        let tcalc = TractorCalc::at(&spec, point, 4, scale.clone())?;
        let w = tcalc.weyl()?;
        let pack = &tcalc.pack;
        let dp = pack.dp_w.as_ref().unwrap().values();
        let bw = pack.b_w.as_ref().unwrap().values();
        let aw = pack.a_w.values();
        let make = |phi: f64, beta: &[f64]| {
            KFormTractor::new(
                RTensor::from_vec(n, 1, data.alpha.iter().map(|a| a * c).collect()),
                data.big_phi.clone(),
                Some(RTensor::from_vec(n, 0, vec![phi])),
                RTensor::from_vec(n, 1, beta.to_vec()),
                scale.clone(),
            )
        };
        let t_full = make(data.phi, &data.beta)?;
        let t_bare = make(0.0, &vec![0.0; n])?;
        let wf = w.eval(&t_full, &t_full)? / c;
        let wb = w.eval(&t_bare, &t_bare)? / c;
        let (b1, d1, a1) = quadratic_parts(&bw, &dp, &aw, &data.alpha, &data.big_phi, &ginv);
        let rhs = c * b1 - 2.0 * c * d1 + a1;
        rep.identity.push(rel(wf, rhs));
        rep.gauge.push(rel(wf, wb));
        rep.weyl_value.push(wf);
        rep.asymptotic.push(mj.norm(&bw.scale(m + nf - 2.0).minus(&bh)));
    }
    if m_list.len() >= 2 && rep.asymptotic.iter().all(|&r| r > 0.0) {
        let xs: Vec<f64> = m_list.iter().map(|m| m.ln()).collect();
        let ys: Vec<f64> = rep.asymptotic.iter().map(|r| r.ln()).collect();
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        rep.decay_exponent = Some(sxy / sxx);
    }
    Ok(rep)
}

/// Random data `(α, Φ, φ, β)` with entries in `[−1, 1]`.
pub fn random_data(n: usize, rng: &mut impl Rng) -> HarnackData {
    let mut u = || rng.gen_range(-1.0..1.0);
    let alpha = (0..n).map(|_| u()).collect();
    let mut big_phi = RTensor::from_fn(n, 2, |_| 0.0);
    for (i, j) in pairs(n) {
        let x = u();
        *big_phi.at_mut(&[i, j]) = x;
        *big_phi.at_mut(&[j, i]) = -x;
    }
    HarnackData { alpha, big_phi, phi: u(), beta: (0..n).map(|_| u()).collect() }
}

/// A random smooth symmetric 2-tensor field built from trigonometric terms.
pub fn random_symmetric_field(coords: &[String], seed: u64) -> Vec<ScalarExpr> {
    let n = coords.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let entry = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut s = format!("{:.6}", rng.gen_range(-1.0..1.0));
        for _ in 0..2 {
            let lin: Vec<String> = coords.iter().map(|c| format!("{:.6}*{c}", rng.gen_range(-1.0..1.0))).collect();
            s.push_str(&format!(" + {:.6}*sin({} + {:.6})", rng.gen_range(-1.0..1.0), lin.join(" + "), rng.gen_range(0.0..3.0)));
        }
        parse_scalar(&s, coords).expect("generated expression parses")
    };
    let mut out = vec![ScalarExpr::constant(0.0, coords); n * n];
    for i in 0..n {
        for j in i..n {
            let e = entry(&mut rng);
            out[i * n + j] = e.clone();
            out[j * n + i] = e;
        }
    }
    out
}
