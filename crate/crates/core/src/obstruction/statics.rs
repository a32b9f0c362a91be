//! Static potentials: `∇²v = v(Ric − λg)` and `Δv = −λv`.
//!
//! With `A = Rm + Ric∧g`, the map `B(K) = A(K) − (1/(n−1)) tr A(K) ∧ g`
//! satisfies `B(∇ log v) = −dRic` on static metrics, so on `B`-injective
//! samples it determines `K = d log v`.

use super::*;
use crate::expr::ScalarExpr;

/// `B` as a 4-tensor with the vector slot third.
pub fn b_tensor(mj: &MetricJet, rm: &JTensor, ric: &JTensor) -> JTensor {
    let n = mj.n;
    let o = rm.order().min(ric.order());
    let g = mj.g.truncate(o);
    let a = rm.truncate(o).plus(&ric.truncate(o).kulkarni_nomizu(&g));
    let tau = a.trace(1, 3, &mj.ginv.truncate(o));
    let c = 1.0 / (n as f64 - 1.0);
    JTensor::from_fn(n, 4, |i| {
        let (p, q, x, z) = (i[0], i[1], i[2], i[3]);
        let w = tau.at(&[p, x]).mul_jet(g.at(&[q, z])) - tau.at(&[q, x]).mul_jet(g.at(&[p, z]));
        a.at(i) - &w.scale(c)
    })
}

/// Singular values `√2 |λ_i − λ_j|` of `B` in a Ricci eigenframe in dimension 3,
/// together with the eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenframeReport {
    pub ricci_eigenvalues: Vec<f64>,
    pub sigma: Vec<f64>,
    pub injective: bool,
}

pub fn eigenframe_test(mj: &MetricJet, ric: &RTensor, cfg: &Config) -> EigenframeReport {
    let rf = ric.in_frame(mj.frame());
    let m = DMatrix::from_fn(3, 3, |i, j| *rf.at(&[i, j]));
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let mut sigma = vec![(ev[1] - ev[2]).abs(), (ev[0] - ev[2]).abs(), (ev[0] - ev[1]).abs()];
    for s in &mut sigma {
        *s *= std::f64::consts::SQRT_2;
    }
    sigma.sort_by(|a, b| b.total_cmp(a));
    let injective = super::injective(sigma[2], sigma[0], cfg.generic_eps);
    EigenframeReport { ricci_eigenvalues: ev, sigma, injective }
}

pub fn static_at(spec: &SmmsSpec, point: &[f64], lambda: f64, cfg: &Config) -> Result<PointRecord, ObstructionError> {
    let n = spec.n();
    if n < 3 {
        return Err(ObstructionError::Input("the static test needs dimension at least 3".into()));
    }
    let mj = MetricJet::from_exprs(&spec.g, point, 4)?;
    let rm = mj.riemann()?;
    let ric = mj.ricci(&rm);
    let r = mj.trace2(&ric).value();
    let mut rec = PointRecord::new(point, Decision::Yes);
    let target = (n as f64 - 1.0) * lambda;
    let r_res = (r - target).abs();
    rec.residuals.insert("scalar".into(), r_res);
    if r_res > cfg.decision_tol * r.abs().max(1.0) {
        rec.decision = Decision::No;
        rec.reason = Some("scalar curvature differs from (n − 1)λ".into());
        return Ok(rec);
    }
    let b = b_tensor(&mj, &rm, &ric);
    let gen = genericity(&b.values(), &mj, cfg);
    if n == 3 {
        let ef = eigenframe_test(&mj, &ric.values(), cfg);
        rec.residuals.insert("eigenframe_sigma_min".into(), ef.sigma[2]);
    }
    rec.genericity = Some(gen.clone());
    if !gen.weakly_generic {
        rec.decision = Decision::NotGeneric;
        rec.reason = Some("B is not injective on TM".into());
        return Ok(rec);
    }
    let nr = mj.covariant_derivative(&ric)?;
    let dric = nr.minus(&nr.permute(&[1, 0, 2])).scale(-1.0);
    let (_, inv) = candidate_k_values(&b.values(), &dric.values(), &mj, cfg)?;
    let k = candidate_k_jets(&b, &dric, &mj)?;
    let nk = mj.covariant_derivative(&k)?;
    let o = nk.order();
    let kt = k.truncate(o);
    let g = ric.truncate(o).minus(&nk).minus(&kt.outer(&kt)).minus(&mj.g.truncate(o).scale(lambda));
    let dk = nk.minus(&nk.permute(&[1, 0]));
    let gn = mj.norm(&g.values());
    let dkn = mj.norm(&dk.values());
    let scale = mj.norm(&ric.values()).max(1.0);
    rec.residuals.insert("dk".into(), dkn);
    rec.residuals.insert("dva".into(), inv.dva_residual());
    rec.g_norm = Some(gn);
    rec.k = Some(k.components().iter().map(|j| j.value()).collect());
    if gn > cfg.decision_tol * scale || dkn > cfg.decision_tol * scale {
        rec.decision = Decision::No;
        rec.reason = Some(if gn > cfg.decision_tol * scale { "Ric − ∇K − K⊗K − λg does not vanish" } else { "K is not closed" }.into());
    }
    Ok(rec)
}

pub fn static_metric(spec: &SmmsSpec, points: &[Vec<f64>], lambda: f64, cfg: &Config) -> Result<ObstructionReport, ObstructionError> {
    let recs = run_points(points, |p| static_at(spec, p, lambda, cfg))?;
    Ok(ObstructionReport::from_records("static", recs))
}

/// Largest `‖v Ric − ∇²v + Δv g‖` and `|R − (n−1)λ|` over the points.
pub fn static_residual(spec: &SmmsSpec, v: &ScalarExpr, lambda: f64, points: &[Vec<f64>]) -> Result<(f64, f64), ObstructionError> {
    let n = spec.n() as f64;
    let r: Result<Vec<(f64, f64)>, ObstructionError> = points
        .par_iter()
        .map(|p| {
            let mj = MetricJet::from_exprs(&spec.g, p, 2)?;
            let ric = mj.ricci(&mj.riemann()?);
            let r = mj.trace2(&ric).value();
            let vj = v.eval_jet(p, 2).map_err(SmmsError::from)?;
            let h = mj.hessian(&vj)?;
            let lap = mj.trace2(&h);
            let res = ric.times_scalar(&vj.truncate(0)).minus(&h).plus(&mj.g.truncate(0).times_scalar(&lap));
            Ok((mj.norm(&res.values()), (r - (n - 1.0) * lambda).abs()))
        })
        .collect();
    Ok(r?.into_iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}
