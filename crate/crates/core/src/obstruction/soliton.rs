//! Gradient Ricci solitons `Ric + ∇²f = μg`.
//!
//! Differentiating the soliton equation gives `Rm(·,·,∇f,·) = dRic` with
//! `dRic(x,y,z) = ∇_x Ric(y,z) − ∇_y Ric(x,z)`. When `Rm` is injective on
//! vectors this determines `∇f` pointwise.

use super::*;
use crate::expr::ScalarExpr;

fn metric(spec: &SmmsSpec, point: &[f64], order: usize) -> Result<MetricJet, ObstructionError> {
    Ok(MetricJet::from_exprs(&spec.g, point, order)?)
}

fn d_ric(mj: &MetricJet, ric: &JTensor) -> Result<JTensor, ObstructionError> {
    let nr = mj.covariant_derivative(ric)?;
    Ok(nr.minus(&nr.permute(&[1, 0, 2])))
}

/// Pointwise soliton pipeline; `K` is the candidate `df`.
pub fn soliton_at(spec: &SmmsSpec, point: &[f64], mu: f64, cfg: &Config) -> Result<PointRecord, ObstructionError> {
    let mj = metric(spec, point, 4)?;
    let rm = mj.riemann()?;
    let ric = mj.ricci(&rm);
    let dric = d_ric(&mj, &ric)?;
    let gen = genericity(&rm.values(), &mj, cfg);
    let mut rec = PointRecord::new(point, Decision::Yes);
    rec.genericity = Some(gen.clone());
    if !gen.weakly_generic {
        rec.decision = Decision::NotGeneric;
        rec.reason = Some("Rm is not injective on TM; use the residual check with a supplied potential".into());
        return Ok(rec);
    }
    let (_, inv) = candidate_k_values(&rm.values(), &dric.values(), &mj, cfg)?;
    let k = candidate_k_jets(&rm, &dric, &mj)?;
    let nk = mj.covariant_derivative(&k)?;
    let o = nk.order();
    let res = ric.truncate(o).plus(&nk).minus(&mj.g.truncate(o).scale(mu));
    let dk = nk.minus(&nk.permute(&[1, 0]));
    let gn = mj.norm(&res.values());
    let dkn = mj.norm(&dk.values());
    let scale = mj.norm(&ric.values()).max(1.0);
    rec.residuals.insert("dk".into(), dkn);
    rec.residuals.insert("dva".into(), inv.dva_residual());
    rec.g_norm = Some(gn);
    rec.k = Some(k.components().iter().map(|j| j.value()).collect());
    if gn > cfg.decision_tol * scale || dkn > cfg.decision_tol * scale {
        rec.decision = Decision::No;
        rec.reason = Some(if gn > cfg.decision_tol * scale { "Ric + ∇K − μg does not vanish" } else { "K is not closed" }.into());
    }
    Ok(rec)
}

pub fn soliton(spec: &SmmsSpec, points: &[Vec<f64>], mu: f64, cfg: &Config) -> Result<ObstructionReport, ObstructionError> {
    let recs = run_points(points, |p| soliton_at(spec, p, mu, cfg))?;
    Ok(ObstructionReport::from_records("soliton", recs))
}

/// Largest `‖Ric + ∇²f − μg‖` over the points.
pub fn soliton_residual(spec: &SmmsSpec, f: &ScalarExpr, mu: f64, points: &[Vec<f64>]) -> Result<f64, ObstructionError> {
    let r: Result<Vec<f64>, ObstructionError> = points
        .par_iter()
        .map(|p| {
            let mj = metric(spec, p, 2)?;
            let ric = mj.ricci(&mj.riemann()?);
            let fj = f.eval_jet(p, 2).map_err(SmmsError::from)?;
            let res = ric.plus(&mj.hessian(&fj)?).minus(&mj.g.truncate(0).scale(mu));
            Ok(mj.norm(&res.values()))
        })
        .collect();
    Ok(r?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar;
    use crate::smms::{DimParam, Density};

    fn spec(c: &[&str], g: &[&str]) -> SmmsSpec {
        let c: Vec<String> = c.iter().map(|s| s.to_string()).collect();
        let g = g.iter().map(|s| parse_scalar(s, &c).unwrap()).collect();
        SmmsSpec::new(c.clone(), g, Density::Phi(ScalarExpr::constant(0.0, &c)), DimParam::PosInf, 0.0).unwrap()
    }

    #[test]
    fn gaussian_residual_vanishes() {
        let s = spec(&["x", "y", "z"], &["1", "0", "0", "0", "1", "0", "0", "0", "1"]);
        let f = parse_scalar("(x^2 + y^2 + z^2)/4", &s.coords).unwrap();
        let pts = vec![vec![0.1, 0.2, -0.3], vec![1.0, -2.0, 0.5]];
        assert!(soliton_residual(&s, &f, 0.5, &pts).unwrap() < 1e-12);
        assert!(soliton_residual(&s, &f, 0.4, &pts).unwrap() > 0.1);
        let rec = soliton_at(&s, &pts[0], 0.5, &Config::default()).unwrap();
        assert_eq!(rec.decision, Decision::NotGeneric);
    }

    #[test]
    fn cigar_is_recovered() {
        let w = "1/(1 + x^2 + y^2)";
        let s = spec(&["x", "y"], &[w, "0", "0", w]);
        let p = [0.4, -0.3];
        let rec = soliton_at(&s, &p, 0.0, &Config::default()).unwrap();
        assert_eq!(rec.decision, Decision::Yes, "{rec:?}");
        // f = −log(1 + x² + y²)
        let k = rec.k.unwrap();
        let d = 1.0 + p[0] * p[0] + p[1] * p[1];
        assert!((k[0] + 2.0 * p[0] / d).abs() < 1e-10 && (k[1] + 2.0 * p[1] / d).abs() < 1e-10, "{k:?}");
        let f = parse_scalar("-log(1 + x^2 + y^2)", &s.coords).unwrap();
        assert!(soliton_residual(&s, &f, 0.0, &[p.to_vec()]).unwrap() < 1e-12);
    }

    #[test]
    fn round_sphere_chart_is_not_steady() {
        let w = "4/(1 + x^2 + y^2)^2";
        let s = spec(&["x", "y"], &[w, "0", "0", w]);
        let rec = soliton_at(&s, &[0.2, 0.1], 0.0, &Config::default()).unwrap();
        assert_eq!(rec.decision, Decision::No);
        let rec = soliton_at(&s, &[0.2, 0.1], 1.0, &Config::default()).unwrap();
        assert_eq!(rec.decision, Decision::Yes);
    }
}
