//! Recovering a potential `f` with `df = K` by line integrals.

use super::*;
use crate::expr::ScalarExpr;

/// A covector field in coordinates.
pub trait CovectorField: Sync {
    fn eval(&self, p: &[f64]) -> Result<Vec<f64>, ObstructionError>;

    /// `max |∂_i K_j − ∂_j K_i|` at `p`; central differences by default.
    fn curl(&self, p: &[f64]) -> Result<f64, ObstructionError> {
        let n = p.len();
        let h = 1e-5 * p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += h;
            b[i] -= h;
            let (ka, kb) = (self.eval(&a)?, self.eval(&b)?);
            for j in 0..n {
                d[i][j] = (ka[j] - kb[j]) / (2.0 * h);
            }
        }
        let mut m = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max((d[i][j] - d[j][i]).abs());
            }
        }
        Ok(m)
    }
}

/// Components given by expressions; the curl is exact.
pub struct ExprCovector(pub Vec<ScalarExpr>);

impl CovectorField for ExprCovector {
    fn eval(&self, p: &[f64]) -> Result<Vec<f64>, ObstructionError> {
        self.0.iter().map(|e| e.eval(p).map_err(|e| SmmsError::from(e).into())).collect()
    }

    fn curl(&self, p: &[f64]) -> Result<f64, ObstructionError> {
        let d: Vec<Jet> = self.0.iter().map(|e| e.eval_jet(p, 1)).collect::<Result<_, _>>().map_err(SmmsError::from)?;
        let n = p.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max((d[j].partial(&[i]) - d[i].partial(&[j])).abs());
            }
        }
        Ok(m)
    }
}

/// A field computed by a closure, e.g. a pipeline's candidate `K`.
pub struct FnCovector<F>(pub F);

impl<F> CovectorField for FnCovector<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ObstructionError> + Sync,
{
    fn eval(&self, p: &[f64]) -> Result<Vec<f64>, ObstructionError> {
        (self.0)(p)
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(k, k, |i, l| {
        if i.abs_diff(l) == 1 {
            let b = i.max(l) as f64;
            b / (4.0 * b * b - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let e = j.symmetric_eigen();
    let mut nw: Vec<(f64, f64)> =
        (0..k).map(|i| (e.eigenvalues[i], 2.0 * e.eigenvectors[(0, i)].powi(2))).collect();
    nw.sort_by(|a, b| a.0.total_cmp(&b.0));
    nw.into_iter().unzip()
}

/// `∫ K` along the straight segment `a → b`.
pub fn segment_integral(k: &dyn CovectorField, a: &[f64], b: &[f64], nodes: usize) -> Result<f64, ObstructionError> {
    let (x, w) = gauss_legendre(nodes);
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let mut s = 0.0;
    for (t, wt) in x.iter().zip(&w) {
        let u = 0.5 * (t + 1.0);
        let p: Vec<f64> = a.iter().zip(&d).map(|(p, q)| p + u * q).collect();
        let kv = k.eval(&p)?;
        s += 0.5 * wt * kv.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    /// `f` at each vertex, with `f(base) = 0`
    pub values: Vec<f64>,
    pub curl_max: f64,
    /// `|∮ K|` around the closed polygon through all vertices
    pub loop_residual: f64,
    pub exact: bool,
}

/// Integrates `K` along the polygon `path[0] → path[1] → …`. The polygon is
/// closed back to `path[0]` for the loop residual; `K` counts as exact when
/// the curl at the vertices and the loop integral are both below tolerance.
pub fn potential_reconstruct(
    k: &dyn CovectorField,
    path: &[Vec<f64>],
    nodes: usize,
    cfg: &Config,
) -> Result<PotentialReport, ObstructionError> {
    if path.is_empty() {
        return Err(ObstructionError::Input("path needs at least one point".into()));
    }
    let n = path[0].len();
    if path.iter().any(|p| p.len() != n) {
        return Err(ObstructionError::Input("path points have different dimensions".into()));
    }
    let mut values = vec![0.0];
    let mut acc = 0.0;
    let mut scale = 1.0f64;
    for w in path.windows(2) {
        acc += segment_integral(k, &w[0], &w[1], nodes)?;
        values.push(acc);
        scale = scale.max(acc.abs());
    }
    let close = if path.len() > 2 { segment_integral(k, path.last().unwrap(), &path[0], nodes)? } else { -acc };
    let loop_residual = (acc + close).abs();
    let mut curl_max = 0.0f64;
    for p in path {
        curl_max = curl_max.max(k.curl(p)?);
        scale = scale.max(k.eval(p)?.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let exact = curl_max <= cfg.decision_tol * scale && loop_residual <= cfg.decision_tol * scale;
    Ok(PotentialReport { values, curl_max, loop_residual, exact })
}

/// Vertices of the coordinate rectangle `p, p + h_i e_i, p + h_i e_i + h_j e_j, p + h_j e_j`.
pub fn rectangle(p: &[f64], i: usize, j: usize, hi: f64, hj: f64) -> Vec<Vec<f64>> {
    let mut a = p.to_vec();
    let mut v = vec![a.clone()];
    a[i] += hi;
    v.push(a.clone());
    a[j] += hj;
    v.push(a.clone());
    a[i] -= hi;
    v.push(a);
    v
}

/// Largest `|∮ K|` over coordinate rectangles through `p` in every plane.
pub fn loop_residuals(k: &dyn CovectorField, p: &[f64], h: f64, nodes: usize) -> Result<f64, ObstructionError> {
    let n = p.len();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let r = rectangle(p, i, j, h, h);
            let mut s = 0.0;
            for a in 0..4 {
                s += segment_integral(k, &r[a], &r[(a + 1) % 4], nodes)?;
            }
            m = m.max(s.abs());
        }
    }
    Ok(m)
}
