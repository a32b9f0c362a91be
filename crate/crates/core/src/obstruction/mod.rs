//! Obstructions to quasi-Einstein scales, gradient Ricci solitons and static
//! potentials, evaluated on sample sets.
//!
//! Curvature-type tensors `T ∈ (0,4)` act on vectors by insertion into the
//! third slot, `T(x) = T(·,·,x,·) ∈ Λ²T*M ⊗ T*M`. The space `F` of such values
//! carries the inner product `c Σ_{a<b, d} u_{abd} w_{abd}` in an orthonormal
//! frame, with `c` the configurable normalization.
//!
//! Decisions are per sample set: a `yes` means the data are consistent with
//! existence at every sampled point, not a global certificate.

pub mod harnack;
pub mod potential;
pub mod soliton;
pub mod statics;

use crate::expr::{Jet, JetError};
use crate::riemann::{JTensor, MetricJet, RTensor, RiemannError, ScaleTag};
use crate::smms::{SmmsError, SmmsJet, SmmsSpec};
use crate::tractor::{frame_basis, Tractor, TractorCalc, TractorError};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObstructionError {
    #[error("curvature map is not injective at {point:?} (σ_min = {sigma_min:e}, σ_max = {sigma_max:e})")]
    NotGeneric { point: Vec<f64>, sigma_min: f64, sigma_max: f64 },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Smms(#[from] SmmsError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Tractor(#[from] TractorError),
    #[error("{kind} at point {point:?}")]
    Jet { kind: JetError, point: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Config {
    /// Relative singular-value floor for injectivity.
    pub generic_eps: f64,
    /// Threshold on decision residuals.
    pub decision_tol: f64,
    /// Threshold on identity residuals.
    pub identity_tol: f64,
    /// Normalization `c` of the inner product on `F`.
    pub lambda2_scale: f64,
}

impl Default for Config {
    fn default() -> Config {
        Config { generic_eps: 1e-8, decision_tol: 1e-6, identity_tol: 1e-8, lambda2_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Yes,
    No,
    NotGeneric,
    VNonpositive,
}

impl Decision {
    /// Summary over points: any `no` wins, then `not-generic`, then `v-nonpositive`.
    pub fn combine(ds: impl IntoIterator<Item = Decision>) -> Decision {
        let rank = |d: Decision| match d {
            Decision::No => 3,
            Decision::NotGeneric => 2,
            Decision::VNonpositive => 1,
            Decision::Yes => 0,
        };
        ds.into_iter().max_by_key(|d| rank(*d)).unwrap_or(Decision::Yes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenericityReport {
    pub weakly_generic: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub generic: bool,
    pub sigma_min_2a: f64,
    pub sigma_min_2b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub point: Vec<f64>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genericity: Option<GenericityReport>,
    /// Candidate `K` as a covector in coordinates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_norm: Option<f64>,
    /// Coordinate components of the obstruction tensor, row-major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    pub residuals: BTreeMap<String, f64>,
}

impl PointRecord {
    pub fn new(point: &[f64], decision: Decision) -> PointRecord {
        PointRecord {
            point: point.to_vec(),
            decision,
            reason: None,
            genericity: None,
            k: None,
            g_norm: None,
            g: None,
            residuals: BTreeMap::new(),
        }
    }

    fn with_reason(mut self, r: impl Into<String>) -> PointRecord {
        self.reason = Some(r.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub pipeline: String,
    pub decision: Decision,
    /// Index of the point with the largest `‖G‖`, or the first point carrying
    /// the summary decision.
    pub witness: Option<usize>,
    pub worst: BTreeMap<String, f64>,
    pub records: Vec<PointRecord>,
}

impl ObstructionReport {
    pub fn from_records(pipeline: &str, records: Vec<PointRecord>) -> ObstructionReport {
        let decision = Decision::combine(records.iter().map(|r| r.decision));
        let mut worst = BTreeMap::new();
        for r in &records {
            for (k, v) in &r.residuals {
                let e = worst.entry(k.clone()).or_insert(0.0f64);
                *e = e.max(*v);
            }
            if let Some(g) = r.g_norm {
                let e = worst.entry("g_norm".to_string()).or_insert(0.0f64);
                *e = e.max(g);
            }
        }
        let witness = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.decision == decision)
            .max_by(|a, b| a.1.g_norm.unwrap_or(0.0).total_cmp(&b.1.g_norm.unwrap_or(0.0)))
            .map(|(i, _)| i);
        ObstructionReport { pipeline: pipeline.into(), decision, witness, worst, records }
    }
}

/// Runs a per-point pipeline over all points in parallel, keeping order.
pub fn run_points<F>(points: &[Vec<f64>], f: F) -> Result<Vec<PointRecord>, ObstructionError>
where
    F: Fn(&[f64]) -> Result<PointRecord, ObstructionError> + Sync,
{
    points.par_iter().map(|p| f(p)).collect()
}

/// Singular values below this are zero whatever the relative gap.
pub const SINGULAR_FLOOR: f64 = 1e-12;

fn injective(smin: f64, smax: f64, eps: f64) -> bool {
    smin > (eps * smax).max(SINGULAR_FLOOR)
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Matrix of `x ↦ T(·,·,x,·)` on frame components, rows over `(a<b, d)`.
pub fn insertion_matrix(t: &RTensor) -> DMatrix<f64> {
    let n = t.dim();
    let ps = pairs(n);
    let mut m = DMatrix::zeros(ps.len() * n, n);
    for (r, &(a, b)) in ps.iter().enumerate() {
        for d in 0..n {
            for k in 0..n {
                m[(r * n + d, k)] = *t.at(&[a, b, k, d]);
            }
        }
    }
    m
}

fn f_vector(t: &RTensor) -> DVector<f64> {
    let n = t.dim();
    let ps = pairs(n);
    DVector::from_iterator(ps.len() * n, ps.iter().flat_map(|&(a, b)| (0..n).map(move |d| *t.at(&[a, b, d]))))
}

/// Singular values of the maps used in the two genericity notions, for a
/// curvature tensor given in an orthonormal frame.
pub fn genericity_frame(a: &RTensor, eps: f64) -> GenericityReport {
    let n = a.dim();
    let s1 = sorted_singular_values(&insertion_matrix(a));
    let (smax, smin) = (s1[0], *s1.last().unwrap());
    let ps = pairs(n);
    // Λ² → Λ²
    let l2 = DMatrix::from_fn(ps.len(), ps.len(), |r, c| *a.at(&[ps[r].0, ps[r].1, ps[c].0, ps[c].1]));
    let s2a = sorted_singular_values(&l2);
    // End(TM) → End(TM) ⊕ Λ³T*M ⊗ T*M
    let triples: Vec<(usize, usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).flat_map(move |b| (b + 1..n).map(move |c| (a, b, c)))).collect();
    let rows = n * n + triples.len() * n;
    let mut e = DMatrix::zeros(rows, n * n);
    for i in 0..n {
        for j in 0..n {
            let col = i * n + j;
            for x in 0..n {
                for y in 0..n {
                    e[(x * n + y, col)] = *a.at(&[i, x, j, y]);
                }
            }
            // Σ_k A(e_k) ∧ T(e_k) with T = e_i ⊗ e_j contributes only k = i
            for (t, &(p, q, r)) in triples.iter().enumerate() {
                for d in 0..n {
                    let mut v = 0.0;
                    let cyc = [(p, q, r), (q, r, p), (r, p, q)];
                    for &(u, w, z) in &cyc {
                        if z == j {
                            v += a.at(&[u, w, i, d]);
                        }
                    }
                    e[(n * n + t * n + d, col)] = v;
                }
            }
        }
    }
    let s2b = sorted_singular_values(&e);
    let inj = |s: &[f64]| !s.is_empty() && injective(*s.last().unwrap(), s[0], eps);
    GenericityReport {
        weakly_generic: injective(smin, smax, eps),
        sigma_min: smin,
        sigma_max: smax,
        generic: inj(&s2a) && inj(&s2b),
        sigma_min_2a: s2a.last().copied().unwrap_or(0.0),
        sigma_min_2b: s2b.last().copied().unwrap_or(0.0),
    }
}

pub fn genericity(pack_a_w: &RTensor, mj: &MetricJet, cfg: &Config) -> GenericityReport {
    genericity_frame(&pack_a_w.in_frame(mj.frame()), cfg.generic_eps)
}

/// The inverse `D = A ∘ Ǎ^{-1}` of an injective insertion map, in an
/// orthonormal frame.
#[derive(Debug, Clone)]
pub struct InverseD {
    pub c: f64,
    pub a: DMatrix<f64>,
    pub a_check: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl InverseD {
    /// `t` in an orthonormal frame.
    pub fn build(t: &RTensor, cfg: &Config) -> Result<InverseD, ObstructionError> {
        let a = insertion_matrix(t);
        let s = sorted_singular_values(&a);
        let (smax, smin) = (s[0], *s.last().unwrap());
        if !injective(smin, smax, cfg.generic_eps) {
            return Err(ObstructionError::NotGeneric { point: vec![], sigma_min: smin, sigma_max: smax });
        }
        let c = cfg.lambda2_scale;
        let a_check = (a.transpose() * &a) * c;
        let inv = a_check
            .clone()
            .cholesky()
            .ok_or(ObstructionError::NotGeneric { point: vec![], sigma_min: smin, sigma_max: smax })?
            .inverse();
        let d = &a * inv;
        Ok(InverseD { c, a, a_check, d })
    }

    /// `max |(D∨A) − id|`.
    pub fn dva_residual(&self) -> f64 {
        let n = self.a.ncols();
        let dva = (self.d.transpose() * &self.a) * self.c;
        (dva - DMatrix::identity(n, n)).abs().max()
    }

    /// `K = ⟨r, D(·)⟩` in frame components, for `r ∈ F` in the frame.
    pub fn solve(&self, r: &RTensor) -> Vec<f64> {
        let k = (self.d.transpose() * f_vector(r)) * self.c;
        k.iter().copied().collect()
    }

    /// `max_x |⟨r − A(K), D(x)⟩_F|` for frame components `k`.
    pub fn pairing_residual(&self, r: &RTensor, k: &[f64]) -> f64 {
        let res = f_vector(r) - &self.a * DVector::from_column_slice(k);
        ((self.d.transpose() * res) * self.c).abs().max()
    }
}

fn frame_to_vector(mj: &MetricJet, k: &[f64]) -> Vec<f64> {
    let n = mj.n;
    let f = mj.frame();
    (0..n).map(|i| (0..n).map(|a| f[i * n + a] * k[a]).sum()).collect()
}

fn lower(mj: &MetricJet, k: &[f64]) -> Vec<f64> {
    let g = mj.g_values();
    let n = mj.n;
    (0..n).map(|i| (0..n).map(|j| g.at(&[i, j]) * k[j]).sum()).collect()
}

/// Candidate `K` (coordinate covector) solving `A(K) = r` in the least-squares
/// sense, from value-level tensors.
pub fn candidate_k_values(t: &RTensor, r: &RTensor, mj: &MetricJet, cfg: &Config) -> Result<(Vec<f64>, InverseD), ObstructionError> {
    let f = mj.frame();
    let inv = InverseD::build(&t.in_frame(f), cfg).map_err(|e| with_point(e, &mj.point))?;
    let kf = inv.solve(&r.in_frame(f));
    Ok((lower(mj, &frame_to_vector(mj, &kf)), inv))
}

fn with_point(e: ObstructionError, p: &[f64]) -> ObstructionError {
    match e {
        ObstructionError::NotGeneric { sigma_min, sigma_max, .. } => {
            ObstructionError::NotGeneric { point: p.to_vec(), sigma_min, sigma_max }
        }
        e => e,
    }
}

/// Gaussian elimination with partial pivoting on values, in jet arithmetic.
fn solve_jets(mut a: Vec<Jet>, mut b: Vec<Jet>, n: usize) -> Result<Vec<Jet>, JetError> {
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i * n + col].value().abs().total_cmp(&a[j * n + col].value().abs())).unwrap();
        if p != col {
            for k in 0..n {
                a.swap(p * n + k, col * n + k);
            }
            b.swap(p, col);
        }
        let inv = a[col * n + col].recip()?;
        for r in col + 1..n {
            let f = a[r * n + col].mul_jet(&inv);
            for k in col..n {
                let t = f.mul_jet(&a[col * n + k]);
                a[r * n + k] = &a[r * n + k] - &t;
            }
            let t = f.mul_jet(&b[col]);
            b[r] = &b[r] - &t;
        }
    }
    let mut x = b.clone();
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for k in r + 1..n {
            acc = &acc - &a[r * n + k].mul_jet(&x[k]);
        }
        x[r] = acc.mul_jet(&a[r * n + r].recip()?);
    }
    Ok(x)
}

/// Jet of the least-squares solution `K` (covector) of `T(·,·,K,·) = r`.
pub fn candidate_k_jets(t: &JTensor, r: &JTensor, mj: &MetricJet) -> Result<JTensor, ObstructionError> {
    let n = mj.n;
    let o = t.order().min(r.order());
    let (t, r) = (t.truncate(o), r.truncate(o));
    let ginv = mj.ginv.truncate(o);
    let tu = t.raise(0, &ginv).raise(1, &ginv).raise(3, &ginv);
    let zero = r.components()[0].zero_like();
    let mut nm = vec![zero.clone(); n * n];
    let mut b = vec![zero; n];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for k in 0..n {
                    let u = tu.at(&[x, y, k, z]);
                    b[k].fma_assign(u, r.at(&[x, y, z]));
                    for l in 0..n {
                        nm[k * n + l].fma_assign(u, t.at(&[x, y, l, z]));
                    }
                }
            }
        }
    }
    let kv = solve_jets(nm, b, n).map_err(|kind| ObstructionError::Jet { kind, point: mj.point.clone() })?;
    Ok(mj.flat(&kv).truncate(o))
}

/// `G` for the quasi-Einstein problem at one point.
pub fn obstruction_g_at(spec: &SmmsSpec, point: &[f64], cfg: &Config) -> Result<PointRecord, ObstructionError> {
    let sj = match spec.at(point, 4) {
        Err(SmmsError::NonPositiveDensity { .. }) => {
            return Ok(PointRecord::new(point, Decision::VNonpositive).with_reason("density is not positive"))
        }
        r => r?,
    };
    obstruction_g_jet(&sj, cfg)
}

pub fn obstruction_g_jet(sj: &SmmsJet, cfg: &Config) -> Result<PointRecord, ObstructionError> {
    let point = sj.point().to_vec();
    let pack = sj.curvature()?;
    let mj = &sj.mj;
    let gen = genericity(&pack.a_w.values(), mj, cfg);
    let mut rec = PointRecord::new(&point, Decision::Yes);
    rec.genericity = Some(gen.clone());
    if !gen.weakly_generic {
        rec.decision = Decision::NotGeneric;
        return Ok(rec.with_reason("A^W is not injective on TM"));
    }
    let dp = pack.dp_w.as_ref().unwrap();
    let (kv, inv) = candidate_k_values(&pack.a_w.values(), &dp.values(), mj, cfg)?;
    let k = candidate_k_jets(&pack.a_w, dp, mj)?;
    let m = pack.m;
    let nf = sj.n() as f64;
    let nabla_k = mj.covariant_derivative(&k)?;
    let o = nabla_k.order();
    let div_k = mj.divergence(&k, 0, Some(&sj.dphi))?.components()[0].truncate(o);
    let k2 = mj.dot_forms(&k, &k).truncate(o);
    let kk = k.outer(&k).truncate(o);
    let g = mj.g.truncate(o);
    let vinv = pack.v.recip().map_err(|kind| ObstructionError::Jet { kind, point: point.clone() })?;
    let vterm = (&pack.r_w + &(&vinv * &vinv).scale(m * pack.mu)).scale(1.0 / (m + nf)).truncate(o);
    let kterm = nabla_k.plus(&kk).minus(&g.times_scalar(&(&div_k + &k2).scale(1.0 / (m + nf))));
    let gt = pack.ric_be.truncate(o).minus(&g.times_scalar(&vterm)).plus(&kterm.scale(m + nf - 2.0));
    let dk = nabla_k.minus(&nabla_k.permute(&[1, 0]));
    let gn = mj.norm(&gt.values());
    let dkn = mj.norm(&dk.values());
    let scale = mj.norm(&pack.ric_be.values()).max(1.0);
    let kvals: Vec<f64> = k.components().iter().map(|j| j.value()).collect();
    rec.residuals.insert("dk".into(), dkn);
    rec.residuals.insert("dva".into(), inv.dva_residual());
    rec.residuals.insert("k_pairing".into(), inv.pairing_residual(&dp.values().in_frame(mj.frame()), &frame_k(mj, &kv)));
    rec.residuals.insert(
        "k_consistency".into(),
        kvals.iter().zip(&kv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / kv.iter().map(|x| x.abs()).fold(1.0, f64::max),
    );
    rec.g_norm = Some(gn);
    rec.g = Some(gt.values().components().to_vec());
    rec.k = Some(kvals);
    if gn > cfg.decision_tol * scale || dkn > cfg.decision_tol * scale {
        rec.decision = Decision::No;
        rec = rec.with_reason(if gn > cfg.decision_tol * scale { "G does not vanish" } else { "K is not closed" });
    }
    Ok(rec)
}

/// Frame components of a coordinate covector.
fn frame_k(mj: &MetricJet, k: &[f64]) -> Vec<f64> {
    let n = mj.n;
    let f = mj.frame();
    (0..n).map(|a| (0..n).map(|i| f[i * n + a] * k[i]).sum()).collect()
}

pub fn obstruction_g(spec: &SmmsSpec, points: &[Vec<f64>], cfg: &Config) -> Result<ObstructionReport, ObstructionError> {
    let recs = run_points(points, |p| obstruction_g_at(spec, p, cfg))?;
    Ok(ObstructionReport::from_records("qe", recs))
}

/// Singular values of `Φ(I) = (R^W(I), ∇^W R^W(I))` on `J̃^⊥`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub sigma: Vec<f64>,
    pub sigma_n1: f64,
    pub qe_possible: bool,
}

pub fn rank_test_phi(tc: &TractorCalc, cfg: &Config) -> Result<RankReport, ObstructionError> {
    let n = tc.n();
    let d = n + 2;
    let mj = tc.mj();
    let fr = mj.frame();
    // frame change on tractor components: coordinate = t · frame
    let mut t = DMatrix::zeros(d, d);
    t[(0, 0)] = 1.0;
    t[(d - 1, d - 1)] = 1.0;
    for i in 0..n {
        for a in 0..n {
            t[(1 + i, 1 + a)] = fr[i * n + a];
        }
    }
    let tinv = t.clone().try_inverse().expect("frame is invertible");
    let to_frame = |m: DMatrix<f64>| &tinv * m * &t;
    let mut rc = Vec::new();
    for x in 0..n {
        for y in 0..n {
            rc.push(((x, y), tc.curvature_matrix(x, y)?));
        }
    }
    let mut dc = Vec::new();
    for z in 0..n {
        for x in 0..n {
            for y in 0..n {
                dc.push(((z, x, y), tc.curvature_derivative(z, x, y)?));
            }
        }
    }
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    for (a, b) in pairs(n) {
        let mut m = DMatrix::zeros(d, d);
        for ((x, y), r) in &rc {
            m += r * (fr[x * n + a] * fr[y * n + b]);
        }
        blocks.push(to_frame(m));
    }
    for c in 0..n {
        for (a, b) in pairs(n) {
            let mut m = DMatrix::zeros(d, d);
            for ((z, x, y), r) in &dc {
                m += r * (fr[z * n + c] * fr[x * n + a] * fr[y * n + b]);
            }
            blocks.push(to_frame(m));
        }
    }
    let (jt, _) = tc.scale_tractor()?;
    let jv = DVector::from_vec(jt.value().to_vec());
    // ⟨I, J̃⟩ = (h J̃)·I in coordinates; in frame components the functional is tᵀ h J̃
    let mut h = DMatrix::zeros(d, d);
    h[(0, d - 1)] = 1.0;
    h[(d - 1, 0)] = 1.0;
    let g = mj.g_values();
    for i in 0..n {
        for j in 0..n {
            h[(1 + i, 1 + j)] = *g.at(&[i, j]);
        }
    }
    let ell = t.transpose() * h * jv;
    let basis = complement_basis(&ell);
    let stacked = DMatrix::from_fn(blocks.len() * d, basis.ncols(), |r, c| (&blocks[r / d] * basis.column(c))[r % d]);
    let sigma = sorted_singular_values(&stacked);
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let sn = sigma.last().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > (cfg.decision_tol * s1).max(SINGULAR_FLOOR)).count();
    Ok(RankReport { rank, sigma_n1: sn, qe_possible: !injective(sn, s1, cfg.decision_tol), sigma })
}

/// Orthonormal basis of the Euclidean orthogonal complement of `ell`.
fn complement_basis(ell: &DVector<f64>) -> DMatrix<f64> {
    let d = ell.len();
    let svd = DMatrix::from_fn(1, d, |_, j| ell[j]).svd(false, true);
    let vt = svd.v_t.unwrap();
    // rows 1.. of V^T span the complement when ell ≠ 0
    if ell.norm() == 0.0 {
        return DMatrix::identity(d, d).columns(0, d - 1).into_owned();
    }
    let full = if vt.nrows() == d { vt } else { full_vt(ell) };
    DMatrix::from_fn(d, d - 1, |r, c| full[(c + 1, r)])
}

fn full_vt(ell: &DVector<f64>) -> DMatrix<f64> {
    // Householder completion of ell/|ell| to an orthonormal basis
    let d = ell.len();
    let u = ell / ell.norm();
    let mut e = DVector::zeros(d);
    e[0] = 1.0;
    let w = if (&u - &e).norm() < 1e-12 { DVector::zeros(d) } else { (&u - &e) / (&u - &e).norm() };
    let hmat = DMatrix::identity(d, d) - (&w * w.transpose()) * 2.0;
    hmat.transpose()
}

pub fn rank_test(spec: &SmmsSpec, points: &[Vec<f64>], cfg: &Config) -> Result<ObstructionReport, ObstructionError> {
    let recs = run_points(points, |p| {
        let tc = match TractorCalc::at(spec, p, 4, ScaleTag("g".into())) {
            Err(TractorError::Smms(SmmsError::NonPositiveDensity { .. })) => {
                return Ok(PointRecord::new(p, Decision::VNonpositive).with_reason("density is not positive"))
            }
            r => r?,
        };
        let rr = rank_test_phi(&tc, cfg)?;
        let mut rec = PointRecord::new(p, if rr.qe_possible { Decision::Yes } else { Decision::No });
        rec.residuals.insert("rank".into(), rr.rank as f64);
        rec.residuals.insert("sigma_1".into(), rr.sigma.first().copied().unwrap_or(0.0));
        rec.residuals.insert("sigma_n1".into(), rr.sigma_n1);
        if !rr.qe_possible {
            rec = rec.with_reason("Φ is injective on the W-tractor bundle");
        }
        Ok(rec)
    })?;
    Ok(ObstructionReport::from_records("rank", recs))
}

/// Residual norms of the conditions `W^W(I) = 0`, `R^W(I) = 0`, `∇^W R^W(I) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TractorConditions {
    pub weyl: f64,
    pub curvature: f64,
    pub curvature_derivative: f64,
    /// `⟨X, I⟩`, which must be positive.
    pub x_pairing: f64,
    /// `|⟨I, J̃⟩|`
    pub scale_pairing: f64,
}

pub fn check_tractor_conditions(tc: &TractorCalc, i: &Tractor) -> Result<TractorConditions, ObstructionError> {
    let n = tc.n();
    let mj = tc.mj();
    let g = mj.g_values();
    let iv = DVector::from_vec(i.to_vec());
    let basis = frame_basis(mj, &tc.scale);
    let fr = mj.frame();
    let size = |v: DVector<f64>| Tractor::from_slice(v.as_slice(), tc.scale.clone()).size(&g);
    let mut c2 = 0.0;
    let mut d2 = 0.0;
    for (a, b) in pairs(n) {
        let mut s = DVector::zeros(n + 2);
        for x in 0..n {
            for y in 0..n {
                s += tc.curvature_matrix(x, y)? * &iv * (fr[x * n + a] * fr[y * n + b]);
            }
        }
        c2 += size(s).powi(2);
        for c in 0..n {
            let mut s = DVector::zeros(n + 2);
            for z in 0..n {
                for x in 0..n {
                    for y in 0..n {
                        s += tc.curvature_derivative(z, x, y)? * &iv * (fr[z * n + c] * fr[x * n + a] * fr[y * n + b]);
                    }
                }
            }
            d2 += size(s).powi(2);
        }
    }
    let _ = basis;
    let w = tc.weyl()?.annihilation(i, mj)?;
    let (jt, _) = tc.scale_tractor()?;
    Ok(TractorConditions {
        weyl: w,
        curvature: c2.sqrt(),
        curvature_derivative: d2.sqrt(),
        x_pairing: i.inner(&Tractor::x(n, tc.scale.clone()), &g)?,
        scale_pairing: i.inner(&jt.value(), &g)?.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_scalar, ScalarExpr};
    use crate::smms::{DimParam, Density};

    fn coords() -> Vec<String> {
        ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
    }

    fn flat_affine() -> SmmsSpec {
        let c = coords();
        let g = (0..9).map(|k| ScalarExpr::constant(if k / 3 == k % 3 { 1.0 } else { 0.0 }, &c)).collect();
        SmmsSpec::new(c.clone(), g, Density::V(parse_scalar("1 + x", &c).unwrap()), DimParam::Finite(2.0), 1.0).unwrap()
    }

    fn perturbed(v: &str) -> SmmsSpec {
        let c = coords();
        let src = [
            "1 + 0.1*x*y + 0.05*z^2",
            "0.1*x*z",
            "0.07*y^2",
            "0.1*x*z",
            "1 + 0.1*y*z - 0.08*x^2",
            "0.06*x*y",
            "0.07*y^2",
            "0.06*x*y",
            "1 + 0.09*x*z + 0.1*y^2",
        ];
        let g = src.iter().map(|s| parse_scalar(s, &c).unwrap()).collect();
        SmmsSpec::new(c.clone(), g, Density::V(parse_scalar(v, &c).unwrap()), DimParam::Finite(2.0), 0.3).unwrap()
    }

    #[test]
    fn flat_is_not_weakly_generic() {
        let rec = obstruction_g_at(&flat_affine(), &[0.1, 0.2, 0.3], &Config::default()).unwrap();
        assert_eq!(rec.decision, Decision::NotGeneric);
        assert_eq!(rec.genericity.unwrap().sigma_min, 0.0);
    }

    #[test]
    fn perturbed_flat_is_weakly_generic_and_obstructed() {
        let rec = obstruction_g_at(&perturbed("1"), &[0.3, -0.2, 0.25], &Config::default()).unwrap();
        let gen = rec.genericity.clone().unwrap();
        assert!(gen.weakly_generic, "{gen:?}");
        assert_eq!(rec.decision, Decision::No);
        assert!(rec.g_norm.unwrap() > 1e-3);
        assert!(rec.residuals["dva"] < 1e-8);
        assert!(rec.residuals["k_pairing"] < 1e-8);
        assert!(rec.residuals["k_consistency"] < 1e-10);
    }

    #[test]
    fn manufactured_k_round_trip() {
        let sj = perturbed("1").at(&[0.2, 0.1, -0.3], 4).unwrap();
        let pack = sj.curvature().unwrap();
        let a = pack.a_w.values();
        let k0 = [0.3, -0.7, 0.45];
        let r = a.contract_vector(2, &k0);
        let cfg = Config::default();
        let (k, inv) = candidate_k_values(&a, &r, &sj.mj, &cfg).unwrap();
        let k_up: Vec<f64> = (0..3).map(|i| (0..3).map(|j| sj.mj.ginv_values().at(&[i, j]) * k[j]).sum()).collect();
        for (x, y) in k_up.iter().zip(k0) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(inv.dva_residual() < 1e-8);
        let doubled = Config { lambda2_scale: 2.0, ..cfg };
        let (k2, _) = candidate_k_values(&a, &r, &sj.mj, &doubled).unwrap();
        for (x, y) in k.iter().zip(&k2) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn jet_solve_matches_dense() {
        let a = vec![Jet::constant(3, 1, 2.0), Jet::constant(3, 1, 1.0), Jet::variable(3, 1, 0, 1.0), Jet::constant(3, 1, 3.0)];
        let b = vec![Jet::constant(3, 1, 1.0), Jet::variable(3, 1, 1, 2.0)];
        let x = solve_jets(a, b, 2).unwrap();
        // [[2,1],[1+t,3]] x = [1, 2+s] at t = s = 0: x = (0.2, 0.6)
        assert!((x[0].value() - 0.2).abs() < 1e-15 && (x[1].value() - 0.6).abs() < 1e-15);
        // ∂_t x = −M⁻¹ (∂_t M) x, ∂_t M = [[0,0],[1,0]]: −M⁻¹ [0, 0.2] = (0.04, −0.08)
        assert!((x[0].partial(&[0]) - 0.04).abs() < 1e-14);
        assert!((x[1].partial(&[0]) + 0.08).abs() < 1e-14);
    }

    #[test]
    fn flat_rank_and_conditions() {
        let spec = flat_affine();
        let tc = TractorCalc::at(&spec, &[0.1, -0.2, 0.3], 4, ScaleTag("g".into())).unwrap();
        let rr = rank_test_phi(&tc, &Config::default()).unwrap();
        assert!(rr.qe_possible);
        assert_eq!(rr.sigma.len(), 4);
        let i = Tractor::new(1.0, vec![0.0; 3], 0.0, tc.scale.clone());
        let c = check_tractor_conditions(&tc, &i).unwrap();
        assert!(c.weyl < 1e-14 && c.curvature < 1e-14 && c.curvature_derivative < 1e-14);
        assert!((c.x_pairing - 1.0).abs() < 1e-15);
        assert!(c.scale_pairing < 1e-14);
    }

    #[test]
    fn x_in_curvature_kernel() {
        let spec = perturbed("exp(0.2*x - 0.1*y*z)");
        let tc = TractorCalc::at(&spec, &[0.2, 0.3, -0.1], 4, ScaleTag("g".into())).unwrap();
        let c = check_tractor_conditions(&tc, &Tractor::x(3, tc.scale.clone())).unwrap();
        assert!(c.curvature < 1e-14);
        let rr = rank_test_phi(&tc, &Config::default()).unwrap();
        assert!(!rr.qe_possible);
        assert_eq!(rr.rank, 4);
    }

    #[test]
    fn decision_combination() {
        use Decision::*;
        assert_eq!(Decision::combine([Yes, NotGeneric, Yes]), NotGeneric);
        assert_eq!(Decision::combine([Yes, NotGeneric, No]), No);
        assert_eq!(Decision::combine([]), Yes);
    }
}
