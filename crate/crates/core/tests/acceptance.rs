//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smms_core::expr::{parse_scalar, ScalarExpr};
use smms_core::obstruction::harnack::{harnack_at, random_data, random_symmetric_field};
use smms_core::obstruction::soliton::{soliton_at, soliton_residual};
use smms_core::obstruction::statics::{b_tensor, eigenframe_test, static_at, static_residual};
use smms_core::obstruction::{
    candidate_k_values, check_tractor_conditions, genericity, insertion_matrix, obstruction_g, obstruction_g_at,
    rank_test_phi, Config, Decision,
};
use smms_core::riemann::{riemann_symmetry_residual, MetricJet, ScaleTag};
use smms_core::smms::{DimParam, Density, SmmsSpec};
use smms_core::tractor::{check_parallel_correspondence, frame_basis, Tractor, TractorCalc};
use std::time::Instant;

type Outcome = Result<String, String>;

fn tag(s: &str) -> ScaleTag {
    ScaleTag(s.into())
}

fn sp(v: &[&str], c: &[String]) -> Vec<ScalarExpr> {
    exprs(v, c)
}

struct Space {
    spec: SmmsSpec,
    points: Vec<Vec<f64>>,
}

/// 20 random analytic spaces with `n ∈ {3, 4}` and `m ∈ {1, 2.5, 7}`.
fn corpus(points: usize) -> Vec<Space> {
    let mut r = rng(2024);
    (0..20)
        .map(|i| {
            let n = [3, 4][i % 2];
            let m = [1.0, 2.5, 7.0][i % 3];
            let mu = r.gen_range(-1.0..1.0);
            let spec = random_smms(&mut r, n, m, mu);
            let points = (0..points).map(|_| random_point(&mut r, n)).collect();
            Space { spec, points }
        })
        .collect()
}

/// The corpus metrics with `v = 1`.
fn unit_density(spec: &SmmsSpec) -> SmmsSpec {
    let c = spec.coords.clone();
    SmmsSpec::new(c.clone(), spec.g.clone(), Density::V(ScalarExpr::constant(1.0, &c)), spec.m, spec.mu).unwrap()
}

fn flat(n: usize) -> Vec<ScalarExpr> {
    let c = coords(n);
    (0..n * n).map(|k| ScalarExpr::constant(if k / n == k % n { 1.0 } else { 0.0 }, &c)).collect()
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let num = max_of(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    num / max_of(a.iter().chain(b).map(|x| x.abs())).max(f64::MIN_POSITIVE)
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_identities(sp: &[Space]) -> Outcome {
    let worst = max_of(sp.par_iter().flat_map_iter(|s| {
        s.points.iter().map(|p| s.spec.at(p, 4).unwrap().verify_identities().unwrap().max())
    }).collect::<Vec<_>>());
    let npts: usize = sp.iter().map(|s| s.points.len()).sum();
    verdict(worst < 1e-8, format!("max relative identity residual {worst:.2e} over {npts} points"))
}

fn c2_symmetries(sp: &[Space]) -> Outcome {
    let rows: Vec<(f64, f64, f64)> = sp
        .par_iter()
        .flat_map_iter(|s| {
            let mut r = rng(s.points.len() as u64 + s.spec.n() as u64);
            let n = s.spec.n();
            s.points
                .iter()
                .map(|p| {
                    let tc = TractorCalc::at(&s.spec, p, 4, tag("g")).unwrap();
                    let w = tc.weyl().unwrap();
                    let ts: Vec<Tractor> = (0..8)
                        .map(|_| {
                            Tractor::new(r.gen_range(-1.0..1.0), (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(), r.gen_range(-1.0..1.0), tag("g"))
                        })
                        .collect();
                    let (pair, cyc) = w.symmetry_residual(&ts, tc.mj()).unwrap();
                    let a = riemann_symmetry_residual(&tc.pack.a_w.values()).max(tc.pack.cyclic_residual());
                    (tc.pack.bach_asymmetry(), pair.max(cyc), a)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let b = max_of(rows.iter().map(|r| r.0));
    let w = max_of(rows.iter().map(|r| r.1));
    let a = max_of(rows.iter().map(|r| r.2));
    verdict(b < 1e-9 && w < 1e-9 && a < 1e-9, format!("B^W asymmetry {b:.2e}, W^W pair/Bianchi {w:.2e}, A^W and dP^W symmetries {a:.2e}"))
}

fn c3_two_scale(sp: &[Space]) -> Outcome {
    let rows: Vec<(f64, f64)> = sp
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, s)| {
            let n = s.spec.n();
            let mut r = rng(300 + i as u64);
            let sf = random_function(&mut r, n, 0.3);
            let other = s.spec.conformal_change(&sf).unwrap();
            s.points
                .iter()
                .take(5)
                .map(|p| {
                    let tg = TractorCalc::at(&s.spec, p, 4, tag("g")).unwrap();
                    let th = TractorCalc::at(&other, p, 4, tag("h")).unwrap();
                    let sj = sf.eval_jet(p, 2).unwrap();
                    let basis = frame_basis(tg.mj(), &tag("g"));
                    let moved: Vec<Tractor> = basis.iter().map(|t| t.transform(&sj, tg.mj(), tag("h")).unwrap()).collect();
                    let (wg, wh) = (tg.weyl().unwrap(), th.weyl().unwrap());
                    let e2 = (-2.0 * sj.value()).exp();
                    let d = basis.len();
                    let (mut a, mut b) = (Vec::new(), Vec::new());
                    for q in 0..d.pow(4) {
                        let ix = [q % d, (q / d) % d, (q / d / d) % d, q / d / d / d];
                        a.push(e2 * wg.eval4([&basis[ix[0]], &basis[ix[1]], &basis[ix[2]], &basis[ix[3]]], tg.mj()).unwrap());
                        b.push(wh.eval4([&moved[ix[0]], &moved[ix[1]], &moved[ix[2]], &moved[ix[3]]], th.mj()).unwrap());
                    }
                    let (gg, gh) = (tg.mj().g_values(), th.mj().g_values());
                    let mut inner: f64 = 0.0;
                    for x in 0..d {
                        for y in 0..d {
                            let before = basis[x].inner(&basis[y], &gg).unwrap();
                            let after = moved[x].inner(&moved[y], &gh).unwrap();
                            inner = inner.max((before - after).abs());
                        }
                    }
                    (rel_vec(&a, &b), inner)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let w = max_of(rows.iter().map(|r| r.0));
    let h = max_of(rows.iter().map(|r| r.1));
    verdict(w < 1e-8 && h < 1e-10, format!("W^W slotwise relative {w:.2e}, tractor metric {h:.2e}"))
}

fn c4_flat_affine() -> Outcome {
    let cfg = Config::default();
    let mut worst = [0.0f64; 3];
    let mut all_possible = true;
    for n in [3, 4] {
        let c = coords(n);
        for m in [1.0, 2.5, 7.0] {
            let spec = SmmsSpec::new(c.clone(), flat(n), Density::V(parse_scalar("1 + x", &c).unwrap()), DimParam::Finite(m), m - 1.0).unwrap();
            let mut r = rng(40 + n as u64);
            let pts: Vec<Vec<f64>> = (0..10).map(|_| random_point(&mut r, n)).collect();
            let one = ScalarExpr::constant(1.0, &c);
            let pr = check_parallel_correspondence(&spec, &pts, &one).unwrap();
            worst[0] = worst[0].max(pr.nabla);
            worst[1] = worst[1].max(pr.inner);
            for p in &pts {
                let tc = TractorCalc::at(&spec, p, 4, tag("g")).unwrap();
                let i = tc.parallel_candidate(&tc.mj().constant(1.0)).unwrap().value();
                let tcond = check_tractor_conditions(&tc, &i).unwrap();
                worst[2] = worst[2].max(tcond.weyl);
                all_possible &= rank_test_phi(&tc, &cfg).unwrap().qe_possible;
            }
        }
    }
    verdict(
        worst.iter().all(|&w| w < 1e-10) && all_possible,
        format!("‖∇^W I‖ {:.2e}, ⟨I,J̃⟩ {:.2e}, W^W(I) {:.2e}, qe_possible {all_possible}", worst[0], worst[1], worst[2]),
    )
}

fn c5_negative_control(sp: &[Space]) -> Outcome {
    let cfg = Config::default();
    let rows: Vec<(bool, f64, Decision, f64)> = sp
        .par_iter()
        .map(|s| {
            let spec = unit_density(&s.spec);
            let n = spec.n();
            let pts: Vec<Vec<f64>> = s.points.iter().take(5).cloned().collect();
            let mut rank_ok = true;
            let mut ratio = f64::INFINITY;
            for p in &pts {
                let tc = TractorCalc::at(&spec, p, 4, tag("g")).unwrap();
                let rr = rank_test_phi(&tc, &cfg).unwrap();
                let q = rr.sigma_n1 / rr.sigma[0];
                ratio = ratio.min(q);
                rank_ok &= rr.sigma.len() == n + 1 && q > 1e-4;
            }
            let rep = obstruction_g(&spec, &pts, &cfg).unwrap();
            let gmax = max_of(rep.records.iter().filter_map(|r| r.g_norm));
            (rank_ok, ratio, rep.decision, gmax)
        })
        .collect();
    let ok = rows.iter().all(|r| r.0 && r.2 == Decision::No && r.3 > 1e-3);
    let ratio = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let gmin = rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min);
    let no = rows.iter().filter(|r| r.2 == Decision::No).count();
    verdict(ok, format!("min σ_(n+1)/σ_1 {ratio:.2e}, decision no on {no}/{} spaces, min witness ‖G‖ {gmin:.2e}", rows.len()))
}

fn c6_round_trip(sp: &[Space]) -> Outcome {
    let cfg = Config::default();
    let doubled = Config { lambda2_scale: 2.0, ..cfg };
    let rows: Vec<(f64, f64, f64)> = sp
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, s)| {
            let mut r = rng(600 + i as u64);
            let n = s.spec.n();
            s.points
                .iter()
                .take(10)
                .map(|p| {
                    let sj = s.spec.at(p, 4).unwrap();
                    let a = sj.curvature().unwrap().a_w.values();
                    let k0: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
                    let rhs = a.contract_vector(2, &k0);
                    let (k, inv) = candidate_k_values(&a, &rhs, &sj.mj, &cfg).unwrap();
                    let gi = sj.mj.ginv_values();
                    let up: Vec<f64> = (0..n).map(|x| (0..n).map(|y| gi.at(&[x, y]) * k[y]).sum()).collect();
                    let (k2, _) = candidate_k_values(&a, &rhs, &sj.mj, &doubled).unwrap();
                    (rel_vec(&up, &k0), inv.dva_residual(), rel_vec(&k, &k2))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let e = [max_of(rows.iter().map(|r| r.0)), max_of(rows.iter().map(|r| r.1)), max_of(rows.iter().map(|r| r.2))];
    verdict(
        e[0] < 1e-8 && e[1] < 1e-8 && e[2] < 1e-10,
        format!("K vs k0 {:.2e}, D∨A − id {:.2e}, normalization doubling {:.2e}", e[0], e[1], e[2]),
    )
}

fn random_quadratic(r: &mut ChaCha8Rng, c: &[String]) -> ScalarExpr {
    let n = c.len();
    let mut s = format!("{}", r.gen_range(-0.3..0.3));
    for i in 0..n {
        s.push_str(&format!(" + ({})*{}", r.gen_range(-0.3..0.3), c[i]));
        for j in i..n {
            s.push_str(&format!(" + ({})*{}*{}", r.gen_range(-0.3..0.3), c[i], c[j]));
        }
    }
    parse_scalar(&s, c).unwrap()
}

fn c7_conformal(sp: &[Space]) -> Outcome {
    let cfg = Config::default();
    let rows: Vec<(f64, usize, usize)> = sp
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let c = s.spec.coords.clone();
            let mut r = rng(700 + i as u64);
            let scales = [parse_scalar("0.3*x", &c).unwrap(), random_quadratic(&mut r, &c)];
            let (mut worst, mut used, mut skipped) = (0.0f64, 0, 0);
            for sf in &scales {
                let other = s.spec.conformal_change(sf).unwrap();
                for p in s.points.iter().take(5) {
                    let a = obstruction_g_at(&s.spec, p, &cfg).unwrap();
                    let b = obstruction_g_at(&other, p, &cfg).unwrap();
                    match (a.g, b.g) {
                        (Some(ga), Some(gb)) => {
                            worst = worst.max(rel_vec(&ga, &gb));
                            used += 1;
                        }
                        _ => skipped += 1,
                    }
                }
            }
            (worst, used, skipped)
        })
        .collect();
    let w = max_of(rows.iter().map(|r| r.0));
    let used: usize = rows.iter().map(|r| r.1).sum();
    let skipped: usize = rows.iter().map(|r| r.2).sum();
    verdict(w < 1e-7 && used > 0, format!("max relative change of G {w:.2e} over {used} point pairs ({skipped} not weakly generic)"))
}

/// `dx² + e^{2ax}dy² + e^{2bx}dz²`, whose Ricci eigenvalues are
/// `−(a²+b²), −a(a+b), −b(a+b)`.
fn exponential_metric(a: f64, b: f64) -> (SmmsSpec, [f64; 3]) {
    let c = coords(3);
    let gy = format!("exp({}*x)", 2.0 * a);
    let gz = format!("exp({}*x)", 2.0 * b);
    let g = sp(&["1", "0", "0", "0", &gy, "0", "0", "0", &gz], &c);
    let spec = SmmsSpec::new(c.clone(), g, Density::Phi(ScalarExpr::constant(0.0, &c)), DimParam::PosInf, 0.0).unwrap();
    (spec, [-(a * a + b * b), -a * (a + b), -b * (a + b)])
}

fn c8_static() -> Outcome {
    let cfg = Config::default();
    let c: Vec<String> = ["r", "t", "p"].iter().map(|s| s.to_string()).collect();
    let g = sp(&["1", "0", "0", "0", "sin(r)^2", "0", "0", "0", "sin(r)^2*sin(t)^2"], &c);
    let s3 = SmmsSpec::new(c.clone(), g, Density::Phi(ScalarExpr::constant(0.0, &c)), DimParam::PosInf, 0.0).unwrap();
    let v = parse_scalar("cos(r)", &c).unwrap();
    let pts = vec![vec![0.7, 1.1, 0.4], vec![1.2, 0.6, -2.0], vec![0.4, 2.0, 1.0]];
    let (res, scal) = static_residual(&s3, &v, 3.0, &pts).unwrap();
    let mut sphere_ok = res < 1e-9 && scal < 1e-9;
    for p in &pts {
        let rec = static_at(&s3, p, 3.0, &cfg).unwrap();
        let mj = MetricJet::from_exprs(&s3.g, p, 2).unwrap();
        let ef = eigenframe_test(&mj, &mj.ricci(&mj.riemann().unwrap()).values(), &cfg);
        sphere_ok &= rec.decision == Decision::NotGeneric && !ef.injective;
    }
    // B3 flips: distinct eigenvalues for generic (a, b); repeated at b = 0 and b = −a, all equal at b = a
    let cases = [(0.7, -0.3, true), (1.1, 0.4, true), (0.5, 1.3, true), (0.8, 0.0, false), (0.6, 0.6, false), (0.9, -0.9, false)];
    let mut flips_ok = true;
    let mut sig_err = 0.0f64;
    for (a, b, distinct) in cases {
        let (spec, ev) = exponential_metric(a, b);
        let p = [0.3, -0.2, 0.5];
        let mj = MetricJet::from_exprs(&spec.g, &p, 2).unwrap();
        let rm = mj.riemann().unwrap();
        let ric = mj.ricci(&rm);
        let bt = b_tensor(&mj, &rm, &ric).values();
        let gen = genericity(&bt, &mj, &cfg);
        let ef = eigenframe_test(&mj, &ric.values(), &cfg);
        let mut want = vec![(ev[1] - ev[2]).abs(), (ev[0] - ev[2]).abs(), (ev[0] - ev[1]).abs()];
        want.iter_mut().for_each(|s| *s *= std::f64::consts::SQRT_2);
        want.sort_by(|x, y| y.total_cmp(x));
        let svd = insertion_matrix(&bt.in_frame(mj.frame())).singular_values();
        let mut got: Vec<f64> = svd.iter().copied().collect();
        got.sort_by(|x, y| y.total_cmp(x));
        let abs_err = |x: &[f64]| max_of(x.iter().zip(&want).map(|(p, q)| (p - q).abs())) / want[0].max(1.0);
        sig_err = sig_err.max(abs_err(&got)).max(abs_err(&ef.sigma));
        flips_ok &= gen.weakly_generic == distinct && ef.injective == distinct;
    }
    // Kasner slices: potential recovered only when the exponents are distinct
    for (p1, p2, distinct) in [(-2.0 / 7.0, 3.0 / 7.0, true), (2.0 / 3.0, 2.0 / 3.0, false)] {
        let a = format!("z^({})", 2.0 * p1);
        let b = format!("z^({})", 2.0 * p2);
        let c = coords(3);
        let spec = SmmsSpec::new(c.clone(), sp(&[&a, "0", "0", "0", &b, "0", "0", "0", "1"], &c), Density::Phi(ScalarExpr::constant(0.0, &c)), DimParam::PosInf, 0.0).unwrap();
        let rec = static_at(&spec, &[0.1, 0.2, 1.3], 0.0, &cfg).unwrap();
        flips_ok &= (rec.decision == Decision::Yes) == distinct && (rec.decision == Decision::NotGeneric) == !distinct;
    }
    verdict(
        sphere_ok && flips_ok && sig_err < 1e-10,
        format!("S³ residuals ({res:.1e}, {scal:.1e}) not-generic {sphere_ok}; B3 flips {flips_ok}, σ vs √2|λi−λj| {sig_err:.1e}"),
    )
}

fn c9_soliton() -> Outcome {
    let cfg = Config::default();
    let mut worst = 0.0f64;
    let mut not_generic = true;
    for n in [3, 4] {
        let c = coords(n);
        let spec = SmmsSpec::new(c.clone(), flat(n), Density::Phi(ScalarExpr::constant(0.0, &c)), DimParam::PosInf, 0.0).unwrap();
        for mu in [0.5, -1.0] {
            let expr = format!("{mu}*({})/2", c.iter().map(|x| format!("{x}^2")).collect::<Vec<_>>().join(" + "));
            let f = parse_scalar(&expr, &c).unwrap();
            let mut r = rng(90 + n as u64);
            let pts: Vec<Vec<f64>> = (0..10).map(|_| random_point(&mut r, n)).collect();
            worst = worst.max(soliton_residual(&spec, &f, mu, &pts).unwrap());
            not_generic &= soliton_at(&spec, &pts[0], mu, &cfg).unwrap().decision == Decision::NotGeneric;
        }
    }
    verdict(worst < 1e-12 && not_generic, format!("‖Ric + ∇²f − μg‖ {worst:.2e}, pipeline not-generic {not_generic}"))
}

fn c10_harnack(sp: &[Space]) -> Outcome {
    let rows: Vec<(f64, f64, f64, f64)> = sp
        .par_iter()
        .enumerate()
        .take(6)
        .map(|(i, s)| {
            let mut r = rng(1000 + i as u64);
            let data = random_data(s.spec.n(), &mut r);
            let t = random_symmetric_field(&s.spec.coords, 77 + i as u64);
            let rep = harnack_at(&s.spec.coords, &s.spec.g, &s.points[0], &[50.0, 100.0, 1e3, 1e4], &data, Some(&t)).unwrap();
            let id = rep.identity[0].max(rep.identity[1]);
            let ratio = rep.asymptotic[2] / rep.asymptotic[3];
            (id, rep.weitzenbock.unwrap(), ratio, max_of(rep.gauge.iter().copied()))
        })
        .collect();
    let id = max_of(rows.iter().map(|r| r.0));
    let wz = max_of(rows.iter().map(|r| r.1));
    let gauge = max_of(rows.iter().map(|r| r.3));
    let (rmin, rmax) = rows.iter().fold((f64::INFINITY, 0.0f64), |a, r| (a.0.min(r.2), a.1.max(r.2)));
    verdict(
        id < 1e-8 && wz < 1e-8 && gauge < 1e-10 && rmin >= 8.0 && rmax <= 12.0,
        format!("identity {id:.2e}, Weitzenböck {wz:.2e}, asymptotic ratio in [{rmin:.3}, {rmax:.3}], gauge {gauge:.2e}"),
    )
}

fn c11_holonomy(sp: &[Space]) -> Outcome {
    let h = 1e-4;
    let worst = max_of(
        sp.par_iter()
            .flat_map_iter(|s| {
                let n = s.spec.n();
                s.points
                    .iter()
                    .take(3)
                    .map(|p| {
                        let omega_at = |q: &[f64]| {
                            let tc = TractorCalc::at(&s.spec, q, 2, tag("g")).unwrap();
                            (0..n).map(|z| tc.connection_matrix(z)).collect::<Vec<DMatrix<f64>>>()
                        };
                        let here = omega_at(p);
                        // ∂_x Ω_z by central differences
                        let d: Vec<Vec<DMatrix<f64>>> = (0..n)
                            .map(|x| {
                                let (mut a, mut b) = (p.clone(), p.clone());
                                a[x] += h;
                                b[x] -= h;
                                let (oa, ob) = (omega_at(&a), omega_at(&b));
                                (0..n).map(|z| (&oa[z] - &ob[z]) / (2.0 * h)).collect()
                            })
                            .collect();
                        let tc = TractorCalc::at(&s.spec, p, 3, tag("g")).unwrap();
                        let mut e = 0.0f64;
                        for x in 0..n {
                            for y in x + 1..n {
                                let fd = -(&d[x][y] - &d[y][x] + &here[x] * &here[y] - &here[y] * &here[x]);
                                let exact = tc.curvature_matrix(x, y).unwrap();
                                e = e.max((&fd - &exact).abs().max() / exact.abs().max().max(1.0));
                            }
                        }
                        e
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
    );
    verdict(worst < 1e-5, format!("max deviation from finite-difference commutators {worst:.2e}"))
}

fn c12_ode_oracle() -> Outcome {
    let (m, lambda, v2) = (2.0, -1.0, 0.4);
    let order = 40;
    let w = warped_qe(m, lambda, v2, order);
    let (spec, mu, c) = (w.spec.clone(), w.mu, w.spec.coords.clone());
    let pts = vec![vec![0.2, 0.1, -0.15], vec![-0.1, 0.3, 0.2], vec![0.25, -0.2, 0.1], vec![0.05, 0.1, 0.3]];
    let qe = max_of(pts.iter().map(|p| {
        let sj = spec.at(p, 2).unwrap();
        sj.qe_residual(&sj.mj.constant(1.0), lambda, mu).unwrap().max()
    }));
    let rep = obstruction_g(&spec, &pts, &Config::default()).unwrap();
    let generic: Vec<_> = rep.records.iter().filter(|r| r.decision != Decision::NotGeneric).collect();
    let gmax = max_of(generic.iter().filter_map(|r| r.g_norm));
    // same metric with a density off the solution must be rejected
    let mut off = w.v_series.clone();
    off[1] += 0.05;
    let wrong = SmmsSpec::new(c.clone(), spec.g.clone(), Density::V(radial(&off, &c)), DimParam::Finite(m), mu).unwrap();
    let control = obstruction_g(&wrong, &pts, &Config::default()).unwrap().decision;
    let ok = !generic.is_empty()
        && generic.iter().all(|r| r.decision == Decision::Yes)
        && gmax < 1e-6
        && qe < 1e-8
        && control == Decision::No;
    verdict(
        ok,
        format!(
            "oracle QE residual {qe:.2e}; {} of {} points weakly generic, max ‖G‖ {gmax:.2e}; perturbed density gives {control:?}",
            generic.len(),
            pts.len()
        ),
    )
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let secs = t.elapsed().as_secs_f64();
    match &out {
        Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
        Err(d) => println!("FAIL  {name}: {d} [{secs:.1}s]"),
    }
    out.is_ok()
}

fn main() {
    let sp = corpus(50);
    let results = [
        run("1 identity suite", || c1_identities(&sp)),
        run("2 Bach and Weyl tractor symmetries", || c2_symmetries(&sp)),
        run("3 two-scale invariance", || c3_two_scale(&sp)),
        run("4 flat affine quasi-Einstein certificate", c4_flat_affine),
        run("5 unit density negative control", || c5_negative_control(&sp)),
        run("6 K round trip", || c6_round_trip(&sp)),
        run("7 conformal invariance of G", || c7_conformal(&sp)),
        run("8 static classics", c8_static),
        run("9 soliton residual", c9_soliton),
        run("10 Harnack", || c10_harnack(&sp)),
        run("11 curvature holonomy cross-check", || c11_holonomy(&sp)),
        run("12 ODE oracle", c12_ode_oracle),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
