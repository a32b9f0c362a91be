#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smms_core::expr::{parse_scalar, ScalarExpr};
use smms_core::smms::{DimParam, Density, SmmsSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn coords(n: usize) -> Vec<String> {
    ["x", "y", "z", "w", "u", "t"][..n].iter().map(|s| s.to_string()).collect()
}

pub fn exprs(src: &[&str], c: &[String]) -> Vec<ScalarExpr> {
    src.iter().map(|s| parse_scalar(s, c).unwrap()).collect()
}

fn random_term(r: &mut ChaCha8Rng, c: &[String], amp: f64) -> String {
    let n = c.len();
    let a = r.gen_range(-amp..amp);
    let i = r.gen_range(0..n);
    let j = r.gen_range(0..n);
    let k = r.gen_range(0.5..1.5);
    let ph = r.gen_range(-1.0..1.0);
    match r.gen_range(0..3) {
        0 => format!("{a}*sin({k}*{} + {ph})", c[i]),
        1 => format!("{a}*{}*{}", c[i], c[j]),
        _ => format!("{a}*cos({k}*{} - {ph}*{})", c[i], c[j]),
    }
}

/// Random analytic metric close to the identity, row-major expression sources.
pub fn random_metric_src(r: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let c = coords(n);
    let mut g = vec![String::new(); n * n];
    for i in 0..n {
        for j in i..n {
            let base = if i == j { "1" } else { "0" };
            let t1 = random_term(r, &c, 0.25 / n as f64);
            let t2 = random_term(r, &c, 0.25 / n as f64);
            let s = format!("{base} + {t1} + {t2}");
            g[i * n + j] = s.clone();
            g[j * n + i] = s;
        }
    }
    g
}

pub fn random_v_src(r: &mut ChaCha8Rng, n: usize) -> String {
    let c = coords(n);
    let t1 = random_term(r, &c, 0.4);
    let t2 = random_term(r, &c, 0.4);
    format!("exp({t1} + {t2})")
}

pub fn random_smms(r: &mut ChaCha8Rng, n: usize, m: f64, mu: f64) -> SmmsSpec {
    let c = coords(n);
    let g: Vec<ScalarExpr> = random_metric_src(r, n).iter().map(|s| parse_scalar(s, &c).unwrap()).collect();
    let v = parse_scalar(&random_v_src(r, n), &c).unwrap();
    SmmsSpec::new(c, g, Density::V(v), DimParam::Finite(m), mu).unwrap()
}

pub fn random_point(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-0.4..0.4)).collect()
}

/// Random smooth function of the coordinates, as an expression.
pub fn random_function(r: &mut ChaCha8Rng, n: usize, amp: f64) -> ScalarExpr {
    let c = coords(n);
    let a = r.gen_range(-1.0..1.0);
    let s = format!("{a} + {} + {} + {}", random_term(r, &c, amp), random_term(r, &c, amp), random_term(r, &c, amp));
    parse_scalar(&s, &c).unwrap()
}

/// Taylor coefficients of `(h, v)` for `dr² + h² g_{S^{n−1}}` with radial
/// `v`, solving `Ric − m v⁻¹∇²v = λg` order by order from `h = r + …`,
/// `v = 1 + v₂r² + …`.
pub fn warped_qe_series(n: f64, m: f64, lambda: f64, v2: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let len = order + 4;
    let mul = |a: &[f64], b: &[f64]| {
        let mut c = vec![0.0; len];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j < len {
                    c[i + j] += x * y;
                }
            }
        }
        c
    };
    let der = |a: &[f64]| {
        let mut c = vec![0.0; len];
        for i in 1..len {
            c[i - 1] = i as f64 * a[i];
        }
        c
    };
    // radial and tangential components of Ric − m v⁻¹∇²v − λg, cleared of denominators
    let eqs = |h: &[f64], v: &[f64]| {
        let (h1, h2, v1, v2) = (der(h), der(&der(h)), der(v), der(&der(v)));
        let hv = mul(h, v);
        let e1: Vec<f64> = (0..len).map(|i| -(n - 1.0) * mul(&h2, v)[i] - m * mul(&v2, h)[i] - lambda * hv[i]).collect();
        let mut one_minus = mul(&h1, &h1).iter().map(|x| -x).collect::<Vec<f64>>();
        one_minus[0] += 1.0;
        let t1 = mul(&mul(h, &h2), v);
        let t2 = mul(&one_minus, v);
        let t3 = mul(&mul(&v1, &h1), h);
        let t4 = mul(&mul(h, h), v);
        let e2: Vec<f64> = (0..len).map(|i| -t1[i] + (n - 2.0) * t2[i] - m * t3[i] - lambda * t4[i]).collect();
        (e1, e2)
    };
    let mut h = vec![0.0; len];
    let mut v = vec![0.0; len];
    h[1] = 1.0;
    v[0] = 1.0;
    v[2] = v2;
    h[3] = -(lambda + 2.0 * m * v2) / (6.0 * (n - 1.0));
    let mut k = 3;
    while k + 2 <= order {
        let (e1, e2) = eqs(&h, &v);
        let base = [e1[k], e2[k + 1]];
        let mut cols = [[0.0; 2]; 2];
        for (c, (hi, vi)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
            let (mut hh, mut vv) = (h.clone(), v.clone());
            hh[k + 2] += hi;
            vv[k + 1] += vi;
            let (f1, f2) = eqs(&hh, &vv);
            cols[c] = [f1[k] - base[0], f2[k + 1] - base[1]];
        }
        let a = DMatrix::from_fn(2, 2, |r, c| cols[c][r]);
        let x = a.lu().solve(&DVector::from_vec(vec![-base[0], -base[1]])).unwrap();
        h[k + 2] = x[0];
        v[k + 1] = x[1];
        k += 2;
    }
    h.truncate(order + 1);
    v.truncate(order + 1);
    (h, v)
}

pub fn horner(c: &[f64], q: &str) -> String {
    let mut s = format!("({:e})", c[c.len() - 1]);
    for x in c[..c.len() - 1].iter().rev() {
        s = format!("({:e}) + {q}*({s})", x);
    }
    s
}

/// A rotationally symmetric quasi-Einstein space in Cartesian coordinates on
/// a ball in ℝ³, built from the truncated series solution.
pub struct WarpedQe {
    pub spec: SmmsSpec,
    pub lambda: f64,
    pub mu: f64,
    /// coefficients of `v` in powers of `|x|²`
    pub v_series: Vec<f64>,
}

const RADIUS2: &str = "(x^2 + y^2 + z^2)";

/// A polynomial in `|x|²` as an expression.
pub fn radial(c: &[f64], coords: &[String]) -> ScalarExpr {
    parse_scalar(&horner(c, RADIUS2), coords).unwrap()
}

pub fn warped_qe(m: f64, lambda: f64, v2: f64, order: usize) -> WarpedQe {
    let n = 3;
    let (h, v) = warped_qe_series(n as f64, m, lambda, v2, order);
    // g = a δ + b x⊗x with a = (h/r)², b = (1 − a)/r², both polynomials in r²
    let big_h: Vec<f64> = (0..order / 2).map(|j| h[2 * j + 1]).collect();
    let mut a = vec![0.0; big_h.len()];
    for i in 0..big_h.len() {
        for j in 0..big_h.len() - i {
            a[i + j] += big_h[i] * big_h[j];
        }
    }
    let b: Vec<f64> = (1..a.len()).map(|j| -a[j]).collect();
    let vq: Vec<f64> = (0..=order / 2).map(|j| v[2 * j]).collect();
    let c = coords(n);
    let (sa, sb) = (horner(&a, RADIUS2), horner(&b, RADIUS2));
    let mut g = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { format!("{sa} + ") } else { String::new() };
            g.push(parse_scalar(&format!("{diag}({sb})*{}*{}", c[i], c[j]), &c).unwrap());
        }
    }
    let mu = lambda + 2.0 * n as f64 * v2;
    let spec = SmmsSpec::new(c.clone(), g, Density::V(radial(&vq, &c)), DimParam::Finite(m), mu).unwrap();
    WarpedQe { spec, lambda, mu, v_series: vq }
}
