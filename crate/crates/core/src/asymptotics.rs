//! Steepest-descent predictors and finite-N convergence checks.
//!
//! For a spectrum `y_1 <= ... <= y_N`, level `k` and position `x`, the
//! critical function is
//! `F(z) = G'(z) = (1/N) sum_i 1 / (z + x - y_i) - c / z`, `c = (N - k + 1) / N`.

use crate::airy::{self, zero};
use crate::covariance::{cov_dbm, cov_zeta_spectral, TailPolicy};
use crate::dualpoly::q_table_hermite;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::polygrid::{appell_levels, hermite_roots, jacobi_roots, moments, SpectrumN};
use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Liquid,
    Void,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub x: f64,
    pub k: usize,
    pub n: usize,
    /// `(re, im)` of every root, real roots first in ascending order.
    pub roots: Vec<(f64, f64)>,
    pub real_roots: usize,
    pub classification: Classification,
    /// Root in the upper half plane, if any.
    pub z_c: Option<(f64, f64)>,
    /// Number of distinct poles including `z = 0`.
    pub poles: usize,
}

struct Critical {
    /// `(location, residue)`, ascending.
    poles: Vec<(f64, f64)>,
}

impl Critical {
    fn new(spectrum: &SpectrumN, x: f64, k: usize) -> Self {
        let n = spectrum.len() as f64;
        let c = (n - k as f64 + 1.0) / n;
        let mut poles: Vec<(f64, f64)> =
            spectrum.distinct().into_iter().map(|(y, m)| (y - x, m as f64 / n)).collect();
        poles.push((0.0, -c));
        poles.sort_by(|a, b| a.0.total_cmp(&b.0));
        Critical { poles }
    }

    fn f(&self, z: f64) -> f64 {
        self.poles.iter().map(|(p, r)| r / (z - p)).sum()
    }

    fn df(&self, z: f64) -> f64 {
        -self.poles.iter().map(|(p, r)| r / (z - p).powi(2)).sum::<f64>()
    }

    fn fc(&self, z: C64) -> (C64, C64) {
        let mut f = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for (p, r) in &self.poles {
            let inv = (z - p).inv();
            f += inv * *r;
            d -= inv * inv * *r;
        }
        (f, d)
    }

    /// Root of `F` in `(a, b)` where `F(a+) = +inf` and `F(b-) = -inf`.
    fn bracketed_root(&self, a: f64, b: f64) -> f64 {
        let w = b - a;
        let (mut lo, mut hi) = (a + 1e-300_f64.max(w * 1e-15), b - 1e-300_f64.max(w * 1e-15));
        let mut z = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fz = self.f(z);
            if fz > 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let step = fz / self.df(z);
            let mut next = z - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - z).abs() <= 2.0 * f64::EPSILON * z.abs().max(w) || hi - lo <= 4.0 * f64::EPSILON * z.abs() {
                return next;
            }
            z = next;
        }
        z
    }

    fn polish(&self, mut z: C64) -> C64 {
        for _ in 0..100 {
            let (f, d) = self.fc(z);
            let step = f / d;
            z -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z.norm() {
                break;
            }
        }
        z
    }

    /// `F(z) z prod_j (z - p_j) / prod_r (z - r)`, products taken pairwise.
    fn deflated(&self, z: f64, found: &[f64]) -> f64 {
        let mut v = self.f(z);
        let mut r = found.iter();
        for (p, _) in &self.poles {
            v *= z - p;
            if let Some(q) = r.next() {
                v /= z - q;
            }
        }
        v
    }
}

/// All roots of the critical equation at `(x, k)`.
pub fn critical_points(spectrum: &SpectrumN, x: f64, k: usize) -> Result<CriticalPointReport> {
    let n = spectrum.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("level must be in 1..={n}, got {k}")));
    }
    let spread = (spectrum.max() - spectrum.min()).max(1.0);
    let mut x = x;
    if spectrum.values().iter().any(|y| (y - x).abs() < 1e-12 * spread) {
        x += 1e-9 * spread;
    }
    let cr = Critical::new(spectrum, x, k);
    let degree = if k >= 2 { cr.poles.len() - 1 } else { cr.poles.len() - 2 };
    let mut real = Vec::new();
    for w in cr.poles.windows(2) {
        if w[0].1 > 0.0 && w[1].1 > 0.0 {
            real.push(cr.bracketed_root(w[0].0, w[1].0));
        }
    }
    let rest = degree - real.len();
    let lead = (k as f64 - 1.0) / n as f64;
    let mut roots: Vec<C64> = real.iter().map(|&r| C64::new(r, 0.0)).collect();
    // Sample points for the deflated low-degree polynomial.
    let lo = cr.poles[0].0;
    let hi = cr.poles[cr.poles.len() - 1].0;
    let s1 = hi + 0.731 * (hi - lo) + 0.37 * spread;
    let s2 = lo - 0.613 * (hi - lo) - 0.29 * spread;
    match rest {
        0 => {}
        1 => {
            // The deflated function is linear here.
            let (g1, g2) = (cr.deflated(s1, &real), cr.deflated(s2, &real));
            let a = (g1 - g2) / (s1 - s2);
            let r = s1 - g1 / a;
            roots.push(C64::new(cr.polish(C64::new(r, 0.0)).re, 0.0));
        }
        2 => {
            let (g1, g2) = (cr.deflated(s1, &real) - lead * s1 * s1, cr.deflated(s2, &real) - lead * s2 * s2);
            let b = (g1 - g2) / (s1 - s2);
            let c0 = g1 - b * s1;
            let disc = b * b - 4.0 * lead * c0;
            if disc < 0.0 {
                let guess = C64::new(-b / (2.0 * lead), (-disc).sqrt() / (2.0 * lead));
                let z = cr.polish(guess);
                let z = if z.im < 0.0 { z.conj() } else { z };
                if z.im.abs() <= 1e-14 * z.norm() {
                    return Err(Error::numerical("critical points", "complex pair collapsed onto the axis"));
                }
                roots.push(z);
                roots.push(z.conj());
            } else {
                for sgn in [-1.0, 1.0] {
                    let r = (-b + sgn * disc.sqrt()) / (2.0 * lead);
                    roots.push(C64::new(cr.polish(C64::new(r, 0.0)).re, 0.0));
                }
            }
        }
        _ => {
            return Err(Error::NumericalFailure {
                context: "critical points",
                detail: format!("{} bracketed roots leave {rest} unaccounted of degree {degree}", real.len()),
                estimate: None,
            })
        }
    }
    let complex: Vec<C64> = roots.iter().copied().filter(|z| z.im != 0.0).collect();
    let mut reals: Vec<f64> = roots.iter().filter(|z| z.im == 0.0).map(|z| z.re).collect();
    reals.sort_by(f64::total_cmp);
    let z_c = complex.iter().find(|z| z.im > 0.0).map(|z| (z.re, z.im));
    let mut out: Vec<(f64, f64)> = reals.iter().map(|&r| (r, 0.0)).collect();
    out.extend(complex.iter().map(|z| (z.re, z.im)));
    if out.len() != degree {
        return Err(Error::numerical("critical points", format!("found {} of {degree} roots", out.len())));
    }
    Ok(CriticalPointReport {
        x,
        k,
        n,
        real_roots: reals.len(),
        roots: out,
        classification: if z_c.is_some() { Classification::Liquid } else { Classification::Void },
        z_c,
        poles: cr.poles.len(),
    })
}

/// Predicted lattice parameters `(u, v)`: the level-`k` spacing near `x` is
/// `u / N` and the shift between levels `k + 1` and `k` is `v / N`.
pub fn bulk_prediction(report: &CriticalPointReport) -> Result<(f64, f64)> {
    let (re, im) = report
        .z_c
        .ok_or_else(|| Error::invalid(format!("x = {} is in the void region", report.x)))?;
    let z = C64::new(re, im);
    let c = (report.n as f64 - report.k as f64 + 1.0) / report.n as f64;
    let u = std::f64::consts::PI / (c * z.inv().im.abs());
    let v = u * z.arg() / std::f64::consts::PI;
    Ok((u, v))
}

/// Roots at level `k` of the Appell grid of `spectrum`.
///
/// For two equal atoms the level is a rescaled Jacobi polynomial
/// `P_k^{(M-k, M-k)}`, which avoids the `N - k` derivative steps.
pub fn level_roots(spectrum: &SpectrumN, k: usize) -> Result<Vec<f64>> {
    let d = spectrum.distinct();
    if d.len() == 2 && d[0].1 == d[1].1 && k < d[0].1 {
        let m = d[0].1;
        let (mid, half) = (0.5 * (d[0].0 + d[1].0), 0.5 * (d[1].0 - d[0].0));
        let a = (m - k) as f64;
        return Ok(jacobi_roots(k, a, a)?.into_iter().map(|r| mid + half * r).collect());
    }
    Ok(appell_levels(spectrum, k)?.level(k).to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkCheck {
    pub x: f64,
    pub k: usize,
    pub u_pred: f64,
    pub v_pred: f64,
    pub u_emp: f64,
    pub v_emp: f64,
}

impl BulkCheck {
    pub fn u_rel(&self) -> f64 {
        (self.u_emp / self.u_pred - 1.0).abs()
    }

    pub fn v_rel(&self) -> f64 {
        (self.v_emp / self.v_pred - 1.0).abs()
    }
}

/// Predicted against empirical spacings at the level-`k` root nearest `x`.
pub fn bulk_check(spectrum: &SpectrumN, x: f64, k: usize) -> Result<BulkCheck> {
    let n = spectrum.len() as f64;
    let (u_pred, v_pred) = bulk_prediction(&critical_points(spectrum, x, k)?)?;
    let lk = level_roots(spectrum, k)?;
    let lk1 = level_roots(spectrum, k + 1)?;
    let i = (0..k - 1)
        .min_by(|&a, &b| (0.5 * (lk[a] + lk[a + 1]) - x).abs().total_cmp(&(0.5 * (lk[b] + lk[b + 1]) - x).abs()))
        .ok_or_else(|| Error::invalid("bulk check needs k >= 2"))?;
    Ok(BulkCheck {
        x,
        k,
        u_pred,
        v_pred,
        u_emp: n * (lk[i + 1] - lk[i]),
        v_emp: n * (lk[i] - lk1[i]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub k: usize,
    pub n: usize,
    pub x_edge: f64,
    pub z_c: f64,
    pub sigma: f64,
    pub g3: f64,
    /// `|G'(z_c)|` and `|G''(z_c)|`.
    pub residuals: (f64, f64),
}

/// Sums `(S1, S2, S3)` with `S_p = (1/N) sum_i 1 / (z + x - y_i)^p`.
fn edge_sums(d: &[(f64, f64)], x: f64, z: f64) -> (f64, f64, f64) {
    let mut s = (0.0, 0.0, 0.0);
    for (y, w) in d {
        let inv = 1.0 / (z + x - y);
        s.0 += w * inv;
        s.1 += w * inv * inv;
        s.2 += w * inv * inv * inv;
    }
    s
}

/// Right edge of the level-`k` roots and the Airy scale there.
pub fn edge_prediction(spectrum: &SpectrumN, k: usize) -> Result<EdgeReport> {
    let n = spectrum.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("edge needs 2 <= k <= {n}, got {k}")));
    }
    let nf = n as f64;
    let c = (nf - k as f64 + 1.0) / nf;
    let d: Vec<(f64, f64)> = spectrum.distinct().into_iter().map(|(y, m)| (y, m as f64 / nf)).collect();
    let top = spectrum.max();
    let spread = top - spectrum.min();
    if spread <= 0.0 {
        return Err(Error::invalid("edge needs at least two distinct spectral values"));
    }
    let f = |x: f64, z: f64| edge_sums(&d, x, z).0 - c / z;
    // Minimum of F over z > y_N - x, on a log scale in z - (y_N - x).
    let min_f = |x: f64| -> (f64, f64) {
        let p = top - x;
        let g = |u: f64| f(x, p + u.exp());
        let (ulo, uhi) = ((1e-12 * spread).ln(), (1e4 * spread).ln());
        let count = 800;
        let h = (uhi - ulo) / count as f64;
        let vals: Vec<f64> = (0..=count).map(|s| g(ulo + h * s as f64)).collect();
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut best = (f64::INFINITY, ulo);
        // The well near the merge is narrow, so every local grid minimum is refined.
        for s in 0..=count {
            let left = if s == 0 { f64::INFINITY } else { vals[s - 1] };
            let right = if s == count { f64::INFINITY } else { vals[s + 1] };
            if !(vals[s] <= left && vals[s] <= right) {
                continue;
            }
            let u0 = ulo + h * s as f64;
            let (mut a, mut b) = (u0 - h, u0 + h);
            for _ in 0..100 {
                let (u1, u2) = (b - r * (b - a), a + r * (b - a));
                if g(u1) < g(u2) {
                    b = u2;
                } else {
                    a = u1;
                }
            }
            let u = 0.5 * (a + b);
            let v = g(u);
            if v < best.0 {
                best = (v, u);
            }
        }
        (best.0, p + best.1.exp())
    };
    let mut hi = top - 1e-9 * spread;
    if min_f(hi).0 >= 0.0 {
        return Err(Error::numerical("edge prediction", "no double root just left of the top atom"));
    }
    let mut delta = 1e-6 * spread;
    let mut lo = top - delta;
    while min_f(lo).0 < 0.0 {
        hi = lo;
        delta *= 2.0;
        lo = top - delta;
        if delta > 10.0 * spread {
            return Err(Error::numerical("edge prediction", "no merge found in bracket"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if min_f(mid).0 < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let mut z = min_f(x).1;
    // Newton on (F, F_z) = 0 in (e, z) with e = z + x - y_N, which keeps the
    // distance to the top pole free of cancellation.
    let gaps: Vec<(f64, f64)> = d.iter().map(|&(y, w)| (y - top, w)).collect();
    let sums = |e: f64| edge_sums(&gaps, 0.0, e);
    let mut e = z + x - top;
    for _ in 0..60 {
        let (s1, s2, s3) = sums(e);
        let fv = s1 - c / z;
        let fz = -s2 + c / (z * z);
        let (a11, a12, a21, a22) = (-s2, c / (z * z), 2.0 * s3, -2.0 * c / (z * z * z));
        let det = a11 * a22 - a12 * a21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let de = (fv * a22 - a12 * fz) / det;
        let dz = (a11 * fz - a21 * fv) / det;
        // The system also has a spurious solution at infinity; cap each step.
        let mut lam = 1.0;
        while lam > 1e-6 && !((lam * de).abs() <= 0.5 * e && (lam * dz).abs() <= 0.5 * z) {
            lam *= 0.5;
        }
        if lam <= 1e-6 {
            break;
        }
        e -= lam * de;
        z -= lam * dz;
        if lam == 1.0 && de.abs() < 1e-15 * e && dz.abs() < 1e-15 * z {
            break;
        }
    }
    let x = e + top - z;
    let (s1, s2, s3) = sums(e);
    let g3 = 2.0 * s3 - 2.0 * c / (z * z * z);
    if !(g3 > 0.0 && x.is_finite()) {
        return Err(Error::numerical("edge prediction", format!("double root at z = {z} has G''' = {g3}")));
    }
    let sigma = z * z * (0.5 * g3).cbrt() * nf / (nf - k as f64 + 1.0);
    Ok(EdgeReport {
        k,
        n,
        x_edge: x,
        z_c: z,
        sigma,
        g3,
        residuals: ((s1 - c / z).abs(), (-s2 + c / (z * z)).abs()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    pub report: EdgeReport,
    /// `(i, N^{2/3} (x_{k+1-i} - x_edge) / sigma, alpha_i)`.
    pub rows: Vec<(usize, f64, f64)>,
}

impl EdgeCheck {
    pub fn max_rel(&self) -> f64 {
        self.rows.iter().map(|(_, a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Compares the top `count` level-`k` roots with the Airy zeros.
pub fn edge_check(spectrum: &SpectrumN, k: usize, count: usize) -> Result<EdgeCheck> {
    let report = edge_prediction(spectrum, k)?;
    let roots = level_roots(spectrum, k)?;
    let scale = (spectrum.len() as f64).powf(2.0 / 3.0) / report.sigma;
    let rows = (1..=count.min(k))
        .map(|i| Ok((i, scale * (roots[k - i] - report.x_edge), airy::alpha(i)?)))
        .collect::<Result<_>>()?;
    Ok(EdgeCheck { report, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteLimit {
    pub n: usize,
    pub k: usize,
    pub rescaled: Vec<f64>,
    pub hermite: Vec<f64>,
    pub max_deviation: f64,
    /// `(kappa_N / sigma_N) N^{-1/6}`, with `kappa_N^3` the third absolute moment.
    pub kappa_ratio: f64,
}

/// Deviation of `(sqrt(N) / sigma_N) (x^k_i - mu_N)` from the Hermite roots of degree `k`.
pub fn hermite_limit_check(spectrum: &SpectrumN, k: usize) -> Result<HermiteLimit> {
    let n = spectrum.len();
    let mo = moments(spectrum);
    let sd = mo.variance.sqrt();
    if sd == 0.0 {
        return Err(Error::invalid("spectrum has zero variance"));
    }
    let scale = (n as f64).sqrt() / sd;
    let rescaled: Vec<f64> = level_roots(spectrum, k)?.iter().map(|x| scale * (x - mo.mean)).collect();
    let hermite = hermite_roots(k)?;
    let max_deviation = rescaled.iter().zip(&hermite).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(HermiteLimit {
        n,
        k,
        rescaled,
        hermite,
        max_deviation,
        kappa_ratio: mo.abs_third.cbrt() / sd * (n as f64).powf(-1.0 / 6.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAiryRow {
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// `k^{-1/3} q_m(x_{k+1-i})` against the shifted `Ai(alpha_i + (m + 1) / k^{1/3}) / Ai'(alpha_i)`.
pub fn q_to_airy_check(k: usize, i: usize, ms: &[usize]) -> Result<Vec<QAiryRow>> {
    if i == 0 || i > k {
        return Err(Error::invalid(format!("particle {i} outside 1..={k}")));
    }
    let t = q_table_hermite(k)?;
    let (a, ap) = zero(i)?;
    let kc = (k as f64).cbrt();
    ms.iter()
        .map(|&m| {
            if m >= k {
                return Err(Error::invalid(format!("mode {m} outside 0..{k}")));
            }
            Ok(QAiryRow {
                m,
                lhs: t.q(m, k + 1 - i) / kc,
                rhs: airy::ai_value(a + (m as f64 + 1.0) / kc) / ap,
            })
        })
        .collect()
}

/// `sup_{m <= 3 k^{1/3}} |lhs - rhs|`.
pub fn q_to_airy_sup(k: usize, i: usize) -> Result<f64> {
    let top = (3.0 * (k as f64).cbrt()).floor() as usize;
    let ms: Vec<usize> = (0..=top.min(k - 1)).collect();
    Ok(q_to_airy_check(k, i, &ms)?.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max))
}

/// `max_m |k^{-1/3} q_m(x_{k+1-i})| (1 + m / k^{1/3})` over all modes.
pub fn q_uniform_bound(k: usize, i: usize) -> Result<f64> {
    let ms: Vec<usize> = (0..k).collect();
    let kc = (k as f64).cbrt();
    Ok(q_to_airy_check(k, i, &ms)?
        .iter()
        .map(|r| r.lhs.abs() * (1.0 + r.m as f64 / kc))
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub s: f64,
    pub finite: f64,
    pub limit: f64,
    pub rel_error: f64,
}

fn check_window(n: usize, t: f64, s: f64) -> Result<()> {
    if !(t.abs() <= 2.0 && s.abs() <= 2.0) {
        return Err(Error::invalid("times must satisfy |t|, |s| <= 2"));
    }
    if n < 2 || n > 2000 {
        return Err(Error::invalid(format!("N must be in 2..=2000, got {n}")));
    }
    Ok(())
}

/// Corners level `kappa(t) = N + floor(2 t N^{2/3})`.
pub fn kappa(n: usize, t: f64) -> usize {
    let k = n as f64 + (2.0 * t * (n as f64).powf(2.0 / 3.0)).floor();
    k.max(1.0) as usize
}

/// DBM time `tau(t) = 1 + 2 t N^{-1/3}`.
pub fn tau(n: usize, t: f64) -> f64 {
    1.0 + 2.0 * t * (n as f64).powf(-1.0 / 3.0)
}

fn limit_row(n: usize, i: usize, j: usize, t: f64, s: f64, finite: f64) -> Result<LimitCheck> {
    let limit = airy::limit_cov(i, j, t, s)?;
    Ok(LimitCheck { n, i, j, t, s, finite, limit, rel_error: (finite / limit - 1.0).abs() })
}

/// `N^{1/3} Cov(zeta^{kappa(t)}_{top+1-i}, zeta^{kappa(s)}_{top+1-j})` against the Airy limit.
pub fn gcorners_limit_check(n: usize, i: usize, j: usize, t: f64, s: f64) -> Result<LimitCheck> {
    check_window(n, t, s)?;
    let (kt, ks) = (kappa(n, t), kappa(n, s));
    if i > kt || j > ks {
        return Err(Error::invalid("particle index above level size"));
    }
    let v = cov_zeta_spectral((kt, kt + 1 - i), (ks, ks + 1 - j), TailPolicy::default())?.value;
    limit_row(n, i, j, t, s, (n as f64).cbrt() * v)
}

/// `N^{1/3} Cov(zeta_{N+1-i}(tau(t)), zeta_{N+1-j}(tau(s)))` against the Airy limit.
pub fn dbm_limit_check(n: usize, i: usize, j: usize, t: f64, s: f64) -> Result<LimitCheck> {
    check_window(n, t, s)?;
    if i > n || j > n {
        return Err(Error::invalid("particle index above N"));
    }
    let v = cov_dbm(n, n + 1 - i, n + 1 - j, tau(n, t), tau(n, s))?;
    limit_row(n, i, j, t, s, (n as f64).cbrt() * v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Gcorners,
    Dbm,
}

/// The check at each `N`, run in parallel.
pub fn limit_ladder(kind: LimitKind, ns: &[usize], i: usize, j: usize, t: f64, s: f64) -> Result<Vec<LimitCheck>> {
    ns.par_iter()
        .map(|&n| match kind {
            LimitKind::Gcorners => gcorners_limit_check(n, i, j, t, s),
            LimitKind::Dbm => dbm_limit_check(n, i, j, t, s),
        })
        .collect()
}

pub fn ladder_csv(rows: &[LimitCheck]) -> CsvTable {
    let mut t = CsvTable::new(&["n", "i", "j", "t", "s", "finite", "limit", "rel_error"]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            r.i.to_string(),
            r.j.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.s),
            fmt_f64(r.finite),
            fmt_f64(r.limit),
            fmt_f64(r.rel_error),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_right_is_void() {
        let s = SpectrumN::hermite(12).unwrap();
        let r = critical_points(&s, 50.0, 6).unwrap();
        assert_eq!(r.classification, Classification::Void);
        assert_eq!(r.roots.len(), r.poles - 1);
    }

    #[test]
    fn centre_of_semicircle_is_liquid() {
        let s = SpectrumN::hermite(200).unwrap();
        let r = critical_points(&s, 0.0, 100).unwrap();
        assert_eq!(r.classification, Classification::Liquid);
        assert_eq!(r.roots.len(), 200);
        assert_eq!(r.real_roots, 198);
        let (re, im) = r.z_c.unwrap();
        assert_eq!(r.roots[198], (re, im));
        assert_eq!(r.roots[199], (re, -im));
        let (u, v) = bulk_prediction(&r).unwrap();
        assert!(0.0 < v && v < u);
    }

    #[test]
    fn jacobi_shortcut_matches_derivatives() {
        let s = SpectrumN::two_atom(40).unwrap();
        for k in [3, 11, 19] {
            let a = level_roots(&s, k).unwrap();
            let b = appell_levels(&s, k).unwrap().level(k).to_vec();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn edge_is_a_double_root_and_shift_invariant() {
        let s = SpectrumN::two_atom(60).unwrap();
        let e = edge_prediction(&s, 15).unwrap();
        assert!(e.residuals.0 < 1e-9 && e.residuals.1 < 1e-9, "{e:?}");
        assert!(e.g3 > 0.0 && e.z_c > 1.0 - e.x_edge);
        let t = edge_prediction(&s.affine(1.0, 2.5).unwrap(), 15).unwrap();
        assert!((t.x_edge - e.x_edge - 2.5).abs() < 1e-10);
        assert!((t.sigma - e.sigma).abs() < 1e-9 * e.sigma);
    }

    #[test]
    fn two_atom_level_three_tends_to_hermite() {
        let a = hermite_limit_check(&SpectrumN::two_atom(100).unwrap(), 3).unwrap();
        let b = hermite_limit_check(&SpectrumN::two_atom(10_000).unwrap(), 3).unwrap();
        assert!(b.max_deviation < a.max_deviation);
        let c = hermite_limit_check(&SpectrumN::two_atom(10).unwrap(), 1).unwrap();
        assert!(c.rescaled[0].abs() < 1e-14);
    }

    #[test]
    fn boundary_mode() {
        let k = 64;
        let r = q_to_airy_check(k, 1, &[0]).unwrap();
        let expect = ((k as f64 + 1.0) / k as f64).sqrt() / (k as f64).cbrt();
        assert!((r[0].lhs - expect).abs() < 1e-13);
    }

    #[test]
    fn limit_checks_agree_at_equal_times() {
        let a = gcorners_limit_check(60, 1, 2, 0.0, 0.0).unwrap();
        let b = dbm_limit_check(60, 1, 2, 0.0, 0.0).unwrap();
        assert!((a.finite - b.finite).abs() < 1e-9);
        let c = dbm_limit_check(60, 1, 1, 0.5, -0.3).unwrap();
        let d = dbm_limit_check(60, 1, 1, -0.3, 0.5).unwrap();
        assert_eq!(c.finite, d.finite);
    }
}
