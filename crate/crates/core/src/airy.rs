//! Airy function layer and the Airy line ensemble.
//!
//! `ai` combines a Maclaurin series near the origin, Taylor steps from a
//! table of anchors on `[-20, 9]`, and the standard asymptotic expansions
//! outside that window. Everything downstream works with the normalized
//! modes `A_i(y) = Ai(alpha_i + y) / Ai'(alpha_i)`, which are orthonormal
//! on `(0, inf)`.

use crate::covariance::{CovMatrix, Provenance};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::linalg::kahan_sum;
use crate::quad::{integrate, QuadResult};
use crate::sampler::RngStream;
use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// `Ai(0) = 3^{-2/3} / Gamma(2/3)`.
pub const AI0: f64 = 0.355_028_053_887_817_239_260_063_186_004_183_2;
/// `Ai'(0) = -3^{-1/3} / Gamma(1/3)`.
pub const AIP0: f64 = -0.258_819_403_792_806_798_405_183_560_189_203_9;

/// Beyond this point `Ai` underflows and is returned as zero.
pub const UNDERFLOW_X: f64 = 108.0;

const ANCHOR_LO: f64 = -20.0;
const ANCHOR_HI: f64 = 9.0;
const ANCHOR_STEP: f64 = 0.25;
const MACLAURIN_RADIUS: f64 = 1.0;

/// Below this offset the modes are evaluated by their Taylor series about the zero.
const MODE_SERIES_RADIUS: f64 = 0.25;
const MODE_SERIES_TERMS: usize = 48;

/// Zeros cached on first use.
const ZERO_CACHE: usize = 200;

/// Length beyond `max(0, -alpha)` after which the modes are below `1e-15`.
const DECAY_MARGIN: f64 = 14.0;
const PANEL_WIDTH: f64 = 0.5;
const QUAD_ABS_TOL: f64 = 1e-13;
const QUAD_REL_TOL: f64 = 1e-12;

/// Sums the Taylor series of the Airy equation about `x0` at offset `h`.
fn taylor_step(x0: f64, y0: f64, yp0: f64, h: f64) -> (f64, f64) {
    if h == 0.0 {
        return (y0, yp0);
    }
    // t_n = a_n h^n with a_{n+2} = (x0 a_n + a_{n-1}) / ((n + 2)(n + 1)).
    let (h2, h3) = (h * h, h * h * h);
    let mut t = [0.0f64, y0, yp0 * h]; // t_{n-1}, t_n, t_{n+1} at n = 0
    let mut val = y0 + t[2];
    let mut der = t[2];
    let scale = y0.abs() + (yp0 * h).abs() + f64::MIN_POSITIVE;
    let mut n = 0usize;
    loop {
        let next = (x0 * t[1] * h2 + t[0] * h3) / (((n + 2) * (n + 1)) as f64);
        val += next;
        der += (n + 2) as f64 * next;
        t = [t[1], t[2], next];
        n += 1;
        let tiny = 1e-18 * (val.abs() + (der).abs() + scale);
        if n > 4 && t[0].abs() + t[1].abs() + t[2].abs() < tiny {
            break;
        }
        if n > 400 {
            break;
        }
    }
    (val, der / h)
}

fn asymptotic_coefficients() -> &'static (Vec<f64>, Vec<f64>) {
    static C: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    C.get_or_init(|| {
        let mut u = vec![1.0];
        let mut v = vec![1.0];
        for k in 1..60usize {
            let kf = k as f64;
            let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
            u.push(uk);
            v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
        }
        (u, v)
    })
}

/// Sums `sum_k (-1)^k c_{2k+parity} zeta^{-(2k+parity)}` or, with `step = 1`,
/// `sum_k (-1)^k c_k zeta^{-k}`, stopping at the smallest term.
fn asymptotic_series(c: &[f64], zeta: f64, parity: usize, step: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut sign = 1.0;
    let mut k = parity;
    while k < c.len() {
        let term = c[k] / zeta.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        sum += sign * term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        prev = term.abs();
        sign = -sign;
        k += step;
    }
    sum
}

fn ai_asymptotic_positive(x: f64) -> (f64, f64) {
    let (u, v) = asymptotic_coefficients();
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let e = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = x.sqrt().sqrt();
    // Both series alternate in sign with ratio -1 per index.
    let su = asymptotic_series(u, zeta, 0, 1);
    let sv = asymptotic_series(v, zeta, 0, 1);
    (e / q * su, -e * q * sv)
}

fn ai_asymptotic_negative(x: f64) -> (f64, f64) {
    let (u, v) = asymptotic_coefficients();
    let z = -x;
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let q = z.sqrt().sqrt();
    let th = zeta - PI / 4.0;
    let (s, c) = th.sin_cos();
    let ue = asymptotic_series(u, zeta, 0, 2);
    let uo = asymptotic_series(u, zeta, 1, 2);
    let ve = asymptotic_series(v, zeta, 0, 2);
    let vo = asymptotic_series(v, zeta, 1, 2);
    let rp = PI.sqrt();
    ((c * ue + s * uo) / (rp * q), q / rp * (s * ve - c * vo))
}

fn anchors() -> &'static Vec<(f64, f64)> {
    static A: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    A.get_or_init(|| {
        let count = ((ANCHOR_HI - ANCHOR_LO) / ANCHOR_STEP).round() as usize + 1;
        let zero = (-ANCHOR_LO / ANCHOR_STEP).round() as usize;
        let xs = |j: usize| ANCHOR_LO + j as f64 * ANCHOR_STEP;
        let mut a = vec![(0.0, 0.0); count];
        a[zero] = (AI0, AIP0);
        for j in (0..zero).rev() {
            let (y, yp) = a[j + 1];
            a[j] = taylor_step(xs(j + 1), y, yp, -ANCHOR_STEP);
        }
        // Forward stepping is unstable on the positive axis, so the
        // positive anchors come down from the asymptotic value at the top.
        a[count - 1] = ai_asymptotic_positive(ANCHOR_HI);
        for j in (zero + 1..count - 1).rev() {
            let (y, yp) = a[j + 1];
            a[j] = taylor_step(xs(j + 1), y, yp, -ANCHOR_STEP);
        }
        a
    })
}

/// `(Ai(x), Ai'(x))`.
///
/// Absolute error is below `1e-13` on `[-20, 5]`. Accuracy outside
/// `|x| <= 1000` is not controlled. Returns zeros above [`UNDERFLOW_X`].
pub fn ai(x: f64) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if x > UNDERFLOW_X {
        return (0.0, 0.0);
    }
    if x > ANCHOR_HI {
        return ai_asymptotic_positive(x);
    }
    if x < ANCHOR_LO {
        return ai_asymptotic_negative(x);
    }
    if x.abs() <= MACLAURIN_RADIUS {
        return taylor_step(0.0, AI0, AIP0, x);
    }
    let j = ((x - ANCHOR_LO) / ANCHOR_STEP).round() as usize;
    let x0 = ANCHOR_LO + j as f64 * ANCHOR_STEP;
    let (y, yp) = anchors()[j];
    taylor_step(x0, y, yp, x - x0)
}

pub fn ai_value(x: f64) -> f64 {
    ai(x).0
}

pub fn ai_prime(x: f64) -> f64 {
    ai(x).1
}

/// `|Ai''(x) - x Ai(x)|` with `Ai''` from an 8th order central difference
/// of `Ai'` at step `h`.
pub fn ode_residual(x: f64, h: f64) -> f64 {
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let mut d = 0.0;
    for (k, c) in C.iter().enumerate() {
        let s = (k + 1) as f64 * h;
        d += c * (ai_prime(x + s) - ai_prime(x - s));
    }
    (d / h - x * ai_value(x)).abs()
}

/// Asymptotic location of the `i`-th zero (counted from 1).
pub fn zero_guess(i: usize) -> f64 {
    let t = 3.0 * PI * (4.0 * i as f64 - 1.0) / 8.0;
    let t2 = 1.0 / (t * t);
    -t.powf(2.0 / 3.0) * (1.0 + t2 * (5.0 / 48.0 + t2 * (-5.0 / 36.0 + t2 * 77125.0 / 82944.0)))
}

/// Newton iteration from the asymptotic guess, kept inside a bracket.
fn polish_zero(i: usize) -> Result<(f64, f64)> {
    let guess = zero_guess(i);
    // Half the local spacing brackets the zero comfortably.
    let half = 0.5 * (zero_guess(i) - zero_guess(i + 1)).abs();
    let (mut lo, mut hi) = (guess - half, guess + half);
    let (flo, fhi) = (ai_value(lo), ai_value(hi));
    if flo * fhi > 0.0 {
        return Err(Error::numerical("airy zeros", format!("no sign change around zero {i}")));
    }
    let mut x = guess;
    for _ in 0..100 {
        let (f, fp) = ai(x);
        if f == 0.0 {
            break;
        }
        if (f > 0.0) == (flo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / fp;
        if !(next > lo.min(hi) && next < lo.max(hi)) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 4.0 * f64::EPSILON * x.abs();
        x = next;
        if done {
            break;
        }
    }
    Ok((x, ai_prime(x)))
}

fn zero_cache() -> &'static Vec<(f64, f64)> {
    static Z: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    Z.get_or_init(|| {
        (1..=ZERO_CACHE)
            .map(|i| polish_zero(i).expect("Airy zero bracketing"))
            .collect()
    })
}

/// `(alpha_i, Ai'(alpha_i))`, counted from 1.
pub fn zero(i: usize) -> Result<(f64, f64)> {
    if i == 0 {
        return Err(Error::invalid("Airy zero index starts at 1"));
    }
    if i <= ZERO_CACHE {
        Ok(zero_cache()[i - 1])
    } else {
        polish_zero(i)
    }
}

pub fn alpha(i: usize) -> Result<f64> {
    zero(i).map(|z| z.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AiryTable {
    pub zeros: Vec<f64>,
    pub ai_prime: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl AiryTable {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["i", "alpha", "ai_prime", "residual"]);
        for i in 0..self.len() {
            t.push(vec![
                (i + 1).to_string(),
                fmt_f64(self.zeros[i]),
                fmt_f64(self.ai_prime[i]),
                fmt_f64(self.residuals[i]),
            ]);
        }
        t
    }
}

/// The first `n` zeros of `Ai` with derivative values and residuals `|Ai(alpha_i)|`.
pub fn airy_zeros(n: usize) -> Result<AiryTable> {
    let mut t = AiryTable { zeros: Vec::with_capacity(n), ai_prime: Vec::new(), residuals: Vec::new() };
    for i in 1..=n {
        let (a, ap) = zero(i)?;
        t.zeros.push(a);
        t.ai_prime.push(ap);
        t.residuals.push(ai_value(a).abs());
    }
    Ok(t)
}

/// The normalized mode `A_i(y) = Ai(alpha_i + y) / Ai'(alpha_i)`.
#[derive(Clone, Debug)]
pub struct AiryMode {
    pub index: usize,
    pub alpha: f64,
    pub ai_prime: f64,
    series: Vec<f64>,
}

impl AiryMode {
    pub fn new(i: usize) -> Result<Self> {
        let (alpha, ai_prime) = zero(i)?;
        // Taylor coefficients about the zero with c_0 = 0, c_1 = 1.
        let mut c = vec![0.0, 1.0, 0.0];
        for n in 1..MODE_SERIES_TERMS {
            let v = (alpha * c[n] + c[n - 1]) / (((n + 2) * (n + 1)) as f64);
            c.push(v);
        }
        Ok(AiryMode { index: i, alpha, ai_prime, series: c })
    }

    /// `A_i(y) / y`, continuous at `y = 0`.
    pub fn over_y(&self, y: f64) -> f64 {
        if y < MODE_SERIES_RADIUS {
            let mut s = 0.0;
            for c in self.series[1..].iter().rev() {
                s = s * y + c;
            }
            s
        } else {
            self.value(y) / y
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        if y < MODE_SERIES_RADIUS {
            y * self.over_y(y)
        } else {
            ai_value(self.alpha + y) / self.ai_prime
        }
    }

    /// Integration upper limit past which the mode is negligible.
    pub fn cutoff(&self) -> f64 {
        (-self.alpha).max(0.0) + DECAY_MARGIN
    }
}

fn pair_integral<F: Fn(f64) -> f64>(a: &AiryMode, b: &AiryMode, f: F) -> Result<QuadResult> {
    let top = a.cutoff().max(b.cutoff());
    let panels = (top / PANEL_WIDTH).ceil() as usize;
    integrate(f, 0.0, top, panels, QUAD_ABS_TOL, QUAD_REL_TOL)
}

/// `int_0^inf A_i A_j dy` by quadrature.
pub fn orthonormality(i: usize, j: usize) -> Result<QuadResult> {
    let (a, b) = (AiryMode::new(i)?, AiryMode::new(j)?);
    pair_integral(&a, &b, |y| a.value(y) * b.value(y))
}

/// `E Z(i,t) Z(j,s) = 2 int_0^inf A_i(y) A_j(y) exp(-|t - s| y) dy / y`.
pub fn limit_cov(i: usize, j: usize, t: f64, s: f64) -> Result<f64> {
    limit_cov_quad(i, j, (t - s).abs()).map(|q| q.value)
}

pub fn limit_cov_quad(i: usize, j: usize, gap: f64) -> Result<QuadResult> {
    let (a, b) = (AiryMode::new(i)?, AiryMode::new(j)?);
    let q = pair_integral(&a, &b, |y| a.over_y(y) * b.value(y) * (-gap * y).exp())?;
    Ok(QuadResult { value: 2.0 * q.value, error: 2.0 * q.error, evaluations: q.evaluations })
}

/// `E (Z(i,t) - Z(i,s))^2`.
pub fn increment_variance(i: usize, t: f64, s: f64) -> Result<f64> {
    let a = AiryMode::new(i)?;
    let gap = (t - s).abs();
    // 1 - e^{-g y} through expm1 keeps the small-gap cells accurate.
    let q = pair_integral(&a, &a, |y| a.over_y(y) * a.value(y) * -(-gap * y).exp_m1())?;
    Ok(4.0 * q.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupEntry {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub error: f64,
}

/// `P_t(i -> j) = int_0^inf A_i(y) A_j(y) exp(-t y) dy`.
pub fn semigroup_p(t: f64, i: usize, j: usize) -> Result<SemigroupEntry> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("semigroup time must be >= 0, got {t}")));
    }
    if i == 0 || j == 0 {
        return Err(Error::invalid("Airy zero index starts at 1"));
    }
    if t == 0.0 {
        return Ok(SemigroupEntry { t, i, j, value: if i == j { 1.0 } else { 0.0 }, error: 0.0 });
    }
    let (a, b) = (AiryMode::new(i)?, AiryMode::new(j)?);
    let q = pair_integral(&a, &b, |y| a.value(y) * b.value(y) * (-t * y).exp())?;
    Ok(SemigroupEntry { t, i, j, value: q.value, error: q.error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSum {
    pub t: f64,
    pub i: usize,
    pub j_max: usize,
    /// `sum_{j <= j_max} P_t(i -> j)`.
    pub partial: f64,
    /// Estimate of `sum_{j > j_max} P_t(i -> j)`.
    pub tail_estimate: f64,
}

/// Number of asymptotic terms summed explicitly in the tail estimate.
const TAIL_TERMS: usize = 100_000;

/// Row sum of the semigroup with an extrapolated tail.
///
/// The tail assumes `P_t(i -> j) ~ c / (alpha_i - alpha_j)^2` for large `j`,
/// with `c` fitted at `j_max`.
pub fn semigroup_row_sum(t: f64, i: usize, j_max: usize) -> Result<RowSum> {
    if j_max < 2 {
        return Err(Error::invalid("row sum needs j_max >= 2"));
    }
    let entries: Vec<f64> = (1..=j_max)
        .map(|j| semigroup_p(t, i, j).map(|e| e.value))
        .collect::<Result<_>>()?;
    let ai = alpha(i)?;
    let last = alpha(j_max)?;
    let c = entries[j_max - 1] * (ai - last).powi(2);
    let far = j_max + TAIL_TERMS;
    let mut tail = kahan_sum((j_max + 1..=far).map(|j| (ai - zero_guess(j)).powi(-2)));
    // alpha_j ~ -(3 pi j / 2)^{2/3}, so the rest is an integral of j^{-4/3}.
    tail += 3.0 * (1.5 * PI).powf(-4.0 / 3.0) * (far as f64 + 0.5).powf(-1.0 / 3.0);
    Ok(RowSum { t, i, j_max, partial: kahan_sum(entries), tail_estimate: c * tail })
}

/// `sum_{q <= q_max} P_t(i -> q) P_s(q -> j) - P_{t+s}(i -> j)`.
pub fn chapman_kolmogorov_defect(t: f64, s: f64, i: usize, j: usize, q_max: usize) -> Result<f64> {
    let mut acc = Vec::with_capacity(q_max);
    for q in 1..=q_max {
        acc.push(semigroup_p(t, i, q)?.value * semigroup_p(s, q, j)?.value);
    }
    Ok(kahan_sum(acc) - semigroup_p(t + s, i, j)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub i: usize,
    pub j: usize,
    pub closed_form: f64,
    pub antiderivative: f64,
    pub finite_difference: f64,
}

impl Intensity {
    pub fn antiderivative_gap(&self) -> f64 {
        (self.antiderivative - self.closed_form).abs()
    }

    pub fn finite_difference_rel(&self) -> f64 {
        ((self.finite_difference - self.closed_form) / self.closed_form).abs()
    }
}

/// Step of the finite-difference intensity.
pub const INTENSITY_STEP: f64 = 1e-4;

/// `F1(y)` with `dF1/dy = y Ai(a + y)^2`.
fn antiderivative_same(a: f64, y: f64) -> f64 {
    let (v, d) = ai(a + y);
    ((2.0 * a - y) / 3.0) * d * d + d * v / 3.0 + ((y + a) * (y - 2.0 * a) / 3.0) * v * v
}

/// `F2(y)` with `dF2/dy = (a - b)^2 y Ai(a + y) Ai(b + y)`.
fn antiderivative_pair(a: f64, b: f64, y: f64) -> f64 {
    let (va, da) = ai(a + y);
    let (vb, db) = ai(b + y);
    2.0 * da * db + (a - b) * (y * da * vb - y * va * db) - 2.0 * y * va * vb - (a + b) * va * vb
        + 2.0 * (va * db - da * vb) / (b - a)
}

/// Jump rate of the semigroup from `i` to `j`, computed three ways.
pub fn intensity(i: usize, j: usize) -> Result<Intensity> {
    let (ai_, api) = zero(i)?;
    let (aj, apj) = zero(j)?;
    let closed_form = if i == j { 2.0 / 3.0 * ai_ } else { 2.0 / (ai_ - aj).powi(2) };
    // d/dt P_t at 0 is -int_0^inf y A_i A_j dy.
    let far = (-ai_.min(aj)).max(0.0) + 40.0;
    let moment = if i == j {
        (antiderivative_same(ai_, far) - antiderivative_same(ai_, 0.0)) / (api * api)
    } else {
        (antiderivative_pair(ai_, aj, far) - antiderivative_pair(ai_, aj, 0.0))
            / ((ai_ - aj).powi(2) * api * apj)
    };
    let p = semigroup_p(INTENSITY_STEP, i, j)?.value;
    let delta = if i == j { 1.0 } else { 0.0 };
    Ok(Intensity {
        i,
        j,
        closed_form,
        antiderivative: -moment,
        finite_difference: (p - delta) / INTENSITY_STEP,
    })
}

/// `sum_{j != i, j <= j_max} (alpha_i - alpha_j)^{-2}`; tends to `-alpha_i / 3`.
pub fn zero_sum_partial(i: usize, j_max: usize) -> Result<f64> {
    let ai_ = alpha(i)?;
    let mut terms = Vec::with_capacity(j_max);
    for j in (1..=j_max).filter(|&j| j != i) {
        terms.push((ai_ - alpha(j)?).powi(-2));
    }
    Ok(kahan_sum(terms))
}

/// Covariance of `Z` on the product of `indices` and `times`, index-major.
pub fn line_covariance(indices: &[usize], times: &[f64]) -> Result<CovMatrix> {
    let labels: Vec<(usize, f64)> =
        indices.iter().flat_map(|&i| times.iter().map(move |&t| (i, t))).collect();
    let d = labels.len();
    let mut entries = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..=r {
            let v = limit_cov(labels[r].0, labels[c].0, labels[r].1, labels[c].1)?;
            entries[r * d + c] = v;
            entries[c * d + r] = v;
        }
    }
    CovMatrix::new(
        labels.iter().map(|(i, t)| format!("{i}@{t}")).collect(),
        entries,
        Provenance::Limiting,
    )
}

/// Relative diagonal jitter added before factorization.
pub const PSD_JITTER: f64 = 1e-12;

/// Gaussian sampler for `Z(i, t)` on a fixed index and time grid.
#[derive(Clone, Debug)]
pub struct AiryLineSampler {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub cov: CovMatrix,
    pub jitter: f64,
    factor: DMatrix<f64>,
}

impl AiryLineSampler {
    pub fn new(indices: &[usize], times: &[f64]) -> Result<Self> {
        if indices.is_empty() || times.is_empty() {
            return Err(Error::invalid("need at least one index and one time"));
        }
        let cov = line_covariance(indices, times)?;
        let jitter = PSD_JITTER * cov.trace();
        let mut m = cov.to_dmatrix();
        for k in 0..cov.dim() {
            m[(k, k)] += jitter;
        }
        let factor = match Cholesky::new(m) {
            Some(ch) => ch.l(),
            None => {
                return Err(Error::numerical(
                    "airy line sampler",
                    format!("covariance not PSD: min eigenvalue {:e}", cov.min_eigenvalue()),
                ))
            }
        };
        Ok(AiryLineSampler { indices: indices.to_vec(), times: times.to_vec(), cov, jitter, factor })
    }

    /// One draw, index-major over `(indices, times)`.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let d = self.cov.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        (0..d)
            .map(|r| (0..=r).map(|c| self.factor[(r, c)] * z[c]).sum())
            .collect()
    }
}

/// Draws `samples` paths of `Z` and returns a CSV of `(i, t, value, seed)` rows.
pub fn sample_airy_lines(
    indices: &[usize],
    times: &[f64],
    samples: usize,
    rng: &mut RngStream,
) -> Result<CsvTable> {
    let s = AiryLineSampler::new(indices, times)?;
    let mut t = CsvTable::new(&["sample", "i", "t", "value", "seed"]);
    for n in 0..samples {
        let x = s.sample(rng);
        let mut k = 0;
        for &i in indices {
            for &tm in times {
                t.push(vec![n.to_string(), i.to_string(), fmt_f64(tm), fmt_f64(x[k]), rng.seed().to_string()]);
                k += 1;
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        let (v, d) = ai(0.0);
        assert_eq!((v, d), (AI0, AIP0));
        // Anchors coming down from the asymptotic value agree with the exact origin.
        let near = taylor_step(0.25, anchors()[81].0, anchors()[81].1, -0.25);
        assert!((near.0 - AI0).abs() < 1e-14 && (near.1 - AIP0).abs() < 1e-14, "{near:?}");
    }

    #[test]
    fn reference_values() {
        // Reference values from 30-digit arithmetic.
        let cases = [
            (1.0, 0.135_292_416_312_881_42, -0.159_147_441_296_793_21),
            (2.0, 0.034_924_130_423_274_379, -0.053_090_384_433_653_632),
            (-1.0, 0.535_560_883_292_352_12, -0.010_160_567_116_645_209),
            (-5.0, 0.350_761_009_024_114_32, 0.327_192_818_554_443_14),
            (5.0, 1.083_444_281_360_744_2e-4, -2.474_138_908_684_624_8e-4),
            (-10.0, 0.040_241_238_486_443_191, 0.996_265_044_132_790_06),
        ];
        for (x, a, ap) in cases {
            let (v, d) = ai(x);
            assert!((v - a).abs() < 1e-14, "Ai({x}) = {v}");
            assert!((d - ap).abs() < 1e-13, "Ai'({x}) = {d}");
        }
    }

    #[test]
    fn window_edges_match_asymptotics() {
        for x in [-20.0, 9.0] {
            let j = ((x - ANCHOR_LO) / ANCHOR_STEP).round() as usize;
            let a = anchors()[j];
            let b = if x < 0.0 { ai_asymptotic_negative(x) } else { ai_asymptotic_positive(x) };
            assert!((a.0 - b.0).abs() < 1e-13 && (a.1 - b.1).abs() < 1e-12, "{x}: {a:?} {b:?}");
        }
        // Continuity across the switch points.
        for x in [-20.0f64, -1.0, 1.0, 9.0] {
            let (l, r) = (ai(x - 1e-12), ai(x + 1e-12));
            assert!((l.0 - r.0).abs() < 1e-13 + 2e-12 * l.1.abs(), "{x}");
        }
    }

    #[test]
    fn first_zero_by_bisection() {
        let (mut lo, mut hi) = (-3.0, -2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ai_value(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((alpha(1).unwrap() - 0.5 * (lo + hi)).abs() < 1e-10);
        assert!((alpha(1).unwrap() + 2.338_107_410_459_767).abs() < 1e-13);
    }

    #[test]
    fn zero_table_invariants() {
        let t = airy_zeros(200).unwrap();
        assert!(t.max_residual() < 1e-12);
        for i in 0..199 {
            assert!(t.zeros[i] > t.zeros[i + 1]);
            assert!(t.ai_prime[i] * t.ai_prime[i + 1] < 0.0);
        }
        assert!(t.ai_prime[0] > 0.0);
        for i in 0..198 {
            assert!(t.zeros[i] - t.zeros[i + 1] > t.zeros[i + 1] - t.zeros[i + 2]);
        }
    }

    #[test]
    fn modes_are_continuous_at_series_switch() {
        let m = AiryMode::new(7).unwrap();
        let r = MODE_SERIES_RADIUS;
        assert!((m.value(r - 1e-13) - m.value(r + 1e-13)).abs() < 1e-12);
        assert!((m.over_y(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn semigroup_at_zero_time() {
        assert_eq!(semigroup_p(0.0, 3, 3).unwrap().value, 1.0);
        assert_eq!(semigroup_p(0.0, 3, 4).unwrap().value, 0.0);
        assert!(semigroup_p(-1.0, 1, 1).is_err());
    }

    #[test]
    fn antiderivative_intensities_match_closed_form() {
        for (i, j) in [(1, 1), (1, 2), (2, 5), (4, 4)] {
            let r = intensity(i, j).unwrap();
            assert!(r.antiderivative_gap() < 1e-8 * r.closed_form.abs().max(1.0), "{r:?}");
        }
    }
}
