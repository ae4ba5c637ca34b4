//! Root grids of Appell sequences.
//!
//! A top-level spectrum `y_1 <= ... <= y_N` defines the monic polynomial
//! `P_N(x) = prod (x - y_i)` and the sequence `P_{k-1} = P_k' / k`.
//! Level `k` of a [`RootGrid`] holds the `k` real roots of `P_k` in
//! ascending order; consecutive levels interlace.

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::linalg::{kahan_sum, tridiagonal_eigenvalues};
use serde::{Deserialize, Serialize};

/// Largest degree accepted by [`hermite_roots`].
pub const K_MAX: usize = 2000;

/// Relative tolerance of every root solve.
pub const EPS_ROOT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Hermite,
    /// Top level `L_N^{(alpha)}`.
    Laguerre { alpha: f64 },
    /// Top level `P_N^{(alpha, beta)}`.
    Jacobi { alpha: f64, beta: f64 },
    General,
}

impl Family {
    /// Parses `hermite`, `laguerre:ALPHA`, `jacobi:ALPHA,BETA` or `general`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.to_string(), Some(a.to_string())),
            None => (s.clone(), None),
        };
        let nums = |a: &Option<String>| -> Result<Vec<f64>> {
            match a {
                Some(a) => crate::io::parse_list::<f64>(a),
                None => Ok(Vec::new()),
            }
        };
        match name.as_str() {
            "hermite" => Ok(Family::Hermite),
            "general" => Ok(Family::General),
            "laguerre" => {
                let v = nums(&args)?;
                let alpha = v.first().copied().unwrap_or(0.0);
                check_classical_parameter(alpha)?;
                Ok(Family::Laguerre { alpha })
            }
            "jacobi" => {
                let v = nums(&args)?;
                let alpha = v.first().copied().unwrap_or(0.0);
                let beta = v.get(1).copied().unwrap_or(alpha);
                check_classical_parameter(alpha)?;
                check_classical_parameter(beta)?;
                Ok(Family::Jacobi { alpha, beta })
            }
            other => Err(Error::invalid(format!("unknown family {other:?}"))),
        }
    }
}

fn check_classical_parameter(p: f64) -> Result<()> {
    if !(p.is_finite() && p > -1.0) {
        return Err(Error::invalid(format!("family parameter must exceed -1, got {p}")));
    }
    Ok(())
}

/// A sorted top-level spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumN {
    values: Vec<f64>,
}

impl SpectrumN {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("spectrum is empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("spectrum contains non-finite value {v}")));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(SpectrumN { values })
    }

    /// `n / 2` copies of `-1` followed by `n / 2` copies of `+1`.
    pub fn two_atom(n: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::invalid(format!("two-atom spectrum needs even N >= 2, got {n}")));
        }
        let m = n / 2;
        let mut v = vec![-1.0; m];
        v.extend(std::iter::repeat_n(1.0, m));
        Self::new(v)
    }

    /// Midpoints of `n` equal cells of `[-1, 1]`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform spectrum needs N >= 1"));
        }
        Self::new((0..n).map(|i| -1.0 + (2 * i + 1) as f64 / n as f64).collect())
    }

    /// Roots of the degree-`n` Hermite polynomial.
    pub fn hermite(n: usize) -> Result<Self> {
        Self::new(hermite_roots(n)?)
    }

    /// Reads one value per line.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(crate::io::parse_values(text)?)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The spectrum `a * y + b`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|y| a * y + b).collect())
    }

    /// Groups equal values: `(value, multiplicity)` in ascending order.
    pub fn distinct(&self) -> Vec<(f64, usize)> {
        group_values(&self.values)
    }
}

fn group_values(sorted: &[f64]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((u, m)) if *u == v => *m += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Mean, variance and third absolute central moment of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub abs_third: f64,
}

pub fn moments(spectrum: &SpectrumN) -> Moments {
    let y = spectrum.values();
    let n = y.len() as f64;
    let mean = kahan_sum(y.iter().copied()) / n;
    let variance = kahan_sum(y.iter().map(|v| (v - mean).powi(2))) / n;
    let abs_third = kahan_sum(y.iter().map(|v| (v - mean).abs().powi(3))) / n;
    Moments { mean, variance, abs_third }
}

/// Roots of all levels `lowest..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootGrid {
    pub family: Family,
    lowest: usize,
    levels: Vec<Vec<f64>>,
}

impl RootGrid {
    /// Builds a grid from explicit levels `lowest..=lowest + levels.len() - 1`.
    pub fn from_levels(family: Family, lowest: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if lowest == 0 || levels.is_empty() {
            return Err(Error::invalid("grid needs at least one level, starting at 1 or above"));
        }
        for (idx, lv) in levels.iter().enumerate() {
            if lv.len() != lowest + idx {
                return Err(Error::invalid(format!(
                    "level {} has {} roots",
                    lowest + idx,
                    lv.len()
                )));
            }
        }
        Ok(RootGrid { family, lowest, levels })
    }

    /// Top level `N`.
    pub fn n(&self) -> usize {
        self.lowest + self.levels.len() - 1
    }

    pub fn lowest(&self) -> usize {
        self.lowest
    }

    pub fn has_level(&self, k: usize) -> bool {
        k >= self.lowest && k <= self.n()
    }

    /// Roots of `P_k` in ascending order.
    pub fn level(&self, k: usize) -> &[f64] {
        assert!(self.has_level(k), "level {k} not in grid {}..={}", self.lowest, self.n());
        &self.levels[k - self.lowest]
    }

    pub fn try_level(&self, k: usize) -> Result<&[f64]> {
        if !self.has_level(k) {
            return Err(Error::invalid(format!(
                "level {k} outside grid range {}..={}",
                self.lowest,
                self.n()
            )));
        }
        Ok(self.level(k))
    }

    /// Root `x_i^k`, with `i` counted from 1.
    pub fn x(&self, k: usize, i: usize) -> f64 {
        self.level(k)[i - 1]
    }

    pub fn top_spectrum(&self) -> Result<SpectrumN> {
        SpectrumN::new(self.level(self.n()).to_vec())
    }

    /// Largest violation of `x_i^{k+1} <= x_i^k <= x_{i+1}^{k+1}`.
    pub fn interlacing_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in self.lowest..self.n() {
            let lo = self.level(k);
            let hi = self.level(k + 1);
            for i in 0..k {
                worst = worst.max(hi[i] - lo[i]).max(lo[i] - hi[i + 1]);
            }
        }
        worst
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k", "i", "x"]);
        for k in self.lowest..=self.n() {
            for (i, x) in self.level(k).iter().enumerate() {
                t.push(vec![k.to_string(), (i + 1).to_string(), fmt_f64(*x)]);
            }
        }
        t
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "lowest": self.lowest,
            "levels": self.levels,
        })
    }
}

/// Roots of the degree-`k` Hermite polynomial `He_k`, ascending.
///
/// Eigenvalues of the Jacobi matrix with zero diagonal and off-diagonal
/// `sqrt(1), ..., sqrt(k - 1)`, followed by one Newton polish step on the
/// three-term recurrence.
pub fn hermite_roots(k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > K_MAX {
        return Err(Error::invalid(format!("Hermite degree must be in 1..={K_MAX}, got {k}")));
    }
    let off: Vec<f64> = (1..k).map(|j| (j as f64).sqrt()).collect();
    let mut roots = tridiagonal_eigenvalues(&vec![0.0; k], &off)?;
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let step = hermite_newton_step(k, *r);
            if step.is_finite() && step.abs() < 1e-6 {
                *r -= step;
            }
        }
    }
    // Exact symmetry of the root set.
    for i in 0..k / 2 {
        let s = 0.5 * (roots[k - 1 - i] - roots[i]);
        roots[i] = -s;
        roots[k - 1 - i] = s;
    }
    if k % 2 == 1 {
        roots[k / 2] = 0.0;
    }
    Ok(roots)
}

/// `He_k(x) / He_k'(x)` from the orthonormal recurrence with rescaling.
fn hermite_newton_step(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0_f64, 1.0_f64);
    for n in 0..k {
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev /= 1e150;
            cur /= 1e150;
        }
    }
    // cur = h_k, prev = h_{k-1}, and h_k' = sqrt(k) h_{k-1}.
    cur / ((k as f64).sqrt() * prev)
}

/// The Hermite grid with top level `n`: level `k` holds the roots of `He_k`.
pub fn hermite_grid(n: usize) -> Result<RootGrid> {
    let levels = (1..=n).map(hermite_roots).collect::<Result<Vec<_>>>()?;
    RootGrid::from_levels(Family::Hermite, 1, levels)
}

/// Roots of the Laguerre polynomial `L_n^{(alpha)}`, by Golub-Welsch.
pub fn laguerre_roots(n: usize, alpha: f64) -> Result<Vec<f64>> {
    check_classical_parameter(alpha)?;
    if n == 0 {
        return Err(Error::invalid("degree must be positive"));
    }
    let diag: Vec<f64> = (0..n).map(|j| 2.0 * j as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|j| (j as f64 * (j as f64 + alpha)).sqrt()).collect();
    tridiagonal_eigenvalues(&diag, &off)
}

/// Roots of the Jacobi polynomial `P_n^{(alpha, beta)}`, by Golub-Welsch.
pub fn jacobi_roots(n: usize, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    check_classical_parameter(alpha)?;
    check_classical_parameter(beta)?;
    if n == 0 {
        return Err(Error::invalid("degree must be positive"));
    }
    let (a, b) = (alpha, beta);
    let diag: Vec<f64> = (0..n)
        .map(|j| {
            let s = 2.0 * j as f64 + a + b;
            if j == 0 {
                (b - a) / (a + b + 2.0)
            } else {
                (b * b - a * a) / (s * (s + 2.0))
            }
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|j| {
            let j = j as f64;
            let s = 2.0 * j + a + b;
            (4.0 * j * (j + a) * (j + b) * (j + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
        })
        .collect();
    tridiagonal_eigenvalues(&diag, &off)
}

/// The Appell grid whose top level is `L_n^{(alpha)}`.
pub fn laguerre_grid(n: usize, alpha: f64) -> Result<RootGrid> {
    let top = SpectrumN::new(laguerre_roots(n, alpha)?)?;
    let mut g = appell_grid(&top)?;
    g.family = Family::Laguerre { alpha };
    Ok(g)
}

/// The Appell grid whose top level is `P_n^{(alpha, beta)}`.
pub fn jacobi_grid(n: usize, alpha: f64, beta: f64) -> Result<RootGrid> {
    let top = SpectrumN::new(jacobi_roots(n, alpha, beta)?)?;
    let mut g = appell_grid(&top)?;
    g.family = Family::Jacobi { alpha, beta };
    Ok(g)
}

/// Grid of the named family with top level `n`.
pub fn family_grid(family: Family, n: usize) -> Result<RootGrid> {
    match family {
        Family::Hermite => hermite_grid(n),
        Family::Laguerre { alpha } => laguerre_grid(n, alpha),
        Family::Jacobi { alpha, beta } => jacobi_grid(n, alpha, beta),
        Family::General => Err(Error::invalid("the general family needs an explicit spectrum")),
    }
}

/// All levels `1..=N` of the Appell grid of `spectrum`.
pub fn appell_grid(spectrum: &SpectrumN) -> Result<RootGrid> {
    appell_levels(spectrum, 1)
}

/// Levels `k_min..=N` of the Appell grid of `spectrum`.
pub fn appell_levels(spectrum: &SpectrumN, k_min: usize) -> Result<RootGrid> {
    let n = spectrum.len();
    if k_min == 0 || k_min > n {
        return Err(Error::invalid(format!("lowest level must be in 1..={n}, got {k_min}")));
    }
    let mut levels = vec![spectrum.values().to_vec()];
    for _ in k_min..n {
        let next = derivative_roots(levels.last().expect("nonempty"))?;
        levels.push(next);
    }
    levels.reverse();
    RootGrid::from_levels(Family::General, k_min, levels)
}

/// Roots of `P'` given the sorted roots of `P`, repeats allowed.
///
/// A value of multiplicity `m` contributes `m - 1` copies of itself. Each
/// gap between consecutive distinct values holds exactly one further root,
/// the zero of `sum_j m_j / (x - v_j)`, found by safeguarded Newton.
pub fn derivative_roots(roots: &[f64]) -> Result<Vec<f64>> {
    if roots.len() < 2 {
        return Err(Error::invalid("need at least two roots to differentiate"));
    }
    let groups = group_values(roots);
    let mut out = Vec::with_capacity(roots.len() - 1);
    for (idx, &(v, m)) in groups.iter().enumerate() {
        out.extend(std::iter::repeat_n(v, m - 1));
        if idx + 1 < groups.len() {
            out.push(gap_root(&groups, idx)?);
        }
    }
    Ok(out)
}

fn gap_root(groups: &[(f64, usize)], a: usize) -> Result<f64> {
    let va = groups[a].0;
    let g = groups[a + 1].0 - va;
    let offsets: Vec<(f64, f64)> = groups
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != a && *j != a + 1)
        .map(|(_, &(v, m))| (va - v, m as f64))
        .collect();
    let ma = groups[a].1 as f64;
    let mb = groups[a + 1].1 as f64;
    let eval = |d: f64| -> (f64, f64) {
        let (ia, ib) = (1.0 / d, 1.0 / (d - g));
        let mut f = ma * ia + mb * ib;
        let mut fp = -(ma * ia * ia + mb * ib * ib);
        for &(o, m) in &offsets {
            let inv = 1.0 / (o + d);
            f += m * inv;
            fp -= m * inv * inv;
        }
        (f, fp)
    };
    let (mut lo, mut hi) = (0.0, g);
    let mut d = g * ma / (ma + mb);
    for _ in 0..200 {
        let (f, fp) = eval(d);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let mut next = d - f / fp;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - d).abs();
        d = next;
        if step <= 1e-15 * g || hi - lo <= 1e-15 * g {
            break;
        }
    }
    if !d.is_finite() || !eval(d).0.is_finite() && hi - lo > EPS_ROOT * g {
        return Err(Error::numerical(
            "derivative roots",
            format!("root solve failed in gap ({va}, {})", va + g),
        ));
    }
    // Clamp-repair against rounding across the gap endpoints.
    Ok((va + d).clamp(va, groups[a + 1].0))
}

/// Residuals of the moment identities of an Appell grid.
///
/// Every level has the top-level mean, and
/// `(1/k) sum_i (x_i^k - mu)^2 = (k - 1) / (N - 1) * sigma^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelMomentResiduals {
    pub mean: f64,
    pub variance: f64,
}

pub fn level_moment_residuals(grid: &RootGrid) -> Result<LevelMomentResiduals> {
    let top = grid.top_spectrum()?;
    let n = grid.n();
    let mo = moments(&top);
    let scale = mo.variance.sqrt().max(f64::MIN_POSITIVE);
    let (mut rm, mut rv): (f64, f64) = (0.0, 0.0);
    for k in grid.lowest()..=n {
        let lv = grid.level(k);
        let kf = k as f64;
        let mean = kahan_sum(lv.iter().copied()) / kf;
        rm = rm.max((mean - mo.mean).abs() / scale);
        if n > 1 {
            let var = kahan_sum(lv.iter().map(|x| (x - mo.mean).powi(2))) / kf;
            let expect = (kf - 1.0) / (n as f64 - 1.0) * mo.variance;
            rv = rv.max((var - expect).abs() / mo.variance.max(f64::MIN_POSITIVE));
        }
    }
    Ok(LevelMomentResiduals { mean: rm, variance: rv })
}

/// Residuals of the Hermite root identities up to degree `k`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HermiteIdentityReport {
    pub k: usize,
    /// `max |x_i / 2 - sum_{j != i} 1 / (x_i - x_j)|` over all levels.
    pub electrostatic: f64,
    /// `max |sum_i x_i^l|` over all levels.
    pub level_sum: f64,
    /// `max |(1/l) sum_i (x_i^l)^2 - (l - 1)| / max(l - 1, 1)`.
    pub second_moment: f64,
}

impl HermiteIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.electrostatic.max(self.level_sum).max(self.second_moment)
    }
}

pub fn check_hermite_identities(k: usize) -> Result<HermiteIdentityReport> {
    let grid = hermite_grid(k)?;
    let mut rep = HermiteIdentityReport { k, electrostatic: 0.0, level_sum: 0.0, second_moment: 0.0 };
    for l in 1..=k {
        let x = grid.level(l);
        for i in 0..l {
            let s = kahan_sum((0..l).filter(|&j| j != i).map(|j| 1.0 / (x[i] - x[j])));
            rep.electrostatic = rep.electrostatic.max((x[i] / 2.0 - s).abs());
        }
        rep.level_sum = rep.level_sum.max(kahan_sum(x.iter().copied()).abs());
        let m2 = kahan_sum(x.iter().map(|v| v * v)) / l as f64;
        let lm1 = l as f64 - 1.0;
        rep.second_moment = rep.second_moment.max((m2 - lm1).abs() / lm1.max(1.0));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_hermite_roots_are_exact() {
        let r = hermite_roots(3).unwrap();
        let s3 = 3f64.sqrt();
        assert!((r[0] + s3).abs() < 1e-15 && r[1] == 0.0 && (r[2] - s3).abs() < 1e-15);
        let r = hermite_roots(2).unwrap();
        assert!((r[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degree_bounds_are_enforced() {
        assert!(matches!(hermite_roots(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(hermite_roots(K_MAX + 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn appell_grid_reproduces_hermite_levels() {
        let g = appell_grid(&SpectrumN::hermite(40).unwrap()).unwrap();
        for k in 1..=40 {
            let h = hermite_roots(k).unwrap();
            for (a, b) in g.level(k).iter().zip(&h) {
                assert!((a - b).abs() < 1e-11, "level {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn repeated_values_keep_multiplicity() {
        let s = SpectrumN::new(vec![-1.0, -1.0, -1.0, 2.0, 2.0]).unwrap();
        let g = appell_grid(&s).unwrap();
        let l4 = g.level(4);
        assert_eq!(&l4[..2], &[-1.0, -1.0]);
        assert_eq!(l4[3], 2.0);
        // P_5 = (x+1)^3 (x-2)^2, so P_5' has the simple root 4/5 between the atoms.
        assert!((l4[2] - 0.8).abs() < 1e-14);
        assert!(g.interlacing_violation() <= 0.0);
    }

    #[test]
    fn two_atom_middle_level_is_legendre() {
        // d^2/dx^2 (x^2 - 1)^2 is proportional to 3x^2 - 1.
        let g = appell_grid(&SpectrumN::two_atom(4).unwrap()).unwrap();
        let l2 = g.level(2);
        assert!((l2[1] - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn laguerre_and_jacobi_levels_match_golub_welsch() {
        let n = 14;
        let lg = laguerre_grid(n, 1.5).unwrap();
        let jg = jacobi_grid(n, 0.5, 0.5).unwrap();
        for k in 1..=n {
            let shift = (n - k) as f64;
            let l = laguerre_roots(k, 1.5 + shift).unwrap();
            let j = jacobi_roots(k, 0.5 + shift, 0.5 + shift).unwrap();
            for i in 0..k {
                assert!((lg.x(k, i + 1) - l[i]).abs() < 1e-10 * l[i].abs().max(1.0));
                assert!((jg.x(k, i + 1) - j[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moment_identities_hold_for_a_general_spectrum() {
        let s = SpectrumN::new(vec![-3.0, -0.5, 0.1, 0.2, 2.0, 7.5]).unwrap();
        let r = level_moment_residuals(&appell_grid(&s).unwrap()).unwrap();
        assert!(r.mean < 1e-13 && r.variance < 1e-12, "{r:?}");
    }

    #[test]
    fn hermite_identities_small_k() {
        let rep = check_hermite_identities(50).unwrap();
        assert!(rep.max_residual() < 1e-9, "{rep:?}");
    }

    #[test]
    fn moments_of_two_atom() {
        let m = moments(&SpectrumN::two_atom(10).unwrap());
        assert_eq!(m.mean, 0.0);
        assert!((m.variance - 1.0).abs() < 1e-15 && (m.abs_third - 1.0).abs() < 1e-15);
    }

    #[test]
    fn family_parsing() {
        assert_eq!(Family::parse("hermite").unwrap(), Family::Hermite);
        assert_eq!(Family::parse("laguerre:1.5").unwrap(), Family::Laguerre { alpha: 1.5 });
        assert_eq!(
            Family::parse("jacobi:0.5,0.25").unwrap(),
            Family::Jacobi { alpha: 0.5, beta: 0.25 }
        );
        assert!(Family::parse("jacobi:-2").is_err());
    }
}
