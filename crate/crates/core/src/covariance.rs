//! Covariances of the Gaussian fluctuation fields.
//!
//! * `xi`: the finite field on a grid with `xi^N = 0` and
//!   `xi^k = A_k xi^{k+1} + eta^k`.
//! * `zeta`: the Hermite field with infinitely many levels,
//!   `zeta^k = sum_{l >= k} K^{k,l} eta^l`.
//! * `dbm`: the fluctuation field of Dyson Brownian motion started at the
//!   Hermite roots of degree `N`.

use crate::dualpoly::{log_pochhammer_down, q_table_hermite, DualPolyTable};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::kernels::{alpha_matrix, innovation_variances};
use crate::linalg::{kahan_sum, KahanSum};
use crate::polygrid::RootGrid;
use crate::quad::gauss_legendre;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative slack of the positive semidefiniteness test.
pub const PSD_TOL: f64 = 1e-9;

/// Default absolute tolerance of the spectral series.
pub const SPECTRAL_TOL: f64 = 1e-9;

/// Level cap of the bound-only truncation.
pub const L_MAX: usize = 1_000_000;

/// A grid site `(level k, particle a)` with `a` counted from 1.
pub type Site = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Direct,
    Spectral { error_estimate: f64 },
    ClosedForm,
    Limiting,
    Empirical { samples: usize, stderr: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub labels: Vec<String>,
    dim: usize,
    entries: Vec<f64>,
    pub provenance: Provenance,
}

impl CovMatrix {
    /// Builds a matrix from row-major entries; the input is symmetrized.
    pub fn new(labels: Vec<String>, entries: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let dim = labels.len();
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!("need {} entries, got {}", dim * dim, entries.len())));
        }
        let mut e = entries;
        for r in 0..dim {
            for c in 0..r {
                let v = 0.5 * (e[r * dim + c] + e[c * dim + r]);
                e[r * dim + c] = v;
                e[c * dim + r] = v;
            }
        }
        Ok(CovMatrix { labels, dim, entries: e, provenance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Positive semidefinite up to `PSD_TOL * trace`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL * self.trace().abs()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["row", "col", "value"]);
        for r in 0..self.dim {
            for c in 0..self.dim {
                t.push(vec![self.labels[r].clone(), self.labels[c].clone(), fmt_f64(self.get(r, c))]);
            }
        }
        t
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|r| self.entries[r * self.dim..(r + 1) * self.dim].to_vec())
            .collect();
        serde_json::json!({
            "labels": self.labels,
            "entries": rows,
            "provenance": self.provenance,
        })
    }
}

pub fn site_label(s: Site) -> String {
    format!("{}:{}", s.0, s.1)
}

fn check_site(s: Site, top: usize) -> Result<()> {
    if s.0 == 0 || s.0 > top || s.1 == 0 || s.1 > s.0 {
        return Err(Error::invalid(format!("site (k={}, a={}) outside levels 1..={top}", s.0, s.1)));
    }
    Ok(())
}

/// `Cov(xi^{k1}_{a1}, xi^{k2}_{a2})` from the kernels and innovation variances.
pub fn cov_xi_direct(grid: &RootGrid, s1: Site, s2: Site) -> Result<f64> {
    let m = cov_xi_matrix(grid, &[s1, s2])?;
    Ok(m.get(0, 1))
}

/// Covariance matrix of `xi` at the given sites.
///
/// `Cov = sum_{l >= max(k1, k2)}^{N-1} sum_b K^{k1,l}(a1, b) K^{k2,l}(a2, b) Var eta^l_b`.
/// The rows `e_a K^{k,l}` of all sites are advanced together one level at a time.
pub fn cov_xi_matrix(grid: &RootGrid, sites: &[Site]) -> Result<CovMatrix> {
    let n = grid.n();
    for &s in sites {
        check_site(s, n)?;
        if s.0 < grid.lowest() {
            return Err(Error::invalid(format!("level {} below grid range", s.0)));
        }
    }
    let d = sites.len();
    let lowest = sites.iter().map(|s| s.0).min().unwrap_or(n);
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; d];
    let mut acc = vec![KahanSum::new(); d * d];
    for l in lowest..n {
        for (idx, s) in sites.iter().enumerate() {
            if s.0 == l {
                let mut e = vec![0.0; l];
                e[s.1 - 1] = 1.0;
                rows[idx] = Some(e);
            }
        }
        let var = innovation_variances(grid, l)?.variances;
        for r in 0..d {
            let Some(ra) = &rows[r] else { continue };
            for c in 0..=r {
                let Some(rb) = &rows[c] else { continue };
                let v = kahan_sum(ra.iter().zip(rb).zip(&var).map(|((x, y), w)| x * y * w));
                acc[r * d + c].add(v);
            }
        }
        let a = alpha_matrix(grid, l)?;
        for row in rows.iter_mut().flatten() {
            *row = a.apply_transpose(row);
        }
    }
    let mut entries = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..=r {
            entries[r * d + c] = acc[r * d + c].value();
            entries[c * d + r] = entries[r * d + c];
        }
    }
    CovMatrix::new(sites.iter().map(|&s| site_label(s)).collect(), entries, Provenance::Direct)
}

/// Truncation of the level series of the spectral covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum TailPolicy {
    /// Sum each mode until the Euler-Maclaurin remainder estimate is below
    /// `tol`, then add the integral and derivative tail corrections.
    Corrected { tol: f64 },
    /// Stop at the first `L` with `4 min(k)^2 sum_{l > L} l^{-2} <= tol |value|`,
    /// giving up at `l_max`.
    BoundOnly { tol: f64, l_max: usize },
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy::Corrected { tol: SPECTRAL_TOL }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// Largest level summed explicitly.
    pub last_level: usize,
}

/// Exponent of the level-`l` summand of mode `m`:
/// `ln (norm_l Pi^{k1->l} Pi^{k2->l}) = ln P_{k1} + ln P_{k2} - ln P_l - ln(l + 1)`,
/// with `P_j = (j - m)_{m+1}` continued to real `x`.
fn mode_phi(x: f64, m: usize, base: f64) -> f64 {
    let mut s = base - (x + 1.0).ln();
    for j in 0..=m {
        s -= (x - j as f64).ln();
    }
    s
}

/// `(phi', phi'', phi''')` of [`mode_phi`] at `x`.
fn mode_phi_derivatives(x: f64, m: usize) -> (f64, f64, f64) {
    let mut d = [0.0; 3];
    let mut push = |u: f64| {
        let inv = 1.0 / u;
        d[0] -= inv;
        d[1] += inv * inv;
        d[2] -= 2.0 * inv * inv * inv;
    };
    push(x + 1.0);
    for j in 0..=m {
        push(x - j as f64);
    }
    (d[0], d[1], d[2])
}

/// `S_m = sum_{l >= l0} exp(base - ln P_l - ln(l + 1))` for one mode.
fn mode_level_sum(k1: usize, k2: usize, m: usize, base: f64, tol: f64, gl: &(Vec<f64>, Vec<f64>)) -> (f64, f64, usize) {
    let l0 = k1.max(k2);
    let mut sum = KahanSum::new();
    let mut log_p = log_pochhammer_down(l0, m);
    let mut l = l0;
    let mut next_check = l0 + 16;
    loop {
        let h = (base - log_p - (l as f64 + 1.0).ln()).exp();
        sum.add(h);
        let lf = l as f64;
        if h == 0.0 || h * lf / (m as f64 + 1.0) < tol * 1e-6 {
            return (sum.value(), h * lf / (m as f64 + 1.0), l);
        }
        if l >= next_check && l >= 4 * (m + 1) {
            let a = lf + 0.5;
            let ha = mode_phi(a, m, base).exp();
            let (p1, p2, p3) = mode_phi_derivatives(a, m);
            let h1 = ha * p1;
            let h3 = ha * (p3 + 3.0 * p1 * p2 + p1 * p1 * p1);
            let ratio = ((m + 6) as f64 / a).powi(2);
            let err = 7.0 / 5760.0 * h3.abs() * ratio;
            if err < tol {
                let integral = tail_integral(a, m, base, gl);
                return (sum.value() + integral + h1 / 24.0 - 7.0 / 5760.0 * h3, err, l);
            }
            next_check = l + (l - l0).max(16);
        }
        log_p += ((l + 1) as f64).ln() - ((l - m) as f64).ln();
        l += 1;
    }
}

/// `int_a^inf exp(phi(x)) dx` through `x = a / t` and Gauss-Legendre on `(0, 1)`.
fn tail_integral(a: f64, m: usize, base: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (x, w) = gl;
    kahan_sum(x.iter().zip(w).map(|(xi, wi)| {
        let t = 0.5 * (xi + 1.0);
        let u = a / t;
        0.5 * wi * (mode_phi(u, m, base).exp() * a / (t * t))
    }))
}

/// `Cov(zeta^{k1}_{a1}, zeta^{k2}_{a2})` from the spectral expansion.
pub fn cov_zeta_spectral(s1: Site, s2: Site, policy: TailPolicy) -> Result<SpectralEstimate> {
    check_site(s1, usize::MAX)?;
    check_site(s2, usize::MAX)?;
    let t1 = q_table_hermite(s1.0)?;
    let t2 = if s2.0 == s1.0 { t1.clone() } else { q_table_hermite(s2.0)? };
    cov_zeta_spectral_tables(&t1, s1.1, &t2, s2.1, policy)
}

/// [`cov_zeta_spectral`] with precomputed Hermite tables.
pub fn cov_zeta_spectral_tables(
    t1: &DualPolyTable,
    a1: usize,
    t2: &DualPolyTable,
    a2: usize,
    policy: TailPolicy,
) -> Result<SpectralEstimate> {
    let (k1, k2) = (t1.k, t2.k);
    let modes = k1.min(k2);
    let w = t1.weights[a1 - 1] * t2.weights[a2 - 1];
    let coef = |m: usize| 2.0 * w * t1.q(m, a1) * t2.q(m, a2);
    // The mode normalization enters the exponent so that no factor over- or underflows.
    let base = |m: usize| {
        log_pochhammer_down(k1, m) + log_pochhammer_down(k2, m) - 0.5 * (t1.log_norm(m) + t2.log_norm(m))
    };
    match policy {
        TailPolicy::Corrected { tol } => {
            let gl = gauss_legendre(32);
            let mut value = KahanSum::new();
            let mut err = 0.0;
            let mut last = 0;
            for m in 0..modes {
                let c = coef(m);
                let (s, e, l) = mode_level_sum(k1, k2, m, base(m), tol / modes as f64, &gl);
                value.add(c * s);
                err += (c * e).abs();
                last = last.max(l);
            }
            Ok(SpectralEstimate { value: value.value(), error_estimate: err, last_level: last })
        }
        TailPolicy::BoundOnly { tol, l_max } => {
            let kmin = modes as f64;
            let l0 = k1.max(k2);
            let coefs: Vec<f64> = (0..modes).map(coef).collect();
            let bases: Vec<f64> = (0..modes).map(base).collect();
            let mut log_p: Vec<f64> = (0..modes).map(|m| log_pochhammer_down(l0, m)).collect();
            let mut value = KahanSum::new();
            let mut l = l0;
            loop {
                let lf = l as f64;
                let mut term = 0.0;
                for m in 0..modes {
                    term += coefs[m] * (bases[m] - log_p[m] - (lf + 1.0).ln()).exp();
                    log_p[m] += (lf + 1.0).ln() - (lf - m as f64).ln();
                }
                value.add(term);
                let bound = 4.0 * kmin * kmin / lf;
                if bound <= tol * value.value().abs() {
                    return Ok(SpectralEstimate { value: value.value(), error_estimate: bound, last_level: l });
                }
                if l >= l_max {
                    return Err(Error::NumericalFailure {
                        context: "spectral covariance",
                        detail: format!("tail bound {bound:e} above {tol:e} at L = {l}"),
                        estimate: Some(value.value()),
                    });
                }
                l += 1;
            }
        }
    }
}

/// Spectral covariance matrix of `zeta` at the given sites.
pub fn cov_zeta_matrix(sites: &[Site], policy: TailPolicy) -> Result<CovMatrix> {
    let mut tables: BTreeMap<usize, DualPolyTable> = BTreeMap::new();
    for &s in sites {
        check_site(s, usize::MAX)?;
        if let std::collections::btree_map::Entry::Vacant(e) = tables.entry(s.0) {
            e.insert(q_table_hermite(s.0)?);
        }
    }
    let d = sites.len();
    let mut entries = vec![0.0; d * d];
    let mut err: f64 = 0.0;
    for r in 0..d {
        for c in 0..=r {
            let (sr, sc) = (sites[r], sites[c]);
            let est = cov_zeta_spectral_tables(&tables[&sr.0], sr.1, &tables[&sc.0], sc.1, policy)?;
            entries[r * d + c] = est.value;
            entries[c * d + r] = est.value;
            err = err.max(est.error_estimate);
        }
    }
    CovMatrix::new(
        sites.iter().map(|&s| site_label(s)).collect(),
        entries,
        Provenance::Spectral { error_estimate: err },
    )
}

/// Equal-level closed form
/// `Cov(zeta^N_i, zeta^N_j) = 2 / (N + 1) sum_m q_m(x_i) q_m(x_j) / (m + 1)`.
pub fn cov_zeta_closed_equal_levels(n: usize, i: usize, j: usize) -> Result<f64> {
    check_site((n, i), usize::MAX)?;
    check_site((n, j), usize::MAX)?;
    let t = q_table_hermite(n)?;
    Ok(closed_from_table(&t, i, j))
}

fn closed_from_table(t: &DualPolyTable, i: usize, j: usize) -> f64 {
    let n = t.k;
    2.0 / (n as f64 + 1.0) * kahan_sum((0..n).map(|m| t.q(m, i) * t.q(m, j) / (m as f64 + 1.0)))
}

/// The whole `N x N` equal-level closed-form matrix.
pub fn cov_zeta_closed_matrix(n: usize) -> Result<CovMatrix> {
    let t = q_table_hermite(n)?;
    let mut entries = vec![0.0; n * n];
    for i in 1..=n {
        for j in 1..=i {
            let v = closed_from_table(&t, i, j);
            entries[(i - 1) * n + (j - 1)] = v;
            entries[(j - 1) * n + (i - 1)] = v;
        }
    }
    CovMatrix::new((1..=n).map(|i| site_label((n, i))).collect(), entries, Provenance::ClosedForm)
}

/// DBM fluctuation covariance
/// `2 sum_m q_m(x_i) q_m(x_j) / (N + 1) * min(t, s)^{m+1} / ((m + 1) (t s)^{m/2})`.
pub fn cov_dbm(n: usize, i: usize, j: usize, t: f64, s: f64) -> Result<f64> {
    check_site((n, i), usize::MAX)?;
    check_site((n, j), usize::MAX)?;
    let table = q_table_hermite(n)?;
    dbm_from_table(&table, i, j, t, s)
}

fn dbm_from_table(table: &DualPolyTable, i: usize, j: usize, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0 && s > 0.0 && t.is_finite() && s.is_finite()) {
        return Err(Error::invalid(format!("times must be positive, got t = {t}, s = {s}")));
    }
    let n = table.k;
    let (lmin, lt, ls) = (t.min(s).ln(), t.ln(), s.ln());
    let v = kahan_sum((0..n).map(|m| {
        let mf = m as f64;
        let f = ((mf + 1.0) * lmin - 0.5 * mf * (lt + ls)).exp() / (mf + 1.0);
        table.q(m, i) * table.q(m, j) * f
    }));
    Ok(2.0 / (n as f64 + 1.0) * v)
}

/// DBM covariance matrix at sites `(particle, time)`.
pub fn cov_dbm_matrix(n: usize, sites: &[(usize, f64)]) -> Result<CovMatrix> {
    let table = q_table_hermite(n)?;
    let d = sites.len();
    let mut entries = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..=r {
            check_site((n, sites[r].0), n)?;
            check_site((n, sites[c].0), n)?;
            let v = dbm_from_table(&table, sites[r].0, sites[c].0, sites[r].1, sites[c].1)?;
            entries[r * d + c] = v;
            entries[c * d + r] = v;
        }
    }
    CovMatrix::new(
        sites.iter().map(|(i, t)| format!("{i}@{t}")).collect(),
        entries,
        Provenance::ClosedForm,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygrid::hermite_grid;

    #[test]
    fn single_particle_closed_form() {
        // N = 1: q_0 = sqrt(2), so the variance is 2/2 * 2 = 2.
        assert!((cov_zeta_closed_equal_levels(1, 1, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!((cov_dbm(1, 1, 1, 3.0, 3.0).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_equals_closed_on_equal_levels() {
        for n in [1, 2, 5, 9] {
            for i in 1..=n {
                for j in 1..=n {
                    let s = cov_zeta_spectral((n, i), (n, j), TailPolicy::default()).unwrap();
                    let c = cov_zeta_closed_equal_levels(n, i, j).unwrap();
                    assert!((s.value - c).abs() < 1e-10, "N={n} ({i},{j}): {} vs {c}", s.value);
                }
            }
        }
    }

    #[test]
    fn bound_only_policy_reports_its_estimate() {
        let r = cov_zeta_spectral((2, 1), (2, 2), TailPolicy::BoundOnly { tol: 1e-9, l_max: 2000 });
        match r {
            Err(Error::NumericalFailure { estimate: Some(v), .. }) => {
                let c = cov_zeta_closed_equal_levels(2, 1, 2).unwrap();
                assert!((v - c).abs() < 1e-2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn small_cases() {
        let g = hermite_grid(2).unwrap();
        assert!((cov_xi_direct(&g, (1, 1), (1, 1)).unwrap() - 1.0).abs() < 1e-15);
        let v = cov_zeta_spectral((1, 1), (1, 1), TailPolicy::default()).unwrap();
        assert!((v.value - 2.0).abs() < 1e-9 && v.error_estimate <= SPECTRAL_TOL);
    }

    /// Independent route: the level sum telescopes to
    /// `sum_{l >= L} 1 / ((l + 1) (l - m)_{m+1}) = 1 / ((m + 1) (L - m)_{m+1})`.
    fn telescoped(s1: Site, s2: Site) -> f64 {
        let (t1, t2) = (q_table_hermite(s1.0).unwrap(), q_table_hermite(s2.0).unwrap());
        let l0 = s1.0.max(s2.0);
        let pre = 2.0 / (((s1.0 + 1) * (s2.0 + 1)) as f64).sqrt();
        let mut acc = 0.0;
        for m in 0..s1.0.min(s2.0) {
            let p1 = log_pochhammer_down(s1.0, m);
            let p2 = log_pochhammer_down(s2.0, m);
            let tail = 1.0 / ((m as f64 + 1.0) * log_pochhammer_down(l0, m).exp());
            acc += t1.q(m, s1.1) * t2.q(m, s2.1) * (0.5 * (p1 + p2)).exp() * tail;
        }
        pre * acc
    }

    #[test]
    fn spectral_matches_telescoped_sum() {
        for (s1, s2) in [((3, 1), (5, 2)), ((4, 4), (7, 1)), ((2, 2), (9, 5)), ((6, 3), (6, 6))] {
            let v = cov_zeta_spectral(s1, s2, TailPolicy::default()).unwrap().value;
            let o = telescoped(s1, s2);
            assert!((v - o).abs() < 1e-9, "{s1:?} {s2:?}: {v} vs {o}");
        }
    }

    #[test]
    fn zeta_splits_into_xi_plus_propagated_top() {
        let n = 7;
        let g = hermite_grid(n).unwrap();
        let top = cov_zeta_closed_matrix(n).unwrap();
        for (s1, s2) in [((3, 2), (5, 1)), ((1, 1), (4, 4)), ((6, 3), (6, 5))] {
            let xi = cov_xi_direct(&g, s1, s2).unwrap();
            let k1 = crate::kernels::diffusion_kernel(&g, s1.0, n).unwrap();
            let k2 = crate::kernels::diffusion_kernel(&g, s2.0, n).unwrap();
            let mut prop = 0.0;
            for b in 0..n {
                for d in 0..n {
                    prop += k1.get(s1.1 - 1, b) * top.get(b, d) * k2.get(s2.1 - 1, d);
                }
            }
            let z = cov_zeta_spectral(s1, s2, TailPolicy::default()).unwrap().value;
            assert!((xi + prop - z).abs() < 1e-9, "{s1:?} {s2:?}");
        }
    }

    #[test]
    fn propagated_top_level_vanishes() {
        let mut last = f64::INFINITY;
        for n in [10, 20, 40, 80] {
            let g = hermite_grid(n).unwrap();
            let row = crate::kernels::diffusion_kernel(&g, 2, n).unwrap();
            let top = cov_zeta_closed_matrix(n).unwrap();
            let mut v = 0.0;
            for b in 0..n {
                for d in 0..n {
                    v += row.get(0, b) * top.get(b, d) * row.get(0, d);
                }
            }
            assert!(v < last, "N = {n}: {v} >= {last}");
            last = v;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn closed_matrix_is_psd() {
        let m = cov_zeta_closed_matrix(30).unwrap();
        assert!(m.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn dbm_scaling() {
        for (i, j) in [(1, 1), (1, 3), (2, 4)] {
            let a = cov_dbm(4, i, j, 0.7, 1.9).unwrap();
            let b = cov_dbm(4, i, j, 2.1, 5.7).unwrap();
            assert!((b - 3.0 * a).abs() < 1e-12 * b.abs().max(1.0));
        }
        assert!(matches!(cov_dbm(3, 1, 1, 0.0, 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn xi_covariance_is_psd_and_vanishes_on_top() {
        let g = hermite_grid(6).unwrap();
        let sites: Vec<Site> = (1..=6).flat_map(|k| (1..=k).map(move |a| (k, a))).collect();
        let m = cov_xi_matrix(&g, &sites).unwrap();
        assert!(m.is_psd());
        assert_eq!(cov_xi_direct(&g, (6, 2), (3, 1)).unwrap(), 0.0);
        let var = innovation_variances(&g, 5).unwrap().variances;
        assert!((cov_xi_direct(&g, (5, 2), (5, 2)).unwrap() - var[1]).abs() < 1e-15);
    }
}
