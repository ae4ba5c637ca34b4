//! Dual orthogonal polynomials of a grid level.
//!
//! On level `k` the monic polynomials `Q^{(k)}_m`, `m < k`, are orthogonal
//! for the discrete measure `sum_a w_k(x_a^k) delta_{x_a^k}`. They
//! diagonalize the dual operator:
//! `D_k Q^{(k)}_m = (1 - (m + 1) / (k + 1)) Q^{(k+1)}_m`.
//!
//! Tables store the normalized values `q_m = Q_m / sqrt(<Q_m, Q_m>)` and the
//! logarithms of the norms, which overflow for large `k`.

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::kernels::{apply_dual, ortho_weights, TransitionKernel};
use crate::linalg::kahan_sum;
use crate::polygrid::{family_grid, hermite_roots, Family, RootGrid};
use serde::{Deserialize, Serialize};

/// Orthogonality loss above which the general construction fails.
pub const ORTHO_LOSS_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPolyTable {
    pub k: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `q[m][i] = q_m(x_{i+1}^k)`.
    q: Vec<Vec<f64>>,
    log_norms: Vec<f64>,
}

impl DualPolyTable {
    /// `q_m(x_i^k)` with `i` counted from 1.
    pub fn q(&self, m: usize, i: usize) -> f64 {
        self.q[m][i - 1]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.q[m]
    }

    /// `<Q_m, Q_m>_k`.
    pub fn norm(&self, m: usize) -> f64 {
        self.log_norms[m].exp()
    }

    pub fn log_norm(&self, m: usize) -> f64 {
        self.log_norms[m]
    }

    /// Monic values `Q_m(x_i^k)`.
    pub fn monic(&self, m: usize) -> Vec<f64> {
        let s = (0.5 * self.log_norms[m]).exp();
        self.q[m].iter().map(|v| v * s).collect()
    }

    /// `max |sum_i w_i q_m q_n - delta_mn|`.
    pub fn orthogonality_loss(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.k {
            for n in 0..=m {
                let ip = weighted_dot(&self.weights, &self.q[m], &self.q[n]);
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["m", "i", "q", "norm"]);
        for m in 0..self.k {
            let norm = fmt_f64(self.norm(m));
            for i in 0..self.k {
                t.push(vec![m.to_string(), (i + 1).to_string(), fmt_f64(self.q[m][i]), norm.clone()]);
            }
        }
        t
    }
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    kahan_sum(w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b))
}

/// `ln (k - m)_{m+1} = sum_{j=0}^{m} ln (k - j)`.
pub fn log_pochhammer_down(k: usize, m: usize) -> f64 {
    (0..=m).map(|j| ((k - j) as f64).ln()).sum()
}

/// Hermite table on level `k`.
///
/// The normalized recurrence
/// `sqrt(k - m - 1) q_{m+1} + sqrt(k - m) q_{m-1} = z q_m`
/// is run from `m = k - 1` downward, which is the stable direction at the
/// edge of the spectrum, and scaled so that `sum_m q_m(z)^2 = k + 1` with
/// `q_0 > 0`.
pub fn q_table_hermite(k: usize) -> Result<DualPolyTable> {
    let points = hermite_roots(k)?;
    let mut q = vec![vec![0.0; k]; k];
    for (i, &z) in points.iter().enumerate() {
        let col = hermite_dual_column(k, z);
        for (m, v) in col.into_iter().enumerate() {
            q[m][i] = v;
        }
    }
    let log_norms = (0..k)
        .map(|m| log_pochhammer_down(k, m) - ((k + 1) as f64).ln())
        .collect();
    Ok(DualPolyTable { k, points, weights: vec![1.0 / (k as f64 + 1.0); k], q, log_norms })
}

fn hermite_dual_column(k: usize, z: f64) -> Vec<f64> {
    let mut q = vec![0.0; k];
    q[k - 1] = 1.0;
    if k >= 2 {
        q[k - 2] = z;
    }
    for m in (1..k.saturating_sub(1)).rev() {
        q[m - 1] = (z * q[m] - ((k - m - 1) as f64).sqrt() * q[m + 1]) / ((k - m) as f64).sqrt();
        // Rescaling keeps the sum of squares below overflow.
        if q[m - 1].abs() > 1e100 {
            for v in &mut q[m - 1..] {
                *v *= 1e-100;
            }
        }
    }
    let s = kahan_sum(q.iter().map(|v| v * v));
    let scale = ((k as f64 + 1.0) / s).sqrt() * q[0].signum();
    q.iter_mut().for_each(|v| *v *= scale);
    q
}

/// Table on level `k` of an arbitrary grid by the discrete Stieltjes
/// procedure with twice-iterated full reorthogonalization.
pub fn q_table_general(grid: &RootGrid, k: usize) -> Result<DualPolyTable> {
    let points = grid.try_level(k)?.to_vec();
    let weights = ortho_weights(grid, k)?.weights;
    let total = kahan_sum(weights.iter().copied());
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut log_norms = Vec::with_capacity(k);
    q.push(vec![1.0 / total.sqrt(); k]);
    log_norms.push(total.ln());
    let mut beta_prev = 0.0;
    for m in 0..k - 1 {
        let mut v: Vec<f64> = points.iter().zip(&q[m]).map(|(x, p)| x * p).collect();
        let a = weighted_dot(&weights, &v, &q[m]);
        for i in 0..k {
            v[i] -= a * q[m][i];
            if m > 0 {
                v[i] -= beta_prev * q[m - 1][i];
            }
        }
        for _ in 0..2 {
            for p in q.iter() {
                let c = weighted_dot(&weights, &v, p);
                v.iter_mut().zip(p).for_each(|(vi, pi)| *vi -= c * pi);
            }
        }
        let beta = weighted_dot(&weights, &v, &v).sqrt();
        if !(beta > 0.0) {
            return Err(Error::numerical(
                "dual polynomial table",
                format!("recurrence broke down at m = {}", m + 1),
            ));
        }
        v.iter_mut().for_each(|x| *x /= beta);
        log_norms.push(log_norms[m] + 2.0 * beta.ln());
        q.push(v);
        beta_prev = beta;
    }
    let table = DualPolyTable { k, points, weights, q, log_norms };
    for m in 0..k {
        for n in 0..=m {
            let ip = weighted_dot(&table.weights, &table.q[m], &table.q[n]);
            let target = if m == n { 1.0 } else { 0.0 };
            if (ip - target).abs() > ORTHO_LOSS_LIMIT {
                return Err(Error::NumericalFailure {
                    context: "dual polynomial table",
                    detail: format!("loss of orthogonality {:e} at m = {m}", (ip - target).abs()),
                    estimate: Some((ip - target).abs()),
                });
            }
        }
    }
    Ok(table)
}

/// Table on level `k`, using the Hermite recurrence when it applies.
pub fn q_table(grid: &RootGrid, k: usize) -> Result<DualPolyTable> {
    match grid.family {
        Family::Hermite => q_table_hermite(k),
        _ => q_table_general(grid, k),
    }
}

/// The eigenvalue `1 - (m + 1) / (k + 1)` of `D_k` on `Q^{(k)}_m`.
pub fn dual_eigenvalue(k: usize, m: usize) -> f64 {
    1.0 - (m as f64 + 1.0) / (k as f64 + 1.0)
}

/// `|| D_k Q^{(k)}_m - lambda Q^{(k+1)}_m || / || Q^{(k+1)}_m ||` in the
/// weighted norm of level `k + 1`.
pub fn eigenrelation_residual(grid: &RootGrid, k: usize, m: usize) -> Result<f64> {
    let lo = q_table_general(grid, k)?;
    let hi = q_table_general(grid, k + 1)?;
    residual_from_tables(grid, &lo, &hi, m)
}

/// Residuals for every `m < k` on level `k`.
pub fn eigenrelation_residuals(grid: &RootGrid, k: usize) -> Result<Vec<f64>> {
    let lo = q_table_general(grid, k)?;
    let hi = q_table_general(grid, k + 1)?;
    (0..k).map(|m| residual_from_tables(grid, &lo, &hi, m)).collect()
}

fn residual_from_tables(grid: &RootGrid, lo: &DualPolyTable, hi: &DualPolyTable, m: usize) -> Result<f64> {
    let k = lo.k;
    if m >= k {
        return Err(Error::invalid(format!("need m < k, got m = {m}, k = {k}")));
    }
    let image = apply_dual(grid, k, lo.row(m))?;
    let scale = (0.5 * (lo.log_norm(m) - hi.log_norm(m))).exp();
    let lambda = dual_eigenvalue(k, m);
    let r: Vec<f64> = image
        .iter()
        .zip(hi.row(m))
        .map(|(d, q)| d * scale - lambda * q)
        .collect();
    Ok(weighted_dot(&hi.weights, &r, &r).sqrt())
}

/// Eigenrelation residual for a classical family on a grid with top level `k + 2`.
pub fn check_eigenrelation(family: Family, k: usize, m: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("level must be positive"));
    }
    let grid = family_grid(family, k + 2)?;
    eigenrelation_residual(&grid, k, m)
}

/// Hermite kernel `K^{k,l}(a -> b)` from its spectral expansion.
pub fn spectral_kernel(k: usize, l: usize, a: usize, b: usize) -> Result<f64> {
    if l < k || a == 0 || a > k || b == 0 || b > l {
        return Err(Error::invalid(format!("bad indices k={k}, l={l}, a={a}, b={b}")));
    }
    let lo = q_table_hermite(k)?;
    let hi = q_table_hermite(l)?;
    Ok(spectral_entry(&lo, &hi, a - 1, b - 1))
}

/// The whole `k x l` Hermite kernel from its spectral expansion.
pub fn spectral_kernel_matrix(k: usize, l: usize) -> Result<TransitionKernel> {
    if l < k {
        return Err(Error::invalid(format!("need l >= k, got k = {k}, l = {l}")));
    }
    let lo = q_table_hermite(k)?;
    let hi = q_table_hermite(l)?;
    let mut data = Vec::with_capacity(k * l);
    for a in 0..k {
        for b in 0..l {
            data.push(spectral_entry(&lo, &hi, a, b));
        }
    }
    TransitionKernel::from_rows(k, l, data)
}

/// Factor `sqrt(norm_l / norm_k) * prod_{j=k}^{l-1} (1 - (m+1)/(j+1))`.
pub fn hermite_mode_factor(k: usize, l: usize, m: usize) -> f64 {
    let (pk, pl) = (log_pochhammer_down(k, m), log_pochhammer_down(l, m));
    (0.5 * (pk - pl) + 0.5 * ((k as f64 + 1.0) / (l as f64 + 1.0)).ln()).exp()
}

fn spectral_entry(lo: &DualPolyTable, hi: &DualPolyTable, a: usize, b: usize) -> f64 {
    let (k, l) = (lo.k, hi.k);
    let w = lo.weights[a];
    kahan_sum((0..k).map(|m| w * lo.q[m][a] * hi.q[m][b] * hermite_mode_factor(k, l, m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::diffusion_kernel;
    use crate::polygrid::hermite_grid;

    #[test]
    fn hermite_table_is_orthonormal_and_complete() {
        let t = q_table_hermite(25).unwrap();
        assert!(t.orthogonality_loss() < 1e-12);
        for i in 1..=25 {
            let s: f64 = (0..25).map(|m| t.q(m, i).powi(2)).sum::<f64>() / 26.0;
            assert!((s - 1.0).abs() < 1e-13);
        }
        assert!((t.q(0, 3) - (26.0f64 / 25.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermite_table_is_stable_at_large_k() {
        for k in [400usize, 800, 2000] {
            let t = q_table_hermite(k).unwrap();
            let q0 = ((k as f64 + 1.0) / k as f64).sqrt();
            for i in 1..=k {
                assert!((t.q(0, i) - q0).abs() < 1e-10, "k = {k}, i = {i}");
                assert!((0..k).all(|m| t.q(m, i).is_finite()));
            }
        }
    }

    #[test]
    fn general_table_agrees_with_hermite_table() {
        let g = hermite_grid(12).unwrap();
        let a = q_table_hermite(9).unwrap();
        let b = q_table_general(&g, 9).unwrap();
        for m in 0..9 {
            assert!((a.log_norm(m) - b.log_norm(m)).abs() < 1e-11);
            for i in 1..=9 {
                assert!((a.q(m, i) - b.q(m, i)).abs() < 1e-10, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn hermite_monic_values_follow_recurrence() {
        // Q_{m+1} + (k - m) Q_{m-1} = z Q_m with Q_0 = 1, Q_1 = z.
        let k = 7;
        let t = q_table_hermite(k).unwrap();
        let monic: Vec<Vec<f64>> = (0..k).map(|m| t.monic(m)).collect();
        for i in 0..k {
            let z = t.points[i];
            assert!((monic[0][i] - 1.0).abs() < 1e-13);
            assert!((monic[1][i] - z).abs() < 1e-12);
            for m in 1..k - 1 {
                let lhs = monic[m + 1][i] + (k - m) as f64 * monic[m - 1][i];
                assert!((lhs - z * monic[m][i]).abs() < 1e-9 * monic[m][i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn spectral_kernel_matches_product() {
        let g = hermite_grid(20).unwrap();
        let direct = diffusion_kernel(&g, 6, 20).unwrap();
        let spec = spectral_kernel_matrix(6, 20).unwrap();
        for (a, b) in direct.data().iter().zip(spec.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((spectral_kernel(6, 20, 2, 5).unwrap() - direct.get(1, 4)).abs() < 1e-12);
    }

    #[test]
    fn hermite_eigenrelation() {
        let g = hermite_grid(14).unwrap();
        for k in 1..=12 {
            for r in eigenrelation_residuals(&g, k).unwrap() {
                assert!(r < 1e-10, "k = {k}: {r}");
            }
        }
    }
}
