//! Transition kernels of the jumping process between grid levels.
//!
//! `alpha^k_{a,b} = (x_a^k - x_b^{k+1})^{-2} / sum_{b'} (x_a^k - x_{b'}^{k+1})^{-2}`
//! is the probability of a jump from particle `a` on level `k` to
//! particle `b` on level `k + 1`. Multi-level kernels are the products
//! `K^{k,l} = A_k A_{k+1} ... A_{l-1}`.

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::linalg::kahan_sum;
use crate::polygrid::{Family, RootGrid};
use serde::{Deserialize, Serialize};

/// Magic bytes of the binary kernel format.
pub const KERNEL_MAGIC: [u8; 8] = *b"BINFKRN1";

/// Row renormalization starts once `l - k` exceeds this many levels.
pub const RENORMALIZE_SPAN: usize = 500;

/// A row-stochastic `k x l` matrix from level `k` to level `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub k: usize,
    pub l: usize,
    data: Vec<f64>,
}

impl TransitionKernel {
    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        TransitionKernel { k, l: k, data }
    }

    pub fn from_rows(k: usize, l: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * l {
            return Err(Error::invalid(format!("expected {} entries, got {}", k * l, data.len())));
        }
        Ok(TransitionKernel { k, l, data })
    }

    /// Entry `(a, b)`, zero-based.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.l + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.l..(a + 1) * self.l]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.k).map(|a| kahan_sum(self.row(a).iter().copied())).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.l)
            .map(|b| kahan_sum((0..self.k).map(|a| self.get(a, b))))
            .collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Matrix product `self * other`.
    pub fn then(&self, other: &TransitionKernel) -> Result<TransitionKernel> {
        if self.l != other.k {
            return Err(Error::invalid(format!(
                "cannot compose kernels {}->{} and {}->{}",
                self.k, self.l, other.k, other.l
            )));
        }
        let mut out = vec![0.0; self.k * other.l];
        for a in 0..self.k {
            let dst = &mut out[a * other.l..(a + 1) * other.l];
            for (c, &v) in self.row(a).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (d, o) in dst.iter_mut().zip(other.row(c)) {
                    *d += v * o;
                }
            }
        }
        Ok(TransitionKernel { k: self.k, l: other.l, data: out })
    }

    /// `(K f)(a) = sum_b K(a, b) f(b)` for `f` on level `l`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.l);
        (0..self.k)
            .map(|a| self.row(a).iter().zip(f).map(|(k, v)| k * v).sum())
            .collect()
    }

    /// `(K^T g)(b) = sum_a K(a, b) g(a)` for `g` on level `k`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.k);
        let mut out = vec![0.0; self.l];
        for (a, &ga) in g.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(a)) {
                *o += v * ga;
            }
        }
        out
    }

    fn renormalize_rows(&mut self) {
        let l = self.l;
        for row in self.data.chunks_mut(l) {
            let s = kahan_sum(row.iter().copied());
            row.iter_mut().for_each(|v| *v /= s);
        }
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["a", "b", "value"]);
        for a in 0..self.k {
            for b in 0..self.l {
                t.push(vec![(a + 1).to_string(), (b + 1).to_string(), fmt_f64(self.get(a, b))]);
            }
        }
        t
    }

    /// Row-major little-endian `f64` values behind a 16-byte header:
    /// magic, `k` as `u32`, `l` as `u32`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend_from_slice(&KERNEL_MAGIC);
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.l as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..8] != KERNEL_MAGIC {
            return Err(Error::Parse("not a kernel file".into()));
        }
        let k = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let l = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() != 8 * k * l {
            return Err(Error::Parse(format!("kernel body has {} bytes, expected {}", body.len(), 8 * k * l)));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(TransitionKernel { k, l, data })
    }
}

fn check_transition_level(grid: &RootGrid, k: usize) -> Result<()> {
    if !(grid.has_level(k) && grid.has_level(k + 1)) {
        return Err(Error::invalid(format!(
            "levels {k} and {} must lie in {}..={}",
            k + 1,
            grid.lowest(),
            grid.n()
        )));
    }
    Ok(())
}

/// Inverse squared distances `(x_a^k - x_b^{k+1})^{-2}` for one row.
fn inverse_square_row(grid: &RootGrid, k: usize, a: usize) -> Result<Vec<f64>> {
    let xa = grid.level(k)[a];
    grid.level(k + 1)
        .iter()
        .enumerate()
        .map(|(b, &xb)| {
            let d = xa - xb;
            if d == 0.0 {
                Err(Error::DivisionByZero { k, a: a + 1, b: b + 1 })
            } else {
                Ok(1.0 / (d * d))
            }
        })
        .collect()
}

/// The one-step kernel `A_k` from level `k` to level `k + 1`.
pub fn alpha_matrix(grid: &RootGrid, k: usize) -> Result<TransitionKernel> {
    check_transition_level(grid, k)?;
    let mut data = Vec::with_capacity(k * (k + 1));
    for a in 0..k {
        let row = inverse_square_row(grid, k, a)?;
        let s = kahan_sum(row.iter().copied());
        data.extend(row.iter().map(|v| v / s));
    }
    TransitionKernel::from_rows(k, k + 1, data)
}

/// The multi-level kernel `K^{k,l}`; the identity when `l == k`.
pub fn diffusion_kernel(grid: &RootGrid, k: usize, l: usize) -> Result<TransitionKernel> {
    if l < k {
        return Err(Error::invalid(format!("need l >= k, got k = {k}, l = {l}")));
    }
    grid.try_level(k)?;
    grid.try_level(l)?;
    let renorm = l - k > RENORMALIZE_SPAN;
    let mut acc = TransitionKernel::identity(k);
    for j in k..l {
        acc = acc.then(&alpha_matrix(grid, j)?)?;
        if renorm {
            acc.renormalize_rows();
        }
    }
    Ok(acc)
}

/// The dual operator `D_k`, mapping `f` on level `k` to
/// `(D_k f)(x_b^{k+1}) = sum_a alpha^k_{a,b} f(x_a^k)`.
pub fn apply_dual(grid: &RootGrid, k: usize, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != k {
        return Err(Error::invalid(format!("function on level {k} needs {k} values")));
    }
    Ok(alpha_matrix(grid, k)?.apply_transpose(f))
}

/// Variances of the independent Gaussian innovations on level `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub level: usize,
    pub variances: Vec<f64>,
}

/// `Var eta^l_b = 2 / sum_{b'} (x_b^l - x_{b'}^{l+1})^{-2}`.
pub fn innovation_variances(grid: &RootGrid, l: usize) -> Result<InnovationSpec> {
    check_transition_level(grid, l)?;
    let variances = (0..l)
        .map(|b| Ok(2.0 / kahan_sum(inverse_square_row(grid, l, b)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(InnovationSpec { level: l, variances })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMethod {
    /// Closed form of a classical family.
    ClosedForm,
    /// `1 / sum_b (y - x_b^{k+1})^{-2}`.
    InverseSquareSum,
    /// `-P_{k+1}(y) / (k (k + 1) P_{k-1}(y))` from root products in log space.
    RootProduct,
}

/// The orthogonality weights `w_k` at the points of level `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub k: usize,
    pub weights: Vec<f64>,
    pub method: WeightMethod,
}

/// Weights on level `k`: closed form for classical families, root products otherwise.
pub fn ortho_weights(grid: &RootGrid, k: usize) -> Result<WeightVector> {
    let method = match grid.family {
        Family::General => WeightMethod::RootProduct,
        _ => WeightMethod::ClosedForm,
    };
    ortho_weights_with(grid, k, method)
}

pub fn ortho_weights_with(grid: &RootGrid, k: usize, method: WeightMethod) -> Result<WeightVector> {
    let pts = grid.try_level(k)?;
    let n = grid.n() as f64;
    let kf = k as f64;
    let weights: Vec<f64> = match method {
        WeightMethod::ClosedForm => match grid.family {
            Family::Hermite => vec![1.0 / (kf + 1.0); k],
            Family::Laguerre { .. } => pts.iter().map(|y| y / (kf + 1.0)).collect(),
            Family::Jacobi { alpha, beta } => {
                let c = (kf + 1.0) * (alpha + beta + 2.0 * n - kf);
                pts.iter().map(|y| (1.0 - y * y) / c).collect()
            }
            Family::General => {
                return Err(Error::invalid("no closed-form weights for a general grid"));
            }
        },
        WeightMethod::InverseSquareSum => {
            check_transition_level(grid, k)?;
            (0..k)
                .map(|a| Ok(1.0 / kahan_sum(inverse_square_row(grid, k, a)?)))
                .collect::<Result<Vec<_>>>()?
        }
        WeightMethod::RootProduct => {
            check_transition_level(grid, k)?;
            let upper = grid.level(k + 1);
            let lower: &[f64] = if k >= 2 { grid.try_level(k - 1)? } else { &[] };
            pts.iter()
                .map(|&y| root_product_weight(y, upper, lower, k))
                .collect::<Result<Vec<_>>>()?
        }
    };
    if let Some((a, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::numerical(
            "orthogonality weights",
            format!("nonpositive weight {w} at level {k}, point {}", a + 1),
        ));
    }
    Ok(WeightVector { k, weights, method })
}

fn root_product_weight(y: f64, upper: &[f64], lower: &[f64], k: usize) -> Result<f64> {
    let mut log = 0.0;
    let mut negative = true;
    for &x in upper {
        let d = y - x;
        if d == 0.0 {
            return Err(Error::numerical("orthogonality weights", "grid point coincides with a root above"));
        }
        log += d.abs().ln();
        negative ^= d < 0.0;
    }
    for &x in lower {
        let d = y - x;
        if d == 0.0 {
            return Err(Error::numerical("orthogonality weights", "grid point coincides with a root below"));
        }
        log -= d.abs().ln();
        negative ^= d < 0.0;
    }
    log -= ((k * (k + 1)) as f64).ln();
    let mag = log.exp();
    Ok(if negative { -mag } else { mag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygrid::{appell_grid, hermite_grid, SpectrumN};

    #[test]
    fn hermite_innovation_variance_is_two_over_l_plus_one() {
        let g = hermite_grid(12).unwrap();
        for l in 1..12 {
            for v in innovation_variances(&g, l).unwrap().variances {
                assert!((v - 2.0 / (l as f64 + 1.0)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn coincident_points_are_reported() {
        let g = appell_grid(&SpectrumN::new(vec![0.0, 0.0, 1.0]).unwrap()).unwrap();
        match alpha_matrix(&g, 2) {
            Err(Error::DivisionByZero { k: 2, a: 1, b: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn three_weight_formulas_agree() {
        let s = SpectrumN::new(vec![-2.0, -1.1, 0.3, 0.4, 1.7, 3.0, 5.5]).unwrap();
        let g = appell_grid(&s).unwrap();
        for k in 1..7 {
            let a = ortho_weights_with(&g, k, WeightMethod::InverseSquareSum).unwrap();
            let b = ortho_weights_with(&g, k, WeightMethod::RootProduct).unwrap();
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert!((x - y).abs() < 1e-12 * x.abs(), "level {k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn closed_form_weights_match_inverse_square_sums() {
        use crate::polygrid::{jacobi_grid, laguerre_grid};
        let grids = [
            hermite_grid(9).unwrap(),
            laguerre_grid(9, 1.5).unwrap(),
            jacobi_grid(9, 0.5, -0.25).unwrap(),
        ];
        for g in &grids {
            for k in 1..9 {
                let c = ortho_weights_with(g, k, WeightMethod::ClosedForm).unwrap();
                let i = ortho_weights_with(g, k, WeightMethod::InverseSquareSum).unwrap();
                for (x, y) in c.weights.iter().zip(&i.weights) {
                    assert!((x - y).abs() < 1e-11 * y, "{:?} level {k}: {x} vs {y}", g.family);
                }
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = hermite_grid(6).unwrap();
        let k = diffusion_kernel(&g, 2, 5).unwrap();
        let back = TransitionKernel::from_binary(&k.to_binary()).unwrap();
        assert_eq!(k, back);
        assert!(TransitionKernel::from_binary(b"garbage").is_err());
    }

    #[test]
    fn linear_functions_are_preserved() {
        let s = SpectrumN::new(vec![-1.0, 0.2, 0.5, 2.0, 2.5, 4.0]).unwrap();
        let g = appell_grid(&s).unwrap();
        let k = diffusion_kernel(&g, 2, 6).unwrap();
        let image = k.apply(g.level(6));
        for (a, b) in image.iter().zip(g.level(2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
