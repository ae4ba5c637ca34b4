//! Monte Carlo samplers.
//!
//! All randomness flows through [`RngStream`], a ChaCha8 generator keyed by
//! a seed and a stream id. Gaussian draws use the ziggurat sampler of
//! `rand_distr`.

use crate::covariance::{CovMatrix, Provenance};
use crate::dualpoly::{log_pochhammer_down, q_table_hermite};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::kernels::{alpha_matrix, innovation_variances, TransitionKernel};
use crate::linalg::tridiagonal_eigenvalues;
use crate::polygrid::{hermite_grid, hermite_roots, RootGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Name of the Gaussian sampler, recorded in sample metadata.
pub const NORMAL_METHOD: &str = "rand_distr ziggurat on chacha8";

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Square root of a chi-squared variable with `dof` degrees of freedom.
    pub fn chi(&mut self, dof: f64) -> Result<f64> {
        let d = ChiSquared::new(dof).map_err(|e| Error::invalid(format!("chi dof {dof}: {e}")))?;
        Ok(d.sample(&mut self.rng).sqrt())
    }
}

/// A sample of a corners field on levels `lowest..=top`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornersSample {
    pub family: String,
    pub lowest: usize,
    pub levels: Vec<Vec<f64>>,
    pub truncation: Option<usize>,
    /// Per-coordinate variance missing because of the truncation.
    pub tail_bound: Option<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl CornersSample {
    pub fn top(&self) -> usize {
        self.lowest + self.levels.len() - 1
    }

    /// Value at level `k`, particle `i` (1-based).
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.levels[k - self.lowest][i - 1]
    }

    /// Values in level-major order.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k", "i", "value"]);
        t.comment(format!("family={} seed={} stream={}", self.family, self.seed, self.stream));
        if let Some(l) = self.truncation {
            t.comment(format!("truncation={l} tail_bound={}", fmt_f64(self.tail_bound.unwrap_or(0.0))));
        }
        for (d, lvl) in self.levels.iter().enumerate() {
            for (i, v) in lvl.iter().enumerate() {
                t.push(vec![(self.lowest + d).to_string(), (i + 1).to_string(), fmt_f64(*v)]);
            }
        }
        t
    }
}

/// Sampler of `xi` on a fixed grid, `xi^N = 0`, `xi^k = A_k xi^{k+1} + eta^k`.
#[derive(Clone, Debug)]
pub struct XiSampler {
    family: String,
    lowest: usize,
    n: usize,
    alphas: Vec<TransitionKernel>,
    sds: Vec<Vec<f64>>,
}

impl XiSampler {
    pub fn new(grid: &RootGrid) -> Result<Self> {
        let (lowest, n) = (grid.lowest(), grid.n());
        let mut alphas = Vec::new();
        let mut sds = Vec::new();
        for l in lowest..n {
            alphas.push(alpha_matrix(grid, l)?);
            sds.push(innovation_variances(grid, l)?.variances.iter().map(|v| v.sqrt()).collect());
        }
        Ok(XiSampler { family: format!("{:?}", grid.family), lowest, n, alphas, sds })
    }

    pub fn sample(&self, rng: &mut RngStream) -> CornersSample {
        let mut levels = vec![vec![0.0; self.n]];
        for l in (self.lowest..self.n).rev() {
            let idx = l - self.lowest;
            let mut v = self.alphas[idx].apply(levels.last().expect("level above"));
            for (x, sd) in v.iter_mut().zip(&self.sds[idx]) {
                *x += sd * rng.normal();
            }
            levels.push(v);
        }
        levels.reverse();
        CornersSample {
            family: self.family.clone(),
            lowest: self.lowest,
            levels,
            truncation: None,
            tail_bound: None,
            seed: rng.seed(),
            stream: rng.stream(),
        }
    }
}

pub fn sample_xi(grid: &RootGrid, rng: &mut RngStream) -> Result<CornersSample> {
    Ok(XiSampler::new(grid)?.sample(rng))
}

/// Default truncation level for `zeta`.
pub fn default_truncation(k_max: usize) -> usize {
    1000.max(100 * k_max)
}

/// How levels above `k_max` enter the `zeta` sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZetaMethod {
    /// One Gaussian per dual mode carrying the summed contribution of all
    /// levels `k_max < l <= L`.
    Projected,
    /// Innovations on every level of a Hermite grid of top level `L + 1`.
    Direct,
}

/// Sampler of `zeta^k`, `1 <= k <= k_max`, truncated after level `L`.
#[derive(Clone, Debug)]
pub struct ZetaSampler {
    pub k_max: usize,
    pub truncation: usize,
    pub method: ZetaMethod,
    alphas: Vec<TransitionKernel>,
    /// `coef[a][m]`: loading of mode `m` on `zeta^{k_max}_a`.
    coef: Vec<Vec<f64>>,
    mode_sd: Vec<f64>,
    direct: Option<XiSampler>,
}

impl ZetaSampler {
    pub fn new(k_max: usize, truncation: usize, method: ZetaMethod) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if truncation < k_max {
            return Err(Error::invalid(format!("truncation level {truncation} below k_max {k_max}")));
        }
        match method {
            ZetaMethod::Direct => {
                let grid = hermite_grid(truncation + 1)?;
                Ok(ZetaSampler {
                    k_max,
                    truncation,
                    method,
                    alphas: Vec::new(),
                    coef: Vec::new(),
                    mode_sd: Vec::new(),
                    direct: Some(XiSampler::new(&grid)?),
                })
            }
            ZetaMethod::Projected => {
                let grid = hermite_grid(k_max)?;
                let alphas = (1..k_max).map(|k| alpha_matrix(&grid, k)).collect::<Result<_>>()?;
                let table = q_table_hermite(k_max)?;
                let k = k_max as f64;
                // The level-l part of zeta^k_a is
                // sum_m w_k q_m(a) sqrt(P_k (k + 1)) / sqrt(P_l (l + 1)) Y^l_m, Y ~ N(0, 2).
                let coef = (1..=k_max)
                    .map(|a| {
                        (0..k_max)
                            .map(|m| {
                                let lp = log_pochhammer_down(k_max, m);
                                table.q(m, a) / (k + 1.0) * (0.5 * (lp + (k + 1.0).ln())).exp()
                            })
                            .collect()
                    })
                    .collect();
                let mode_sd = (0..k_max)
                    .map(|m| {
                        let mut lp = log_pochhammer_down(k_max + 1, m);
                        let mut s = 0.0;
                        for l in k_max + 1..=truncation {
                            s += (-lp - (l as f64 + 1.0).ln()).exp();
                            lp += ((l + 1) as f64).ln() - ((l - m) as f64).ln();
                        }
                        (2.0 * s).sqrt()
                    })
                    .collect();
                Ok(ZetaSampler { k_max, truncation, method, alphas, coef, mode_sd, direct: None })
            }
        }
    }

    /// Bound `4 k^2 / L` on the variance left out by the truncation.
    pub fn tail_bound(&self) -> f64 {
        4.0 * (self.k_max * self.k_max) as f64 / self.truncation as f64
    }

    pub fn sample(&self, rng: &mut RngStream) -> CornersSample {
        let levels = match &self.direct {
            Some(xi) => {
                let s = xi.sample(rng);
                s.levels[..self.k_max].to_vec()
            }
            None => {
                let k = self.k_max;
                let y: Vec<f64> = self.mode_sd.iter().map(|sd| sd * rng.normal()).collect();
                let inn = (2.0 / (k as f64 + 1.0)).sqrt();
                let mut top: Vec<f64> = self
                    .coef
                    .iter()
                    .map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                for v in top.iter_mut() {
                    *v += inn * rng.normal();
                }
                let mut levels = vec![top];
                for l in (1..k).rev() {
                    let mut v = self.alphas[l - 1].apply(levels.last().expect("level above"));
                    let sd = (2.0 / (l as f64 + 1.0)).sqrt();
                    for x in v.iter_mut() {
                        *x += sd * rng.normal();
                    }
                    levels.push(v);
                }
                levels.reverse();
                levels
            }
        };
        CornersSample {
            family: "hermite".into(),
            lowest: 1,
            levels,
            truncation: Some(self.truncation),
            tail_bound: Some(self.tail_bound()),
            seed: rng.seed(),
            stream: rng.stream(),
        }
    }
}

pub fn sample_zeta(k_max: usize, truncation: usize, rng: &mut RngStream) -> Result<CornersSample> {
    Ok(ZetaSampler::new(k_max, truncation, ZetaMethod::Projected)?.sample(rng))
}

/// Variance of `zeta^k_a` kept by truncation at `L`:
/// `2 sum_{l=k}^{L} sum_b K^{k,l}(a, b)^2 / (l + 1)` in its mode form.
pub fn truncated_zeta_variance(k: usize, a: usize, truncation: usize) -> Result<f64> {
    let table = q_table_hermite(k)?;
    let w = 1.0 / (k as f64 + 1.0);
    let mut total = 0.0;
    for m in 0..k {
        let c = w * table.q(m, a);
        let base = 2.0 * log_pochhammer_down(k, m) - table.log_norm(m);
        let mut lp = log_pochhammer_down(k, m);
        let mut s = 0.0;
        for l in k..=truncation {
            s += (base - lp - (l as f64 + 1.0).ln()).exp();
            lp += ((l + 1) as f64).ln() - ((l - m) as f64).ln();
        }
        total += 2.0 * c * c * s;
    }
    Ok(total)
}

/// A DBM trajectory observed at `times`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbmPath {
    pub n: usize,
    pub times: Vec<f64>,
    /// `values[r][i]` is `zeta_{i+1}(times[r])`.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub fine: Option<FinePath>,
}

/// The same path on the refinement grid, with the driving increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinePath {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub dw: Vec<Vec<f64>>,
}

impl DbmPath {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["i", "t", "value", "seed"]);
        for (r, tm) in self.times.iter().enumerate() {
            for i in 0..self.n {
                t.push(vec![(i + 1).to_string(), fmt_f64(*tm), fmt_f64(self.values[r][i]), self.seed.to_string()]);
            }
        }
        t
    }
}

/// Refinement factor: the step is `min(times) / DBM_REFINE`.
pub const DBM_REFINE: usize = 200;

/// Integrates the closed-form DBM fluctuation solution
/// `zeta_i(t) = sqrt(2) sum_m U_im t^{-m/2} int_0^t s^{m/2} dB_m(s)`,
/// with `U_im = q_m(x_i) / sqrt(N + 1)` and `B = U^T W`.
#[derive(Clone, Debug)]
pub struct DbmSolver {
    pub n: usize,
    pub times: Vec<f64>,
    roots: Vec<f64>,
    u: Vec<Vec<f64>>,
    /// Fine grid points, ending exactly on each observation time.
    grid: Vec<f64>,
    observe: Vec<usize>,
}

impl DbmSolver {
    pub fn new(n: usize, times: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        if times.is_empty() || !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times must be positive and strictly increasing"));
        }
        let table = q_table_hermite(n)?;
        let scale = 1.0 / (n as f64 + 1.0).sqrt();
        let u = (1..=n).map(|i| (0..n).map(|m| table.q(m, i) * scale).collect()).collect();
        let delta = times[0] / DBM_REFINE as f64;
        let mut grid = vec![0.0];
        let mut observe = Vec::new();
        let mut prev = 0.0;
        for &t in times {
            let steps = ((t - prev) / delta).ceil().max(1.0) as usize;
            for s in 1..=steps {
                grid.push(if s == steps { t } else { prev + (t - prev) * s as f64 / steps as f64 });
            }
            observe.push(grid.len() - 1);
            prev = t;
        }
        Ok(DbmSolver { n, times: times.to_vec(), roots: hermite_roots(n)?, u, grid, observe })
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn simulate(&self, rng: &mut RngStream, keep_fine: bool) -> DbmPath {
        let n = self.n;
        let mut integ = vec![0.0; n];
        let mut values = Vec::with_capacity(self.times.len());
        let mut fine = keep_fine.then(|| FinePath {
            grid: self.grid.clone(),
            values: vec![vec![0.0; n]],
            dw: Vec::new(),
        });
        let mut next_obs = 0;
        for s in 1..self.grid.len() {
            let (a, b) = (self.grid[s - 1], self.grid[s]);
            let sd = (b - a).sqrt();
            let dw: Vec<f64> = (0..n).map(|_| sd * rng.normal()).collect();
            let mid = 0.5 * (a + b);
            for (m, acc) in integ.iter_mut().enumerate() {
                let db: f64 = (0..n).map(|j| self.u[j][m] * dw[j]).sum();
                *acc += mid.powf(0.5 * m as f64) * db;
            }
            let need = next_obs < self.observe.len() && self.observe[next_obs] == s;
            if need || fine.is_some() {
                let z = self.evaluate(&integ, b);
                if need {
                    values.push(z.clone());
                    next_obs += 1;
                }
                if let Some(f) = fine.as_mut() {
                    f.values.push(z);
                    f.dw.push(dw);
                }
            }
        }
        DbmPath { n, times: self.times.clone(), values, seed: rng.seed(), stream: rng.stream(), fine }
    }

    fn evaluate(&self, integ: &[f64], t: f64) -> Vec<f64> {
        let lt = t.ln();
        (0..self.n)
            .map(|i| {
                std::f64::consts::SQRT_2
                    * (0..self.n).map(|m| self.u[i][m] * (-0.5 * m as f64 * lt).exp() * integ[m]).sum::<f64>()
            })
            .collect()
    }

    /// Mean square of `d zeta - drift dt - sqrt(2) dW` per step relative to
    /// the mean square of `sqrt(2) dW`, skipping the first steps near `t = 0`.
    pub fn sde_residual(&self, path: &DbmPath) -> Result<f64> {
        let f = path.fine.as_ref().ok_or_else(|| Error::invalid("path has no fine grid"))?;
        let x = &self.roots;
        let (mut num, mut den) = (0.0, 0.0);
        for s in DBM_REFINE / 10..f.dw.len() {
            let (a, b) = (f.grid[s], f.grid[s + 1]);
            let (z0, z1) = (&f.values[s], &f.values[s + 1]);
            let mid = 0.5 * (a + b);
            for i in 0..self.n {
                let mut drift = 0.0;
                for j in (0..self.n).filter(|&j| j != i) {
                    let zi = 0.5 * (z0[i] + z1[i]);
                    let zj = 0.5 * (z0[j] + z1[j]);
                    drift -= (zi - zj) / (mid * (x[i] - x[j]).powi(2));
                }
                let noise = std::f64::consts::SQRT_2 * f.dw[s][i];
                let r = z1[i] - z0[i] - drift * (b - a) - noise;
                num += r * r;
                den += noise * noise;
            }
        }
        Ok(num / den)
    }
}

pub fn solve_dbm(n: usize, times: &[f64], rng: &mut RngStream) -> Result<DbmPath> {
    Ok(DbmSolver::new(n, times)?.simulate(rng, false))
}

/// Ordered eigenvalues of the tridiagonal Gaussian beta ensemble, scaled so
/// the joint density is proportional to
/// `prod |chi_j - chi_i|^beta prod exp(-beta chi_i^2 / 4)`.
pub fn sample_gbe_tridiagonal(n: usize, beta: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let scale = (2.0 / beta).sqrt();
    let diag: Vec<f64> = (0..n).map(|_| rng.normal() * scale).collect();
    let mut off = Vec::with_capacity(n - 1);
    for i in 1..n {
        off.push(rng.chi(beta * (n - i) as f64)? / std::f64::consts::SQRT_2 * scale);
    }
    tridiagonal_eigenvalues(&diag, &off)
}

/// Sample size of one Monte Carlo chunk; chunk `c` draws from stream `c`.
pub const CHUNK: usize = 4096;

/// Runs `samples` draws of `f` split into fixed chunks, chunk `c` seeded by
/// `(seed, c)`. The result does not depend on `threads`.
pub fn monte_carlo<F>(samples: usize, seed: u64, threads: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut RngStream) -> Vec<f64> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let run = |c: usize| {
        let mut rng = RngStream::new(seed, c as u64);
        let len = CHUNK.min(samples - c * CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let parts: Vec<Vec<Vec<f64>>> = pool.install(|| (0..chunks).into_par_iter().map(run).collect());
    Ok(parts.into_iter().flatten().collect())
}

/// Empirical mean, covariance and covariance standard errors.
#[derive(Clone, Debug)]
pub struct EmpiricalCov {
    pub samples: usize,
    pub mean: Vec<f64>,
    pub cov: CovMatrix,
}

impl EmpiricalCov {
    pub fn stderr(&self, r: usize, c: usize) -> f64 {
        match &self.cov.provenance {
            Provenance::Empirical { stderr, .. } => stderr[r * self.cov.dim() + c],
            _ => f64::NAN,
        }
    }

    /// Largest `|empirical - exact| / stderr` over all entries.
    pub fn max_z(&self, exact: &CovMatrix) -> f64 {
        let d = self.cov.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.cov.get(r, c) - exact.get(r, c)).abs() / self.stderr(r, c));
            }
        }
        worst
    }

    pub fn mean_stderr(&self, r: usize) -> f64 {
        (self.cov.get(r, r) / self.samples as f64).sqrt()
    }
}

/// Covariance of the rows of `data`; the standard error of each entry is the
/// sample deviation of the centered products over `sqrt(n)`.
pub fn empirical_cov(data: &[Vec<f64>], labels: Vec<String>) -> Result<EmpiricalCov> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let d = data[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / nf;
        }
    }
    let mut s1 = vec![0.0; d * d];
    let mut s2 = vec![0.0; d * d];
    for x in data {
        for r in 0..d {
            let a = x[r] - mean[r];
            for c in 0..=r {
                let p = a * (x[c] - mean[c]);
                s1[r * d + c] += p;
                s2[r * d + c] += p * p;
            }
        }
    }
    let mut cov = vec![0.0; d * d];
    let mut se = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..=r {
            let m1 = s1[r * d + c] / nf;
            let var = (s2[r * d + c] / nf - m1 * m1).max(0.0);
            let v = s1[r * d + c] / (nf - 1.0);
            let e = (var / nf).sqrt();
            cov[r * d + c] = v;
            cov[c * d + r] = v;
            se[r * d + c] = e;
            se[c * d + r] = e;
        }
    }
    let cov = CovMatrix::new(labels, cov, Provenance::Empirical { samples: n, stderr: se })?;
    Ok(EmpiricalCov { samples: n, mean, cov })
}

/// Framed binary sample stream: magic, JSON header, then length-prefixed
/// little-endian `f64` records.
pub const FRAME_MAGIC: [u8; 8] = *b"BINFSMP1";

pub fn write_framed<W: Write>(w: &mut W, header: &serde_json::Value, records: &[Vec<f64>]) -> Result<()> {
    let h = serde_json::to_vec(header).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(&FRAME_MAGIC)?;
    w.write_all(&(h.len() as u32).to_le_bytes())?;
    w.write_all(&h)?;
    for r in records {
        w.write_all(&(r.len() as u32).to_le_bytes())?;
        for v in r {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_framed<R: Read>(r: &mut R) -> Result<(serde_json::Value, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != FRAME_MAGIC {
        return Err(Error::Parse("not a framed sample file".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut h = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut h)?;
    let header = serde_json::from_slice(&h).map_err(|e| Error::Parse(e.to_string()))?;
    let mut records = Vec::new();
    loop {
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let k = u32::from_le_bytes(len) as usize;
        let mut buf = vec![0u8; 8 * k];
        r.read_exact(&mut buf)?;
        records.push(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{cov_dbm, cov_zeta_spectral, TailPolicy};

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<f64> = { let mut r = RngStream::new(7, 3); (0..5).map(|_| r.normal()).collect() };
        let b: Vec<f64> = { let mut r = RngStream::new(7, 3); (0..5).map(|_| r.normal()).collect() };
        let c: Vec<f64> = { let mut r = RngStream::new(7, 4); (0..5).map(|_| r.normal()).collect() };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trivial_xi() {
        let g = hermite_grid(1).unwrap();
        let s = sample_xi(&g, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.levels, vec![vec![0.0]]);
    }

    #[test]
    fn truncated_variance_grows_to_spectral_value() {
        let v1 = truncated_zeta_variance(2, 1, 100).unwrap();
        let v2 = truncated_zeta_variance(2, 1, 1000).unwrap();
        let exact = cov_zeta_spectral((2, 1), (2, 1), TailPolicy::default()).unwrap().value;
        assert!(v1 < v2 && v2 < exact);
        assert!(exact - v2 <= 4.0 * 4.0 / 1000.0);
        assert!((truncated_zeta_variance(1, 1, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projected_and_direct_zeta_share_covariance() {
        // Exact second moments of both constructions, from the loadings.
        let k = 3;
        let l = 40;
        let p = ZetaSampler::new(k, l, ZetaMethod::Projected).unwrap();
        let var_top: f64 = p.coef[0].iter().zip(&p.mode_sd).map(|(c, s)| (c * s).powi(2)).sum::<f64>()
            + 2.0 / (k as f64 + 1.0);
        assert!((var_top - truncated_zeta_variance(k, 1, l).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gbe_single_particle_and_crystal() {
        let mut r = RngStream::new(5, 0);
        let x = sample_gbe_tridiagonal(3, 1e12, &mut r).unwrap();
        let s3 = 3f64.sqrt();
        for (a, b) in x.iter().zip([-s3, 0.0, s3]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!(sample_gbe_tridiagonal(3, 0.0, &mut r).is_err());
    }

    #[test]
    fn dbm_rejects_bad_times_and_matches_variance() {
        assert!(DbmSolver::new(2, &[1.0, 1.0]).is_err());
        assert!(DbmSolver::new(2, &[0.0, 1.0]).is_err());
        let s = DbmSolver::new(1, &[0.5, 2.0]).unwrap();
        let data = monte_carlo(20_000, 11, 1, |r| s.simulate(r, false).values.concat()).unwrap();
        let e = empirical_cov(&data, vec!["a".into(), "b".into()]).unwrap();
        let ex = cov_dbm(1, 1, 1, 0.5, 2.0).unwrap();
        assert!((e.cov.get(0, 1) - ex).abs() < 4.0 * e.stderr(0, 1));
    }

    #[test]
    fn chunked_monte_carlo_ignores_thread_count() {
        let f = |r: &mut RngStream| vec![r.normal()];
        assert_eq!(monte_carlo(10_000, 3, 1, f).unwrap(), monte_carlo(10_000, 3, 3, f).unwrap());
    }

    #[test]
    fn framed_round_trip() {
        let mut buf = Vec::new();
        let recs = vec![vec![1.0, -2.5], vec![], vec![3.25]];
        write_framed(&mut buf, &serde_json::json!({"seed": 9}), &recs).unwrap();
        let (h, back) = read_framed(&mut buf.as_slice()).unwrap();
        assert_eq!(h["seed"], 9);
        assert_eq!(back, recs);
    }
}
