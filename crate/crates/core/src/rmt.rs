//! Gaussian orthogonal ensemble sampling and spectral experiments.
//!
//! Variance convention: diagonal entries have variance `2/ambient_n` and
//! off-diagonal entries `1/ambient_n`, also for blocks of size `n < ambient_n`.
//! Sample `k` of an experiment seeded with `s` draws from ChaCha stream `k` of
//! seed `s`, so results do not depend on the thread count.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeconv::{self, FreeConvResult};
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone)]
pub struct GoeSample {
    pub n: usize,
    pub ambient_n: usize,
    pub seed: u64,
    pub matrix: DMatrix<f64>,
}

/// Random stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_dims(n: usize, ambient_n: usize) -> Result<()> {
    if n == 0 || n > ambient_n {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= ambient_n, got n = {n}, ambient_n = {ambient_n}")));
    }
    Ok(())
}

/// Lower triangle of a GOE block, column-major in an `n * n` buffer.
fn fill_lower(rng: &mut impl Rng, n: usize, ambient_n: usize, out: &mut [f64]) {
    let off = (1.0 / ambient_n as f64).sqrt();
    let diag = (2.0 / ambient_n as f64).sqrt();
    for j in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        out[j + j * n] = diag * z;
        for i in j + 1..n {
            let z: f64 = rng.sample(StandardNormal);
            out[i + j * n] = off * z;
        }
    }
}

pub fn sample_goe(n: usize, ambient_n: usize, seed: u64) -> Result<GoeSample> {
    check_dims(n, ambient_n)?;
    let matrix = goe_block(&mut stream(seed, 0), n, ambient_n);
    Ok(GoeSample { n, ambient_n, seed, matrix })
}

/// An `n x n` GOE block with the variances of dimension `ambient_n`, drawn from `rng`.
pub fn goe_block(rng: &mut impl Rng, n: usize, ambient_n: usize) -> DMatrix<f64> {
    let mut buf = vec![0.0; n * n];
    fill_lower(rng, n, ambient_n, &mut buf);
    DMatrix::from_fn(n, n, |i, j| if i >= j { buf[i + j * n] } else { buf[j + i * n] })
}

/// Householder vector for `x`: returns `tau` with `(I - tau v v^T) x = beta e1`.
fn householder(x: &[f64], v: &mut [f64], beta_out: &mut f64) -> f64 {
    let alpha = x[0];
    let tail: f64 = x[1..].iter().map(|t| t * t).sum();
    if tail == 0.0 {
        *beta_out = alpha;
        v[0] = 1.0;
        v[1..].iter_mut().for_each(|t| *t = 0.0);
        return 0.0;
    }
    let norm = (alpha * alpha + tail).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let scale = 1.0 / (alpha - beta);
    v[0] = 1.0;
    for (vi, xi) in v[1..].iter_mut().zip(&x[1..]) {
        *vi = xi * scale;
    }
    *beta_out = beta;
    (beta - alpha) / beta
}

/// `y = S v` over the trailing block `start..n` of the lower triangle.
fn symv(a: &[f64], n: usize, start: usize, v: &[f64], y: &mut [f64]) {
    y[start..n].iter_mut().for_each(|t| *t = 0.0);
    let mut j = start;
    while j + 4 <= n {
        // Four columns per pass over y; the 4x4 diagonal block is done directly.
        for r in 0..4 {
            for c in 0..4 {
                let (hi, lo) = (j + r.max(c), j + r.min(c));
                y[j + r] += a[lo * n + hi] * v[j + c];
            }
        }
        let cols: [&[f64]; 4] = std::array::from_fn(|c| &a[(j + c) * n + j + 4..(j + c + 1) * n]);
        let alpha: [f64; 4] = std::array::from_fn(|c| v[j + c]);
        let (head, tail) = y.split_at_mut(j + 4);
        let dots = col4_axpy_dot(cols, &v[j + 4..n], tail, alpha);
        for c in 0..4 {
            head[j + c] += dots[c];
        }
        j += 4;
    }
    for j in j..n {
        for i in j..n {
            let x = a[j * n + i];
            y[i] += x * v[j];
            if i != j {
                y[j] += x * v[i];
            }
        }
    }
}

/// `y += sum_c x_c alpha_c` and return the dots `x_c . v`.
#[inline]
fn col4_axpy_dot(x: [&[f64]; 4], v: &[f64], y: &mut [f64], alpha: [f64; 4]) -> [f64; 4] {
    let len = v.len();
    let (x0, x1, x2, x3) = (&x[0][..len], &x[1][..len], &x[2][..len], &x[3][..len]);
    let y = &mut y[..len];
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..len {
        let vi = v[i];
        y[i] += (x0[i] * alpha[0] + x1[i] * alpha[1]) + (x2[i] * alpha[2] + x3[i] * alpha[3]);
        s0 += x0[i] * vi;
        s1 += x1[i] * vi;
        s2 += x2[i] * vi;
        s3 += x3[i] * vi;
    }
    [s0, s1, s2, s3]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Columns per panel of the blocked reduction.
const PANEL: usize = 32;

/// Reduce a symmetric matrix (lower triangle, column-major) to tridiagonal
/// form by Householder reflections. Reflections are accumulated over a panel
/// of columns as `A - V W^T - W V^T` and applied to the trailing block once per
/// panel, so each column costs one read of the trailing block.
pub fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return (d, e);
    }
    let mut vs: Vec<Vec<f64>> = vec![vec![0.0; n]; PANEL];
    let mut ws: Vec<Vec<f64>> = vec![vec![0.0; n]; PANEL];
    let mut y = vec![0.0; n];
    let mut k0 = 0;
    while k0 + 1 < n {
        let kb = PANEL.min(n - 1 - k0);
        for jj in 0..kb {
            let k = k0 + jj;
            // Bring column k up to date with the reflections of this panel.
            for l in 0..jj {
                let (v, w) = (&vs[l], &ws[l]);
                let (vk, wk) = (v[k], w[k]);
                let col = &mut a[k * n..(k + 1) * n];
                for i in k..n {
                    col[i] -= v[i] * wk + w[i] * vk;
                }
            }
            d[k] = a[k + k * n];
            let v = &mut vs[jj];
            v.iter_mut().for_each(|t| *t = 0.0);
            let tau = householder(&a[(k + 1) + k * n..(k + 1) * n], &mut v[k + 1..], &mut e[k]);
            let w = &mut ws[jj];
            w.iter_mut().for_each(|t| *t = 0.0);
            if tau == 0.0 {
                continue;
            }
            let v = &vs[jj];
            symv(a, n, k + 1, v, &mut y);
            for l in 0..jj {
                let (vl, wl) = (&vs[l], &ws[l]);
                let (cw, cv) = (dot(&wl[k + 1..], &v[k + 1..]), dot(&vl[k + 1..], &v[k + 1..]));
                for i in k + 1..n {
                    y[i] -= vl[i] * cw + wl[i] * cv;
                }
            }
            let mut pv = 0.0;
            for i in k + 1..n {
                y[i] *= tau;
                pv += y[i] * v[i];
            }
            let half = 0.5 * tau * pv;
            let w = &mut ws[jj];
            for i in k + 1..n {
                w[i] = y[i] - half * vs[jj][i];
            }
        }
        // Rank-2kb update of the trailing block.
        let start = k0 + kb;
        for j in start..n {
            let col = &mut a[j * n + j..(j + 1) * n];
            let mut l = 0;
            while l + 4 <= kb {
                let len = col.len();
                let (v0, v1, v2, v3) = (&vs[l][j..n], &vs[l + 1][j..n], &vs[l + 2][j..n], &vs[l + 3][j..n]);
                let (w0, w1, w2, w3) = (&ws[l][j..n], &ws[l + 1][j..n], &ws[l + 2][j..n], &ws[l + 3][j..n]);
                let (a0, a1, a2, a3) = (w0[0], w1[0], w2[0], w3[0]);
                let (b0, b1, b2, b3) = (v0[0], v1[0], v2[0], v3[0]);
                let (v0, v1, v2, v3) = (&v0[..len], &v1[..len], &v2[..len], &v3[..len]);
                let (w0, w1, w2, w3) = (&w0[..len], &w1[..len], &w2[..len], &w3[..len]);
                for i in 0..len {
                    col[i] -= (v0[i] * a0 + w0[i] * b0 + v1[i] * a1 + w1[i] * b1)
                        + (v2[i] * a2 + w2[i] * b2 + v3[i] * a3 + w3[i] * b3);
                }
                l += 4;
            }
            for l in l..kb {
                let (v, w) = (&vs[l][j..n], &ws[l][j..n]);
                let (vj, wj) = (v[0], w[0]);
                for ((c, vi), wi) in col.iter_mut().zip(v).zip(w) {
                    *c -= vi * wj + wi * vj;
                }
            }
        }
        k0 = start;
    }
    d[n - 1] = a[(n - 1) + (n - 1) * n];
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence {
                    what: "tridiagonal QL",
                    detail: format!("eigenvalue {l} not isolated after 60 sweeps"),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Ascending eigenvalues of `diag(shift) + GOE`, drawn from stream `index` of `seed`.
pub fn shifted_spectrum(shift: &[f64], ambient_n: usize, seed: u64, index: u64) -> Result<Vec<f64>> {
    let n = shift.len();
    check_dims(n, ambient_n)?;
    let mut a = vec![0.0; n * n];
    fill_lower(&mut stream(seed, index), n, ambient_n, &mut a);
    for (i, s) in shift.iter().enumerate() {
        a[i + i * n] += s;
    }
    let (d, e) = tridiagonalize(&mut a, n);
    tridiagonal_eigenvalues(&d, &e)
}

/// Spectra of `samples` independent draws of `diag(shift) + GOE_N`, `N = shift.len()`.
pub fn sample_spectra(shift: &[f64], samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..samples as u64).into_par_iter().map(|k| shifted_spectrum(shift, shift.len(), seed, k)).collect()
}

/// Eigenvalues and the unit eigenvector of the largest eigenvalue.
pub fn top_eigenpair(sample: &GoeSample) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(sample.matrix.clone());
    let k = (0..sample.n).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect())
}

pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    0.5 + (x * (4.0 - x * x).sqrt() / 4.0 + (x / 2.0).asin()) / pi
}

/// Kolmogorov-Smirnov distance of a sorted sample from the semicircle law.
pub fn ks_to_semicircle(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = semicircle_cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Wasserstein-1 distance `int |F_sample - F_pred|` between a sorted sample
/// and a convolution output.
pub fn wasserstein1(sorted: &[f64], predicted: &FreeConvResult) -> f64 {
    let cdf = predicted.cdf_nodes();
    let lo = sorted[0].min(predicted.lambda[0]);
    let hi = sorted[sorted.len() - 1].max(*predicted.lambda.last().unwrap());
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let n = sorted.len() as f64;
    let mut k = 0;
    let mut total = 0.0;
    for i in 0..steps {
        let x = lo + (i as f64 + 0.5) * h;
        let j = predicted.lambda.partition_point(|l| *l <= x);
        let fp = if j == 0 {
            0.0
        } else if j >= predicted.lambda.len() {
            1.0
        } else {
            let (x0, x1) = (predicted.lambda[j - 1], predicted.lambda[j]);
            cdf[j - 1] + (cdf[j] - cdf[j - 1]) * (x - x0) / (x1 - x0)
        };
        while k < sorted.len() && sorted[k] <= x {
            k += 1;
        }
        total += (k as f64 / n - fp).abs() * h;
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogDetReport {
    pub ambient_n: usize,
    pub samples: usize,
    /// `(1/N) E log|det(D + GOE_N)|`.
    pub empirical: f64,
    pub stderr: f64,
    /// Logarithmic potential at zero of the diagonal's law convolved with the semicircle.
    pub predicted: f64,
    /// Draws replaced because an eigenvalue vanished in floating point.
    pub resampled: usize,
}

impl LogDetReport {
    pub fn gap(&self) -> f64 {
        (self.empirical - self.predicted).abs()
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Singular draws are replaced by further streams beyond `samples`; the
/// limit on replacements guards against a degenerate diagonal.
pub fn log_det_experiment(diagonal: &[f64], samples: usize, seed: u64) -> Result<LogDetReport> {
    let n = diagonal.len();
    if n == 0 || samples == 0 {
        return Err(Error::InvalidArgument("diagonal and sample count must be nonempty".into()));
    }
    if diagonal.iter().any(|d| !d.is_finite() || d.abs() > 50.0) {
        return Err(Error::InvalidArgument("diagonal entries must be finite with modulus at most 50".into()));
    }
    let log_det = |index: u64| -> Result<Option<f64>> {
        let eig = shifted_spectrum(diagonal, n, seed, index)?;
        if eig.iter().any(|l| l.abs() < 1e-300) {
            return Ok(None);
        }
        Ok(Some(eig.iter().map(|l| l.abs().ln()).sum::<f64>() / n as f64))
    };
    let first: Vec<Option<f64>> = (0..samples as u64).into_par_iter().map(log_det).collect::<Result<_>>()?;
    let mut values: Vec<f64> = first.iter().flatten().copied().collect();
    let mut resampled = 0;
    let mut index = samples as u64;
    while values.len() < samples {
        resampled += 1;
        if resampled > 100 * samples {
            return Err(Error::NonConvergence { what: "log-determinant sampling", detail: "every draw is singular".into() });
        }
        if let Some(v) = log_det(index)? {
            values.push(v);
        }
        index += 1;
    }
    let (empirical, stderr) = mean_stderr(&values);
    let law = DiscreteMeasure::new(diagonal.to_vec(), vec![1.0 / n as f64; n])?;
    let predicted = freeconv::log_potential_at(&law, 0.0)?;
    Ok(LogDetReport { ambient_n: n, samples, empirical, stderr, predicted, resampled })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WegnerReport {
    pub ambient_n: usize,
    pub interval: (f64, f64),
    pub mean_count: f64,
    pub stderr: f64,
    /// `mean_count / (N |I|)`.
    pub constant: f64,
}

fn count_in(sorted: &[f64], (a, b): (f64, f64)) -> usize {
    sorted.partition_point(|l| *l <= b) - sorted.partition_point(|l| *l < a)
}

fn wegner_from_spectra(spectra: &[Vec<f64>], interval: (f64, f64)) -> WegnerReport {
    let counts: Vec<f64> = spectra.iter().map(|s| count_in(s, interval) as f64).collect();
    let (mean_count, stderr) = mean_stderr(&counts);
    let n = spectra[0].len();
    WegnerReport { ambient_n: n, interval, mean_count, stderr, constant: mean_count / (n as f64 * (interval.1 - interval.0)) }
}

/// Mean number of eigenvalues of `diag + GOE_N` in `interval`.
pub fn wegner_check(diagonal: &[f64], interval: (f64, f64), samples: usize, seed: u64) -> Result<WegnerReport> {
    if !(interval.1 > interval.0) {
        return Err(Error::InvalidArgument("interval must have b > a".into()));
    }
    let spectra = sample_spectra(diagonal, samples.max(2), seed)?;
    Ok(wegner_from_spectra(&spectra, interval))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WegnerFit {
    pub reports: Vec<WegnerReport>,
    /// Largest `mean_count / (N |I|)` over the widths.
    pub constant: f64,
    /// Least-squares slope of log count against log width; 1 for linear scaling.
    pub slope: f64,
}

/// Wegner counts on intervals of the given widths centred at `center`, all
/// computed from the same spectra.
pub fn wegner_scaling(diagonal: &[f64], center: f64, widths: &[f64], samples: usize, seed: u64) -> Result<WegnerFit> {
    if widths.iter().any(|w| !(*w > 0.0)) || widths.len() < 2 {
        return Err(Error::InvalidArgument("need at least two positive widths".into()));
    }
    let spectra = sample_spectra(diagonal, samples.max(2), seed)?;
    let reports: Vec<WegnerReport> =
        widths.iter().map(|w| wegner_from_spectra(&spectra, (center - 0.5 * w, center + 0.5 * w))).collect();
    let constant = reports.iter().map(|r| r.constant).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> =
        reports.iter().filter(|r| r.mean_count > 0.0).map(|r| ((r.interval.1 - r.interval.0).ln(), r.mean_count.ln())).collect();
    let slope = if pts.len() < 2 {
        f64::NAN
    } else {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(WegnerFit { reports, constant, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
        let mut rng = stream(seed, 0);
        let mut a = vec![0.0; n * n];
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let x: f64 = rng.sample(StandardNormal);
                a[i + j * n] = x;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        (a, m)
    }

    #[test]
    fn eigenvalues_match_nalgebra() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (17, 4), (120, 5)] {
            let (mut a, m) = random_symmetric(n, seed);
            let (d, e) = tridiagonalize(&mut a, n);
            let ours = tridiagonal_eigenvalues(&d, &e).unwrap();
            let mut reference: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()), "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let n = 4;
        let mut a = vec![0.0; n * n];
        for (i, v) in [3.0, -1.0, 2.0, 0.5].iter().enumerate() {
            a[i + i * n] = *v;
        }
        let (d, e) = tridiagonalize(&mut a, n);
        assert_eq!(tridiagonal_eigenvalues(&d, &e).unwrap(), vec![-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn seed_determinism() {
        let a = sample_goe(30, 30, 7).unwrap();
        let b = sample_goe(30, 30, 7).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_ne!(a.matrix, sample_goe(30, 30, 8).unwrap().matrix);
        assert_eq!(a.matrix, a.matrix.transpose());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(sample_goe(0, 3, 0).is_err());
        assert!(sample_goe(4, 3, 0).is_err());
    }

    #[test]
    fn entry_variances() {
        let (n, big_n, reps) = (3, 5, 20000);
        let mut diag = 0.0;
        let mut off = 0.0;
        let mut cross = 0.0;
        for k in 0..reps {
            let g = sample_goe(n, big_n, k).unwrap().matrix;
            diag += g[(0, 0)] * g[(0, 0)];
            off += g[(1, 0)] * g[(1, 0)];
            cross += g[(1, 0)] * g[(2, 1)];
        }
        let r = reps as f64;
        assert!((diag / r - 2.0 / big_n as f64).abs() < 4.0 * (2.0f64).sqrt() * (2.0 / big_n as f64) / r.sqrt());
        assert!((off / r - 1.0 / big_n as f64).abs() < 4.0 * (2.0f64).sqrt() * (1.0 / big_n as f64) / r.sqrt());
        assert!((cross / r).abs() < 4.0 * (1.0 / big_n as f64) / r.sqrt());
    }

    #[test]
    fn semicircle_cdf_is_consistent() {
        assert!((semicircle_cdf(0.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for x in [-1.5, 0.3, 1.9] {
            let d = (semicircle_cdf(x + h) - semicircle_cdf(x - h)) / (2.0 * h);
            assert!((d - semicircle_density(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn wegner_full_support_counts_everything() {
        let r = wegner_check(&vec![0.0; 40], (-10.0, 10.0), 5, 3).unwrap();
        assert_eq!(r.mean_count, 40.0);
    }

    #[test]
    fn log_det_of_large_shift() {
        let r = log_det_experiment(&vec![10.0; 100], 10, 1).unwrap();
        assert!(r.gap() < 0.01, "{r:?}");
        assert_eq!(r.resampled, 0);
    }
}
