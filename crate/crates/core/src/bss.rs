//! Signal-to-distortion and signal-to-interference ratios from a
//! least-squares decomposition onto delayed references.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use realfft::num_complex::Complex;
use realfft::RealFftPlanner;

/// Values beyond ±`DB_CAP` are clamped so medians stay defined.
pub const DB_CAP: f64 = 200.0;

/// Relative diagonal loading applied when the Gram matrix is not positive
/// definite.
pub const GRAM_REGULARIZATION: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 10;

/// Error energies below this fraction of the target energy are treated as
/// zero (the projection is not resolved more finely in double precision).
pub const ZERO_ENERGY_RATIO: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BssError {
    #[error("need at least one reference")]
    NoReferences,
    #[error("target index {0} out of range")]
    Target(usize),
    #[error("reference {index} has {got} samples, estimate has {expected}")]
    Length { index: usize, expected: usize, got: usize },
    #[error("filter length must be at least 1")]
    FilterLength,
    #[error("no items to summarize")]
    Empty,
}

/// `estimate = s_target + e_interf + e_artif`.
#[derive(Clone, Debug, PartialEq)]
pub struct BssDecomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

/// Linear correlations `r[k] = Σ_t x[t + k]·y[t]` for `k < lags`, via FFT.
fn correlations(planner: &mut RealFftPlanner<f64>, x: &[f64], y: &[f64], lags: usize) -> Vec<f64> {
    let n = (x.len() + y.len()).next_power_of_two().max(2);
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum = |v: &[f64]| {
        let mut buf = vec![0.0; n];
        buf[..v.len()].copy_from_slice(v);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("fft sizes");
        out
    };
    let (sx, sy) = (spectrum(x), spectrum(y));
    let mut prod: Vec<Complex<f64>> = sx.iter().zip(&sy).map(|(a, b)| a * b.conj()).collect();
    prod[0].im = 0.0;
    prod[n / 2].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut prod, &mut out).expect("fft sizes");
    (0..lags).map(|k| if k < n { out[k] / n as f64 } else { 0.0 }).collect()
}

/// `Σ_k h_j[k]·s_j[t − k]` for `t < len`, summed over references.
fn filter_sum(references: &[&[f64]], coeffs: &[f64], lags: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (j, s) in references.iter().enumerate() {
        let h = &coeffs[j * lags..(j + 1) * lags];
        for (k, &hk) in h.iter().enumerate() {
            if hk == 0.0 || k >= len {
                continue;
            }
            for (o, &v) in out[k..].iter_mut().zip(s.iter()) {
                *o += hk * v;
            }
        }
    }
    out
}

fn solve_gram(gram: DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
    if let Some(ch) = gram.clone().cholesky() {
        return ch.solve(&rhs);
    }
    let n = gram.nrows();
    let scale = (gram.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let loaded = &gram + DMatrix::identity(n, n) * (GRAM_REGULARIZATION * scale);
    log::warn!("singular Gram matrix ({n}×{n}); adding {GRAM_REGULARIZATION:e}·mean(diag) to the diagonal");
    let Some(ch) = loaded.clone().cholesky() else {
        return loaded.svd(true, true).solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(n));
    };
    // Iterative refinement against the unloaded system.
    let mut x = ch.solve(&rhs);
    let mut best = (&rhs - &gram * &x).norm();
    for _ in 0..REFINEMENT_STEPS {
        let candidate = &x + ch.solve(&(&rhs - &gram * &x));
        let residual = (&rhs - &gram * &candidate).norm();
        if !(residual < best) {
            break;
        }
        x = candidate;
        best = residual;
    }
    x
}

/// Projects `estimate` onto delays `0..filter_len` of the target reference
/// and of all references.
pub fn decompose(
    estimate: &[f64],
    references: &[&[f64]],
    target: usize,
    filter_len: usize,
) -> Result<BssDecomposition, BssError> {
    if references.is_empty() {
        return Err(BssError::NoReferences);
    }
    if target >= references.len() {
        return Err(BssError::Target(target));
    }
    if filter_len == 0 {
        return Err(BssError::FilterLength);
    }
    let len = estimate.len();
    for (index, r) in references.iter().enumerate() {
        if r.len() != len {
            return Err(BssError::Length { index, expected: len, got: r.len() });
        }
    }
    let (n, l) = (references.len(), filter_len);
    let mut planner = RealFftPlanner::new();
    let mut gram = DMatrix::zeros(n * l, n * l);
    for i in 0..n {
        for j in 0..n {
            // Row lag 0: G[(i,0),(j,b)] = Σ_t s_i[t]·s_j[t − b].
            let r_ij = correlations(&mut planner, references[i], references[j], l);
            // Column lag 0: G[(i,a),(j,0)] = Σ_t s_i[t − a]·s_j[t].
            let r_ji = correlations(&mut planner, references[j], references[i], l);
            for b in 0..l {
                gram[(i * l, j * l + b)] = r_ij[b];
                gram[(i * l + b, j * l)] = r_ji[b];
            }
            for a in 0..l - 1 {
                for b in 0..l - 1 {
                    let tail_i = if a < len { references[i][len - 1 - a] } else { 0.0 };
                    let tail_j = if b < len { references[j][len - 1 - b] } else { 0.0 };
                    gram[(i * l + a + 1, j * l + b + 1)] = gram[(i * l + a, j * l + b)] - tail_i * tail_j;
                }
            }
        }
    }
    let mut rhs = DVector::zeros(n * l);
    for (j, r) in references.iter().enumerate() {
        for (b, v) in correlations(&mut planner, estimate, r, l).into_iter().enumerate() {
            rhs[j * l + b] = v;
        }
    }
    let t = target * l;
    let target_coeffs = solve_gram(gram.view((t, t), (l, l)).into_owned(), rhs.rows(t, l).into_owned());
    let all_coeffs = solve_gram(gram, rhs);
    let s_target = filter_sum(&[references[target]], target_coeffs.as_slice(), l, len);
    let p_all = filter_sum(references, all_coeffs.as_slice(), l, len);
    let e_interf = p_all.iter().zip(&s_target).map(|(p, s)| p - s).collect();
    let e_artif = estimate.iter().zip(&p_all).map(|(e, p)| e - p).collect();
    Ok(BssDecomposition { s_target, e_interf, e_artif })
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return -DB_CAP;
    }
    if den <= num * ZERO_ENERGY_RATIO {
        return DB_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
}

/// SDR and SIR in dB, each clamped to ±[`DB_CAP`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdrSir {
    pub sdr: f64,
    pub sir: f64,
    /// Set when a ratio hit the cap because a denominator or numerator vanished.
    pub capped: bool,
}

pub fn sdr_sir(dec: &BssDecomposition) -> SdrSir {
    let target = energy(&dec.s_target);
    let interf = energy(&dec.e_interf);
    let distortion: f64 = dec.e_interf.iter().zip(&dec.e_artif).map(|(a, b)| (a + b) * (a + b)).sum();
    let (sdr, sir) = (ratio_db(target, distortion), ratio_db(target, interf));
    SdrSir { sdr, sir, capped: sdr.abs() >= DB_CAP || sir.abs() >= DB_CAP }
}

/// Metrics of one track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackMetrics {
    pub id: String,
    pub sdr: f64,
    pub sir: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub items: Vec<TrackMetrics>,
    pub median_sdr: f64,
    pub median_sir: f64,
}

/// Median of the finite values; even counts take the lower middle element.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

pub fn median_report(items: Vec<TrackMetrics>) -> Result<MetricReport, BssError> {
    let sdrs: Vec<f64> = items.iter().map(|m| m.sdr).collect();
    let sirs: Vec<f64> = items.iter().map(|m| m.sir).collect();
    let median_sdr = median(&sdrs).ok_or(BssError::Empty)?;
    let median_sir = median(&sirs).ok_or(BssError::Empty)?;
    Ok(MetricReport { items, median_sdr, median_sir })
}

impl MetricReport {
    /// `track,sdr,sir` rows followed by a `median` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("track,sdr,sir\n");
        for m in &self.items {
            let _ = writeln!(s, "{},{:.6},{:.6}", m.id, m.sdr, m.sir);
        }
        let _ = writeln!(s, "median,{:.6},{:.6}", self.median_sdr, self.median_sir);
        s
    }
}

/// Metrics of `estimate` against `target` with `interferer` as the other source.
pub fn evaluate_pair(
    id: &str,
    estimate: &[f64],
    target: &[f64],
    interferer: &[f64],
    filter_len: usize,
) -> Result<TrackMetrics, BssError> {
    let dec = decompose(estimate, &[target, interferer], 0, filter_len)?;
    let m = sdr_sir(&dec);
    Ok(TrackMetrics { id: id.to_string(), sdr: m.sdr, sir: m.sir })
}
