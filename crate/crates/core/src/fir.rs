//! Discrete-time, finite-length causal multichannel Wiener filter design.
//!
//! This is the general-case numerical path: stack `L` taps of `M` channels,
//! build the `ML x ML` block-Toeplitz correlation matrix from the scene
//! statistics, and solve `(r_x + loading I) w = r_xd(alpha)` with a dense
//! symmetric positive-definite factorization. One factorization serves a
//! whole delay sweep; the per-delay work is a pair of triangular solves and
//! a quadratic form.

use crate::curve::{CurveMethod, DelayErrorCurve};
use crate::error::{Error, Result};
use crate::scene::{assemble_mixture_correlations, MixtureCorrelations, Scene};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

/// Stacked-lag observation correlation matrix.
///
/// Row/column index `i * taps + l` addresses channel `i`, tap `l`, so entry
/// `((i,l1),(j,l2))` equals `r_{x_i x_j}[l2 - l1]`.
#[derive(Debug, Clone)]
pub struct BlockCorrelationMatrix {
    num_mics: usize,
    taps: usize,
    matrix: DMatrix<f64>,
}

impl BlockCorrelationMatrix {
    pub fn num_mics(&self) -> usize {
        self.num_mics
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, l1: usize, j: usize, l2: usize) -> f64 {
        self.matrix[(i * self.taps + l1, j * self.taps + l2)]
    }

    /// Largest deviation from exact symmetry plus block-Toeplitz structure;
    /// zero by construction, kept as a cheap structural check.
    pub fn max_structure_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        let n = self.num_mics * self.taps;
        for r in 0..n {
            for c in 0..n {
                dev = dev.max((self.matrix[(r, c)] - self.matrix [(c, r)]).abs());
            }
        }
        for i in 0..self.num_mics {
            for j in 0..self.num_mics {
                for l1 in 1..self.taps {
                    for l2 in 1..self.taps {
                        dev = dev.max(
                            (self.entry(i, l1, j, l2) - self.entry(i, l1 - 1, j, l2 - 1)).abs(),
                        );
                    }
                }
            }
        }
        dev
    }
}

/// Builds the stacked correlation matrix from scene statistics.
pub fn build_block_correlation(scene: &Scene, taps: usize) -> Result<BlockCorrelationMatrix> {
    if taps == 0 {
        return Err(Error::Domain("need at least one tap".into()));
    }
    let corr = assemble_mixture_correlations(scene, taps - 1)?;
    Ok(block_from_correlations(&corr, scene.num_mics(), taps))
}

fn block_from_correlations(
    corr: &MixtureCorrelations,
    num_mics: usize,
    taps: usize,
) -> BlockCorrelationMatrix {
    let n = num_mics * taps;
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for i in 0..num_mics {
        for j in 0..num_mics {
            let r = &corr.auto[i][j];
            for l1 in 0..taps {
                for l2 in 0..taps {
                    matrix[(i * taps + l1, j * taps + l2)] = r.at(l2 as i64 - l1 as i64);
                }
            }
        }
    }
    BlockCorrelationMatrix {
        num_mics,
        taps,
        matrix,
    }
}

/// Cross-correlation vector `r_xd(alpha)`: entry `(i, l)` is
/// `r_{x_i d_0}[alpha - l]`.
pub fn build_cross_correlation(
    scene: &Scene,
    taps: usize,
    alpha_samples: i64,
) -> Result<DVector<f64>> {
    let max_lag = cross_lag_requirement(taps, alpha_samples, alpha_samples);
    let corr = assemble_mixture_correlations(scene, max_lag)?;
    Ok(cross_from_correlations(
        &corr,
        scene.num_mics(),
        taps,
        alpha_samples,
    ))
}

fn cross_lag_requirement(taps: usize, alpha_min: i64, alpha_max: i64) -> usize {
    let lo = (alpha_min - taps as i64 + 1).unsigned_abs() as usize;
    let hi = alpha_max.unsigned_abs() as usize;
    lo.max(hi).max(taps - 1)
}

fn cross_from_correlations(
    corr: &MixtureCorrelations,
    num_mics: usize,
    taps: usize,
    alpha_samples: i64,
) -> DVector<f64> {
    DVector::from_iterator(
        num_mics * taps,
        (0..num_mics).flat_map(|i| {
            (0..taps).map(move |l| corr.cross[i].at(alpha_samples - l as i64))
        }),
    )
}

/// Finite-length multichannel Wiener filter: `M x L` coefficients plus the
/// design delay and the diagonal loading used for the solve.
#[derive(Debug, Clone)]
pub struct MultichannelFirFilter {
    coefficients: Vec<Vec<f64>>,
    alpha_samples: i64,
    loading: f64,
}

impl MultichannelFirFilter {
    pub fn num_mics(&self) -> usize {
        self.coefficients.len()
    }

    pub fn taps(&self) -> usize {
        self.coefficients.first().map(Vec::len).unwrap_or(0)
    }

    pub fn alpha_samples(&self) -> i64 {
        self.alpha_samples
    }

    pub fn loading(&self) -> f64 {
        self.loading
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn coefficient(&self, mic: usize, tap: usize) -> f64 {
        self.coefficients[mic][tap]
    }

    fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.num_mics() * self.taps(),
            self.coefficients.iter().flat_map(|c| c.iter().cloned()),
        )
    }

    /// Filters multichannel signals: `y[n] = sum_m sum_l w[m][l] x_m[n-l]`.
    pub fn apply(&self, channels: &[Vec<f64>]) -> Result<Vec<f64>> {
        if channels.len() != self.num_mics() {
            return Err(Error::DimensionMismatch(format!(
                "{} channels for a {}-mic filter",
                channels.len(),
                self.num_mics()
            )));
        }
        let len = channels.first().map(Vec::len).unwrap_or(0);
        let mut y = vec![0.0; len];
        for (m, x) in channels.iter().enumerate() {
            for (l, &w) in self.coefficients[m].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for n in l..len {
                    y[n] += w * x[n - l];
                }
            }
        }
        Ok(y)
    }
}

/// Precomputed design state for one (scene, taps, loading, alpha range):
/// correlations, the loaded Cholesky factor, and the unloaded matrix for
/// exact model-MSE quadratic forms. Immutable and safe to share across
/// threads; sweeps parallelize over delays.
pub struct FirDesigner {
    num_mics: usize,
    taps: usize,
    loading: f64,
    alpha_min: i64,
    alpha_max: i64,
    block: BlockCorrelationMatrix,
    chol: Cholesky<f64, Dyn>,
    corr: MixtureCorrelations,
    r_d0: f64,
    sample_rate: f64,
    digest: String,
}

impl FirDesigner {
    pub fn new(
        scene: &Scene,
        taps: usize,
        loading: f64,
        alpha_min: i64,
        alpha_max: i64,
    ) -> Result<Self> {
        if taps == 0 {
            return Err(Error::Domain("need at least one tap".into()));
        }
        if alpha_min > alpha_max {
            return Err(Error::Domain("empty alpha range".into()));
        }
        if loading < 0.0 {
            return Err(Error::Domain(format!("loading {loading} must be >= 0")));
        }
        let max_lag = cross_lag_requirement(taps, alpha_min, alpha_max);
        let corr = assemble_mixture_correlations(scene, max_lag)?;
        let block = block_from_correlations(&corr, scene.num_mics(), taps);
        let n = scene.num_mics() * taps;
        let mut loaded = block.matrix.clone();
        for d in 0..n {
            loaded[(d, d)] += loading;
        }
        let chol = loaded.cholesky().ok_or_else(|| {
            Error::Conditioning(format!(
                "block correlation matrix ({n} x {n}, loading {loading}) is not positive definite"
            ))
        })?;
        Ok(Self {
            num_mics: scene.num_mics(),
            taps,
            loading,
            alpha_min,
            alpha_max,
            block,
            chol,
            corr,
            r_d0: scene.target_power(),
            sample_rate: scene.sample_rate(),
            digest: scene.digest(),
        })
    }

    pub fn block(&self) -> &BlockCorrelationMatrix {
        &self.block
    }

    pub fn target_power(&self) -> f64 {
        self.r_d0
    }

    fn check_alpha(&self, alpha_samples: i64) -> Result<()> {
        if alpha_samples < self.alpha_min || alpha_samples > self.alpha_max {
            return Err(Error::Domain(format!(
                "alpha {alpha_samples} outside the prepared range [{}, {}]",
                self.alpha_min, self.alpha_max
            )));
        }
        Ok(())
    }

    pub fn cross_vector(&self, alpha_samples: i64) -> Result<DVector<f64>> {
        self.check_alpha(alpha_samples)?;
        Ok(cross_from_correlations(
            &self.corr,
            self.num_mics,
            self.taps,
            alpha_samples,
        ))
    }

    pub fn design(&self, alpha_samples: i64) -> Result<MultichannelFirFilter> {
        let rhs = self.cross_vector(alpha_samples)?;
        let w = self.chol.solve(&rhs);
        let coefficients = (0..self.num_mics)
            .map(|i| w.as_slice()[i * self.taps..(i + 1) * self.taps].to_vec())
            .collect();
        Ok(MultichannelFirFilter {
            coefficients,
            alpha_samples,
            loading: self.loading,
        })
    }

    /// Model-domain MSE `r_d(0) - 2 w' r_xd + w' r_x w` (unloaded quadratic
    /// form; no signal synthesis). Tiny negative round-off is clamped.
    pub fn model_mse(&self, filter: &MultichannelFirFilter) -> Result<f64> {
        if filter.num_mics() != self.num_mics || filter.taps() != self.taps {
            return Err(Error::DimensionMismatch(format!(
                "filter is {} x {}, designer is {} x {}",
                filter.num_mics(),
                filter.taps(),
                self.num_mics,
                self.taps
            )));
        }
        let w = filter.stacked();
        let rhs = self.cross_vector(filter.alpha_samples())?;
        let quad = (&self.block.matrix * &w).dot(&w);
        let mse = self.r_d0 - 2.0 * w.dot(&rhs) + quad;
        if mse < -1e-9 * self.r_d0.max(1.0) {
            return Err(Error::Conditioning(format!(
                "model MSE {mse} is negative beyond round-off"
            )));
        }
        Ok(mse.max(0.0))
    }

    /// Designs and evaluates one filter per delay. Solves are independent
    /// and run in parallel; the output order follows the input order.
    pub fn sweep(&self, alphas_samples: &[i64]) -> Result<DelayErrorCurve> {
        let mses: Vec<Result<(f64, f64)>> = alphas_samples
            .par_iter()
            .map(|&alpha| {
                let filter = self.design(alpha)?;
                let mse = self.model_mse(&filter)?;
                Ok((alpha as f64 / self.sample_rate, mse))
            })
            .collect();
        let mut points = Vec::with_capacity(mses.len());
        for r in mses {
            points.push(r?);
        }
        DelayErrorCurve::new(
            CurveMethod::FirCmwf,
            self.r_d0,
            self.digest.clone(),
            points,
        )
    }
}

/// One-shot filter design (see [`FirDesigner`] for sweeps).
pub fn design_filter(
    scene: &Scene,
    taps: usize,
    alpha_samples: i64,
    loading: f64,
) -> Result<MultichannelFirFilter> {
    FirDesigner::new(scene, taps, loading, alpha_samples, alpha_samples)?.design(alpha_samples)
}

/// Model-domain MSE of a filter on a scene.
pub fn model_mse(scene: &Scene, filter: &MultichannelFirFilter) -> Result<f64> {
    let alpha = filter.alpha_samples();
    FirDesigner::new(scene, filter.taps(), filter.loading(), alpha, alpha)?.model_mse(filter)
}

/// Full delay sweep with one shared factorization.
pub fn delay_sweep(
    scene: &Scene,
    taps: usize,
    alphas_samples: &[i64],
    loading: f64,
) -> Result<DelayErrorCurve> {
    if alphas_samples.is_empty() {
        return Err(Error::Domain("empty alpha grid".into()));
    }
    let lo = *alphas_samples.iter().min().unwrap();
    let hi = *alphas_samples.iter().max().unwrap();
    FirDesigner::new(scene, taps, loading, lo, hi)?.sweep(alphas_samples)
}

/// Sample MSE relative to the desired-signal power, in dB:
/// `10 log10( sum (y-d)^2 / sum d^2 )`. An exactly zero numerator returns
/// the `floor_db` sentinel.
pub fn sample_relative_mse_with_floor(y: &[f64], d: &[f64], floor_db: f64) -> Result<f64> {
    if y.len() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "signal lengths differ: {} vs {}",
            y.len(),
            d.len()
        )));
    }
    let denom: f64 = d.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(Error::Domain("zero-energy reference signal".into()));
    }
    let num: f64 = y.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum();
    if num == 0.0 {
        return Ok(floor_db);
    }
    Ok(10.0 * (num / denom).log10())
}

pub fn sample_relative_mse(y: &[f64], d: &[f64]) -> Result<f64> {
    sample_relative_mse_with_floor(y, d, crate::curve::DB_FLOOR)
}
