//! Gaussian priors and noise models in the vertex and graph-frequency
//! domains, single-sample covariances, training sets, and the linear
//! baseline estimators (LMMSE and GSP-LMMSE).

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;
use crate::spectral::SpectralBasis;

/// Ridge pinning the variance of the zero-eigenvalue frequency in the smooth
/// prior, so the stored covariance stays invertible. The component itself is
/// treated as a deterministic zero (phase reference).
pub const SMOOTH_PRIOR_REFERENCE_RIDGE: f64 = 1e-12;

/// Default diagonal-loading factor for sample covariances, scaled by
/// `trace / N`.
pub const DEFAULT_DIAGONAL_LOADING: f64 = 1e-6;

/// Covariance of one Gaussian quantity in both domains, with cached inverses
/// and the diagonal extract of the frequency-domain inverse.
#[derive(Debug, Clone)]
struct DomainCovariance {
    cov_v: DMatrix<f64>,
    cov_v_inv: DMatrix<f64>,
    cov_f: DMatrix<f64>,
    cov_f_inv: DMatrix<f64>,
    ddiag_f_inv: DVector<f64>,
    /// Built from an exactly diagonal frequency-domain covariance; quadratic
    /// forms then go through the diagonal, which avoids the cancellation the
    /// dense conjugated inverse suffers when variances span many orders of
    /// magnitude (smooth prior's pinned reference frequency).
    freq_diagonal: bool,
}

impl DomainCovariance {
    fn from_vertex(cov_v: DMatrix<f64>, basis: &SpectralBasis) -> Result<Self> {
        let n = basis.n();
        if cov_v.nrows() != n || cov_v.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cov_v.nrows() });
        }
        let chol = cov_v.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let cov_v_inv = chol.inverse();
        let v = basis.eigenvectors();
        let cov_f = v.tr_mul(&(&cov_v * v));
        let cov_f_inv = v.tr_mul(&(&cov_v_inv * v));
        let ddiag_f_inv = cov_f_inv.diagonal();
        Ok(Self { cov_v, cov_v_inv, cov_f, cov_f_inv, ddiag_f_inv, freq_diagonal: false })
    }

    fn from_freq_diag(var_f: &DVector<f64>, basis: &SpectralBasis) -> Result<Self> {
        let n = basis.n();
        if var_f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: var_f.len() });
        }
        if var_f.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let inv = var_f.map(|v| 1.0 / v);
        let v = basis.eigenvectors();
        let cov_f = DMatrix::from_diagonal(var_f);
        let cov_f_inv = DMatrix::from_diagonal(&inv);
        let cov_v = v * &cov_f * v.transpose();
        let cov_v_inv = v * &cov_f_inv * v.transpose();
        Ok(Self { cov_v, cov_v_inv, cov_f, cov_f_inv, ddiag_f_inv: inv, freq_diagonal: true })
    }

    fn quad_freq(&self, d: &DVector<f64>) -> f64 {
        if self.freq_diagonal {
            d.iter()
                .zip(self.ddiag_f_inv.iter())
                .map(|(x, w)| x * x * w)
                .sum()
        } else {
            d.dot(&(&self.cov_f_inv * d))
        }
    }

    fn quad_vertex(&self, d: &DVector<f64>, basis: &SpectralBasis) -> f64 {
        if self.freq_diagonal {
            self.quad_freq(&basis.to_freq(d))
        } else {
            d.dot(&(&self.cov_v_inv * d))
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    /// Independent frequency components with the given standard deviations.
    FreqDiag(DVector<f64>),
    /// Lower-triangular Cholesky factor of the vertex-domain covariance.
    VertexChol(DMatrix<f64>),
}

/// Gaussian prior over the graph signal.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    basis: Arc<SpectralBasis>,
    mean_v: DVector<f64>,
    mean_f: DVector<f64>,
    cov: DomainCovariance,
    sampler: Sampler,
}

impl GaussianPrior {
    /// Prior from a vertex-domain mean and SPD covariance.
    pub fn from_vertex(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        basis: Arc<SpectralBasis>,
    ) -> Result<Self> {
        if mean.len() != basis.n() {
            return Err(Error::DimensionMismatch { expected: basis.n(), found: mean.len() });
        }
        let chol = covariance.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let cov = DomainCovariance::from_vertex(covariance, &basis)?;
        let mean_f = basis.to_freq(&mean);
        Ok(Self {
            basis,
            mean_v: mean,
            mean_f,
            cov,
            sampler: Sampler::VertexChol(chol.l()),
        })
    }

    /// Prior with independent graph-frequency components of the given
    /// variances.
    pub fn from_freq_diag(
        mean_freq: DVector<f64>,
        var_freq: DVector<f64>,
        basis: Arc<SpectralBasis>,
    ) -> Result<Self> {
        let cov = DomainCovariance::from_freq_diag(&var_freq, &basis)?;
        let mean_v = basis.to_vertex(&mean_freq);
        let std = var_freq.map(f64::sqrt);
        Ok(Self { basis, mean_v, mean_f: mean_freq, cov, sampler: Sampler::FreqDiag(std) })
    }

    /// Smooth zero-mean prior `x̃ ~ N(0, β Λ†)`.
    ///
    /// The zero-eigenvalue frequency carries no variance (deterministic
    /// phase reference); its stored variance is pinned to a small ridge so
    /// the cached inverses exist, and draws keep that component exactly zero.
    pub fn smooth(basis: Arc<SpectralBasis>, beta: f64) -> Result<Self> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(Error::InvalidBeta(beta));
        }
        let n = basis.n();
        let mut var = DVector::zeros(n);
        var[0] = SMOOTH_PRIOR_REFERENCE_RIDGE;
        for i in 1..n {
            var[i] = beta / basis.eigenvalues()[i];
        }
        let cov = DomainCovariance::from_freq_diag(&var, &basis)?;
        let mut std = var.map(f64::sqrt);
        std[0] = 0.0;
        Ok(Self {
            basis,
            mean_v: DVector::zeros(n),
            mean_f: DVector::zeros(n),
            cov,
            sampler: Sampler::FreqDiag(std),
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean_v
    }

    pub fn mean_freq(&self) -> &DVector<f64> {
        &self.mean_f
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov.cov_v
    }

    pub fn cov_inv(&self) -> &DMatrix<f64> {
        &self.cov.cov_v_inv
    }

    pub fn cov_freq(&self) -> &DMatrix<f64> {
        &self.cov.cov_f
    }

    pub fn cov_freq_inv(&self) -> &DMatrix<f64> {
        &self.cov.cov_f_inv
    }

    /// `ddiag(C_x̃x̃⁻¹)` as a vector.
    pub fn ddiag_freq_inv(&self) -> &DVector<f64> {
        &self.cov.ddiag_f_inv
    }

    /// `dᵀ C_xx⁻¹ d` for a vertex-domain deviation.
    pub fn quad_vertex(&self, d: &DVector<f64>) -> f64 {
        self.cov.quad_vertex(d, &self.basis)
    }

    /// `d̃ᵀ C_x̃x̃⁻¹ d̃` for a frequency-domain deviation.
    pub fn quad_freq(&self, d: &DVector<f64>) -> f64 {
        self.cov.quad_freq(d)
    }

    /// Vertex-domain draw using the caller's RNG stream.
    pub fn sample(&self, rng: &mut StdRng) -> DVector<f64> {
        sample_gaussian(&self.sampler, Some(&self.mean_v), Some(&self.mean_f), &self.basis, rng)
    }

    /// Deterministic vertex-domain draw for the given seed.
    pub fn sample_seeded(&self, seed: u64) -> DVector<f64> {
        self.sample(&mut StdRng::seed_from_u64(seed))
    }
}

/// Zero-mean Gaussian measurement noise.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    basis: Arc<SpectralBasis>,
    cov: DomainCovariance,
    sampler: Sampler,
}

impl NoiseModel {
    pub fn isotropic(variance: f64, basis: Arc<SpectralBasis>) -> Result<Self> {
        let var = DVector::from_element(basis.n(), variance);
        Self::from_freq_diag(var, basis)
    }

    pub fn from_freq_diag(var_freq: DVector<f64>, basis: Arc<SpectralBasis>) -> Result<Self> {
        let cov = DomainCovariance::from_freq_diag(&var_freq, &basis)?;
        let std = var_freq.map(f64::sqrt);
        Ok(Self { basis, cov, sampler: Sampler::FreqDiag(std) })
    }

    pub fn from_vertex(covariance: DMatrix<f64>, basis: Arc<SpectralBasis>) -> Result<Self> {
        let chol = covariance.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let cov = DomainCovariance::from_vertex(covariance, &basis)?;
        Ok(Self { basis, cov, sampler: Sampler::VertexChol(chol.l()) })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov.cov_v
    }

    pub fn cov_inv(&self) -> &DMatrix<f64> {
        &self.cov.cov_v_inv
    }

    pub fn cov_freq(&self) -> &DMatrix<f64> {
        &self.cov.cov_f
    }

    pub fn cov_freq_inv(&self) -> &DMatrix<f64> {
        &self.cov.cov_f_inv
    }

    pub fn ddiag_freq_inv(&self) -> &DVector<f64> {
        &self.cov.ddiag_f_inv
    }

    /// `dᵀ C_ww⁻¹ d` for a vertex-domain residual.
    pub fn quad_vertex(&self, d: &DVector<f64>) -> f64 {
        self.cov.quad_vertex(d, &self.basis)
    }

    /// `d̃ᵀ C_w̃w̃⁻¹ d̃` for a frequency-domain residual.
    pub fn quad_freq(&self, d: &DVector<f64>) -> f64 {
        self.cov.quad_freq(d)
    }

    pub fn sample(&self, rng: &mut StdRng) -> DVector<f64> {
        sample_gaussian(&self.sampler, None, None, &self.basis, rng)
    }

    pub fn sample_seeded(&self, seed: u64) -> DVector<f64> {
        self.sample(&mut StdRng::seed_from_u64(seed))
    }
}

fn sample_gaussian(
    sampler: &Sampler,
    mean_v: Option<&DVector<f64>>,
    mean_f: Option<&DVector<f64>>,
    basis: &SpectralBasis,
    rng: &mut StdRng,
) -> DVector<f64> {
    let n = basis.n();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    match sampler {
        Sampler::FreqDiag(std) => {
            let mut freq = std.component_mul(&z);
            if let Some(m) = mean_f {
                freq += m;
            }
            basis.to_vertex(&freq)
        }
        Sampler::VertexChol(l) => {
            let mut x = l * z;
            if let Some(m) = mean_v {
                x += m;
            }
            x
        }
    }
}

/// Rank-one sample covariances built from the current iterate and residual
/// in the graph-frequency domain.
#[derive(Debug, Clone)]
pub struct SampleCovariances {
    pub s_xx: DMatrix<f64>,
    pub s_ww: DMatrix<f64>,
    pub s_wx: DMatrix<f64>,
}

/// `S_x̃x̃ = (x̂̃ - μ̃)(x̂̃ - μ̃)ᵀ`, `S_w̃w̃ = r r ᵀ`, `S_w̃x̃ = r (x̂̃ - μ̃)ᵀ`
/// with `r = ỹ - g̃`.
pub fn sample_covariances(
    iterate_freq: &DVector<f64>,
    prior_mean_freq: &DVector<f64>,
    y_freq: &DVector<f64>,
    g_freq: &DVector<f64>,
) -> SampleCovariances {
    let u = iterate_freq - prior_mean_freq;
    let r = y_freq - g_freq;
    SampleCovariances {
        s_xx: &u * u.transpose(),
        s_ww: &r * r.transpose(),
        s_wx: &r * u.transpose(),
    }
}

/// Paired draws `(x_p, y_p)` for training sample-mean linear estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub xs: Vec<DVector<f64>>,
    pub ys: Vec<DVector<f64>>,
}

impl TrainingSet {
    /// Generates `count` pairs from the generative model `y = g(x) + w`.
    pub fn generate(
        model: &dyn MeasurementModel,
        prior: &GaussianPrior,
        noise: &NoiseModel,
        count: usize,
        seed: u64,
    ) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(count);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let x = prior.sample(&mut rng);
            let y = model.evaluate(&x) + noise.sample(&mut rng);
            xs.push(x);
            ys.push(y);
        }
        Self { xs, ys }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }

    /// Writes the set as CSV with columns `x0..x{N-1}, y0..y{N-1}`.
    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..n)
            .map(|i| format!("x{i}"))
            .chain((0..n).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header).map_err(csv_err)?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let row: Vec<String> = x
                .iter()
                .chain(y.iter())
                .map(|v| format!("{v:.17e}"))
                .collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let width = r.headers().map_err(csv_err)?.len();
        if width == 0 || width % 2 != 0 {
            return Err(Error::ParseError {
                line: 1,
                message: format!("expected an even number of columns, got {width}"),
            });
        }
        let n = width / 2;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (idx, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let vals: Vec<f64> = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::ParseError { line: idx + 2, message: e.to_string() })?;
            xs.push(DVector::from_row_slice(&vals[..n]));
            ys.push(DVector::from_row_slice(&vals[n..]));
        }
        Ok(Self { xs, ys })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::ParseError { line: 0, message: e.to_string() }
}

fn sample_mean(vs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(vs[0].len());
    for v in vs {
        acc += v;
    }
    acc / vs.len() as f64
}

/// Linear MMSE estimator `x̂ = μ_x + C_xy C_yy⁻¹ (y - μ_y)`.
#[derive(Debug, Clone)]
pub struct Lmmse {
    mean_x: DVector<f64>,
    mean_y: DVector<f64>,
    gain: DMatrix<f64>,
}

impl Lmmse {
    /// From analytic moments; `c_yy` must be SPD.
    pub fn from_moments(
        mean_x: DVector<f64>,
        mean_y: DVector<f64>,
        c_xy: &DMatrix<f64>,
        c_yy: &DMatrix<f64>,
    ) -> Result<Self> {
        let chol = c_yy.clone().cholesky().ok_or(Error::SingularCovariance)?;
        // gain = C_xy C_yy^{-1} computed as (C_yy^{-1} C_xyᵀ)ᵀ.
        let gain = chol.solve(&c_xy.transpose()).transpose();
        Ok(Self { mean_x, mean_y, gain })
    }

    /// Sample-mean version with unbiased (P-1) covariance normalization and
    /// diagonal loading `eps_dl * trace / N` on the measurement covariance.
    pub fn from_training(training: &TrainingSet, eps_dl: f64) -> Result<Self> {
        let p = training.len();
        if p < 2 {
            return Err(Error::InvalidConfig(format!(
                "sample LMMSE needs at least 2 training pairs, got {p}"
            )));
        }
        let n = training.dim();
        let mean_x = sample_mean(&training.xs);
        let mean_y = sample_mean(&training.ys);
        let mut c_xy = DMatrix::zeros(n, n);
        let mut c_yy = DMatrix::zeros(n, n);
        for (x, y) in training.xs.iter().zip(&training.ys) {
            let dx = x - &mean_x;
            let dy = y - &mean_y;
            c_xy += &dx * dy.transpose();
            c_yy += &dy * dy.transpose();
        }
        let norm = (p - 1) as f64;
        c_xy /= norm;
        c_yy /= norm;
        let load = eps_dl * c_yy.trace() / n as f64;
        for i in 0..n {
            c_yy[(i, i)] += load;
        }
        Self::from_moments(mean_x, mean_y, &c_xy, &c_yy)
    }

    pub fn estimate(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.mean_x + &self.gain * (y - &self.mean_y)
    }
}

/// GSP-LMMSE estimator: the MMSE-optimal graph filter,
/// `x̂ = μ_x + V diag(h) (ỹ - μ̃_y)` with
/// `h_n = [C_x̃ỹ]_nn / [C_ỹỹ]_nn`.
#[derive(Debug, Clone)]
pub struct GspLmmse {
    basis: Arc<SpectralBasis>,
    mean_x: DVector<f64>,
    mean_y_freq: DVector<f64>,
    response: DVector<f64>,
}

impl GspLmmse {
    /// From analytic frequency-domain covariance diagonals.
    pub fn from_moments(
        basis: Arc<SpectralBasis>,
        mean_x: DVector<f64>,
        mean_y_freq: DVector<f64>,
        c_xy_freq_diag: &DVector<f64>,
        c_yy_freq_diag: &DVector<f64>,
        eps_dl: f64,
    ) -> Result<Self> {
        let n = basis.n();
        let load = eps_dl * c_yy_freq_diag.sum() / n as f64;
        let mut response = DVector::zeros(n);
        for i in 0..n {
            let denom = c_yy_freq_diag[i] + load;
            if denom <= 0.0 || !denom.is_finite() {
                return Err(Error::SingularCovariance);
            }
            response[i] = c_xy_freq_diag[i] / denom;
        }
        Ok(Self { basis, mean_x, mean_y_freq, response })
    }

    /// Sample-mean version; only the frequency-domain covariance diagonals
    /// are estimated.
    pub fn from_training(
        training: &TrainingSet,
        basis: Arc<SpectralBasis>,
        eps_dl: f64,
    ) -> Result<Self> {
        let p = training.len();
        if p < 2 {
            return Err(Error::InvalidConfig(format!(
                "sample GSP-LMMSE needs at least 2 training pairs, got {p}"
            )));
        }
        let n = basis.n();
        if training.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: training.dim() });
        }
        let xf: Vec<DVector<f64>> = training.xs.iter().map(|x| basis.to_freq(x)).collect();
        let yf: Vec<DVector<f64>> = training.ys.iter().map(|y| basis.to_freq(y)).collect();
        let mean_xf = sample_mean(&xf);
        let mean_yf = sample_mean(&yf);
        let mut c_xy = DVector::zeros(n);
        let mut c_yy = DVector::zeros(n);
        for (x, y) in xf.iter().zip(&yf) {
            for i in 0..n {
                let dx = x[i] - mean_xf[i];
                let dy = y[i] - mean_yf[i];
                c_xy[i] += dx * dy;
                c_yy[i] += dy * dy;
            }
        }
        let norm = (p - 1) as f64;
        c_xy /= norm;
        c_yy /= norm;
        let mean_x = basis.to_vertex(&mean_xf);
        Self::from_moments(basis, mean_x, mean_yf, &c_xy, &c_yy, eps_dl)
    }

    pub fn estimate(&self, y: &DVector<f64>) -> DVector<f64> {
        let y_freq = self.basis.to_freq(y);
        let filtered = (y_freq - &self.mean_y_freq).component_mul(&self.response);
        &self.mean_x + self.basis.to_vertex(&filtered)
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::watts_strogatz;
    use crate::measurement::{CubicFrequencyModel, LinearFilterModel};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn shared_basis(n: usize, seed: u64) -> Arc<SpectralBasis> {
        let g = watts_strogatz(n, 4, 0.3, seed).unwrap();
        Arc::new(SpectralBasis::new(&g.laplacian()).unwrap())
    }

    fn random_spd(n: usize, rng: &mut StdRng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn cached_inverses_are_consistent() {
        let basis = shared_basis(9, 1);
        let mut rng = StdRng::seed_from_u64(2);
        let cov = random_spd(9, &mut rng);
        let prior =
            GaussianPrior::from_vertex(DVector::zeros(9), cov, basis.clone()).unwrap();
        let eye = prior.cov() * prior.cov_inv();
        assert_abs_diff_eq!(eye, DMatrix::identity(9, 9), epsilon = 1e-8);
        let v = basis.eigenvectors();
        let expected_cf = v.tr_mul(&(prior.cov() * v));
        assert_abs_diff_eq!(prior.cov_freq(), &expected_cf, epsilon = 1e-10);
        for i in 0..9 {
            assert_abs_diff_eq!(
                prior.ddiag_freq_inv()[i],
                prior.cov_freq_inv()[(i, i)],
                epsilon = 0.0
            );
        }
    }

    #[test]
    fn smooth_prior_rejects_nonpositive_beta() {
        let basis = shared_basis(6, 3);
        assert!(matches!(
            GaussianPrior::smooth(basis.clone(), 0.0),
            Err(Error::InvalidBeta(_))
        ));
        assert!(matches!(
            GaussianPrior::smooth(basis, -1.0),
            Err(Error::InvalidBeta(_))
        ));
    }

    #[test]
    fn smooth_prior_vertex_variances_match_spectral_sum() {
        let basis = shared_basis(10, 4);
        let beta = 2.5;
        let prior = GaussianPrior::smooth(basis.clone(), beta).unwrap();
        for i in 0..10 {
            let expected: f64 = (1..10)
                .map(|j| {
                    let vij = basis.eigenvectors()[(i, j)];
                    beta * vij * vij / basis.eigenvalues()[j]
                })
                .sum();
            assert_abs_diff_eq!(prior.cov()[(i, i)], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn smooth_prior_collapses_as_beta_vanishes() {
        let basis = shared_basis(8, 5);
        let prior = GaussianPrior::smooth(basis, 1e-12).unwrap();
        for seed in 0..5 {
            assert!(prior.sample_seeded(seed).norm() < 1e-4);
        }
    }

    #[test]
    fn smooth_prior_draws_pin_the_reference_frequency() {
        let basis = shared_basis(8, 5);
        let prior = GaussianPrior::smooth(basis.clone(), 1.0).unwrap();
        for seed in 0..20 {
            let x = prior.sample_seeded(seed);
            let x_freq = basis.to_freq(&x);
            assert!(x_freq[0].abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_prior_total_variation_matches_expectation() {
        let basis = shared_basis(8, 6);
        let g = watts_strogatz(8, 4, 0.3, 6).unwrap();
        let lap = g.laplacian();
        let beta = 1.7;
        let prior = GaussianPrior::smooth(basis, beta).unwrap();
        let draws = 40_000;
        let mut rng = StdRng::seed_from_u64(77);
        let mut acc = 0.0;
        for _ in 0..draws {
            let x = prior.sample(&mut rng);
            acc += (x.transpose() * &lap * &x)[(0, 0)];
        }
        let mean = acc / draws as f64;
        let expected = beta * 7.0;
        // E = β(N-1); std of the mean is β sqrt(2(N-1)/draws).
        let tol = 4.0 * beta * (2.0 * 7.0 / draws as f64).sqrt();
        assert!((mean - expected).abs() < tol, "mean {mean}, expected {expected}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let basis = shared_basis(7, 7);
        let prior = GaussianPrior::smooth(basis.clone(), 1.0).unwrap();
        assert_eq!(prior.sample_seeded(42), prior.sample_seeded(42));
        let noise = NoiseModel::isotropic(0.3, basis).unwrap();
        assert_eq!(noise.sample_seeded(42), noise.sample_seeded(42));
    }

    #[test]
    fn empirical_moments_match_declared() {
        let basis = shared_basis(6, 8);
        let mut rng = StdRng::seed_from_u64(9);
        let cov = random_spd(6, &mut rng);
        let mean = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let prior = GaussianPrior::from_vertex(mean.clone(), cov.clone(), basis).unwrap();
        let draws = 100_000;
        let mut sample_rng = StdRng::seed_from_u64(123);
        let mut acc_mean = DVector::zeros(6);
        let mut acc_cov = DMatrix::zeros(6, 6);
        let samples: Vec<DVector<f64>> =
            (0..draws).map(|_| prior.sample(&mut sample_rng)).collect();
        for x in &samples {
            acc_mean += x;
        }
        acc_mean /= draws as f64;
        for x in &samples {
            let d = x - &acc_mean;
            acc_cov += &d * d.transpose();
        }
        acc_cov /= (draws - 1) as f64;
        // 3 standard errors: se(C_ij) is about sqrt((C_ii C_jj + C_ij^2)/draws).
        for i in 0..6 {
            for j in 0..6 {
                let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / draws as f64)
                    .sqrt();
                assert!(
                    (acc_cov[(i, j)] - cov[(i, j)]).abs() < 3.5 * se,
                    "covariance entry ({i},{j})"
                );
            }
        }
        for i in 0..6 {
            let se = (cov[(i, i)] / draws as f64).sqrt();
            assert!((acc_mean[i] - mean[i]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn sample_covariance_shapes() {
        let basis = shared_basis(5, 10);
        let mut rng = StdRng::seed_from_u64(11);
        let mean = DVector::zeros(5);
        let iterate = DVector::from_fn(5, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(5, |_, _| rng.random::<f64>());
        let g = DVector::from_fn(5, |_, _| rng.random::<f64>());
        let covs = sample_covariances(&iterate, &mean, &y, &g);
        assert_eq!(covs.s_xx.rank(1e-12), 1);
        assert_abs_diff_eq!(covs.s_ww.trace(), (&y - &g).norm_squared(), epsilon = 1e-12);

        let at_mean = sample_covariances(&mean, &mean, &y, &g);
        assert_abs_diff_eq!(at_mean.s_xx.norm(), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(at_mean.s_wx.norm(), 0.0, epsilon = 0.0);
        let _ = basis;
    }

    #[test]
    fn wiener_shrinkage_on_identity_model() {
        // y = x + w with matched moments reduces to the classic form
        // μ + C_xx (C_xx + C_ww)^{-1} (y - μ).
        let basis = shared_basis(6, 12);
        let mut rng = StdRng::seed_from_u64(13);
        let c_xx = random_spd(6, &mut rng);
        let c_ww = random_spd(6, &mut rng);
        let mean = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let est = Lmmse::from_moments(
            mean.clone(),
            mean.clone(),
            &c_xx,
            &(&c_xx + &c_ww),
        )
        .unwrap();
        let y = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let expected = &mean
            + &c_xx
                * (&c_xx + &c_ww)
                    .clone()
                    .cholesky()
                    .unwrap()
                    .solve(&(&y - &mean));
        assert_abs_diff_eq!(est.estimate(&y), expected, epsilon = 1e-10);
        let _ = basis;
    }

    #[test]
    fn cubic_analytic_gain() {
        // For x̃ ~ N(0, σ²) and ỹ = x̃³ + w̃: C_x̃ỹ = 3σ⁴, C_ỹỹ = σ_w² + 15σ⁶.
        let sigma_x2: f64 = 0.5;
        let sigma_w2 = 0.05;
        let gain = 3.0 * sigma_x2.powi(2) / (sigma_w2 + 15.0 * sigma_x2.powi(3));
        assert_abs_diff_eq!(gain, 0.75 / 1.925, epsilon = 1e-15);

        let basis = shared_basis(8, 14);
        let n = 8;
        let c_xy = DMatrix::identity(n, n) * (3.0 * sigma_x2.powi(2));
        let c_yy = DMatrix::identity(n, n) * (sigma_w2 + 15.0 * sigma_x2.powi(3));
        let lmmse =
            Lmmse::from_moments(DVector::zeros(n), DVector::zeros(n), &c_xy, &c_yy).unwrap();
        let gsp = GspLmmse::from_moments(
            basis,
            DVector::zeros(n),
            DVector::zeros(n),
            &DVector::from_element(n, 3.0 * sigma_x2.powi(2)),
            &DVector::from_element(n, sigma_w2 + 15.0 * sigma_x2.powi(3)),
            0.0,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(15);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>());
        assert_abs_diff_eq!(lmmse.estimate(&y), &y * gain, epsilon = 1e-12);
        assert_abs_diff_eq!(gsp.estimate(&y), &y * gain, epsilon = 1e-12);
    }

    #[test]
    fn sample_lmmse_converges_to_analytic_on_linear_model() {
        let basis = shared_basis(6, 16);
        let mut rng = StdRng::seed_from_u64(17);
        let response = DVector::from_fn(6, |_, _| rng.random::<f64>() + 0.5);
        let model = LinearFilterModel::new(basis.clone(), response.clone());
        let sigma_x2 = 0.8;
        let sigma_w2 = 0.1;
        let prior = GaussianPrior::from_freq_diag(
            DVector::zeros(6),
            DVector::from_element(6, sigma_x2),
            basis.clone(),
        )
        .unwrap();
        let noise = NoiseModel::isotropic(sigma_w2, basis.clone()).unwrap();
        let training = TrainingSet::generate(&model, &prior, &noise, 10_000, 2024);
        let sample = Lmmse::from_training(&training, DEFAULT_DIAGONAL_LOADING).unwrap();

        // Analytic: C_x̃ỹ = σ_x² f, C_ỹỹ = σ_x² f² + σ_w² per frequency.
        let c_xy = response.map(|f| sigma_x2 * f);
        let c_yy = response.map(|f| sigma_x2 * f * f + sigma_w2);
        let analytic = GspLmmse::from_moments(
            basis.clone(),
            DVector::zeros(6),
            DVector::zeros(6),
            &c_xy,
            &c_yy,
            0.0,
        )
        .unwrap();

        let mut err = 0.0;
        for seed in 0..50u64 {
            let x = prior.sample_seeded(900 + seed);
            let y = model.evaluate(&x) + noise.sample_seeded(1800 + seed);
            err = f64::max(err, (sample.estimate(&y) - analytic.estimate(&y)).norm());
        }
        // Sample moments at P = 10^4 carry O(P^{-1/2}) error.
        assert!(err < 0.15, "max deviation {err}");
    }

    #[test]
    fn gsp_lmmse_zero_signal_covariance_returns_prior_mean() {
        let basis = shared_basis(5, 18);
        let mean_x = DVector::from_element(5, 0.7);
        let est = GspLmmse::from_moments(
            basis.clone(),
            mean_x.clone(),
            DVector::zeros(5),
            &DVector::zeros(5),
            &DVector::from_element(5, 1.0),
            0.0,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(19);
        let y = DVector::from_fn(5, |_, _| rng.random::<f64>());
        assert_abs_diff_eq!(est.estimate(&y), mean_x, epsilon = 1e-12);
    }

    #[test]
    fn sample_estimators_deterministic_per_seed() {
        let basis = shared_basis(6, 20);
        let model = CubicFrequencyModel::new(basis.clone());
        let prior = GaussianPrior::from_freq_diag(
            DVector::zeros(6),
            DVector::from_element(6, 0.5),
            basis.clone(),
        )
        .unwrap();
        let noise = NoiseModel::isotropic(0.05, basis.clone()).unwrap();
        let a = TrainingSet::generate(&model, &prior, &noise, 50, 31);
        let b = TrainingSet::generate(&model, &prior, &noise, 50, 31);
        assert_eq!(a, b);
        let ga = GspLmmse::from_training(&a, basis.clone(), 1e-6).unwrap();
        let gb = GspLmmse::from_training(&b, basis, 1e-6).unwrap();
        assert_eq!(ga.response(), gb.response());
    }

    #[test]
    fn training_set_round_trip() {
        let basis = shared_basis(6, 22);
        let model = CubicFrequencyModel::new(basis.clone());
        let prior = GaussianPrior::from_freq_diag(
            DVector::zeros(6),
            DVector::from_element(6, 1.0),
            basis.clone(),
        )
        .unwrap();
        let noise = NoiseModel::isotropic(0.1, basis).unwrap();
        let ts = TrainingSet::generate(&model, &prior, &noise, 12, 5);
        let mut buf = Vec::new();
        ts.to_writer(&mut buf).unwrap();
        let back = TrainingSet::from_reader(buf.as_slice()).unwrap();
        assert_eq!(ts.len(), back.len());
        for (a, b) in ts.xs.iter().zip(&back.xs) {
            assert_abs_diff_eq!(a, b, epsilon = 0.0);
        }
        for (a, b) in ts.ys.iter().zip(&back.ys) {
            assert_abs_diff_eq!(a, b, epsilon = 0.0);
        }
    }
}
