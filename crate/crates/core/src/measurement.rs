//! Nonlinear measurement models `g(L, x)` with analytic Jacobians in the
//! vertex and graph-frequency domains.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::spectral::SpectralBasis;

/// Default step for the finite-difference Jacobian oracle; balances
/// truncation and rounding at double precision.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Nonlinear measurement map with an analytic Jacobian.
///
/// The frequency-domain forms satisfy `g̃(x̃) = Vᵀ g(V x̃)` and
/// `G̃ = Vᵀ G V`; the defaults compute them via the basis, and models whose
/// natural form lives in the frequency domain override them.
pub trait MeasurementModel: Send + Sync {
    fn dim(&self) -> usize;

    fn basis(&self) -> &Arc<SpectralBasis>;

    /// `g(L, x)` for a vertex-domain state.
    fn evaluate(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Analytic N×N Jacobian at a vertex-domain state.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `g̃(L, V x̃) = Vᵀ g(L, x)`.
    fn evaluate_freq(&self, x_freq: &DVector<f64>) -> DVector<f64> {
        let x = self.basis().to_vertex(x_freq);
        self.basis().to_freq(&self.evaluate(&x))
    }

    /// `G̃ = Vᵀ G V`.
    fn jacobian_freq(&self, x_freq: &DVector<f64>) -> DMatrix<f64> {
        let v = self.basis().eigenvectors();
        let x = self.basis().to_vertex(x_freq);
        let g = self.jacobian(&x);
        v.tr_mul(&(g * v))
    }

    /// `diag(G̃)`; models with a diagonal frequency Jacobian override this to
    /// avoid forming the full matrix.
    fn jacobian_freq_diag(&self, x_freq: &DVector<f64>) -> DVector<f64> {
        self.jacobian_freq(x_freq).diagonal()
    }
}

/// Cubic frequency-domain model: `g̃_n = x̃_n³`.
///
/// Separable per graph frequency; its vertex-domain form is obtained by
/// conjugation with the eigenvector matrix.
#[derive(Debug, Clone)]
pub struct CubicFrequencyModel {
    basis: Arc<SpectralBasis>,
}

impl CubicFrequencyModel {
    pub fn new(basis: Arc<SpectralBasis>) -> Self {
        Self { basis }
    }
}

impl MeasurementModel for CubicFrequencyModel {
    fn dim(&self) -> usize {
        self.basis.n()
    }

    fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        let x_freq = self.basis.to_freq(x);
        self.basis.to_vertex(&self.evaluate_freq(&x_freq))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let x_freq = self.basis.to_freq(x);
        let v = self.basis.eigenvectors();
        let diag = DMatrix::from_diagonal(&self.jacobian_freq_diag(&x_freq));
        v * diag * v.transpose()
    }

    fn evaluate_freq(&self, x_freq: &DVector<f64>) -> DVector<f64> {
        x_freq.map(|t| t * t * t)
    }

    fn jacobian_freq(&self, x_freq: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.jacobian_freq_diag(x_freq))
    }

    fn jacobian_freq_diag(&self, x_freq: &DVector<f64>) -> DVector<f64> {
        x_freq.map(|t| 3.0 * t * t)
    }
}

/// Linear graph-filter model `g(L, x) = V f(Λ) Vᵀ x`.
#[derive(Debug, Clone)]
pub struct LinearFilterModel {
    basis: Arc<SpectralBasis>,
    response: DVector<f64>,
}

impl LinearFilterModel {
    pub fn new(basis: Arc<SpectralBasis>, response: DVector<f64>) -> Self {
        assert_eq!(response.len(), basis.n(), "filter response length");
        Self { basis, response }
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }
}

impl MeasurementModel for LinearFilterModel {
    fn dim(&self) -> usize {
        self.basis.n()
    }

    fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        let freq = self.basis.to_freq(x).component_mul(&self.response);
        self.basis.to_vertex(&freq)
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let v = self.basis.eigenvectors();
        v * DMatrix::from_diagonal(&self.response) * v.transpose()
    }

    fn evaluate_freq(&self, x_freq: &DVector<f64>) -> DVector<f64> {
        x_freq.component_mul(&self.response)
    }

    fn jacobian_freq(&self, _x_freq: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.response)
    }

    fn jacobian_freq_diag(&self, _x_freq: &DVector<f64>) -> DVector<f64> {
        self.response.clone()
    }
}

/// AC power-flow active-power measurement model over bus voltage phases.
///
/// Component n is `Σ_m |v_n||v_m| (G_{n,m} cos(x_n - x_m) + B_{n,m} sin(x_n - x_m))`
/// with voltage magnitudes fixed at 1.0. The conductance and susceptance
/// matrices are zero off the network's edges, so the Jacobian inherits the
/// adjacency sparsity pattern.
#[derive(Debug, Clone)]
pub struct AcPowerFlowModel {
    conductance: DMatrix<f64>,
    susceptance: DMatrix<f64>,
    basis: Arc<SpectralBasis>,
}

impl AcPowerFlowModel {
    pub fn new(
        conductance: DMatrix<f64>,
        susceptance: DMatrix<f64>,
        basis: Arc<SpectralBasis>,
    ) -> Self {
        let n = basis.n();
        assert_eq!(conductance.nrows(), n, "conductance dimension");
        assert_eq!(susceptance.nrows(), n, "susceptance dimension");
        Self { conductance, susceptance, basis }
    }

    pub fn conductance(&self) -> &DMatrix<f64> {
        &self.conductance
    }

    pub fn susceptance(&self) -> &DMatrix<f64> {
        &self.susceptance
    }
}

impl MeasurementModel for AcPowerFlowModel {
    fn dim(&self) -> usize {
        self.basis.n()
    }

    fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for m in 0..n {
                let g = self.conductance[(i, m)];
                let b = self.susceptance[(i, m)];
                if g == 0.0 && b == 0.0 {
                    continue;
                }
                let d = x[i] - x[m];
                acc += g * d.cos() + b * d.sin();
            }
            out[i] = acc;
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for m in 0..n {
                if m == i {
                    continue;
                }
                let g = self.conductance[(i, m)];
                let b = self.susceptance[(i, m)];
                if g == 0.0 && b == 0.0 {
                    continue;
                }
                let d = x[i] - x[m];
                jac[(i, m)] = g * d.sin() - b * d.cos();
                diag += -g * d.sin() + b * d.cos();
            }
            jac[(i, i)] = diag;
        }
        jac
    }
}

/// Central-difference Jacobian, column by column; test oracle for the
/// analytic Jacobians.
pub fn jacobian_finite_difference(
    model: &dyn MeasurementModel,
    x: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let n = model.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for k in 0..n {
        probe[k] = x[k] + step;
        let plus = model.evaluate(&probe);
        probe[k] = x[k] - step;
        let minus = model.evaluate(&probe);
        probe[k] = x[k];
        jac.set_column(k, &((plus - minus) / (2.0 * step)));
    }
    jac
}

/// Sampled check of frequency separability: `[g̃(V x̃)]_n == [g̃(x̃_n v_n)]_n`
/// at every supplied test point, within `tol`. A sampled surrogate for the
/// pointwise definition, not a proof.
pub fn is_orthogonal_frequencies(
    model: &dyn MeasurementModel,
    test_points_freq: &[DVector<f64>],
    tol: f64,
) -> bool {
    assert!(!test_points_freq.is_empty(), "need at least one test point");
    let n = model.dim();
    for point in test_points_freq {
        let full = model.evaluate_freq(point);
        for k in 0..n {
            let mut single = DVector::zeros(n);
            single[k] = point[k];
            let isolated = model.evaluate_freq(&single);
            if (full[k] - isolated[k]).abs() > tol {
                return false;
            }
        }
    }
    true
}
