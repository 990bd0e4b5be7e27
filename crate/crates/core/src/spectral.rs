//! Laplacian spectral basis, graph Fourier transform, and graph filters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance separating the zero eigenvalue of a connected graph
/// from the rest of the spectrum.
pub const CONNECTIVITY_TOL: f64 = 1e-10;

/// Domain tag of a graph signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Vertex,
    Frequency,
}

/// Length-N signal carried in either the vertex or the graph-frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: DVector<f64>,
    domain: Domain,
}

impl GraphSignal {
    pub fn vertex(values: DVector<f64>) -> Self {
        Self { values, domain: Domain::Vertex }
    }

    pub fn frequency(values: DVector<f64>) -> Self {
        Self { values, domain: Domain::Frequency }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch { expected, found: self.domain });
        }
        Ok(())
    }
}

/// Eigendecomposition `L = V Λ Vᵀ` of a graph Laplacian.
///
/// Eigenvalues are ascending; eigenvector signs are fixed so the first entry
/// with magnitude above 1e-8 is positive, which makes results reproducible
/// across runs. Computed once per graph and shared behind an `Arc`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralBasis {
    /// Decomposes a symmetric PSD Laplacian; rejects disconnected graphs
    /// (second eigenvalue below `CONNECTIVITY_TOL` relative to the largest).
    pub fn new(laplacian: &DMatrix<f64>) -> Result<Self> {
        let n = laplacian.nrows();
        if n == 0 || laplacian.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n.max(1), found: laplacian.ncols() });
        }
        let eigen = laplacian
            .clone()
            .try_symmetric_eigen(1e-13, 10_000)
            .ok_or(Error::DecompositionFailure)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

        let mut eigenvalues = DVector::zeros(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvalues[dst] = eigen.eigenvalues[src];
            eigenvectors.set_column(dst, &eigen.eigenvectors.column(src));
        }

        let lambda_max = eigenvalues[n - 1].abs();
        if eigenvalues[0] < -1e-8 * lambda_max.max(1.0) {
            return Err(Error::DecompositionFailure);
        }
        // Round tiny negative eigenvalues of the PSD input up to zero.
        for i in 0..n {
            if eigenvalues[i] < 0.0 {
                eigenvalues[i] = 0.0;
            }
        }
        if n > 1 && eigenvalues[1] <= CONNECTIVITY_TOL * lambda_max {
            return Err(Error::DisconnectedGraph);
        }

        // Sign convention: first entry with |v| > 1e-8 is positive.
        for c in 0..n {
            let mut col = eigenvectors.column_mut(c);
            if let Some(lead) = col.iter().find(|x| x.abs() > 1e-8) {
                if *lead < 0.0 {
                    col.neg_mut();
                }
            }
        }

        Ok(Self { eigenvalues, eigenvectors })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending eigenvalues (graph frequencies).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector matrix `V`, columns in eigenvalue order.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `Vᵀ a`: vertex-domain vector to graph-frequency coefficients.
    pub fn to_freq(&self, a: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(a)
    }

    /// `V ã`: graph-frequency coefficients to the vertex domain.
    pub fn to_vertex(&self, a_freq: &DVector<f64>) -> DVector<f64> {
        &self.eigenvectors * a_freq
    }

    /// Graph Fourier transform of a vertex-domain signal.
    pub fn gft(&self, signal: &GraphSignal) -> Result<GraphSignal> {
        signal.expect_domain(Domain::Vertex)?;
        self.check_len(signal.len())?;
        Ok(GraphSignal::frequency(self.to_freq(signal.values())))
    }

    /// Inverse graph Fourier transform of a frequency-domain signal.
    pub fn igft(&self, signal: &GraphSignal) -> Result<GraphSignal> {
        signal.expect_domain(Domain::Frequency)?;
        self.check_len(signal.len())?;
        Ok(GraphSignal::vertex(self.to_vertex(signal.values())))
    }

    /// Applies a graph filter given by its frequency response.
    ///
    /// Frequency-domain signals are multiplied elementwise; vertex-domain
    /// signals go through `V diag(response) Vᵀ`.
    pub fn apply_filter(&self, response: &DVector<f64>, signal: &GraphSignal) -> Result<GraphSignal> {
        self.check_len(response.len())?;
        self.check_len(signal.len())?;
        match signal.domain() {
            Domain::Frequency => Ok(GraphSignal::frequency(
                signal.values().component_mul(response),
            )),
            Domain::Vertex => {
                let freq = self.to_freq(signal.values()).component_mul(response);
                Ok(GraphSignal::vertex(self.to_vertex(&freq)))
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: len });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{watts_strogatz, Graph};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn basis_for(n: usize, seed: u64) -> SpectralBasis {
        let g = watts_strogatz(n, 4, 0.3, seed).unwrap();
        SpectralBasis::new(&g.laplacian()).unwrap()
    }

    #[test]
    fn two_node_eigenpairs() {
        let lap = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let basis = SpectralBasis::new(&lap).unwrap();
        assert_abs_diff_eq!(basis.eigenvalues()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvalues()[1], 2.0, epsilon = 1e-12);
        let s = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(basis.eigenvectors()[(0, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvectors()[(1, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvectors()[(0, 1)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.eigenvectors()[(1, 1)], -s, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let g = watts_strogatz(24, 5, 0.2, 3).unwrap();
        let lap = g.laplacian();
        let basis = SpectralBasis::new(&lap).unwrap();
        let v = basis.eigenvectors();
        let eye = v.tr_mul(v);
        let rebuilt = v * DMatrix::from_diagonal(basis.eigenvalues()) * v.transpose();
        assert_abs_diff_eq!(eye, DMatrix::identity(24, 24), epsilon = 1e-10);
        let err = (&rebuilt - &lap).norm() / lap.norm();
        assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn exactly_one_near_zero_eigenvalue() {
        let basis = basis_for(30, 5);
        let lambda_max = basis.eigenvalues()[29];
        let small = basis
            .eigenvalues()
            .iter()
            .filter(|&&l| l <= CONNECTIVITY_TOL * lambda_max)
            .count();
        assert_eq!(small, 1);
    }

    #[test]
    fn disconnected_laplacian_rejected() {
        // Two isolated edges.
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(2, 3)] = 1.0;
        w[(3, 2)] = 1.0;
        let lap = crate::graph::build_laplacian(&w);
        assert!(matches!(SpectralBasis::new(&lap), Err(Error::DisconnectedGraph)));
    }

    #[test]
    fn constant_signal_concentrates_at_first_frequency() {
        let basis = basis_for(16, 9);
        let c = 2.5;
        let sig = GraphSignal::vertex(DVector::from_element(16, c));
        let freq = basis.gft(&sig).unwrap();
        for i in 1..16 {
            assert!(freq.values()[i].abs() < 1e-10);
        }
        assert_abs_diff_eq!(freq.values()[0].abs(), c * 4.0, epsilon = 1e-10);
    }

    #[test]
    fn gft_round_trip() {
        let basis = basis_for(16, 2);
        let mut rng = StdRng::seed_from_u64(4);
        let a = DVector::from_fn(16, |_, _| rng.random::<f64>() - 0.5);
        let sig = GraphSignal::vertex(a.clone());
        let back = basis.igft(&basis.gft(&sig).unwrap()).unwrap();
        assert_abs_diff_eq!(back.values(), &a, epsilon = 1e-10);
    }

    #[test]
    fn bandlimited_zeros_preserved() {
        let basis = basis_for(12, 6);
        let cutoff = 5;
        let mut rng = StdRng::seed_from_u64(8);
        let mut freq = DVector::from_fn(12, |_, _| rng.random::<f64>());
        for i in cutoff..12 {
            freq[i] = 0.0;
        }
        let vertex = basis.igft(&GraphSignal::frequency(freq)).unwrap();
        let round = basis.gft(&vertex).unwrap();
        for i in cutoff..12 {
            assert!(round.values()[i].abs() < 1e-10);
        }
    }

    #[test]
    fn domain_mismatch_is_reported() {
        let basis = basis_for(8, 1);
        let sig = GraphSignal::frequency(DVector::zeros(8));
        assert!(matches!(basis.gft(&sig), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn identity_zero_and_laplacian_filters() {
        let g = watts_strogatz(14, 4, 0.2, 12).unwrap();
        let lap = g.laplacian();
        let basis = SpectralBasis::new(&lap).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let x = DVector::from_fn(14, |_, _| rng.random::<f64>() - 0.5);
        let sig = GraphSignal::vertex(x.clone());

        let ones = DVector::from_element(14, 1.0);
        let out = basis.apply_filter(&ones, &sig).unwrap();
        assert_abs_diff_eq!(out.values(), &x, epsilon = 1e-10);

        let out = basis.apply_filter(basis.eigenvalues(), &sig).unwrap();
        assert_abs_diff_eq!(out.values(), &(&lap * &x), epsilon = 1e-8);

        let zeros = DVector::zeros(14);
        let out = basis.apply_filter(&zeros, &sig).unwrap();
        assert_abs_diff_eq!(out.values().norm(), 0.0, epsilon = 0.0);
    }

    #[test]
    fn vertex_path_matches_explicit_filter_matrix() {
        let basis = basis_for(10, 20);
        let mut rng = StdRng::seed_from_u64(5);
        let resp = DVector::from_fn(10, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let x = DVector::from_fn(10, |_, _| rng.random::<f64>() - 0.5);
        let v = basis.eigenvectors();
        let filter_matrix = v * DMatrix::from_diagonal(&resp) * v.transpose();
        let expected = &filter_matrix * &x;
        let got = basis
            .apply_filter(&resp, &GraphSignal::vertex(x))
            .unwrap();
        assert_abs_diff_eq!(got.values(), &expected, epsilon = 1e-10);
    }

    #[test]
    fn eigenvector_signs_deterministic_under_reconstruction() {
        let g = Graph::from_weights(watts_strogatz(20, 4, 0.4, 31).unwrap().weights().clone())
            .unwrap();
        let a = SpectralBasis::new(&g.laplacian()).unwrap();
        let b = SpectralBasis::new(&g.laplacian()).unwrap();
        assert_eq!(a.eigenvectors(), b.eigenvectors());
        for c in 0..20 {
            let lead = a
                .eigenvectors()
                .column(c)
                .iter()
                .find(|x| x.abs() > 1e-8)
                .copied()
                .unwrap();
            assert!(lead > 0.0);
        }
    }
}
