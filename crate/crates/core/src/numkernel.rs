//! Minimal dense complex linear algebra for the decomposer: Hermitian
//! eigendecomposition with eigenvalue clustering, orthonormalization under
//! the weighted inner product of `C^X`, and residual norms.
//!
//! The inner product on `C^X` carries the weight `1/|X|`:
//! `(f, g) = (1/|X|) Σ_x f(x) conj(g(x))`. Matrix-level trace products carry
//! no weight. Every routine here takes the weight explicitly where it
//! matters, so the two conventions cannot be mixed silently.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex};

/// Default absolute tolerance for merging eigenvalues into one cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;

const EIG_MAX_ITER: usize = 4096;

/// One eigenvalue cluster of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    /// Representative eigenvalue (mean of the merged eigenvalues).
    pub eigenvalue: f64,
    /// Orthonormal (Euclidean) basis of the eigenspace, one column per
    /// merged eigenvector.
    pub basis: CMatrix,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.basis.ncols()
    }
}

/// Clustered spectrum of a Hermitian matrix, ordered by ascending
/// eigenvalue.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    dimension: usize,
    clusters: Vec<EigenCluster>,
}

impl HermitianSpectrum {
    pub fn clusters(&self) -> &[EigenCluster] {
        &self.clusters
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Reconstructs `Σ λ P_λ` from the clusters.
    pub fn reconstruct(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dimension, self.dimension);
        for cluster in &self.clusters {
            out += (&cluster.basis * cluster.basis.adjoint()).scale(cluster.eigenvalue);
        }
        out
    }
}

/// Frobenius distance of a square matrix from being Hermitian, relative to
/// its norm.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let scale = m.norm().max(1.0);
    (m - m.adjoint()).norm() / scale
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues merged into
/// clusters whenever consecutive values differ by less than `cluster_tol`.
///
/// The input must be Hermitian to within `1e-12` relative; clusters come
/// out ordered by ascending eigenvalue with mutually orthonormal bases.
pub fn hermitian_eig(m: &CMatrix, cluster_tol: f64) -> Result<HermitianSpectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if cluster_tol <= 0.0 {
        return Err(Error::Contract("cluster_tol must be positive".into()));
    }
    let deviation = hermitian_deviation(m);
    if deviation > 1e-12 {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian: relative deviation {deviation:.3e}"
        )));
    }
    let dim = m.nrows();
    if dim == 0 {
        return Ok(HermitianSpectrum {
            dimension: 0,
            clusters: Vec::new(),
        });
    }
    // Exactly real symmetric input goes through the real solver, so real
    // problems yield real eigenvectors and downstream realness is not
    // destroyed by solver phases.
    let (eigenvalues, mut eigenvectors) = if m.iter().all(|z| z.im == 0.0) {
        let real = nalgebra::DMatrix::<f64>::from_fn(dim, dim, |r, c| m[(r, c)].re);
        let eig = nalgebra::linalg::SymmetricEigen::try_new(real, f64::EPSILON, EIG_MAX_ITER)
            .ok_or_else(|| {
                Error::Numeric(format!(
                    "symmetric eigensolver did not converge within {EIG_MAX_ITER} iterations"
                ))
            })?;
        let vectors = CMatrix::from_fn(dim, dim, |r, c| {
            Complex::new(eig.eigenvectors[(r, c)], 0.0)
        });
        (eig.eigenvalues.iter().copied().collect::<Vec<f64>>(), vectors)
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or_else(
            || {
                Error::Numeric(format!(
                    "Hermitian eigensolver did not converge within {EIG_MAX_ITER} iterations"
                ))
            },
        )?;
        (
            eig.eigenvalues.iter().copied().collect::<Vec<f64>>(),
            eig.eigenvectors,
        )
    };
    canonicalize_column_phases(&mut eigenvectors);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigenvalues[a]
            .partial_cmp(&eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut clusters = Vec::new();
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && eigenvalues[order[end]] - eigenvalues[order[end - 1]] < cluster_tol {
            end += 1;
        }
        let members = &order[start..end];
        let mean = members.iter().map(|&i| eigenvalues[i]).sum::<f64>() / members.len() as f64;
        let mut basis = CMatrix::zeros(dim, members.len());
        for (col, &i) in members.iter().enumerate() {
            basis.set_column(col, &eigenvectors.column(i));
        }
        clusters.push(EigenCluster {
            eigenvalue: mean,
            basis,
        });
        start = end;
    }
    Ok(HermitianSpectrum {
        dimension: dim,
        clusters,
    })
}

/// Multiplies each column by a unimodular scalar so its largest-modulus
/// entry becomes real positive; a deterministic canonical form for
/// eigenvector phases.
fn canonicalize_column_phases(vectors: &mut CMatrix) {
    for mut column in vectors.column_iter_mut() {
        let mut pivot = Complex::new(0.0, 0.0);
        for z in column.iter() {
            if z.norm() > pivot.norm() {
                pivot = *z;
            }
        }
        if pivot.norm() > 0.0 {
            let phase = pivot / pivot.norm();
            for z in column.iter_mut() {
                *z *= phase.conj();
            }
        }
    }
}

/// Orthonormalizes vectors with respect to the weighted inner product
/// `(f, g) = weight · Σ_x f(x) conj(g(x))` by modified Gram–Schmidt with
/// re-orthogonalization. The span is preserved; linearly dependent input
/// is reported with the index of the offending vector.
pub fn orthonormalize(vectors: &[CVector], weight: f64) -> Result<Vec<CVector>> {
    if weight <= 0.0 {
        return Err(Error::Contract("inner product weight must be positive".into()));
    }
    let mut out: Vec<CVector> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        let original = weighted_norm(&w, weight);
        for _ in 0..2 {
            for u in &out {
                let coeff = weighted_inner(&w, u, weight);
                w -= u.scale(1.0) * coeff;
            }
        }
        let norm = weighted_norm(&w, weight);
        if norm <= 1e-10 * original.max(1.0) {
            return Err(Error::MalformedInput(format!(
                "vector {index} is linearly dependent on its predecessors"
            )));
        }
        out.push(w.unscale(norm));
    }
    Ok(out)
}

/// Weighted inner product `(f, g) = weight · Σ f(x) conj(g(x))`.
pub fn weighted_inner(f: &CVector, g: &CVector, weight: f64) -> Complex {
    g.dotc(f) * Complex::new(weight, 0.0)
}

/// Norm induced by [`weighted_inner`].
pub fn weighted_norm(f: &CVector, weight: f64) -> f64 {
    (f.norm_squared() * weight).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = CMatrix::from_fn(dim, dim, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&raw + raw.adjoint()).unscale(2.0)
    }

    #[test]
    fn identity_forms_one_cluster() {
        let spectrum = hermitian_eig(&CMatrix::identity(4, 4), 1e-8).unwrap();
        assert_eq!(spectrum.clusters().len(), 1);
        assert_eq!(spectrum.clusters()[0].multiplicity(), 4);
        assert!((spectrum.clusters()[0].eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_multiplicities_cluster() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(1.0, 0.0),
        ]));
        let spectrum = hermitian_eig(&m, 1e-8).unwrap();
        let shape: Vec<(f64, usize)> = spectrum
            .clusters()
            .iter()
            .map(|c| (c.eigenvalue, c.multiplicity()))
            .collect();
        assert_eq!(shape.len(), 2);
        assert!((shape[0].0 - 0.0).abs() < 1e-12 && shape[0].1 == 2);
        assert!((shape[1].0 - 1.0).abs() < 1e-12 && shape[1].1 == 1);
    }

    #[test]
    fn reconstruction_matches_input() {
        for seed in [1u64, 2, 3] {
            let m = random_hermitian(20, seed);
            let spectrum = hermitian_eig(&m, 1e-8).unwrap();
            assert!((spectrum.reconstruct() - &m).norm() < 1e-10);
            let total: usize = spectrum.clusters().iter().map(|c| c.multiplicity()).sum();
            assert_eq!(total, 20);
        }
    }

    #[test]
    fn cluster_bases_are_mutually_orthonormal() {
        let m = random_hermitian(16, 11);
        let spectrum = hermitian_eig(&m, 1e-8).unwrap();
        let mut all = CMatrix::zeros(16, 16);
        let mut col = 0;
        for cluster in spectrum.clusters() {
            for c in 0..cluster.basis.ncols() {
                all.set_column(col, &cluster.basis.column(c));
                col += 1;
            }
        }
        assert!((all.adjoint() * &all - CMatrix::identity(16, 16)).norm() < 1e-10);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = Complex::new(0.5, 0.0);
        assert!(matches!(hermitian_eig(&m, 1e-8), Err(Error::Contract(_))));
    }

    #[test]
    fn reconstruction_residual_up_to_dim_256() {
        let m = random_hermitian(256, 99);
        let spectrum = hermitian_eig(&m, 1e-8).unwrap();
        assert!((spectrum.reconstruct() - &m).norm() < 1e-10);
    }

    #[test]
    fn orthonormalize_single_unit_vector_is_fixed() {
        let v = CVector::from_vec(vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]);
        let out = orthonormalize(std::slice::from_ref(&v), 1.0).unwrap();
        assert!((&out[0] - &v).norm() < 1e-14);
    }

    #[test]
    fn weight_forces_rescaling_of_standard_basis() {
        // In C^4 with weight 1/4 the basis vector e_0 has squared norm 1/4,
        // so the normalized vector is 2 e_0.
        let e0 = CVector::from_fn(4, |i, _| Complex::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let e1 = CVector::from_fn(4, |i, _| Complex::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        let out = orthonormalize(&[e0.clone(), e1.clone()], 0.25).unwrap();
        assert!((&out[0] - e0.scale(2.0)).norm() < 1e-14);
        assert!((&out[1] - e1.scale(2.0)).norm() < 1e-14);
    }

    #[test]
    fn gram_matrix_is_identity_for_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let weight = 0.1;
        let vectors: Vec<CVector> = (0..5)
            .map(|_| {
                CVector::from_fn(10, |_, _| {
                    Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let out = orthonormalize(&vectors, weight).unwrap();
        for (i, u) in out.iter().enumerate() {
            for (j, v) in out.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((weighted_inner(u, v, weight) - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn orthonormalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let vectors: Vec<CVector> = (0..4)
            .map(|_| {
                CVector::from_fn(8, |_, _| {
                    Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        let once = orthonormalize(&vectors, 0.125).unwrap();
        let twice = orthonormalize(&once, 0.125).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dependent_input_names_the_offender() {
        let v0 = CVector::from_vec(vec![Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)]);
        let v1 = v0.scale(3.0);
        match orthonormalize(&[v0, v1], 0.5) {
            Err(Error::MalformedInput(msg)) => assert!(msg.contains("vector 1")),
            other => panic!("expected dependent-input error, got {other:?}"),
        }
    }
}
