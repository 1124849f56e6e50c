//! Randomized decomposition of `C^X` into irreducible group spaces and the
//! matrix-unit basis of the commutant.
//!
//! The pipeline eigendecomposes one random invariant Hermitian matrix; in
//! generic position every eigenspace is an irreducible group space.
//! Eigenspaces are checked for irreducibility (the averaged self-map of an
//! irreducible space is scalar), grouped into equivalence classes by
//! averaged intertwiners, and aligned by group isometries so that the
//! matrix units
//!
//! `E_{k,i,j}(x, y) = (1/|X|) Σ_l e_{k,i,l}(x) conj(e_{k,j,l}(y))`
//!
//! multiply like elementary matrices. Expansion coefficients between the
//! orbit basis and the unit basis realize the block diagonalization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, DEFAULT_CLUSTER_TOL};
use crate::permgroup::{GroupAction, PairOrbits, Permutation};
use crate::{CMatrix, Complex};

/// Tuning knobs for [`decompose`]; every random draw derives from `seed`.
#[derive(Debug, Clone, Copy)]
pub struct DecomposeConfig {
    pub seed: u64,
    /// Eigenvalues closer than this merge into one candidate eigenspace.
    pub cluster_tol: f64,
    /// Threshold for the invariant checks run at the end of the pipeline.
    pub verify_tol: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            seed: 42,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            verify_tol: 1e-8,
        }
    }
}

const MAX_ATTEMPTS: usize = 5;
const INTERTWINER_TOL: f64 = 1e-8;

/// An irreducible group space given by a weighted-orthonormal basis of
/// `C^X` (columns; Gram matrix under the `1/|X|` inner product is the
/// identity).
#[derive(Debug, Clone)]
pub struct IrreducibleSpace {
    basis: CMatrix,
}

impl IrreducibleSpace {
    pub fn new(basis: CMatrix) -> IrreducibleSpace {
        IrreducibleSpace { basis }
    }

    pub fn dimension(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Projection residual of the span under one permutation: how far
    /// `P_a` maps the space outside itself.
    pub fn invariance_residual(&self, a: &Permutation) -> f64 {
        let n = self.basis.nrows();
        let moved = permute_rows(&self.basis, a);
        let coords = (self.basis.adjoint() * &moved).unscale(n as f64);
        (&moved - &self.basis * coords).norm() / (n as f64).sqrt()
    }
}

/// One isotypic block: all irreducible spaces of a common type, with
/// bases aligned by group isometries.
#[derive(Debug, Clone)]
pub struct IsotypicBlock {
    spaces: Vec<IrreducibleSpace>,
}

impl IsotypicBlock {
    /// Dimension `h` of each space in the block.
    pub fn dimension(&self) -> usize {
        self.spaces[0].dimension()
    }

    /// Multiplicity `m`: the number of equivalent spaces.
    pub fn multiplicity(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[IrreducibleSpace] {
        &self.spaces
    }
}

/// Residuals of the algebraic checks run when a decomposition is built.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecompositionResiduals {
    /// Matrix-unit multiplication identity.
    pub multiplication: f64,
    /// `E_{k,j,i}` against the conjugate transpose of `E_{k,i,j}`.
    pub unit_adjoint: f64,
    /// Invariance of every space under every generator.
    pub space_invariance: f64,
    /// Commutation of every unit with every generator.
    pub commutant: f64,
}

impl DecompositionResiduals {
    pub fn max(&self) -> f64 {
        self.multiplication
            .max(self.unit_adjoint)
            .max(self.space_invariance)
            .max(self.commutant)
    }
}

/// The computed decomposition: isotypic blocks with aligned bases and the
/// matrix units of the commutant.
#[derive(Debug, Clone)]
pub struct Decomposition {
    domain_size: usize,
    blocks: Vec<IsotypicBlock>,
    /// `units[k][i * m_k + j]` is `E_{k,i,j}`.
    units: Vec<Vec<CMatrix>>,
    residuals: DecompositionResiduals,
}

impl Decomposition {
    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn blocks(&self) -> &[IsotypicBlock] {
        &self.blocks
    }

    /// `(h_k, m_k)` pairs in block order.
    pub fn block_dims(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .map(|b| (b.dimension(), b.multiplicity()))
            .collect()
    }

    pub fn unit(&self, k: usize, i: usize, j: usize) -> &CMatrix {
        &self.units[k][i * self.blocks[k].multiplicity() + j]
    }

    pub fn residuals(&self) -> &DecompositionResiduals {
        &self.residuals
    }

    /// Largest imaginary part over the units of block `k`; a block whose
    /// units are real to tolerance supports a real interpretation.
    pub fn block_imag_magnitude(&self, k: usize) -> f64 {
        self.units[k]
            .iter()
            .flat_map(|u| u.iter())
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    /// Worst Frobenius residual of the matrix-unit multiplication rule
    /// over all pairs of units (including cross-block pairs, which must
    /// multiply to zero).
    pub fn multiplication_residual(&self) -> f64 {
        let index: Vec<(usize, usize, usize)> = self.unit_index_tuples();
        index
            .par_iter()
            .map(|&(k, i, j)| {
                let left = self.unit(k, i, j);
                let mut worst = 0.0f64;
                for &(k2, i2, j2) in &index {
                    let product = left * self.unit(k2, i2, j2);
                    let residual = if k == k2 && j == i2 {
                        (&product - self.unit(k, i, j2)).norm()
                    } else {
                        product.norm()
                    };
                    worst = worst.max(residual);
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Worst normalized residual of the orthogonality relation between
    /// unit values on orbit representatives:
    /// `Σ_r v_r q_{kij}(r) conj(q_{k'i'j'}(r)) = δδδ |X|² h_k`.
    pub fn orthogonality_residual(&self, orbits: &PairOrbits) -> f64 {
        let n = self.domain_size as f64;
        let index = self.unit_index_tuples();
        let q: Vec<Vec<Complex>> = index
            .iter()
            .map(|&(k, i, j)| {
                (0..orbits.count())
                    .map(|r| {
                        let (x, y) = orbits.representative(r);
                        self.unit(k, i, j)[(x, y)] * n
                    })
                    .collect()
            })
            .collect();
        let mut worst = 0.0f64;
        for (a, &(k, i, j)) in index.iter().enumerate() {
            let h = self.blocks[k].dimension() as f64;
            let scale = n * n * h;
            for (b, &(k2, i2, j2)) in index.iter().enumerate() {
                let mut sum = Complex::new(0.0, 0.0);
                for r in 0..orbits.count() {
                    sum += q[a][r] * q[b][r].conj() * orbits.size(r) as f64;
                }
                let expected = if (k, i, j) == (k2, i2, j2) {
                    scale
                } else {
                    0.0
                };
                worst = worst.max((sum - expected).norm() / scale);
            }
        }
        worst
    }

    fn unit_index_tuples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (k, block) in self.blocks.iter().enumerate() {
            for i in 0..block.multiplicity() {
                for j in 0..block.multiplicity() {
                    out.push((k, i, j));
                }
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn unit_mut(&mut self, k: usize, i: usize, j: usize) -> &mut CMatrix {
        let m = self.blocks[k].multiplicity();
        &mut self.units[k][i * m + j]
    }
}

/// Expansion of the orbit indicators in the matrix-unit basis: for every
/// orbit `r` and block `k`, the `m_k × m_k` coefficient matrix with
/// entries `p_r(k,i,j)`. The map `B_r ↦ blocks(r)` is the block
/// diagonalization of the commutant.
#[derive(Debug, Clone)]
pub struct BlockImage {
    block_dims: Vec<(usize, usize)>,
    per_orbit: Vec<Vec<CMatrix>>,
    reconstruction_residual: f64,
}

impl BlockImage {
    pub fn num_orbits(&self) -> usize {
        self.per_orbit.len()
    }

    pub fn block_dims(&self) -> &[(usize, usize)] {
        &self.block_dims
    }

    /// Coefficient matrix of orbit `r` in block `k`.
    pub fn block(&self, r: usize, k: usize) -> &CMatrix {
        &self.per_orbit[r][k]
    }

    /// Worst Frobenius residual of reconstructing the orbit indicators
    /// from the units, observed when the image was computed.
    pub fn reconstruction_residual(&self) -> f64 {
        self.reconstruction_residual
    }

    /// The block image of an invariant matrix with orbit coefficients `y`:
    /// `Σ_r y_r p_r(k)` for each `k`.
    pub fn assemble(&self, y: &[Complex]) -> Result<Vec<CMatrix>> {
        if y.len() != self.num_orbits() {
            return Err(Error::Shape(format!(
                "expected {} orbit coefficients, got {}",
                self.num_orbits(),
                y.len()
            )));
        }
        let mut out: Vec<CMatrix> = self
            .block_dims
            .iter()
            .map(|&(_, m)| CMatrix::zeros(m, m))
            .collect();
        for (r, &coeff) in y.iter().enumerate() {
            for (k, block) in out.iter_mut().enumerate() {
                *block += self.per_orbit[r][k].scale(1.0) * coeff;
            }
        }
        Ok(out)
    }
}

/// Deterministic sub-seed derivation (splitmix64 step).
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn random_complex_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `P_a M`: row `a(y)` of the output is row `y` of the input.
fn permute_rows(m: &CMatrix, a: &Permutation) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for y in 0..m.nrows() {
        let target = a.apply(y);
        for c in 0..m.ncols() {
            out[(target, c)] = m[(y, c)];
        }
    }
    out
}

/// `P_a M P_a^{-1}` for a square matrix: entry `(a(x), a(y))` of the
/// output is entry `(x, y)` of the input.
fn conjugate_by_permutation(m: &CMatrix, a: &Permutation) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for x in 0..n {
        let ax = a.apply(x);
        for y in 0..n {
            out[(ax, a.apply(y))] = m[(x, y)];
        }
    }
    out
}

/// A random Hermitian matrix in the span of the orbit indicators: one
/// uniform(-1, 1) coefficient per transpose-orbit pair, complex (two
/// independent draws) when the pair is not self-transposed. The result is
/// exactly constant on orbits.
pub fn random_invariant_hermitian(orbits: &PairOrbits, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = orbits.count();
    let mut coefficients = vec![Complex::new(0.0, 0.0); count];
    for r in 0..count {
        let rt = orbits.transpose_of(r);
        if r == rt {
            coefficients[r] = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
        } else if r < rt {
            let value = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            coefficients[r] = value;
            coefficients[rt] = value.conj();
        }
    }
    orbits
        .assemble(&coefficients)
        .expect("coefficient count matches orbit count")
}

/// A random real symmetric matrix in the span of the orbit indicators:
/// one uniform(-1, 1) real coefficient per transpose-orbit pair, shared
/// by both members. When every irreducible type of the group is real,
/// eigenspaces of such a sample span real subspaces, so the whole
/// decomposition stays real. Conjugate pairs of complex-type characters
/// collapse onto equal eigenvalues under a real sample; the pipeline then
/// falls back to the complex sampler.
pub fn random_invariant_real_symmetric(orbits: &PairOrbits, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = orbits.count();
    let mut coefficients = vec![Complex::new(0.0, 0.0); count];
    for r in 0..count {
        let rt = orbits.transpose_of(r);
        if r <= rt {
            let value = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
            coefficients[r] = value;
            coefficients[rt] = value;
        }
    }
    orbits
        .assemble(&coefficients)
        .expect("coefficient count matches orbit count")
}

/// Per-space cache: the weighted-orthonormal basis and the representation
/// matrices `R(a) = (1/|X|) U^† P_a U` for every group element.
struct SpaceData {
    basis: CMatrix,
    reps: Vec<CMatrix>,
}

impl SpaceData {
    fn build(elements: &[Permutation], basis: CMatrix) -> SpaceData {
        let n = basis.nrows() as f64;
        let adjoint = basis.adjoint();
        let reps = elements
            .iter()
            .map(|a| (&adjoint * permute_rows(&basis, a)).unscale(n))
            .collect();
        SpaceData { basis, reps }
    }

    fn dimension(&self) -> usize {
        self.basis.ncols()
    }

    /// Group-averaged map `(1/|G|) Σ_a R_to(a) P R_from(a)^†`; a nonzero
    /// result intertwines the two representations.
    fn averaged_map(from: &SpaceData, to: &SpaceData, probe: &CMatrix) -> CMatrix {
        let mut sum = CMatrix::zeros(to.dimension(), from.dimension());
        for (rv, ru) in to.reps.iter().zip(&from.reps) {
            sum += rv * probe * ru.adjoint();
        }
        sum.unscale(from.reps.len() as f64)
    }

    /// Distance of the averaged self-map from a scalar; irreducible
    /// spaces give (numerically) zero.
    fn self_map_scalar_deviation(&self, seed: u64) -> f64 {
        let h = self.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probe = random_complex_matrix(h, h, &mut rng);
        let averaged = SpaceData::averaged_map(self, self, &probe);
        let scalar = averaged.trace() / h as f64;
        (&averaged - CMatrix::identity(h, h) * scalar).norm()
    }
}

/// Rescales a nonzero intertwiner to a group isometry (unitary in the
/// weighted-orthonormal bases) and pins the global phase by making the
/// first non-negligible entry (row-major) real positive.
fn normalize_isometry(t: &CMatrix) -> CMatrix {
    let h = t.ncols() as f64;
    let scale = (h / (t.adjoint() * t).trace().re).sqrt();
    let mut unitary = t.scale(scale);
    let phase = unitary
        .row_iter()
        .flat_map(|row| row.iter().cloned().collect::<Vec<_>>())
        .find(|z| z.norm() > 1e-8)
        .map(|z| z / z.norm());
    if let Some(phase) = phase {
        unitary *= phase.conj();
    }
    unitary
}

/// Averaged intertwiner between two irreducible spaces, realized as a sum
/// over the full group element list. Returns the unitary map from the
/// first space to the second when they are equivalent, `None` when the
/// average vanishes (inequivalent spaces). Spaces of different dimension
/// are inequivalent outright.
pub fn intertwiner(
    action: &GroupAction,
    from: &IrreducibleSpace,
    to: &IrreducibleSpace,
    seed: u64,
) -> Result<Option<CMatrix>> {
    if from.dimension() != to.dimension() {
        return Ok(None);
    }
    let elements = action.elements()?;
    let from_data = SpaceData::build(elements, from.basis().clone());
    let to_data = SpaceData::build(elements, to.basis().clone());
    Ok(intertwiner_cached(&from_data, &to_data, seed))
}

fn intertwiner_cached(from: &SpaceData, to: &SpaceData, seed: u64) -> Option<CMatrix> {
    if from.dimension() != to.dimension() {
        return None;
    }
    let h = from.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = random_complex_matrix(h, h, &mut rng);
    let averaged = SpaceData::averaged_map(from, to, &probe);
    if averaged.norm() < INTERTWINER_TOL {
        return None;
    }
    Some(normalize_isometry(&averaged))
}

/// Decomposes `C^X` under the action into isotypic blocks with aligned
/// bases and builds the matrix units of the commutant. All randomness is
/// derived from `config.seed`; repeated runs are reproducible.
pub fn decompose(
    action: &GroupAction,
    orbits: &PairOrbits,
    config: &DecomposeConfig,
) -> Result<Decomposition> {
    let elements = action.elements()?;
    let mut failure = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let attempt_seed = mix_seed(config.seed, attempt as u64);
        // The first attempt samples a real symmetric invariant matrix, so
        // groups whose irreducible types are all real come out with real
        // spaces and real units. A real sample cannot separate conjugate
        // pairs of complex characters (their eigenvalues coincide); that
        // surfaces as an irreducibility failure and later attempts use
        // the complex sampler.
        let real_sample = attempt == 0;
        let candidates = candidate_spaces(orbits, attempt_seed, config, real_sample)?;
        let spaces = match check_irreducibility(elements, candidates, attempt_seed, config) {
            Ok(spaces) => spaces,
            Err(detail) => {
                failure = detail;
                if attempt + 1 < MAX_ATTEMPTS {
                    continue;
                }
                // Last attempt: split the offending eigenspaces with a
                // second random invariant matrix compressed to them.
                let refined = refine_degenerate_spaces(
                    elements,
                    orbits,
                    candidate_spaces(orbits, attempt_seed, config, real_sample)?,
                    attempt_seed,
                    config,
                )?;
                match check_irreducibility(elements, refined, mix_seed(attempt_seed, 7), config) {
                    Ok(spaces) => spaces,
                    Err(detail) => {
                        return Err(Error::DegenerateSample {
                            attempts: MAX_ATTEMPTS,
                            detail,
                        })
                    }
                }
            }
        };
        let blocks = group_into_blocks(spaces, attempt_seed);
        return finalize(action, orbits, blocks, config);
    }
    Err(Error::DegenerateSample {
        attempts: MAX_ATTEMPTS,
        detail: failure,
    })
}

/// Eigenspaces of one random invariant Hermitian matrix, as
/// weighted-orthonormal bases in ascending eigenvalue order.
fn candidate_spaces(
    orbits: &PairOrbits,
    seed: u64,
    config: &DecomposeConfig,
    real_sample: bool,
) -> Result<Vec<CMatrix>> {
    let sample = if real_sample {
        random_invariant_real_symmetric(orbits, seed)
    } else {
        random_invariant_hermitian(orbits, seed)
    };
    let spectrum = hermitian_eig(&sample, config.cluster_tol)?;
    let scale = (orbits.domain_size() as f64).sqrt();
    Ok(spectrum
        .clusters()
        .iter()
        .map(|c| c.basis.scale(scale))
        .collect())
}

/// Wraps each candidate in its representation cache and rejects the set
/// if any candidate fails the scalar self-map test.
fn check_irreducibility(
    elements: &[Permutation],
    spaces: Vec<CMatrix>,
    seed: u64,
    config: &DecomposeConfig,
) -> std::result::Result<Vec<SpaceData>, String> {
    let data: Vec<SpaceData> = spaces
        .into_iter()
        .map(|basis| SpaceData::build(elements, basis))
        .collect();
    for (index, space) in data.iter().enumerate() {
        let deviation = space.self_map_scalar_deviation(mix_seed(seed, 1000 + index as u64));
        if deviation > config.verify_tol.max(1e-10) * 10.0 {
            return Err(format!(
                "eigenspace {index} (dim {}) failed the irreducibility test: deviation {deviation:.3e}",
                space.dimension()
            ));
        }
    }
    Ok(data)
}

/// Splits every reducible eigenspace by a second random invariant matrix
/// compressed to it; leaves irreducible ones untouched.
fn refine_degenerate_spaces(
    elements: &[Permutation],
    orbits: &PairOrbits,
    spaces: Vec<CMatrix>,
    seed: u64,
    config: &DecomposeConfig,
) -> Result<Vec<CMatrix>> {
    let second = random_invariant_hermitian(orbits, mix_seed(seed, 0x5eed));
    let n = orbits.domain_size() as f64;
    let mut out = Vec::new();
    for basis in spaces {
        let space = SpaceData::build(elements, basis);
        let deviation = space.self_map_scalar_deviation(mix_seed(seed, 2000));
        if deviation <= config.verify_tol.max(1e-10) * 10.0 {
            out.push(space.basis);
            continue;
        }
        let compressed = (space.basis.adjoint() * &second * &space.basis).unscale(n);
        let symmetrized = (&compressed + compressed.adjoint()).unscale(2.0);
        let sub = hermitian_eig(&symmetrized, config.cluster_tol)?;
        for cluster in sub.clusters() {
            out.push(&space.basis * &cluster.basis);
        }
    }
    Ok(out)
}

/// Groups irreducible spaces into equivalence classes and aligns every
/// member's basis with the class representative through a group isometry.
fn group_into_blocks(spaces: Vec<SpaceData>, seed: u64) -> Vec<IsotypicBlock> {
    let mut classes: Vec<Vec<IrreducibleSpace>> = Vec::new();
    let mut representatives: Vec<SpaceData> = Vec::new();
    for (index, space) in spaces.into_iter().enumerate() {
        let mut assigned = false;
        for (class_index, rep) in representatives.iter().enumerate() {
            if rep.dimension() != space.dimension() {
                continue;
            }
            let salt = mix_seed(seed, (index * 131 + class_index) as u64);
            if let Some(isometry) = intertwiner_cached(rep, &space, salt) {
                // Columns of the aligned basis carry the representative
                // basis transported into this space.
                classes[class_index].push(IrreducibleSpace::new(&space.basis * isometry));
                assigned = true;
                break;
            }
        }
        if !assigned {
            classes.push(vec![IrreducibleSpace::new(space.basis.clone())]);
            representatives.push(space);
        }
    }
    classes
        .into_iter()
        .map(|spaces| IsotypicBlock { spaces })
        .collect()
}

/// Builds the units, runs every structural check, and assembles the final
/// decomposition.
fn finalize(
    action: &GroupAction,
    orbits: &PairOrbits,
    blocks: Vec<IsotypicBlock>,
    config: &DecomposeConfig,
) -> Result<Decomposition> {
    let n = action.domain_size();
    let dimension_total: usize = blocks
        .iter()
        .map(|b| b.dimension() * b.multiplicity())
        .sum();
    if dimension_total != n {
        return Err(Error::Verification {
            check: format!("dimension count Σ h_k m_k = |X| (got {dimension_total}, want {n})"),
            residual: (dimension_total as f64 - n as f64).abs(),
            tolerance: 0.0,
        });
    }
    let multiplicity_total: usize = blocks
        .iter()
        .map(|b| b.multiplicity() * b.multiplicity())
        .sum();
    if multiplicity_total != orbits.count() {
        return Err(Error::Verification {
            check: format!(
                "multiplicity count Σ m_k² = N (got {multiplicity_total}, want {})",
                orbits.count()
            ),
            residual: (multiplicity_total as f64 - orbits.count() as f64).abs(),
            tolerance: 0.0,
        });
    }

    let units: Vec<Vec<CMatrix>> = blocks
        .iter()
        .map(|block| {
            let m = block.multiplicity();
            let mut block_units = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    let product = block.spaces[i].basis() * block.spaces[j].basis().adjoint();
                    block_units.push(product.unscale(n as f64));
                }
            }
            block_units
        })
        .collect();

    let mut decomposition = Decomposition {
        domain_size: n,
        blocks,
        units,
        residuals: DecompositionResiduals::default(),
    };

    let mut residuals = DecompositionResiduals {
        multiplication: decomposition.multiplication_residual(),
        ..Default::default()
    };
    for (k, block) in decomposition.blocks.iter().enumerate() {
        let m = block.multiplicity();
        for i in 0..m {
            for j in 0..m {
                let adjoint_gap =
                    (decomposition.unit(k, j, i) - decomposition.unit(k, i, j).adjoint()).norm();
                residuals.unit_adjoint = residuals.unit_adjoint.max(adjoint_gap);
            }
        }
        for space in block.spaces() {
            for a in action.generators() {
                residuals.space_invariance =
                    residuals.space_invariance.max(space.invariance_residual(a));
            }
        }
    }
    for k in 0..decomposition.blocks.len() {
        let m = decomposition.blocks[k].multiplicity();
        for i in 0..m {
            for j in 0..m {
                let unit = decomposition.unit(k, i, j);
                for a in action.generators() {
                    let moved = conjugate_by_permutation(unit, a);
                    residuals.commutant = residuals.commutant.max((&moved - unit).norm());
                }
            }
        }
    }
    decomposition.residuals = residuals;
    if residuals.max() > config.verify_tol {
        return Err(Error::Verification {
            check: "decomposition invariants".into(),
            residual: residuals.max(),
            tolerance: config.verify_tol,
        });
    }
    Ok(decomposition)
}

/// Reconstruction tolerance for [`coefficients`].
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

/// Expansion coefficients of every orbit indicator in the unit basis,
/// read off at orbit representatives:
/// `p_r(k,i,j) = v_r conj(q_{k,i,j}(r)) / (|X| h_k)` with
/// `q_{k,i,j}(r) = |X| E_{k,i,j}` at the representative pair. The
/// reconstruction `Σ p E = B_r` is verified for every orbit.
pub fn coefficients(decomposition: &Decomposition, orbits: &PairOrbits) -> Result<BlockImage> {
    let n = decomposition.domain_size();
    if orbits.domain_size() != n {
        return Err(Error::Shape(format!(
            "orbit table is over {} points, decomposition over {n}",
            orbits.domain_size()
        )));
    }
    let block_dims = decomposition.block_dims();
    let mut per_orbit = Vec::with_capacity(orbits.count());
    for r in 0..orbits.count() {
        let (x, y) = orbits.representative(r);
        let v = orbits.size(r) as f64;
        let mut blocks = Vec::with_capacity(block_dims.len());
        for (k, &(h, m)) in block_dims.iter().enumerate() {
            let mut p = CMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    p[(i, j)] = decomposition.unit(k, i, j)[(x, y)].conj() * (v / h as f64);
                }
            }
            blocks.push(p);
        }
        per_orbit.push(blocks);
    }

    let mut worst = 0.0f64;
    for r in 0..orbits.count() {
        let mut assembled = CMatrix::zeros(n, n);
        for (k, &(_, m)) in block_dims.iter().enumerate() {
            for i in 0..m {
                for j in 0..m {
                    assembled += decomposition.unit(k, i, j) * per_orbit[r][k][(i, j)];
                }
            }
        }
        let indicator = orbits
            .basis_matrix(r)
            .expect("orbit index in range")
            .map(|v| Complex::new(v, 0.0));
        worst = worst.max((&assembled - indicator).norm());
    }
    if worst > RECONSTRUCTION_TOL {
        return Err(Error::Verification {
            check: "orbit basis reconstruction from matrix units".into(),
            residual: worst,
            tolerance: RECONSTRUCTION_TOL,
        });
    }
    Ok(BlockImage {
        block_dims,
        per_orbit,
        reconstruction_residual: worst,
    })
}

/// Coefficients of an invariant matrix, given blockwise, in the orbit
/// basis: `y_t = Σ_{k,i,j} Z_k[i,j] E_{k,i,j}` evaluated at the
/// representative of orbit `t`.
pub fn expand_in_orbit_basis(
    decomposition: &Decomposition,
    block_matrices: &[CMatrix],
    orbits: &PairOrbits,
) -> Vec<Complex> {
    (0..orbits.count())
        .map(|t| {
            let (x, y) = orbits.representative(t);
            let mut value = Complex::new(0.0, 0.0);
            for (k, z) in block_matrices.iter().enumerate() {
                for i in 0..z.nrows() {
                    for j in 0..z.ncols() {
                        value += z[(i, j)] * decomposition.unit(k, i, j)[(x, y)];
                    }
                }
            }
            value
        })
        .collect()
}

/// Structure constants of the orbit algebra computed through the block
/// images: `φ(B_r) φ(B_s)` expanded back in the `φ(B_t)`. Basis-free, so
/// decompositions from different seeds must agree.
pub fn block_structure_constants(
    decomposition: &Decomposition,
    image: &BlockImage,
    orbits: &PairOrbits,
) -> Vec<Vec<Vec<Complex>>> {
    let count = orbits.count();
    (0..count)
        .map(|r| {
            (0..count)
                .map(|s| {
                    let products: Vec<CMatrix> = (0..image.block_dims().len())
                        .map(|k| image.block(r, k) * image.block(s, k))
                        .collect();
                    expand_in_orbit_basis(decomposition, &products, orbits)
                })
                .collect()
        })
        .collect()
}

/// Draws `trials` random invariant Hermitian matrices (real orbit
/// coefficients respecting the transpose pairing) and compares the
/// eigenvalue multiset of the full matrix with the union of the block
/// spectra, each eigenvalue repeated `h_k` times. Returns the largest
/// elementwise mismatch after sorting.
pub fn spectrum_preservation_check(
    image: &BlockImage,
    orbits: &PairOrbits,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
        for r in 0..orbits.count() {
            let rt = orbits.transpose_of(r);
            if r <= rt {
                let value = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
                y[r] = value;
                y[rt] = value;
            }
        }
        let full = orbits.assemble(&y)?;
        let mut full_eigs = hermitian_eigenvalues(&full)?;
        full_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let blocks = image.assemble(&y)?;
        let mut block_eigs = Vec::with_capacity(full_eigs.len());
        for (k, z) in blocks.iter().enumerate() {
            let h = image.block_dims()[k].0;
            for value in hermitian_eigenvalues(z)? {
                for _ in 0..h {
                    block_eigs.push(value);
                }
            }
        }
        block_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if block_eigs.len() != full_eigs.len() {
            return Err(Error::Shape(format!(
                "replicated block spectrum has {} values, full spectrum {}",
                block_eigs.len(),
                full_eigs.len()
            )));
        }
        for (a, b) in full_eigs.iter().zip(&block_eigs) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Eigenvalues of a Hermitian matrix; the input is symmetrized first to
/// absorb roundoff in assembled pencils.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let symmetrized = (m + m.adjoint()).unscale(2.0);
    let spectrum = hermitian_eig(&symmetrized, f64::MIN_POSITIVE)?;
    let mut out = Vec::with_capacity(m.nrows());
    for cluster in spectrum.clusters() {
        for _ in 0..cluster.multiplicity() {
            out.push(cluster.eigenvalue);
        }
    }
    Ok(out)
}
