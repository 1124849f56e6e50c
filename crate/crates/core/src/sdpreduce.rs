//! Reduction of a group-invariant semidefinite program to its block form:
//! invariance checking, group averaging of the data, orbit-level
//! coefficients, the block pencil, the real embedding for solver export,
//! and lifting of orbit-coefficient solutions back to full size.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::decomposer::{hermitian_eigenvalues, BlockImage};
use crate::error::{Error, Result};
use crate::permgroup::PairOrbits;
use crate::sdpa::{SdpaEntry, SdpaFile};
use crate::{CMatrix, Complex};

/// A semidefinite program over Hermitian `|X| × |X|` matrices:
/// maximize `tr(C Y)` subject to `tr(A_i Y) = b_i` and `Y ⪰ 0`.
#[derive(Debug, Clone)]
pub struct InvariantSdp {
    name: Option<String>,
    objective: CMatrix,
    constraints: Vec<(CMatrix, f64)>,
}

#[derive(Deserialize)]
struct SdpFileJson {
    domain_size: usize,
    #[serde(default)]
    name: Option<String>,
    objective: Vec<[f64; 4]>,
    #[serde(default)]
    constraints: Vec<ConstraintJson>,
}

#[derive(Deserialize)]
struct ConstraintJson {
    entries: Vec<[f64; 4]>,
    rhs: f64,
}

impl InvariantSdp {
    /// Builds a program from dense Hermitian data.
    pub fn new(
        name: Option<String>,
        objective: CMatrix,
        constraints: Vec<(CMatrix, f64)>,
    ) -> Result<InvariantSdp> {
        let n = objective.nrows();
        for (label, m) in std::iter::once(("objective", &objective))
            .chain(constraints.iter().map(|(a, _)| ("constraint", a)))
        {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!(
                    "{label} matrix is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let deviation = (m - m.adjoint()).norm();
            if deviation > 1e-10 * m.norm().max(1.0) {
                return Err(Error::Contract(format!(
                    "{label} matrix is not Hermitian (deviation {deviation:.3e})"
                )));
            }
        }
        Ok(InvariantSdp {
            name,
            objective,
            constraints,
        })
    }

    /// Parses the JSON program format. Entries are `[x, y, re, im]` with
    /// 0-based indices; specifying `(x, y)` implies the conjugate entry at
    /// `(y, x)` (Hermitian closure). Conflicting duplicates are rejected.
    pub fn from_json(text: &str) -> Result<InvariantSdp> {
        let file: SdpFileJson = serde_json::from_str(text)
            .map_err(|e| Error::MalformedInput(format!("sdp file: {e}")))?;
        let n = file.domain_size;
        if n == 0 {
            return Err(Error::MalformedInput("domain_size must be positive".into()));
        }
        let objective = hermitian_from_entries(n, &file.objective, "objective")?;
        let constraints = file
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let a = hermitian_from_entries(n, &c.entries, &format!("constraint {i}"))?;
                Ok((a, c.rhs))
            })
            .collect::<Result<Vec<_>>>()?;
        InvariantSdp::new(file.name, objective, constraints)
    }

    pub fn domain_size(&self) -> usize {
        self.objective.nrows()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn objective(&self) -> &CMatrix {
        &self.objective
    }

    pub fn constraints(&self) -> &[(CMatrix, f64)] {
        &self.constraints
    }
}

fn hermitian_from_entries(n: usize, entries: &[[f64; 4]], label: &str) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(n, n);
    let mut set = vec![false; n * n];
    for &[xf, yf, re, im] in entries {
        let (x, y) = (index_from(xf, n, label)?, index_from(yf, n, label)?);
        let value = Complex::new(re, im);
        if x == y && im.abs() > 1e-12 {
            return Err(Error::MalformedInput(format!(
                "{label}: diagonal entry ({x}, {x}) has imaginary part {im}"
            )));
        }
        for (r, c, v) in [(x, y, value), (y, x, value.conj())] {
            if set[r * n + c] && (out[(r, c)] - v).norm() > 1e-12 {
                return Err(Error::MalformedInput(format!(
                    "{label}: conflicting values for entry ({r}, {c})"
                )));
            }
            out[(r, c)] = v;
            set[r * n + c] = true;
        }
    }
    Ok(out)
}

fn index_from(value: f64, n: usize, label: &str) -> Result<usize> {
    if value.fract() != 0.0 || value < 0.0 || value >= n as f64 {
        return Err(Error::MalformedInput(format!(
            "{label}: index {value} is not an integer in 0..{n}"
        )));
    }
    Ok(value as usize)
}

/// Per-matrix Frobenius distances from the group average.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub objective_distance: f64,
    pub constraint_distances: Vec<f64>,
    pub tolerance: f64,
}

impl InvarianceReport {
    pub fn max_distance(&self) -> f64 {
        self.constraint_distances
            .iter()
            .fold(self.objective_distance, |a, &b| a.max(b))
    }

    pub fn is_invariant(&self) -> bool {
        self.max_distance() < self.tolerance
    }
}

/// Distance of every data matrix from its group average; the program is
/// invariant when all distances fall below the tolerance.
pub fn check_invariance(
    sdp: &InvariantSdp,
    orbits: &PairOrbits,
    tolerance: f64,
) -> Result<InvarianceReport> {
    let distance = |m: &CMatrix| -> Result<f64> { Ok((orbits.average(m)? - m).norm()) };
    Ok(InvarianceReport {
        objective_distance: distance(sdp.objective())?,
        constraint_distances: sdp
            .constraints
            .iter()
            .map(|(a, _)| distance(a))
            .collect::<Result<_>>()?,
        tolerance,
    })
}

/// Replaces every data matrix by its group average; idempotent, and the
/// result is invariant by construction.
pub fn symmetrize(sdp: &InvariantSdp, orbits: &PairOrbits) -> Result<InvariantSdp> {
    Ok(InvariantSdp {
        name: sdp.name.clone(),
        objective: orbits.average(&sdp.objective)?,
        constraints: sdp
            .constraints
            .iter()
            .map(|(a, b)| Ok((orbits.average(a)?, *b)))
            .collect::<Result<Vec<_>>>()?,
    })
}

/// The block-diagonalized program: orbit coefficients `y_r` with the
/// conjugate pairing `y_{r'} = conj(y_r)` for transposed orbits, reduced
/// objective and constraint rows, and the per-block coefficient pencil.
#[derive(Debug, Clone)]
pub struct ReducedSdp {
    name: Option<String>,
    domain_size: usize,
    orbit_sizes: Vec<usize>,
    transpose_of: Vec<usize>,
    /// `c_r = tr(C B_r)`.
    objective: Vec<Complex>,
    /// `a_{ir} = tr(A_i B_r)`.
    constraint_rows: Vec<Vec<Complex>>,
    rhs: Vec<f64>,
    /// `(h_k, m_k)` per block.
    block_dims: Vec<(usize, usize)>,
    /// `pencil[r][k]` is the coefficient of `y_r` in block `k`.
    pencil: Vec<Vec<CMatrix>>,
}

impl ReducedSdp {
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn num_orbits(&self) -> usize {
        self.orbit_sizes.len()
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    pub fn transpose_of(&self, r: usize) -> usize {
        self.transpose_of[r]
    }

    pub fn objective_coefficients(&self) -> &[Complex] {
        &self.objective
    }

    pub fn constraint_rows(&self) -> &[Vec<Complex>] {
        &self.constraint_rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn block_dims(&self) -> &[(usize, usize)] {
        &self.block_dims
    }

    /// Coefficient matrix of `y_r` in block `k`.
    pub fn pencil(&self, r: usize, k: usize) -> &CMatrix {
        &self.pencil[r][k]
    }

    /// Sum of block sizes, against the original matrix size `|X|`.
    pub fn reduction_ratio(&self) -> (usize, usize) {
        (
            self.domain_size,
            self.block_dims.iter().map(|&(_, m)| m).sum(),
        )
    }

    /// `Σ_r y_r (block k of the pencil)` for all `k`.
    pub fn assemble_blocks(&self, y: &[Complex]) -> Result<Vec<CMatrix>> {
        if y.len() != self.num_orbits() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
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
                *block += self.pencil[r][k].scale(1.0) * coeff;
            }
        }
        Ok(out)
    }
}

/// Orbit-level trace products of one matrix against every canonical basis
/// matrix: `out[r] = tr(M B_r) = Σ_{(z,x) ∈ R_r} M(x, z)`, in one pass
/// over the support.
fn orbit_trace_products(m: &CMatrix, orbits: &PairOrbits) -> Vec<Complex> {
    let n = orbits.domain_size();
    let mut out = vec![Complex::new(0.0, 0.0); orbits.count()];
    for z in 0..n {
        for x in 0..n {
            out[orbits.orbit_of(z, x)] += m[(x, z)];
        }
    }
    out
}

/// Reduces an invariant program to orbit coefficients and block pencils.
/// Fails with the offending distance when the data is not invariant to
/// `tolerance` (symmetrize first in that case).
pub fn reduce(
    sdp: &InvariantSdp,
    orbits: &PairOrbits,
    image: &BlockImage,
    tolerance: f64,
) -> Result<ReducedSdp> {
    if sdp.domain_size() != orbits.domain_size() {
        return Err(Error::Shape(format!(
            "program over {} points, orbits over {}",
            sdp.domain_size(),
            orbits.domain_size()
        )));
    }
    let report = check_invariance(sdp, orbits, tolerance)?;
    if !report.is_invariant() {
        return Err(Error::NotInvariant {
            distance: report.max_distance(),
            tolerance,
        });
    }
    let objective = orbit_trace_products(sdp.objective(), orbits);
    let constraint_rows: Vec<Vec<Complex>> = sdp
        .constraints
        .iter()
        .map(|(a, _)| orbit_trace_products(a, orbits))
        .collect();
    let rhs = sdp.constraints.iter().map(|&(_, b)| b).collect();
    let pencil: Vec<Vec<CMatrix>> = (0..orbits.count())
        .map(|r| {
            (0..image.block_dims().len())
                .map(|k| image.block(r, k).clone())
                .collect()
        })
        .collect();
    Ok(ReducedSdp {
        name: sdp.name.clone(),
        domain_size: sdp.domain_size(),
        orbit_sizes: (0..orbits.count()).map(|r| orbits.size(r)).collect(),
        transpose_of: (0..orbits.count()).map(|r| orbits.transpose_of(r)).collect(),
        objective,
        constraint_rows,
        rhs,
        block_dims: image.block_dims().to_vec(),
        pencil,
    })
}

/// Which part of a conjugate-paired orbit coefficient a real variable
/// carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealPart {
    /// Self-transposed orbit; the coefficient is real.
    Whole,
    RealOf,
    ImagOf,
}

/// One real variable of the realified program.
#[derive(Debug, Clone, Copy)]
pub struct RealVariable {
    pub orbit: usize,
    pub part: RealPart,
}

/// One block of the realified program: the real symmetric pencil and the
/// exportable data matrices.
#[derive(Debug, Clone)]
pub struct RealBlock {
    pub size: usize,
    /// Complex blocks are embedded as `[[Re, -Im], [Im, Re]]` at twice
    /// the size; real blocks pass through unchanged.
    pub doubled: bool,
    /// Pencil coefficient per real variable.
    pub pencil: Vec<DMatrix<f64>>,
    /// Data matrix of the objective for solver export.
    pub objective_data: DMatrix<f64>,
    /// Data matrix of each constraint for solver export.
    pub constraint_data: Vec<DMatrix<f64>>,
}

/// The reduced program over real scalars, ready for SDPA export.
#[derive(Debug, Clone)]
pub struct RealReducedSdp {
    name: Option<String>,
    variables: Vec<RealVariable>,
    objective: Vec<f64>,
    constraint_rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    blocks: Vec<RealBlock>,
}

impl RealReducedSdp {
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn variables(&self) -> &[RealVariable] {
        &self.variables
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraint_rows(&self) -> &[Vec<f64>] {
        &self.constraint_rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn blocks(&self) -> &[RealBlock] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }
}

const REALNESS_TOL: f64 = 1e-10;

fn embed_complex(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let v = m[(r, c)];
            out[(r, c)] = v.re;
            out[(r, c + n)] = -v.im;
            out[(r + n, c)] = v.im;
            out[(r + n, c + n)] = v.re;
        }
    }
    out
}

fn real_part(m: &CMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].re)
}

fn max_imag(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Rewrites the reduced program over real scalars. Conjugate-paired
/// orbit variables become their real and imaginary parts; self-paired
/// variables stay (their coefficients are forced real). Blocks whose
/// pencils are entirely real pass through at size `m`; complex blocks are
/// embedded at size `2m`, which duplicates their spectra.
///
/// When the whole reduction is real — every coefficient matrix and every
/// data row — complex feasible points average with their conjugates
/// without changing objective or constraints, so the imaginary-part
/// variables carry nothing and are dropped; the embedding is then the
/// identity transformation.
pub fn realify(reduced: &ReducedSdp) -> Result<RealReducedSdp> {
    let count = reduced.num_orbits();
    let num_blocks = reduced.block_dims.len();

    let rows_real = std::iter::once(&reduced.objective)
        .chain(reduced.constraint_rows.iter())
        .all(|row| row.iter().all(|c| c.im.abs() < REALNESS_TOL));
    let pencil_real = reduced
        .pencil
        .iter()
        .flatten()
        .all(|p| max_imag(p) < REALNESS_TOL);
    let drop_imaginary_parts = rows_real && pencil_real;

    let mut variables = Vec::new();
    for r in 0..count {
        let rt = reduced.transpose_of[r];
        if r == rt {
            variables.push(RealVariable {
                orbit: r,
                part: RealPart::Whole,
            });
        } else if r < rt {
            variables.push(RealVariable {
                orbit: r,
                part: RealPart::RealOf,
            });
            if !drop_imaginary_parts {
                variables.push(RealVariable {
                    orbit: r,
                    part: RealPart::ImagOf,
                });
            }
        }
    }

    let real_row = |row: &[Complex]| -> Result<Vec<f64>> {
        variables
            .iter()
            .map(|v| {
                let value = row[v.orbit];
                match v.part {
                    RealPart::Whole => {
                        if value.im.abs() > 1e-9 {
                            return Err(Error::Contract(format!(
                                "coefficient of self-transposed orbit {} is not real ({value})",
                                v.orbit
                            )));
                        }
                        Ok(value.re)
                    }
                    RealPart::RealOf => Ok(2.0 * value.re),
                    RealPart::ImagOf => Ok(-2.0 * value.im),
                }
            })
            .collect()
    };

    let objective = real_row(&reduced.objective)?;
    let constraint_rows = reduced
        .constraint_rows
        .iter()
        .map(|row| real_row(row))
        .collect::<Result<Vec<_>>>()?;

    // Complex pencil coefficient of each real variable, per block.
    let i_unit = Complex::new(0.0, 1.0);
    let pencil_of = |v: &RealVariable, k: usize| -> CMatrix {
        let rt = reduced.transpose_of[v.orbit];
        match v.part {
            RealPart::Whole => reduced.pencil[v.orbit][k].clone(),
            RealPart::RealOf => &reduced.pencil[v.orbit][k] + &reduced.pencil[rt][k],
            RealPart::ImagOf => {
                (&reduced.pencil[v.orbit][k] - &reduced.pencil[rt][k]).scale(1.0) * i_unit
            }
        }
    };

    // Exportable data matrices at the complex level: for each constraint
    // matrix A (invariant, A = Σ_r A(rep_r) B_r with A(rep_r) recovered
    // from the trace products), the block k data is h_k Σ_r A(rep_r) p_r(k),
    // which satisfies tr(data · Z) = Σ_r a_r y_r on the pencil image.
    let data_blocks = |row: &[Complex]| -> Vec<CMatrix> {
        (0..num_blocks)
            .map(|k| {
                let (h, m) = reduced.block_dims[k];
                let mut out = CMatrix::zeros(m, m);
                for r in 0..count {
                    let rt = reduced.transpose_of[r];
                    let entry = row[rt] / reduced.orbit_sizes[r] as f64;
                    out += reduced.pencil[r][k].scale(1.0) * (entry * h as f64);
                }
                out
            })
            .collect()
    };
    let objective_data = data_blocks(&reduced.objective);
    let constraint_data: Vec<Vec<CMatrix>> = reduced
        .constraint_rows
        .iter()
        .map(|row| data_blocks(row))
        .collect();

    let mut blocks = Vec::with_capacity(num_blocks);
    for k in 0..num_blocks {
        let complex_pencil: Vec<CMatrix> = variables.iter().map(|v| pencil_of(v, k)).collect();
        let is_real = complex_pencil.iter().all(|g| max_imag(g) < REALNESS_TOL);
        let (_, m) = reduced.block_dims[k];
        if is_real {
            blocks.push(RealBlock {
                size: m,
                doubled: false,
                pencil: complex_pencil.iter().map(real_part).collect(),
                objective_data: real_part(&objective_data[k]),
                constraint_data: constraint_data.iter().map(|c| real_part(&c[k])).collect(),
            });
        } else {
            blocks.push(RealBlock {
                size: 2 * m,
                doubled: true,
                pencil: complex_pencil.iter().map(embed_complex).collect(),
                // The embedding doubles trace products; halving the data
                // matrix keeps tr(data · Z) equal to the complex value.
                objective_data: embed_complex(&objective_data[k]).unscale(2.0),
                constraint_data: constraint_data
                    .iter()
                    .map(|c| embed_complex(&c[k]).unscale(2.0))
                    .collect(),
            });
        }
    }

    Ok(RealReducedSdp {
        name: reduced.name.clone(),
        variables,
        objective,
        constraint_rows,
        rhs: reduced.rhs.clone(),
        blocks,
    })
}

/// Entries below this magnitude are dropped from the sparse export.
const EXPORT_DROP_TOL: f64 = 1e-12;

/// Renders the realified program as an SDPA sparse file: the feasible set
/// is the block matrix `Z ⪰ 0` with `tr(data_i · Z) = b_i`, objective
/// `tr(data_0 · Z)` (matrix number 0). Byte-deterministic.
pub fn export_sdpa(real: &RealReducedSdp) -> SdpaFile {
    let mut entries = Vec::new();
    let mut push_matrix = |matrix: usize, block_index: usize, data: &DMatrix<f64>| {
        for row in 0..data.nrows() {
            for col in row..data.ncols() {
                let value = data[(row, col)];
                if value.abs() > EXPORT_DROP_TOL {
                    entries.push(SdpaEntry {
                        matrix,
                        block: block_index + 1,
                        row: row + 1,
                        col: col + 1,
                        value,
                    });
                }
            }
        }
    };
    for (k, block) in real.blocks.iter().enumerate() {
        push_matrix(0, k, &block.objective_data);
    }
    for i in 0..real.rhs.len() {
        for (k, block) in real.blocks.iter().enumerate() {
            push_matrix(i + 1, k, &block.constraint_data[i]);
        }
    }
    entries.sort_by(|a, b| {
        (a.matrix, a.block, a.row, a.col).cmp(&(b.matrix, b.block, b.row, b.col))
    });
    SdpaFile {
        block_sizes: real.block_sizes(),
        rhs: real.rhs.clone(),
        entries,
    }
}

/// Writes the exported file to disk.
pub fn write_sdpa(real: &RealReducedSdp, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, export_sdpa(real).render())?;
    Ok(())
}

/// Result of lifting orbit coefficients back to a full-size matrix.
#[derive(Debug, Clone)]
pub struct LiftReport {
    /// `tr(C Y)` at full size.
    pub objective_full: f64,
    /// `Σ_r c_r y_r` through the reduction.
    pub objective_reduced: f64,
    pub min_eigenvalue_full: f64,
    /// Minimum eigenvalue of each block pencil.
    pub block_min_eigenvalues: Vec<f64>,
    /// Positive semidefinite up to `-1e-8`.
    pub psd: bool,
}

const OBJECTIVE_AGREEMENT_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;

/// Lifts orbit coefficients to the full matrix `Y = Σ_r y_r B_r`,
/// reporting eigenvalue floors on both sides and checking that the
/// objective agrees through the reduction. The coefficients must respect
/// the conjugate pairing.
pub fn lift_solution(
    y: &[Complex],
    orbits: &PairOrbits,
    sdp: &InvariantSdp,
    reduced: &ReducedSdp,
) -> Result<(CMatrix, LiftReport)> {
    if y.len() != orbits.count() {
        return Err(Error::Shape(format!(
            "expected {} orbit coefficients, got {}",
            orbits.count(),
            y.len()
        )));
    }
    for (r, value) in y.iter().enumerate() {
        let rt = orbits.transpose_of(r);
        let partner = y[rt].conj();
        if (value - partner).norm() > 1e-10 {
            return Err(Error::MalformedInput(format!(
                "coefficients violate the conjugate pairing at orbits {r} and {rt}"
            )));
        }
    }
    let full = orbits.assemble(y)?;
    let objective_full = (sdp.objective() * &full).trace().re;
    let objective_reduced: Complex = reduced
        .objective_coefficients()
        .iter()
        .zip(y)
        .map(|(c, v)| c * v)
        .sum();
    if (objective_full - objective_reduced.re).abs() > OBJECTIVE_AGREEMENT_TOL
        || objective_reduced.im.abs() > OBJECTIVE_AGREEMENT_TOL
    {
        return Err(Error::Verification {
            check: "objective agreement between full and reduced forms".into(),
            residual: (objective_full - objective_reduced.re)
                .abs()
                .max(objective_reduced.im.abs()),
            tolerance: OBJECTIVE_AGREEMENT_TOL,
        });
    }
    let min_eigenvalue_full = hermitian_eigenvalues(&full)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let block_min_eigenvalues = reduced
        .assemble_blocks(y)?
        .iter()
        .map(|z| {
            Ok(hermitian_eigenvalues(z)?
                .into_iter()
                .fold(f64::INFINITY, f64::min))
        })
        .collect::<Result<Vec<f64>>>()?;
    let report = LiftReport {
        objective_full,
        objective_reduced: objective_reduced.re,
        min_eigenvalue_full,
        block_min_eigenvalues,
        psd: min_eigenvalue_full > -PSD_TOL,
    };
    Ok((full, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposer::{coefficients, decompose, DecomposeConfig};
    use crate::permgroup::{GroupAction, Permutation};

    fn dihedral(n: usize) -> GroupAction {
        let rot = Permutation::from_images((0..n).map(|i| (i + 1) % n).collect()).unwrap();
        let refl = Permutation::from_images((0..n).map(|i| (n - i) % n).collect()).unwrap();
        GroupAction::new(vec![rot, refl], n).unwrap()
    }

    fn cyclic(n: usize) -> GroupAction {
        let rot = Permutation::from_images((0..n).map(|i| (i + 1) % n).collect()).unwrap();
        GroupAction::new(vec![rot], n).unwrap()
    }

    fn ones(n: usize) -> CMatrix {
        CMatrix::from_element(n, n, Complex::new(1.0, 0.0))
    }

    fn theta_c5() -> (GroupAction, InvariantSdp) {
        let action = dihedral(5);
        let orbits = PairOrbits::compute(&action).unwrap();
        let adjacency = orbits
            .basis_matrix(orbits.orbit_of(0, 1))
            .unwrap()
            .map(|v| Complex::new(v, 0.0));
        let sdp = InvariantSdp::new(
            Some("theta-c5".into()),
            ones(5),
            vec![
                (CMatrix::identity(5, 5), 1.0),
                (adjacency, 0.0),
            ],
        )
        .unwrap();
        (action, sdp)
    }

    fn pipeline(action: &GroupAction) -> (PairOrbits, BlockImage) {
        let orbits = PairOrbits::compute(action).unwrap();
        let decomposition = decompose(action, &orbits, &DecomposeConfig::default()).unwrap();
        let image = coefficients(&decomposition, &orbits).unwrap();
        (orbits, image)
    }

    #[test]
    fn invariance_distances() {
        let action = dihedral(5);
        let orbits = PairOrbits::compute(&action).unwrap();
        let adjacency = orbits
            .basis_matrix(orbits.orbit_of(0, 1))
            .unwrap()
            .map(|v| Complex::new(v, 0.0));
        let sdp = InvariantSdp::new(None, CMatrix::identity(5, 5), vec![(adjacency, 0.0)]).unwrap();
        let report = check_invariance(&sdp, &orbits, 1e-8).unwrap();
        assert_eq!(report.objective_distance, 0.0);
        assert_eq!(report.constraint_distances, vec![0.0]);
        assert!(report.is_invariant());

        let mut elementary = CMatrix::zeros(5, 5);
        elementary[(0, 1)] = Complex::new(1.0, 0.0);
        elementary[(1, 0)] = Complex::new(1.0, 0.0);
        let skewed = InvariantSdp::new(None, elementary, vec![]).unwrap();
        let report = check_invariance(&skewed, &orbits, 1e-8).unwrap();
        assert!(report.objective_distance > 0.1);
        assert!(!report.is_invariant());
    }

    #[test]
    fn symmetrize_projects_and_is_idempotent() {
        // Full symmetric group on 3 points: averaging e_0 e_0^t spreads it
        // over the diagonal orbit, giving I/3.
        let swap = Permutation::from_images(vec![1, 0, 2]).unwrap();
        let rot = Permutation::from_images(vec![1, 2, 0]).unwrap();
        let action = GroupAction::new(vec![swap, rot], 3).unwrap();
        let orbits = PairOrbits::compute(&action).unwrap();
        let mut corner = CMatrix::zeros(3, 3);
        corner[(0, 0)] = Complex::new(1.0, 0.0);
        let sdp = InvariantSdp::new(None, corner, vec![]).unwrap();
        let averaged = symmetrize(&sdp, &orbits).unwrap();
        let expected = CMatrix::identity(3, 3).unscale(3.0);
        assert!((averaged.objective() - expected).norm() < 1e-14);
        let twice = symmetrize(&averaged, &orbits).unwrap();
        assert!((twice.objective() - averaged.objective()).norm() < 1e-14);
    }

    #[test]
    fn theta_c5_reduces_to_three_scalar_blocks() {
        let (action, sdp) = theta_c5();
        let (orbits, image) = pipeline(&action);
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        assert_eq!(reduced.num_orbits(), 3);
        assert_eq!(
            reduced.block_dims().iter().map(|&(_, m)| m).collect::<Vec<_>>(),
            vec![1, 1, 1]
        );
        let diag = orbits.orbit_of(0, 0);
        // tr(J B_diag) = tr(J) = 5.
        assert!((reduced.objective_coefficients()[diag] - 5.0).norm() < 1e-12);
        let (full, total) = reduced.reduction_ratio();
        assert_eq!((full, total), (5, 3));
    }

    #[test]
    fn reduce_requires_invariance() {
        let action = dihedral(5);
        let (orbits, image) = pipeline(&action);
        let mut lopsided = CMatrix::zeros(5, 5);
        lopsided[(0, 1)] = Complex::new(1.0, 0.0);
        lopsided[(1, 0)] = Complex::new(1.0, 0.0);
        let sdp = InvariantSdp::new(None, lopsided, vec![]).unwrap();
        match reduce(&sdp, &orbits, &image, 1e-8) {
            Err(Error::NotInvariant { distance, .. }) => assert!(distance > 0.1),
            other => panic!("expected invariance error, got {other:?}"),
        }
        let symmetric = symmetrize(&sdp, &orbits).unwrap();
        assert!(reduce(&symmetric, &orbits, &image, 1e-8).is_ok());
    }

    #[test]
    fn trivial_group_reduction_is_reindexing() {
        let action = GroupAction::new(vec![], 3).unwrap();
        let (orbits, image) = pipeline(&action);
        let sdp = InvariantSdp::new(None, CMatrix::identity(3, 3), vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        assert_eq!(reduced.num_orbits(), 9);
        assert_eq!(reduced.block_dims(), &[(1, 3)]);
    }

    #[test]
    fn conjugate_pairing_of_coefficients() {
        let action = cyclic(5);
        let (orbits, image) = pipeline(&action);
        // A Hermitian invariant matrix with a genuinely complex orbit
        // coefficient.
        let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
        for r in 0..orbits.count() {
            let rt = orbits.transpose_of(r);
            if r < rt {
                y[r] = Complex::new(0.3, 0.4);
                y[rt] = Complex::new(0.3, -0.4);
            } else if r == rt {
                y[r] = Complex::new(1.0, 0.0);
            }
        }
        let c = orbits.assemble(&y).unwrap();
        let sdp = InvariantSdp::new(None, c, vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        for r in 0..orbits.count() {
            let rt = reduced.transpose_of(r);
            let gap = (reduced.objective_coefficients()[rt]
                - reduced.objective_coefficients()[r].conj())
            .norm();
            assert!(gap < 1e-10);
        }
    }

    #[test]
    fn realify_is_identity_shaped_for_real_decompositions() {
        let (action, sdp) = theta_c5();
        let (orbits, image) = pipeline(&action);
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let real = realify(&reduced).unwrap();
        assert_eq!(real.block_sizes(), vec![1, 1, 1]);
        assert!(real.blocks().iter().all(|b| !b.doubled));
        assert_eq!(real.variables().len(), 3);
        assert!(real
            .variables()
            .iter()
            .all(|v| v.part == RealPart::Whole));
    }

    #[test]
    fn one_dimensional_complex_blocks_stay_real_under_pairing() {
        // Hermitian pencil combinations of 1x1 blocks are real scalars,
        // so the cyclic action on the 5-cycle realifies without doubling.
        let action = cyclic(5);
        let (orbits, image) = pipeline(&action);
        let sdp = InvariantSdp::new(None, CMatrix::identity(5, 5), vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let real = realify(&reduced).unwrap();
        assert_eq!(real.variables().len(), 5);
        assert!(real.blocks().iter().all(|b| !b.doubled && b.size == 1));
    }

    #[test]
    fn realify_doubles_complex_blocks_and_spectra() {
        // Two disjoint copies of the cyclic action on three points: each
        // character appears with multiplicity two, and the cross-copy
        // orbits put genuinely complex entries into the 2x2 pencils.
        let gen = Permutation::from_images(vec![1, 2, 0, 4, 5, 3]).unwrap();
        let action = GroupAction::new(vec![gen], 6).unwrap();
        let (orbits, image) = pipeline(&action);
        let sdp = InvariantSdp::new(None, CMatrix::identity(6, 6), vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let real = realify(&reduced).unwrap();
        assert_eq!(real.variables().len(), orbits.count());
        assert!(real.blocks().iter().any(|b| b.doubled));
        for block in real.blocks().iter().filter(|b| b.doubled) {
            assert_eq!(block.size, 4);
        }

        // Random paired coefficients: complex-block spectra duplicate.
        let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
        let mut v = vec![0.0f64; real.variables().len()];
        for (t, var) in real.variables().iter().enumerate() {
            let rt = orbits.transpose_of(var.orbit);
            match var.part {
                RealPart::Whole => {
                    v[t] = 0.7;
                    y[var.orbit] = Complex::new(0.7, 0.0);
                }
                RealPart::RealOf => {
                    v[t] = 0.2;
                    y[var.orbit] += Complex::new(0.2, 0.0);
                    y[rt] += Complex::new(0.2, 0.0);
                }
                RealPart::ImagOf => {
                    v[t] = -0.4;
                    y[var.orbit] += Complex::new(0.0, -0.4);
                    y[rt] += Complex::new(0.0, 0.4);
                }
            }
        }
        let complex_blocks = reduced.assemble_blocks(&y).unwrap();
        for (k, block) in real.blocks().iter().enumerate() {
            let mut assembled = DMatrix::<f64>::zeros(block.size, block.size);
            for (t, coeff) in v.iter().enumerate() {
                assembled += &block.pencil[t] * *coeff;
            }
            let complex_eigs =
                hermitian_eigenvalues(&complex_blocks[k]).unwrap();
            let real_wrapped = assembled.map(|x| Complex::new(x, 0.0));
            let mut real_eigs = hermitian_eigenvalues(&real_wrapped).unwrap();
            real_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut expected: Vec<f64> = if block.doubled {
                complex_eigs.iter().flat_map(|&e| [e, e]).collect()
            } else {
                complex_eigs.clone()
            };
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in real_eigs.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "block {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn export_round_trips_and_encodes_theta() {
        let (action, sdp) = theta_c5();
        let (orbits, image) = pipeline(&action);
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let real = realify(&reduced).unwrap();
        let file = export_sdpa(&real);
        assert_eq!(file.num_constraints(), 2);
        assert_eq!(file.block_sizes, vec![1, 1, 1]);
        let text = file.render();
        let parsed = crate::sdpa::SdpaFile::parse(&text).unwrap();
        assert_eq!(parsed, file);

        // The exported data must represent the same program: for any
        // feasible pencil point, tr(data_i Z) equals the reduced row value.
        let y: Vec<Complex> = vec![
            Complex::new(0.2, 0.0),
            Complex::new(0.1, 0.0),
            Complex::new(-0.3, 0.0),
        ];
        let blocks = reduced.assemble_blocks(&y).unwrap();
        for (i, row) in reduced.constraint_rows().iter().enumerate() {
            let expected: Complex = row.iter().zip(&y).map(|(a, v)| a * v).sum();
            let mut through_data = 0.0;
            for (k, block) in real.blocks().iter().enumerate() {
                let data = &block.constraint_data[i];
                // Real non-doubled blocks here.
                for r in 0..data.nrows() {
                    for c in 0..data.ncols() {
                        through_data += data[(r, c)] * blocks[k][(c, r)].re;
                    }
                }
            }
            assert!((expected.re - through_data).abs() < 1e-10, "constraint {i}");
            assert!(expected.im.abs() < 1e-10);
        }
    }

    #[test]
    fn lift_theta_c5_optimal_vector() {
        let (action, sdp) = theta_c5();
        let (orbits, image) = pipeline(&action);
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();

        let diag = orbits.orbit_of(0, 0);
        let adjacent = orbits.orbit_of(0, 1);
        let far = orbits.orbit_of(0, 2);
        let mut y = vec![Complex::new(0.0, 0.0); 3];
        y[diag] = Complex::new(0.2, 0.0);
        y[adjacent] = Complex::new(0.0, 0.0);
        y[far] = Complex::new((5.0_f64.sqrt() - 1.0) / 10.0, 0.0);
        let (full, report) = lift_solution(&y, &orbits, &sdp, &reduced).unwrap();
        assert_eq!(full.nrows(), 5);
        assert!((report.objective_full - 5.0_f64.sqrt()).abs() < 1e-12);
        assert!(report.psd);
        assert!(report.min_eigenvalue_full.abs() < 1e-10);
        let block_floor = report
            .block_min_eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        assert!((report.min_eigenvalue_full - block_floor).abs() < 1e-9);
    }

    #[test]
    fn lift_zero_vector() {
        let (action, sdp) = theta_c5();
        let (orbits, image) = pipeline(&action);
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let y = vec![Complex::new(0.0, 0.0); 3];
        let (full, report) = lift_solution(&y, &orbits, &sdp, &reduced).unwrap();
        assert_eq!(full, CMatrix::zeros(5, 5));
        assert_eq!(report.objective_full, 0.0);
        assert_eq!(report.min_eigenvalue_full, 0.0);
        assert!(report.psd);
    }

    #[test]
    fn lift_rejects_pairing_violations() {
        let action = cyclic(5);
        let (orbits, image) = pipeline(&action);
        let sdp = InvariantSdp::new(None, CMatrix::identity(5, 5), vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
        for (r, value) in y.iter_mut().enumerate() {
            if orbits.transpose_of(r) != r {
                *value = Complex::new(0.0, 1.0);
            }
        }
        assert!(matches!(
            lift_solution(&y, &orbits, &sdp, &reduced),
            Err(Error::MalformedInput(_))
        ));
    }

    #[test]
    fn lift_eigenvalue_floor_agreement_random_trials() {
        use rand::Rng;
        use rand::SeedableRng;
        let action = GroupAction::hamming(3).unwrap();
        let (orbits, image) = pipeline(&action);
        let sdp = InvariantSdp::new(None, CMatrix::identity(8, 8), vec![]).unwrap();
        let reduced = reduce(&sdp, &orbits, &image, 1e-8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mut y = vec![Complex::new(0.0, 0.0); orbits.count()];
            for r in 0..orbits.count() {
                let rt = orbits.transpose_of(r);
                if r <= rt {
                    let value = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
                    y[r] = value;
                    y[rt] = value;
                }
            }
            let (_, report) = lift_solution(&y, &orbits, &sdp, &reduced).unwrap();
            let block_floor = report
                .block_min_eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert!((report.min_eigenvalue_full - block_floor).abs() < 1e-8);
        }
    }

    #[test]
    fn json_parsing_applies_hermitian_closure() {
        let text = r#"{
            "domain_size": 2,
            "objective": [[0, 1, 0.5, 0.25]],
            "constraints": [{ "entries": [[0, 0, 1.0, 0.0]], "rhs": 1.0 }]
        }"#;
        let sdp = InvariantSdp::from_json(text).unwrap();
        assert_eq!(sdp.objective()[(0, 1)], Complex::new(0.5, 0.25));
        assert_eq!(sdp.objective()[(1, 0)], Complex::new(0.5, -0.25));
        assert_eq!(sdp.constraints().len(), 1);

        let conflicting = r#"{
            "domain_size": 2,
            "objective": [[0, 1, 0.5, 0.25], [1, 0, 0.5, 0.25]]
        }"#;
        assert!(InvariantSdp::from_json(conflicting).is_err());
        let complex_diagonal = r#"{ "domain_size": 2, "objective": [[0, 0, 1.0, 0.5]] }"#;
        assert!(InvariantSdp::from_json(complex_diagonal).is_err());
        let out_of_range = r#"{ "domain_size": 2, "objective": [[0, 5, 1.0, 0.0]] }"#;
        assert!(InvariantSdp::from_json(out_of_range).is_err());
    }
}
