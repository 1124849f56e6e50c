//! Finite permutation groups given by generators: element enumeration,
//! orbits of the action on pairs, and the canonical 0/1 basis of the
//! algebra of invariant matrices.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMatrix, Complex};

/// Default cap on the number of enumerated group elements.
pub const DEFAULT_GROUP_CAP: usize = 10_000_000;

/// A permutation of `{0, …, n-1}` in one-line (image array) form.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Identity permutation on `n` points.
    pub fn identity(n: usize) -> Permutation {
        Permutation {
            images: (0..n).collect(),
        }
    }

    /// Builds a permutation from its image array, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Permutation> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &im in &images {
            if im >= n || seen[im] {
                return Err(Error::MalformedInput(format!(
                    "image array {images:?} is not a bijection on 0..{n}"
                )));
            }
            seen[im] = true;
        }
        Ok(Permutation { images })
    }

    /// Number of points the permutation acts on.
    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// Image of a single point.
    #[inline]
    pub fn apply(&self, point: usize) -> usize {
        self.images[point]
    }

    /// Image array.
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// Composition `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.degree(), other.degree());
        Permutation {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        }
    }

    /// Inverse permutation.
    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.degree()];
        for (point, &im) in self.images.iter().enumerate() {
            images[im] = point;
        }
        Permutation { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &im)| i == im)
    }

    /// Permutation matrix `P` with `P(x, y) = 1` iff `x = a(y)`, so that
    /// `(P f)(x) = f(a^{-1} x)` for vectors indexed by points.
    pub fn matrix(&self) -> CMatrix {
        let n = self.degree();
        let mut m = CMatrix::zeros(n, n);
        for y in 0..n {
            m[(self.images[y], y)] = Complex::new(1.0, 0.0);
        }
        m
    }
}

/// JSON schema of a group input file.
#[derive(Serialize, Deserialize)]
struct GroupFile {
    domain_size: usize,
    generators: Vec<Vec<usize>>,
}

/// A finite permutation group acting on `{0, …, domain_size-1}`, given by
/// generators. The full element list is enumerated lazily and cached.
#[derive(Debug)]
pub struct GroupAction {
    domain_size: usize,
    generators: Vec<Permutation>,
    cap: usize,
    elements: OnceLock<Result<Vec<Permutation>>>,
}

impl GroupAction {
    /// Validates the generators and builds the action. Elements are not
    /// enumerated until [`GroupAction::elements`] is called.
    pub fn new(generators: Vec<Permutation>, domain_size: usize) -> Result<GroupAction> {
        Self::with_cap(generators, domain_size, DEFAULT_GROUP_CAP)
    }

    /// Same as [`GroupAction::new`] with an explicit cap on the group order.
    pub fn with_cap(
        generators: Vec<Permutation>,
        domain_size: usize,
        cap: usize,
    ) -> Result<GroupAction> {
        if domain_size == 0 {
            return Err(Error::MalformedInput("domain_size must be positive".into()));
        }
        for g in &generators {
            if g.degree() != domain_size {
                return Err(Error::MalformedInput(format!(
                    "generator degree {} does not match domain size {domain_size}",
                    g.degree()
                )));
            }
        }
        Ok(GroupAction {
            domain_size,
            generators,
            cap,
            elements: OnceLock::new(),
        })
    }

    /// Parses the JSON group file format
    /// `{ "domain_size": n, "generators": [[…], …] }` (0-based images).
    pub fn from_json(text: &str) -> Result<GroupAction> {
        let file: GroupFile = serde_json::from_str(text)
            .map_err(|e| Error::MalformedInput(format!("group file: {e}")))?;
        let generators = file
            .generators
            .into_iter()
            .map(Permutation::from_images)
            .collect::<Result<Vec<_>>>()?;
        GroupAction::new(generators, file.domain_size)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    /// Full element list of the generated group, in deterministic
    /// breadth-first order from the identity (generators applied in input
    /// order). Enumerated once and cached.
    pub fn elements(&self) -> Result<&[Permutation]> {
        let computed = self
            .elements
            .get_or_init(|| enumerate_elements(&self.generators, self.domain_size, self.cap));
        match computed {
            Ok(elems) => Ok(elems),
            Err(e) => Err(clone_enumeration_error(e)),
        }
    }

    /// Group order; triggers enumeration.
    pub fn order(&self) -> Result<usize> {
        Ok(self.elements()?.len())
    }

    /// The induced action of the symmetric group `S_n` on binary words of
    /// length `n` by coordinate permutation. Points are bitmasks
    /// `0..2^n`; bit `l` of a mask is coordinate `l`. Generators are the
    /// lifts of the transposition `(0 1)` and the `n`-cycle.
    pub fn hamming(n: usize) -> Result<GroupAction> {
        if n == 0 || n > 24 {
            return Err(Error::ResourceLimit(format!(
                "hamming action requires 1 <= n <= 24, got {n}"
            )));
        }
        let size = 1usize << n;
        let lift = |sigma: &[usize]| -> Result<Permutation> {
            let mut images = vec![0usize; size];
            for (mask, image) in images.iter_mut().enumerate() {
                let mut out = 0usize;
                for (i, &si) in sigma.iter().enumerate() {
                    if mask >> si & 1 == 1 {
                        out |= 1 << i;
                    }
                }
                *image = out;
            }
            Permutation::from_images(images)
        };
        let mut generators = Vec::new();
        if n >= 2 {
            let mut swap: Vec<usize> = (0..n).collect();
            swap.swap(0, 1);
            generators.push(lift(&swap)?);
            let cycle: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            generators.push(lift(&cycle)?);
        }
        GroupAction::new(generators, size)
    }
}

fn clone_enumeration_error(e: &Error) -> Error {
    match e {
        Error::ResourceLimit(s) => Error::ResourceLimit(s.clone()),
        other => Error::Numeric(format!("group enumeration failed: {other}")),
    }
}

fn enumerate_elements(
    generators: &[Permutation],
    domain_size: usize,
    cap: usize,
) -> Result<Vec<Permutation>> {
    let identity = Permutation::identity(domain_size);
    let mut elements = vec![identity.clone()];
    let mut index: HashMap<Permutation, usize> = HashMap::new();
    index.insert(identity, 0);
    let mut frontier = 0usize;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        frontier += 1;
        for g in generators {
            let next = g.compose(&current);
            if !index.contains_key(&next) {
                if elements.len() >= cap {
                    return Err(Error::ResourceLimit(format!(
                        "group order exceeds cap {cap}"
                    )));
                }
                index.insert(next.clone(), elements.len());
                elements.push(next);
            }
        }
    }
    Ok(elements)
}

/// Orbit decomposition of `X × X` under the diagonal action, with orbit
/// sizes, lexicographically smallest representatives, and the transpose
/// pairing between orbits. Orbit indices are 0-based and ordered by
/// representative pair.
#[derive(Debug, Clone)]
pub struct PairOrbits {
    domain_size: usize,
    orbit_of: Vec<u32>,
    representatives: Vec<(usize, usize)>,
    sizes: Vec<usize>,
    transpose_of: Vec<usize>,
}

impl PairOrbits {
    /// Computes the orbits of `X × X` by BFS over generator images of
    /// pairs; never enumerates the full group.
    pub fn compute(action: &GroupAction) -> Result<PairOrbits> {
        let n = action.domain_size();
        if n > 4096 {
            return Err(Error::ResourceLimit(format!(
                "pair orbit table for |X| = {n} exceeds the 4096-point cap"
            )));
        }
        let total = n * n;
        let mut orbit_of = vec![u32::MAX; total];
        let mut representatives = Vec::new();
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..total {
            if orbit_of[start] != u32::MAX {
                continue;
            }
            let orbit = representatives.len() as u32;
            representatives.push((start / n, start % n));
            let mut size = 0usize;
            orbit_of[start] = orbit;
            stack.push(start);
            while let Some(pair) = stack.pop() {
                size += 1;
                let (x, y) = (pair / n, pair % n);
                for g in action.generators() {
                    let image = g.apply(x) * n + g.apply(y);
                    if orbit_of[image] == u32::MAX {
                        orbit_of[image] = orbit;
                        stack.push(image);
                    }
                }
            }
            sizes.push(size);
        }
        let transpose_of = representatives
            .iter()
            .map(|&(x, y)| orbit_of[y * n + x] as usize)
            .collect();
        Ok(PairOrbits {
            domain_size: n,
            orbit_of,
            representatives,
            sizes,
            transpose_of,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Number of orbits `N`.
    pub fn count(&self) -> usize {
        self.representatives.len()
    }

    /// Orbit index of the pair `(x, y)`.
    #[inline]
    pub fn orbit_of(&self, x: usize, y: usize) -> usize {
        self.orbit_of[x * self.domain_size + y] as usize
    }

    /// Lexicographically smallest pair in orbit `r`.
    pub fn representative(&self, r: usize) -> (usize, usize) {
        self.representatives[r]
    }

    /// Number of pairs in orbit `r`.
    pub fn size(&self, r: usize) -> usize {
        self.sizes[r]
    }

    /// Index of the orbit whose indicator matrix is the transpose of the
    /// indicator of orbit `r`.
    pub fn transpose_of(&self, r: usize) -> usize {
        self.transpose_of[r]
    }

    /// Canonical basis matrix `B_r`: 1 on the pairs of orbit `r`, else 0.
    pub fn basis_matrix(&self, r: usize) -> Result<DMatrix<f64>> {
        if r >= self.count() {
            return Err(Error::MalformedInput(format!(
                "orbit index {r} out of range (N = {})",
                self.count()
            )));
        }
        let n = self.domain_size;
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                if self.orbit_of[x * n + y] as usize == r {
                    m[(x, y)] = 1.0;
                }
            }
        }
        Ok(m)
    }

    /// Group average of a matrix: every entry is replaced by the mean of
    /// its pair-orbit. This is the orthogonal projection onto the span of
    /// the canonical basis and never touches group elements.
    pub fn average(&self, m: &CMatrix) -> Result<CMatrix> {
        let n = self.domain_size;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Shape(format!(
                "expected {n}x{n} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut sums = vec![Complex::new(0.0, 0.0); self.count()];
        for x in 0..n {
            for y in 0..n {
                sums[self.orbit_of[x * n + y] as usize] += m[(x, y)];
            }
        }
        let means: Vec<Complex> = sums
            .iter()
            .zip(&self.sizes)
            .map(|(s, &v)| s / v as f64)
            .collect();
        let mut out = CMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                out[(x, y)] = means[self.orbit_of[x * n + y] as usize];
            }
        }
        Ok(out)
    }

    /// Builds the invariant matrix `Σ_r y_r B_r` from orbit coefficients.
    pub fn assemble(&self, coefficients: &[Complex]) -> Result<CMatrix> {
        if coefficients.len() != self.count() {
            return Err(Error::Shape(format!(
                "expected {} orbit coefficients, got {}",
                self.count(),
                coefficients.len()
            )));
        }
        let n = self.domain_size;
        let mut out = CMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                out[(x, y)] = coefficients[self.orbit_of[x * n + y] as usize];
            }
        }
        Ok(out)
    }

    /// Integer structure constants of the orbit algebra:
    /// `B_r B_s = Σ_t constants[r][s][t] B_t`, computed by counting paths
    /// through one representative per target orbit.
    pub fn structure_constants(&self) -> Vec<Vec<Vec<u64>>> {
        let n = self.domain_size;
        let count = self.count();
        let mut constants = vec![vec![vec![0u64; count]; count]; count];
        for (t, &(x, y)) in self.representatives.iter().enumerate() {
            for z in 0..n {
                let r = self.orbit_of[x * n + z] as usize;
                let s = self.orbit_of[z * n + y] as usize;
                constants[r][s][t] += 1;
            }
        }
        constants
    }
}
