//! Discrete 1+1-dimensional lattice spacetime: Cauchy surfaces as monotone
//! time-functions over a periodic site ring, region-by-region stochastic
//! evolution, and checks of the two relativistic consistency conditions
//! (spacelike commutation of evolution operators, no signaling into
//! spacelike-separated observables).
//!
//! The lattice light cone has slope 1: two cells are spacelike separated iff
//! their ring distance exceeds their time separation. Admissible Kraus
//! assignments act on single sites (embedded by identity elsewhere), which
//! makes spacelike commutators vanish identically; multi-site operators are
//! supported only through the raw fixture interface
//! [`max_cross_commutator`].

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, ComplexMatrix, DensityOperator, StateVector, C64, MAX_DIMENSION};
use crate::semigroup::{KrausBranch, KrausFamily};
use crate::unravel::{sample_branch, TrajectoryRecord, TrajectoryStep};

/// Periodic spatial ring of `n_sites` sites with local dimension `site_dim`,
/// up to time index `horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpacetime {
    n_sites: usize,
    site_dim: usize,
    horizon: i64,
}

impl LatticeSpacetime {
    pub fn new(n_sites: usize, site_dim: usize, horizon: i64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidInput { field: "n_sites", reason: "must be positive".into() });
        }
        if site_dim < 2 {
            return Err(Error::InvalidInput { field: "site_dim", reason: "must be at least 2".into() });
        }
        if horizon < 0 {
            return Err(Error::InvalidInput { field: "horizon", reason: "must be nonnegative".into() });
        }
        let mut total: usize = 1;
        for _ in 0..n_sites {
            total = total
                .checked_mul(site_dim)
                .filter(|&d| d <= MAX_DIMENSION)
                .ok_or(Error::DimensionOverflow { dim: usize::MAX, max: MAX_DIMENSION })?;
        }
        Ok(Self { n_sites, site_dim, horizon })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    pub fn total_dim(&self) -> usize {
        self.site_dim.pow(self.n_sites as u32)
    }

    /// Shortest distance between two sites on the ring.
    pub fn ring_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b) % self.n_sites;
        d.min(self.n_sites - d)
    }

    /// Neither cell lies in the closed causal cone of the other.
    pub fn spacelike(&self, a: Cell, b: Cell) -> bool {
        let dt = a.time.abs_diff(b.time);
        (self.ring_distance(a.site, b.site) as u64) > dt
    }
}

/// One lattice cell. The ordering is time-major, which fixes the canonical
/// evolution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub time: i64,
    pub site: usize,
}

impl Cell {
    pub fn new(site: usize, time: i64) -> Self {
        Self { time, site }
    }
}

/// Monotone lattice time-function: one time index per site, with the
/// light-cone slope bound |t[x+1] − t[x]| ≤ 1 held cyclically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauchySurface {
    times: Vec<i64>,
}

impl CauchySurface {
    pub fn new(times: Vec<i64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput { field: "times", reason: "empty surface".into() });
        }
        let n = times.len();
        for x in 0..n {
            let slope = (times[(x + 1) % n] - times[x]).abs();
            if slope > 1 {
                return Err(Error::SurfaceSlope { site: x, slope });
            }
        }
        Ok(Self { times })
    }

    /// Constant-time surface.
    pub fn flat(n_sites: usize, t: i64) -> Self {
        Self { times: vec![t; n_sites] }
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn n_sites(&self) -> usize {
        self.times.len()
    }

    /// Advance one site by one time step, re-validating the slope bound.
    pub fn advance(&self, site: usize) -> Result<Self> {
        if site >= self.times.len() {
            return Err(Error::InvalidInput {
                field: "site",
                reason: format!("site {} out of range", site),
            });
        }
        let mut times = self.times.clone();
        times[site] += 1;
        Self::new(times)
    }
}

/// Set of cells between two surfaces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellRegion {
    cells: BTreeSet<Cell>,
}

impl CellRegion {
    pub fn from_cells(cells: impl IntoIterator<Item = Cell>) -> Self {
        Self { cells: cells.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Cells in canonical (time-major) order.
    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.contains(&cell)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.cells.is_disjoint(&other.cells)
    }

    /// Every cell of `self` is spacelike from every cell of `other`.
    pub fn is_spacelike_from(&self, other: &Self, lattice: &LatticeSpacetime) -> bool {
        self.iter().all(|a| other.iter().all(|b| lattice.spacelike(a, b)))
    }
}

/// Region between two surfaces: all cells (x, t) with
/// sigma0[x] ≤ t < sigma1[x]. Rejects a second surface that dips below the
/// first anywhere.
pub fn surface_diff(sigma0: &CauchySurface, sigma1: &CauchySurface) -> Result<CellRegion> {
    if sigma0.n_sites() != sigma1.n_sites() {
        return Err(Error::DimensionMismatch { left: sigma0.n_sites(), right: sigma1.n_sites() });
    }
    let mut cells = BTreeSet::new();
    for (site, (&t0, &t1)) in sigma0.times().iter().zip(sigma1.times()).enumerate() {
        if t1 < t0 {
            return Err(Error::SurfaceOrder { site });
        }
        for t in t0..t1 {
            cells.insert(Cell::new(site, t));
        }
    }
    Ok(CellRegion { cells })
}

/// Per-cell single-site Kraus assignment. Each cell at site x is driven by
/// the family registered for x, embedded by identity on all other sites.
#[derive(Debug, Clone)]
pub struct LocalKrausAssignment {
    lattice: LatticeSpacetime,
    site_families: BTreeMap<usize, KrausFamily>,
}

impl LocalKrausAssignment {
    pub fn new(lattice: LatticeSpacetime, site_families: BTreeMap<usize, KrausFamily>) -> Result<Self> {
        for (&site, family) in &site_families {
            if site >= lattice.n_sites() {
                return Err(Error::InvalidInput {
                    field: "site",
                    reason: format!("site {} out of range for {} sites", site, lattice.n_sites()),
                });
            }
            if family.dim() != lattice.site_dim() {
                return Err(Error::DimensionMismatch { left: family.dim(), right: lattice.site_dim() });
            }
            if !family.is_complete(&Default::default()) {
                return Err(Error::IncompleteFamily {
                    residual: family.completeness_residual(),
                    tolerance: crate::linops::Tolerances::default().completeness,
                });
            }
        }
        Ok(Self { lattice, site_families })
    }

    /// The same family at every site.
    pub fn uniform(lattice: LatticeSpacetime, family: KrausFamily) -> Result<Self> {
        let site_families = (0..lattice.n_sites()).map(|s| (s, family.clone())).collect();
        Self::new(lattice, site_families)
    }

    pub fn lattice(&self) -> &LatticeSpacetime {
        &self.lattice
    }

    pub fn family_at_site(&self, site: usize) -> Option<&KrausFamily> {
        self.site_families.get(&site)
    }

    pub fn family_for_cell(&self, cell: Cell) -> Result<&KrausFamily> {
        self.site_families
            .get(&cell.site)
            .ok_or(Error::MissingAssignment { site: cell.site, time: cell.time })
    }

    /// Family for the cell embedded into the full chain Hilbert space.
    pub fn embedded_family(&self, cell: Cell) -> Result<KrausFamily> {
        let local = self.family_for_cell(cell)?;
        let branches = local
            .branches()
            .iter()
            .map(|b| {
                Ok(KrausBranch {
                    weight: b.weight,
                    op: linops::embed_sites(self.lattice.n_sites(), self.lattice.site_dim(), &[(cell.site, &b.op)])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        KrausFamily::new(
            self.lattice.total_dim(),
            branches,
            format!("{}@site{}", local.label(), cell.site),
        )
    }
}

/// One stochastic local update at a cell.
pub fn advance_cell(
    state: &StateVector,
    cell: Cell,
    assignment: &LocalKrausAssignment,
    draw: f64,
) -> Result<(StateVector, usize, f64)> {
    let family = assignment.embedded_family(cell)?;
    let (index, probability, post) = sample_branch(&family, state, draw)?;
    Ok((post, index, probability))
}

/// Evolve a trajectory through the region between two surfaces. Cells are
/// advanced in canonical (time-major) order with draws from a ChaCha8 stream
/// seeded by `seed`.
pub fn evolve_between(
    state: &StateVector,
    sigma0: &CauchySurface,
    sigma1: &CauchySurface,
    assignment: &LocalKrausAssignment,
    seed: u64,
) -> Result<(StateVector, TrajectoryRecord)> {
    let region = surface_diff(sigma0, sigma1)?;
    let cells: Vec<Cell> = region.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: BTreeMap<Cell, f64> = cells.iter().map(|&c| (c, rng.random())).collect();
    let (final_state, steps) = evolve_cells(state, &cells, assignment, &draws)?;
    Ok((final_state, TrajectoryRecord { seed, steps }))
}

/// Evolve through an explicit cell sequence with fixed per-cell draws.
///
/// The applied evolution operator is accumulated as a matrix product and the
/// state is normalized once against the initial vector, so for cell sets
/// with pairwise-disjoint site supports the final state is bit-identical
/// under any reordering of the sequence: embedded operators at distinct
/// sites commute entry for entry.
pub fn evolve_cells_with_draws(
    state: &StateVector,
    cells: &[Cell],
    assignment: &LocalKrausAssignment,
    draws: &BTreeMap<Cell, f64>,
) -> Result<(StateVector, Vec<usize>)> {
    let (final_state, steps) = evolve_cells(state, cells, assignment, draws)?;
    Ok((final_state, steps.into_iter().map(|s| s.branch_index).collect()))
}

fn evolve_cells(
    state: &StateVector,
    cells: &[Cell],
    assignment: &LocalKrausAssignment,
    draws: &BTreeMap<Cell, f64>,
) -> Result<(StateVector, Vec<TrajectoryStep>)> {
    let dim = assignment.lattice.total_dim();
    if state.dim() != dim {
        return Err(Error::DimensionMismatch { left: state.dim(), right: dim });
    }
    let mut accumulated = ComplexMatrix::identity(dim);
    let mut current = state.clone();
    let mut steps = Vec::with_capacity(cells.len());
    for &cell in cells {
        let draw = *draws.get(&cell).ok_or(Error::MissingAssignment { site: cell.site, time: cell.time })?;
        let family = assignment.embedded_family(cell)?;
        let (branch_index, probability, _) = sample_branch(&family, &current, draw)?;
        accumulated = family.branches()[branch_index].op.mul(&accumulated)?;
        current = StateVector::new(accumulated.apply(state.amplitudes())?)?;
        steps.push(TrajectoryStep { branch_index, probability, post_state: current.clone() });
    }
    Ok((current, steps))
}

/// Exact ensemble after evolving the pure state through every cell of the
/// region (canonical order; the result is order-independent for single-site
/// assignments).
pub fn exact_region_ensemble(
    psi: &StateVector,
    region: &CellRegion,
    assignment: &LocalKrausAssignment,
) -> Result<DensityOperator> {
    let mut rho = DensityOperator::from_pure(psi);
    for cell in region.iter() {
        rho = assignment.embedded_family(cell)?.apply(&rho)?;
    }
    Ok(rho)
}

/// Maximum commutator norm over all cross pairs of embedded branch
/// operators of two disjoint, mutually spacelike regions. Zero for
/// admissible single-site assignments at distinct sites.
pub fn check_spacelike_commutation(
    assignment: &LocalKrausAssignment,
    region1: &CellRegion,
    region2: &CellRegion,
) -> Result<f64> {
    if !region1.is_disjoint(region2) {
        let shared = region1.iter().find(|c| region2.contains(*c)).unwrap();
        return Err(Error::NotSpacelike {
            site_a: shared.site,
            time_a: shared.time,
            site_b: shared.site,
            time_b: shared.time,
        });
    }
    for a in region1.iter() {
        for b in region2.iter() {
            if !assignment.lattice.spacelike(a, b) {
                return Err(Error::NotSpacelike {
                    site_a: a.site,
                    time_a: a.time,
                    site_b: b.site,
                    time_b: b.time,
                });
            }
        }
    }
    let mut max_norm: f64 = 0.0;
    for a in region1.iter() {
        let fa = assignment.embedded_family(a)?;
        for b in region2.iter() {
            let fb = assignment.embedded_family(b)?;
            for ba in fa.branches() {
                for bb in fb.branches() {
                    max_norm = max_norm.max(linops::commutator_norm(&ba.op, &bb.op)?);
                }
            }
        }
    }
    Ok(max_norm)
}

/// Maximum cross commutator norm over two raw operator lists. This is the
/// fixture interface for demonstrating violations with multi-site supports.
pub fn max_cross_commutator(ops1: &[ComplexMatrix], ops2: &[ComplexMatrix]) -> Result<f64> {
    let mut max_norm: f64 = 0.0;
    for a in ops1 {
        for b in ops2 {
            max_norm = max_norm.max(linops::commutator_norm(a, b)?);
        }
    }
    Ok(max_norm)
}

/// Observable supported on a single site.
#[derive(Debug, Clone)]
pub struct SiteObservable {
    pub site: usize,
    pub matrix: ComplexMatrix,
}

impl SiteObservable {
    pub fn pauli(site: usize, axis: char) -> Result<Self> {
        let matrix = match axis.to_ascii_uppercase() {
            'X' => linops::pauli_x(),
            'Y' => linops::pauli_y(),
            'Z' => linops::pauli_z(),
            other => {
                return Err(Error::InvalidInput {
                    field: "pauli",
                    reason: format!("unknown axis {other:?}"),
                })
            }
        };
        Ok(Self { site, matrix })
    }

    pub fn embedded(&self, lattice: &LatticeSpacetime) -> Result<ComplexMatrix> {
        linops::embed_sites(lattice.n_sites(), lattice.site_dim(), &[(self.site, &self.matrix)])
    }
}

/// |⟨O⟩_ψ − ⟨O⟩_ρ̄| where ρ̄ is the exact ensemble after evolving through the
/// region. The observable site must be spacelike from the whole region:
/// outside the slope-1 cone of every cell, evaluated at the region's final
/// time.
pub fn check_no_signaling(
    assignment: &LocalKrausAssignment,
    region: &CellRegion,
    observable: &SiteObservable,
    psi: &StateVector,
) -> Result<f64> {
    let lattice = &assignment.lattice;
    if observable.site >= lattice.n_sites() {
        return Err(Error::InvalidInput {
            field: "site",
            reason: format!("observable site {} out of range", observable.site),
        });
    }
    let t_final = region.iter().map(|c| c.time).max();
    if let Some(t_final) = t_final {
        for cell in region.iter() {
            let reach = (t_final - cell.time) as u64;
            if (lattice.ring_distance(observable.site, cell.site) as u64) <= reach {
                return Err(Error::ObservableInShadow { site: observable.site });
            }
        }
    }
    let obs = observable.embedded(lattice)?;
    let before = DensityOperator::from_pure(psi).expectation(&obs)?;
    let after = exact_region_ensemble(psi, region, assignment)?.expectation(&obs)?;
    Ok((before - after).abs())
}

/// Declarative scenario: lattice, a surface pair, per-site family labels,
/// and observables.
///
/// Wire format:
/// `{n_sites, site_dim, surfaces:[[..],[..]], families:{"0":"dephasing:0.25",..},
///   observables:[{site, pauli}], initial_state}`.
/// `initial_state` is optional (`plus`, `ghz`, or `basis:<k>`; default
/// `plus`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_sites: usize,
    pub site_dim: usize,
    pub surfaces: Vec<Vec<i64>>,
    pub families: BTreeMap<String, String>,
    #[serde(default)]
    pub observables: Vec<ScenarioObservable>,
    #[serde(default)]
    pub initial_state: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioObservable {
    pub site: usize,
    pub pauli: char,
}

/// Fully built scenario, ready to run.
pub struct BuiltScenario {
    pub lattice: LatticeSpacetime,
    pub sigma0: CauchySurface,
    pub sigma1: CauchySurface,
    pub assignment: LocalKrausAssignment,
    pub observables: Vec<SiteObservable>,
    pub initial_state: StateVector,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<BuiltScenario> {
        if self.surfaces.len() != 2 {
            return Err(Error::InvalidInput {
                field: "surfaces",
                reason: format!("expected exactly 2 surfaces, got {}", self.surfaces.len()),
            });
        }
        let sigma0 = CauchySurface::new(self.surfaces[0].clone())?;
        let sigma1 = CauchySurface::new(self.surfaces[1].clone())?;
        if sigma0.n_sites() != self.n_sites || sigma1.n_sites() != self.n_sites {
            return Err(Error::InvalidInput {
                field: "surfaces",
                reason: "surface length does not match n_sites".into(),
            });
        }
        let horizon = sigma1.times().iter().copied().max().unwrap_or(0).max(0);
        let lattice = LatticeSpacetime::new(self.n_sites, self.site_dim, horizon)?;

        let mut site_families = BTreeMap::new();
        for (key, label) in &self.families {
            let site: usize = key.parse().map_err(|_| Error::InvalidInput {
                field: "families",
                reason: format!("site key {key:?} is not an integer"),
            })?;
            site_families.insert(site, KrausFamily::from_label(label, self.site_dim)?);
        }
        let assignment = LocalKrausAssignment::new(lattice.clone(), site_families)?;

        let observables = self
            .observables
            .iter()
            .map(|o| SiteObservable::pauli(o.site, o.pauli))
            .collect::<Result<Vec<_>>>()?;

        let initial_state = self.build_initial_state(&lattice)?;
        Ok(BuiltScenario { lattice, sigma0, sigma1, assignment, observables, initial_state })
    }

    fn build_initial_state(&self, lattice: &LatticeSpacetime) -> Result<StateVector> {
        let label = self.initial_state.as_deref().unwrap_or("plus");
        if let Some(idx) = label.strip_prefix("basis:") {
            let k: usize = idx.parse().map_err(|_| Error::InvalidInput {
                field: "initial_state",
                reason: format!("cannot parse basis index in {label:?}"),
            })?;
            return StateVector::basis(lattice.total_dim(), k);
        }
        if lattice.site_dim() != 2 {
            return Err(Error::InvalidInput {
                field: "initial_state",
                reason: format!("{label:?} requires qubit sites"),
            });
        }
        match label {
            "plus" => Ok(StateVector::plus(lattice.n_sites())),
            "ghz" => Ok(StateVector::ghz(lattice.n_sites())),
            other => Err(Error::InvalidInput {
                field: "initial_state",
                reason: format!("unknown initial state {other:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qubit_lattice(n: usize) -> LatticeSpacetime {
        LatticeSpacetime::new(n, 2, 8).unwrap()
    }

    fn identity_assignment(n: usize) -> LocalKrausAssignment {
        LocalKrausAssignment::uniform(qubit_lattice(n), KrausFamily::identity(2)).unwrap()
    }

    #[test]
    fn lattice_rejects_oversized_chains() {
        assert!(LatticeSpacetime::new(13, 2, 1).is_err());
        assert!(LatticeSpacetime::new(12, 2, 1).is_ok());
    }

    #[test]
    fn surface_slope_validation_names_site() {
        match CauchySurface::new(vec![0, 2, 0, 0]) {
            Err(Error::SurfaceSlope { site, slope }) => {
                assert_eq!(site, 0);
                assert_eq!(slope, 2);
            }
            other => panic!("expected slope violation, got {other:?}"),
        }
        // Cyclic bound: the wrap-around pair also counts.
        assert!(CauchySurface::new(vec![0, 1, 2, 2]).is_err());
        assert!(CauchySurface::new(vec![0, 1, 2, 1]).is_ok());
    }

    #[test]
    fn surface_diff_counting() {
        let s0 = CauchySurface::flat(4, 0);
        assert!(surface_diff(&s0, &s0).unwrap().is_empty());

        let s1 = CauchySurface::flat(4, 1);
        assert_eq!(surface_diff(&s0, &s1).unwrap().len(), 4);

        let bump = CauchySurface::new(vec![0, 1, 0, 0]).unwrap();
        let region = surface_diff(&s0, &bump).unwrap();
        assert_eq!(region.len(), 1);
        assert!(region.contains(Cell::new(1, 0)));

        match surface_diff(&bump, &s0) {
            Err(Error::SurfaceOrder { site }) => assert_eq!(site, 1),
            other => panic!("expected order violation, got {other:?}"),
        }
    }

    #[test]
    fn advance_cell_identity_keeps_state() {
        let assignment = identity_assignment(3);
        let psi = StateVector::plus(3);
        let (post, idx, p) = advance_cell(&psi, Cell::new(1, 0), &assignment, 0.9).unwrap();
        assert_eq!(idx, 0);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        assert!(post.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn advance_cell_dephasing_embed_oracle() {
        // Single-site dephasing p = 0.25 at site 1 of |+⟩^⊗4: embed-and-apply
        // 16x16 oracle built from an independent Kronecker chain.
        let lattice = qubit_lattice(4);
        let mut families = BTreeMap::new();
        families.insert(1usize, KrausFamily::dephasing(0.25).unwrap());
        let assignment = LocalKrausAssignment::new(lattice, families).unwrap();
        let psi = StateVector::plus(4);

        let (post0, i0, p0) = advance_cell(&psi, Cell::new(1, 0), &assignment, 0.1).unwrap();
        assert_eq!(i0, 0);
        assert_abs_diff_eq!(p0, 0.75, epsilon = 1e-12);
        let (post1, i1, p1) = advance_cell(&psi, Cell::new(1, 0), &assignment, 0.99).unwrap();
        assert_eq!(i1, 1);
        assert_abs_diff_eq!(p1, 0.25, epsilon = 1e-12);

        // Oracle: I ⊗ K ⊗ I ⊗ I via explicit successive Kronecker products.
        let eye = ComplexMatrix::identity(2);
        let k1 = linops::pauli_z().scale(C64::new(0.25f64.sqrt(), 0.0));
        let embedded = linops::tensor_product(
            &linops::tensor_product(&linops::tensor_product(&eye, &k1).unwrap(), &eye).unwrap(),
            &eye,
        )
        .unwrap();
        let expected1 = StateVector::new(embedded.apply(psi.amplitudes()).unwrap()).unwrap();
        assert!(post1.amplitudes().iter().zip(expected1.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-12));
        // Branch 0 is proportional to the identity, so the state is unchanged.
        assert!(post0.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn diagonal_family_fixes_basis_states() {
        let lattice = qubit_lattice(3);
        let assignment =
            LocalKrausAssignment::uniform(lattice, KrausFamily::dephasing(0.4).unwrap()).unwrap();
        let psi = StateVector::basis(8, 5).unwrap();
        let (post, _, p) = advance_cell(&psi, Cell::new(0, 0), &assignment, 0.3).unwrap();
        assert_abs_diff_eq!(p, 0.6, epsilon = 1e-12);
        // Diagonal branches leave a computational basis state fixed up to phase.
        let overlap = post.inner(&psi).unwrap().norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evolve_between_empty_region_is_identity() {
        let assignment = identity_assignment(4);
        let s0 = CauchySurface::flat(4, 2);
        let psi = StateVector::ghz(4);
        let (out, record) = evolve_between(&psi, &s0, &s0, &assignment, 77).unwrap();
        assert!(record.steps.is_empty());
        assert_eq!(out, psi);
    }

    #[test]
    fn evolve_between_identity_families_keep_state() {
        let assignment = identity_assignment(4);
        let s0 = CauchySurface::flat(4, 0);
        let s1 = CauchySurface::flat(4, 1);
        let psi = StateVector::plus(4);
        let (out, record) = evolve_between(&psi, &s0, &s1, &assignment, 5).unwrap();
        assert_eq!(record.steps.len(), 4);
        assert!(record.steps.iter().all(|s| s.branch_index == 0));
        assert!(out.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn order_swap_path_independence_is_bit_exact() {
        // Two spacelike bumps: dephasing at site 0, bit flip at site 2.
        let lattice = qubit_lattice(4);
        let mut families = BTreeMap::new();
        families.insert(0usize, KrausFamily::dephasing(0.5).unwrap());
        families.insert(2usize, KrausFamily::bit_flip(0.3).unwrap());
        let assignment = LocalKrausAssignment::new(lattice.clone(), families).unwrap();

        let c0 = Cell::new(0, 0);
        let c2 = Cell::new(2, 0);
        assert!(lattice.spacelike(c0, c2));

        let mut draws = BTreeMap::new();
        draws.insert(c0, 0.62);
        draws.insert(c2, 0.17);

        for psi in [StateVector::ghz(4), StateVector::plus(4)] {
            let (ab, branches_ab) = evolve_cells_with_draws(&psi, &[c0, c2], &assignment, &draws).unwrap();
            let (ba, branches_ba) = evolve_cells_with_draws(&psi, &[c2, c0], &assignment, &draws).unwrap();
            assert_eq!(branches_ab, vec![branches_ba[1], branches_ba[0]]);
            for (x, y) in ab.amplitudes().iter().zip(ba.amplitudes()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn embedded_operators_at_distinct_sites_commute_bitwise() {
        let lattice = qubit_lattice(3);
        let a = linops::embed_sites(3, 2, &[(0, &linops::pauli_x())]).unwrap();
        let b = linops::embed_sites(3, 2, &[(2, &linops::pauli_y())]).unwrap();
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(linops::commutator_norm(&a, &b).unwrap(), 0.0);
        let _ = lattice;
    }

    #[test]
    fn spacelike_commutation_zero_for_admissible_assignments() {
        let lattice = qubit_lattice(4);
        let mut families = BTreeMap::new();
        families.insert(0usize, KrausFamily::amplitude_damping(0.3).unwrap());
        families.insert(2usize, KrausFamily::depolarizing(0.2).unwrap());
        let assignment = LocalKrausAssignment::new(lattice, families).unwrap();
        let r1 = CellRegion::from_cells([Cell::new(0, 0)]);
        let r2 = CellRegion::from_cells([Cell::new(2, 0)]);
        assert_eq!(check_spacelike_commutation(&assignment, &r1, &r2).unwrap(), 0.0);
    }

    #[test]
    fn spacelike_commutation_rejects_causal_pairs() {
        let assignment = identity_assignment(4);
        // Same site, one step apart: timelike.
        let r1 = CellRegion::from_cells([Cell::new(0, 0)]);
        let r2 = CellRegion::from_cells([Cell::new(0, 1)]);
        assert!(matches!(
            check_spacelike_commutation(&assignment, &r1, &r2),
            Err(Error::NotSpacelike { .. })
        ));
        // Lightlike neighbors are also causal under the closed cone.
        let r3 = CellRegion::from_cells([Cell::new(1, 1)]);
        assert!(matches!(
            check_spacelike_commutation(&assignment, &r1, &r3),
            Err(Error::NotSpacelike { .. })
        ));
    }

    #[test]
    fn cnot_violation_fixture_matches_commutator_oracle() {
        // CNOT(control 0, target 1) ⊗ 1 vs 1 ⊗ CNOT(control 1, target 2) on
        // 3 qubits. 8x8 oracle: entrywise commutator from permutation action.
        let dim = 8usize;
        let cnot01 = ComplexMatrix::from_fn(dim, dim, |r, c| {
            // |abc⟩ → |a, b⊕a, c⟩
            let (a, b, ch) = ((c >> 2) & 1, (c >> 1) & 1, c & 1);
            let target = (a << 2) | ((b ^ a) << 1) | ch;
            C64::new(if r == target { 1.0 } else { 0.0 }, 0.0)
        });
        let cnot12 = ComplexMatrix::from_fn(dim, dim, |r, c| {
            // |abc⟩ → |a, b, c⊕b⟩
            let (a, b, ch) = ((c >> 2) & 1, (c >> 1) & 1, c & 1);
            let target = (a << 2) | (b << 1) | (ch ^ b);
            C64::new(if r == target { 1.0 } else { 0.0 }, 0.0)
        });
        // Independent oracle: explicit entrywise AB − BA Frobenius norm.
        let mut frob_sq = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let mut ab = C64::new(0.0, 0.0);
                let mut ba = C64::new(0.0, 0.0);
                for k in 0..dim {
                    ab += cnot01.get(i, k) * cnot12.get(k, j);
                    ba += cnot12.get(i, k) * cnot01.get(k, j);
                }
                frob_sq += (ab - ba).norm_sqr();
            }
        }
        let oracle = frob_sq.sqrt();
        assert_abs_diff_eq!(oracle, 8.0f64.sqrt(), epsilon = 1e-13);

        let measured = max_cross_commutator(
            std::slice::from_ref(&cnot01),
            std::slice::from_ref(&cnot12),
        )
        .unwrap();
        assert_abs_diff_eq!(measured, oracle, epsilon = 1e-13);
        assert!(measured > 0.1);
    }

    #[test]
    fn no_signaling_identity_and_product_cases() {
        let assignment = identity_assignment(4);
        let region = CellRegion::from_cells([Cell::new(0, 0)]);
        let obs = SiteObservable::pauli(2, 'Z').unwrap();
        let d = check_no_signaling(&assignment, &region, &obs, &StateVector::plus(4)).unwrap();
        assert_eq!(d, 0.0);

        let lattice = qubit_lattice(4);
        let mut families = BTreeMap::new();
        families.insert(0usize, KrausFamily::dephasing(0.25).unwrap());
        let assignment = LocalKrausAssignment::new(lattice, families).unwrap();
        let d = check_no_signaling(&assignment, &region, &obs, &StateVector::plus(4)).unwrap();
        assert!(d < 1e-14, "deviation {d}");
    }

    #[test]
    fn no_signaling_with_entangled_input() {
        let lattice = qubit_lattice(4);
        let mut families = BTreeMap::new();
        families.insert(0usize, KrausFamily::dephasing(0.25).unwrap());
        let assignment = LocalKrausAssignment::new(lattice, families).unwrap();
        let region = CellRegion::from_cells([Cell::new(0, 0)]);
        for axis in ['X', 'Y', 'Z'] {
            let obs = SiteObservable::pauli(2, axis).unwrap();
            let d = check_no_signaling(&assignment, &region, &obs, &StateVector::ghz(4)).unwrap();
            assert!(d < 1e-12, "deviation {d} for axis {axis}");
        }
    }

    #[test]
    fn no_signaling_rejects_observable_in_shadow() {
        let assignment = identity_assignment(4);
        let region = CellRegion::from_cells([Cell::new(0, 0), Cell::new(0, 1)]);
        // Site 1 is within reach of cell (0,0) at the region's final time.
        let obs = SiteObservable::pauli(1, 'Z').unwrap();
        assert!(matches!(
            check_no_signaling(&assignment, &region, &obs, &StateVector::plus(4)),
            Err(Error::ObservableInShadow { site: 1 })
        ));
    }

    #[test]
    fn scenario_json_round_trip_and_build() {
        let text = r#"{
            "n_sites": 4,
            "site_dim": 2,
            "surfaces": [[0,0,0,0],[1,1,0,0]],
            "families": {"0": "dephasing:0.25", "1": "identity"},
            "observables": [{"site": 3, "pauli": "Z"}],
            "initial_state": "ghz"
        }"#;
        let scenario = Scenario::from_json(text).unwrap();
        let built = scenario.build().unwrap();
        assert_eq!(built.lattice.n_sites(), 4);
        assert_eq!(built.initial_state.dim(), 16);
        let region = surface_diff(&built.sigma0, &built.sigma1).unwrap();
        assert_eq!(region.len(), 2);
        assert_eq!(built.observables.len(), 1);

        // Unknown keys are rejected.
        assert!(Scenario::from_json(r#"{"n_sites":4,"site_dim":2,"surfaces":[[0],[0]],"families":{},"bogus":1}"#).is_err());
    }

    #[test]
    fn ring_distance_and_spacelike_predicate() {
        let lattice = qubit_lattice(6);
        assert_eq!(lattice.ring_distance(0, 5), 1);
        assert_eq!(lattice.ring_distance(1, 4), 3);
        assert!(lattice.spacelike(Cell::new(0, 0), Cell::new(3, 2)));
        assert!(!lattice.spacelike(Cell::new(0, 0), Cell::new(3, 3)));
    }
}
