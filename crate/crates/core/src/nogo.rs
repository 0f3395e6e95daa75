//! Finite-dimensional certification of the vacuum no-go argument.
//!
//! The setup is a bipartite space C^{d1}⊗C^{d2}: the local algebra is the
//! full matrix algebra of the first factor (standing in for the operators of
//! a region), its commutant is the second factor (the spacelike complement),
//! and collapse branches live in the commutant. With a vector Ω cyclic for
//! the algebra, the chain is exact: a pure vacuum ensemble forces all
//! branches onto one ray of Ω, commutation plus cyclicity promote the
//! ray-proportionality to operator identity, and the evolution is
//! deterministic on every state. The sweep machinery probes this trichotomy
//! over randomized families, and the energy probe measures vacuum heating
//! for a lattice Hamiltonian whose ground energy is shifted to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, ComplexMatrix, DensityOperator, StateVector, C64};
use crate::semigroup::{KrausBranch, KrausFamily};
use crate::unravel::trajectory_seed;

/// Unital operator algebra generated by a set of operators, with a computed
/// Hilbert-Schmidt-orthonormal spanning basis.
#[derive(Debug, Clone)]
pub struct LocalAlgebra {
    ambient_dim: usize,
    generators: Vec<ComplexMatrix>,
    basis: Vec<ComplexMatrix>,
}

fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
}

impl LocalAlgebra {
    /// Generate the unital algebra: close the span of {1, generators} under
    /// products, orthonormalizing in the Hilbert-Schmidt inner product.
    pub fn new(ambient_dim: usize, generators: Vec<ComplexMatrix>) -> Result<Self> {
        for g in &generators {
            if g.rows() != ambient_dim || g.cols() != ambient_dim {
                return Err(Error::DimensionMismatch { left: g.rows(), right: ambient_dim });
            }
        }
        let mut basis: Vec<ComplexMatrix> = Vec::new();
        let mut insert = |m: &ComplexMatrix, basis: &mut Vec<ComplexMatrix>| -> Result<bool> {
            let mut residual = m.clone();
            for b in basis.iter() {
                let coeff = hs_inner(b, &residual);
                residual = residual.sub(&b.scale(coeff))?;
            }
            let norm = residual.frobenius_norm();
            if norm > 1e-10 {
                basis.push(residual.scale(C64::new(1.0 / norm, 0.0)));
                Ok(true)
            } else {
                Ok(false)
            }
        };

        insert(&ComplexMatrix::identity(ambient_dim), &mut basis)?;
        for g in &generators {
            insert(g, &mut basis)?;
        }
        // Multiply pairs until the span stops growing (capped at dim²).
        loop {
            let mut grew = false;
            let snapshot = basis.clone();
            'outer: for a in &snapshot {
                for b in &snapshot {
                    let product = a.mul(b)?;
                    if insert(&product, &mut basis)? {
                        grew = true;
                        if basis.len() == ambient_dim * ambient_dim {
                            break 'outer;
                        }
                    }
                }
            }
            if !grew || basis.len() == ambient_dim * ambient_dim {
                break;
            }
        }
        Ok(Self { ambient_dim, generators, basis })
    }

    /// Full matrix algebra of the first tensor factor: M_{d1} ⊗ 1_{d2}.
    pub fn first_factor_full(d1: usize, d2: usize) -> Result<Self> {
        let mut generators = Vec::with_capacity(d1 * d1);
        let eye2 = ComplexMatrix::identity(d2);
        for i in 0..d1 {
            for j in 0..d1 {
                let mut data: Vec<C64> = vec![C64::new(0.0, 0.0); d1 * d1];
                data[i * d1 + j] = C64::new(1.0, 0.0);
                let unit = ComplexMatrix::new(d1, d1, data)?;
                generators.push(linops::tensor_product(&unit, &eye2)?);
            }
        }
        Self::new(d1 * d2, generators)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn generators(&self) -> &[ComplexMatrix] {
        &self.generators
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    /// Largest commutator norm between an operator and the generators.
    pub fn commutation_residual(&self, op: &ComplexMatrix) -> Result<f64> {
        let mut max: f64 = 0.0;
        for g in &self.generators {
            max = max.max(linops::commutator_norm(op, g)?);
        }
        Ok(max)
    }
}

/// Rank of span{B·Ω : B in the algebra basis}; cyclic iff the rank fills
/// the ambient space. Singular values of the image family are counted above
/// 1e-10.
pub fn cyclic_check(omega: &StateVector, algebra: &LocalAlgebra) -> Result<(bool, usize)> {
    if omega.dim() != algebra.ambient_dim() {
        return Err(Error::DimensionMismatch { left: omega.dim(), right: algebra.ambient_dim() });
    }
    let images: Vec<Vec<C64>> = algebra
        .basis()
        .iter()
        .map(|b| b.apply(omega.amplitudes()))
        .collect::<Result<_>>()?;
    let image_matrix = ComplexMatrix::from_fn(omega.dim(), images.len(), |i, j| images[j][i]);
    let rank = image_matrix.singular_values().iter().filter(|&&s| s > 1e-10).count();
    Ok((rank == algebra.ambient_dim(), rank))
}

/// For an operator commuting with the algebra and annihilating a cyclic Ω,
/// the commutant structure forces A = 0; returns max_B ‖A·B·Ω‖ over the
/// algebra basis, which bounds the action of A on the cyclic span.
pub fn corollary_check(a: &ComplexMatrix, omega: &StateVector, algebra: &LocalAlgebra) -> Result<f64> {
    let commutation = algebra.commutation_residual(a)?;
    if commutation > 1e-10 {
        return Err(Error::NotCommuting { residual: commutation });
    }
    let (cyclic, rank) = cyclic_check(omega, algebra)?;
    if !cyclic {
        return Err(Error::NotCyclic { rank, dim: algebra.ambient_dim() });
    }
    let a_omega = a.apply(omega.amplitudes())?;
    let a_omega_norm = a_omega.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if a_omega_norm > 1e-12 {
        return Err(Error::InvalidInput {
            field: "a",
            reason: format!("operator does not annihilate the vacuum: ‖A·Ω‖ = {a_omega_norm:.3e}"),
        });
    }
    let mut max_residual: f64 = 0.0;
    for b in algebra.basis() {
        let image = a.mul(b)?.apply(omega.amplitudes())?;
        let norm = image.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        max_residual = max_residual.max(norm);
    }
    Ok(max_residual)
}

/// Outcome of a determinism certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Vacuum ensemble pure and all branches operator-proportional.
    Deterministic,
    /// Vacuum ensemble mixed.
    StochasticViolatesPurity,
    /// Some branch fails to commute with the local algebra.
    StochasticViolatesCommutation,
    /// Vacuum ensemble pure but branches not operator-proportional; only
    /// reachable when Ω is not cyclic for the algebra.
    PureNonProportional,
}

/// Purity threshold above which the vacuum ensemble counts as pure.
pub const PURITY_THRESHOLD: f64 = 1.0 - 1e-10;
/// Frobenius threshold under which branches count as operator-proportional.
pub const PROPORTIONALITY_THRESHOLD: f64 = 1e-8;
/// Commutation threshold for branches against the algebra generators.
pub const COMMUTATION_THRESHOLD: f64 = 1e-10;

/// Everything a determinism certification measured.
#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub vacuum_purity: f64,
    pub is_cyclic: bool,
    pub commutation_residual: f64,
    /// Pairwise operator residuals r[i][j] = ‖K_i − c_ij·K_j‖_F with c_ij
    /// matched on the vacuum images.
    pub proportionality_residuals: Vec<Vec<f64>>,
    /// Branch with the largest vacuum image, used as the reference.
    pub reference_branch: usize,
    pub verdict: Verdict,
}

impl CertificationReport {
    /// Residuals of every branch against the reference branch.
    pub fn reference_residuals(&self) -> Vec<f64> {
        self.proportionality_residuals
            .iter()
            .map(|row| row[self.reference_branch])
            .collect()
    }

    pub fn max_reference_residual(&self) -> f64 {
        self.reference_residuals().iter().copied().fold(0.0, f64::max)
    }
}

/// Certify the trichotomy for one family: commutation with the algebra,
/// purity of the vacuum ensemble, and operator-proportionality of the
/// branches. With purity ≥ 1 − 1e-10 the verdict is deterministic iff every
/// branch residual against the reference stays at or below 1e-8.
pub fn determinism_certify(
    f: &KrausFamily,
    omega: &StateVector,
    algebra: &LocalAlgebra,
) -> Result<CertificationReport> {
    if f.dim() != algebra.ambient_dim() || omega.dim() != algebra.ambient_dim() {
        return Err(Error::DimensionMismatch { left: f.dim(), right: algebra.ambient_dim() });
    }
    if !f.is_complete(&Default::default()) {
        return Err(Error::IncompleteFamily {
            residual: f.completeness_residual(),
            tolerance: crate::linops::Tolerances::default().completeness,
        });
    }
    let (is_cyclic, _) = cyclic_check(omega, algebra)?;

    let mut commutation_residual: f64 = 0.0;
    for b in f.branches() {
        commutation_residual = commutation_residual.max(algebra.commutation_residual(&b.op)?);
    }

    let ensemble = f.apply(&DensityOperator::from_pure(omega))?;
    let vacuum_purity = linops::purity(&ensemble);

    // Vacuum images of every branch.
    let images: Vec<Vec<C64>> = f
        .branches()
        .iter()
        .map(|b| b.op.apply(omega.amplitudes()))
        .collect::<Result<_>>()?;
    let norms_sq: Vec<f64> = images
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect();
    let reference_branch = norms_sq
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);

    let n = f.branch_count();
    let mut residuals = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if norms_sq[j] <= f64::EPSILON {
                residuals[i][j] = f.branches()[i].op.frobenius_norm();
                continue;
            }
            // c matched on the vacuum images: c_ij = ⟨K_jΩ|K_iΩ⟩ / ‖K_jΩ‖².
            let overlap: C64 = images[j].iter().zip(&images[i]).map(|(x, y)| x.conj() * y).sum();
            let c = overlap / C64::new(norms_sq[j], 0.0);
            residuals[i][j] = f.branches()[i]
                .op
                .sub(&f.branches()[j].op.scale(c))?
                .frobenius_norm();
        }
    }

    let max_ref = (0..n).map(|i| residuals[i][reference_branch]).fold(0.0, f64::max);
    let verdict = if commutation_residual > COMMUTATION_THRESHOLD {
        Verdict::StochasticViolatesCommutation
    } else if vacuum_purity < PURITY_THRESHOLD {
        Verdict::StochasticViolatesPurity
    } else if max_ref <= PROPORTIONALITY_THRESHOLD {
        Verdict::Deterministic
    } else {
        Verdict::PureNonProportional
    };

    Ok(CertificationReport {
        vacuum_purity,
        is_cyclic,
        commutation_residual,
        proportionality_residuals: residuals,
        reference_branch,
        verdict,
    })
}

/// Vacuum choice for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVacuum {
    /// Maximally entangled across the factors; cyclic for the first-factor
    /// algebra when d1 ≥ d2.
    MaxEntangled,
    /// Product vacuum |0⟩⊗|0⟩; not cyclic, used as the control that
    /// demonstrates cyclicity is essential.
    Product,
}

/// Sweep configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_instances: usize,
    pub factor_dims: (usize, usize),
    pub seed: u64,
    pub vacuum: SweepVacuum,
}

/// Per-instance sweep record; `residuals` are the reference-branch
/// proportionality residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance_seed: u64,
    pub purity: f64,
    pub commutation_residual: f64,
    pub residuals: Vec<f64>,
    pub verdict: Verdict,
}

impl InstanceReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Simultaneously pure-vacuum, algebra-commuting, and non-proportional:
    /// forbidden by the theorem whenever Ω is cyclic.
    pub fn is_counterexample(&self) -> bool {
        self.purity >= PURITY_THRESHOLD
            && self.commutation_residual <= COMMUTATION_THRESHOLD
            && self.max_residual() > PROPORTIONALITY_THRESHOLD
    }
}

/// Aggregated sweep outcome.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub n_instances: usize,
    pub n_pure: usize,
    pub n_deterministic: usize,
    pub counterexamples: usize,
    /// Largest proportionality residual among pure-vacuum instances.
    pub max_pure_residual: f64,
    pub instances: Vec<InstanceReport>,
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn random_ginibre(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| random_complex(rng))
}

/// Haar-ish random unitary from the polar factor of a Ginibre matrix.
fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> Result<ComplexMatrix> {
    let g = random_ginibre(dim, rng);
    let gram = g.adjoint().mul(&g)?;
    let inv_sqrt = gram.hermitian_map(|l| C64::new(1.0 / l.max(1e-300).sqrt(), 0.0))?;
    g.mul(&inv_sqrt)
}

/// Random second-factor operators {B_i} completed so Σ B_i†B_i = 1.
fn random_completed_ops(d2: usize, n_branches: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ComplexMatrix>> {
    let mut ops = Vec::with_capacity(n_branches);
    let mut sum = ComplexMatrix::zeros(d2, d2);
    for _ in 0..n_branches - 1 {
        let g = random_ginibre(d2, rng);
        let gram = g.adjoint().mul(&g)?;
        let max_eig = gram.hermitian_eigenvalues()?.last().copied().unwrap_or(1.0);
        let op = g.scale(C64::new((0.5 / (n_branches as f64 * max_eig)).sqrt(), 0.0));
        sum = sum.add(&op.adjoint().mul(&op)?)?;
        ops.push(op);
    }
    let remainder = ComplexMatrix::identity(d2).sub(&sum)?;
    ops.push(remainder.hermitian_map(|l| C64::new(l.max(0.0).sqrt(), 0.0))?);
    Ok(ops)
}

/// Proportional family: B_i = c_i·V for one random unitary V and scalars
/// with Σ|c_i|² = 1. Always pure on any vacuum, always deterministic.
fn proportional_ops(d2: usize, n_branches: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ComplexMatrix>> {
    let v = random_unitary(d2, rng)?;
    let mut magnitudes: Vec<f64> = (0..n_branches).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = magnitudes.iter().map(|m| m * m).sum();
    for m in &mut magnitudes {
        *m /= total.sqrt();
    }
    magnitudes
        .into_iter()
        .map(|m| {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            Ok(v.scale(C64::from_polar(m, phase)))
        })
        .collect()
}

/// Block construction for the non-cyclic control: every B_i maps |0⟩ to
/// c_i|0⟩ (so the product vacuum ensemble is pure) while acting with
/// independent random operators on the complement (so the branches are not
/// proportional).
fn vacuum_aligned_ops(d2: usize, n_branches: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ComplexMatrix>> {
    let mut scalars: Vec<f64> = (0..n_branches).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = scalars.iter().map(|c| c * c).sum();
    for c in &mut scalars {
        *c /= total.sqrt();
    }
    let tail = random_completed_ops(d2 - 1, n_branches, rng)?;
    Ok(scalars
        .iter()
        .zip(tail)
        .map(|(&c, block)| {
            ComplexMatrix::from_fn(d2, d2, |i, j| match (i, j) {
                (0, 0) => C64::new(c, 0.0),
                (0, _) | (_, 0) => C64::new(0.0, 0.0),
                _ => block.get(i - 1, j - 1),
            })
        })
        .collect())
}

fn embed_second_factor(d1: usize, ops: Vec<ComplexMatrix>) -> Result<Vec<KrausBranch>> {
    let eye = ComplexMatrix::identity(d1);
    ops.into_iter()
        .map(|b| {
            Ok(KrausBranch { weight: 1.0, op: linops::tensor_product(&eye, &b)? })
        })
        .collect()
}

/// Randomized sweep of the certification trichotomy over commutant-supported
/// families. Instances cycle through generic completed families,
/// ray-proportional families, and (for the product vacuum) vacuum-aligned
/// families; each instance is certified against the first-factor algebra.
pub fn random_nogo_sweep(cfg: &SweepConfig) -> Result<SweepSummary> {
    let (d1, d2) = cfg.factor_dims;
    if d1 < 2 || d2 < 2 {
        return Err(Error::InvalidInput {
            field: "factor_dims",
            reason: "both factors need dimension at least 2".into(),
        });
    }
    if cfg.n_instances == 0 {
        return Err(Error::InvalidInput { field: "n_instances", reason: "must be at least 1".into() });
    }
    let algebra = LocalAlgebra::first_factor_full(d1, d2)?;
    let omega = match cfg.vacuum {
        SweepVacuum::MaxEntangled => StateVector::max_entangled(d1, d2)?,
        SweepVacuum::Product => StateVector::basis(d1 * d2, 0)?,
    };

    let instances: Vec<InstanceReport> = (0..cfg.n_instances)
        .into_par_iter()
        .map(|i| -> Result<InstanceReport> {
            let instance_seed = trajectory_seed(cfg.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
            let n_branches = 2 + (rng.random::<u32>() % 2) as usize;
            let kind = i % 3;
            let ops = match (cfg.vacuum, kind) {
                (_, 0) => proportional_ops(d2, n_branches, &mut rng)?,
                (SweepVacuum::Product, 1) => vacuum_aligned_ops(d2, n_branches, &mut rng)?,
                _ => random_completed_ops(d2, n_branches, &mut rng)?,
            };
            let family = KrausFamily::new(d1 * d2, embed_second_factor(d1, ops)?, format!("sweep:{i}"))?;
            let report = determinism_certify(&family, &omega, &algebra)?;
            Ok(InstanceReport {
                instance_seed,
                purity: report.vacuum_purity,
                commutation_residual: report.commutation_residual,
                residuals: report.reference_residuals(),
                verdict: report.verdict,
            })
        })
        .collect::<Result<_>>()?;

    let n_pure = instances.iter().filter(|r| r.purity >= PURITY_THRESHOLD).count();
    let n_deterministic = instances.iter().filter(|r| r.verdict == Verdict::Deterministic).count();
    let counterexamples = instances.iter().filter(|r| r.is_counterexample()).count();
    let max_pure_residual = instances
        .iter()
        .filter(|r| r.purity >= PURITY_THRESHOLD)
        .map(|r| r.max_residual())
        .fold(0.0, f64::max);

    Ok(SweepSummary {
        n_instances: cfg.n_instances,
        n_pure,
        n_deterministic,
        counterexamples,
        max_pure_residual,
        instances,
    })
}

/// Hamiltonian with its ground energy shifted to zero and the ground state
/// as the vacuum. Construction requires a unique ground state.
#[derive(Debug, Clone)]
pub struct VacuumModel {
    hamiltonian: ComplexMatrix,
    vacuum: StateVector,
}

impl VacuumModel {
    pub fn from_hamiltonian(h: &ComplexMatrix) -> Result<Self> {
        let dev = h.hermiticity_deviation();
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev, tolerance: 1e-10 });
        }
        let (eigs, vectors) = h.hermitian_eigen()?;
        if eigs.len() < 2 {
            return Err(Error::InvalidInput { field: "hamiltonian", reason: "dimension too small".into() });
        }
        let gap = eigs[1] - eigs[0];
        if gap <= 1e-8 {
            return Err(Error::DegenerateGround { gap });
        }
        let ground = eigs[0];
        let dim = h.rows();
        let shifted = h.sub(&ComplexMatrix::identity(dim).scale(C64::new(ground, 0.0)))?;
        let vacuum = StateVector::new((0..dim).map(|i| vectors.get(i, 0)).collect())?;
        Ok(Self { hamiltonian: shifted, vacuum })
    }

    /// Transverse-field Ising chain on a periodic qubit ring:
    /// H = −J·Σ Z_i Z_{i+1} − g·Σ X_i. The field keeps the finite-size
    /// ground state unique for g > 0.
    pub fn transverse_field_ising(n_sites: usize, coupling_j: f64, field_g: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidInput { field: "n_sites", reason: "need at least 2 sites".into() });
        }
        let dim = 1usize << n_sites;
        let mut h = ComplexMatrix::zeros(dim, dim);
        let z = linops::pauli_z();
        let x = linops::pauli_x();
        for i in 0..n_sites {
            let zz = linops::embed_sites(n_sites, 2, &[(i, &z), ((i + 1) % n_sites, &z)])?;
            h = h.add(&zz.scale(C64::new(-coupling_j, 0.0)))?;
            let xi = linops::embed_sites(n_sites, 2, &[(i, &x)])?;
            h = h.add(&xi.scale(C64::new(-field_g, 0.0)))?;
        }
        Self::from_hamiltonian(&h)
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn vacuum(&self) -> &StateVector {
        &self.vacuum
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    /// Energy expectation Tr(Hρ); nonnegative since the spectrum floor is 0.
    pub fn energy(&self, rho: &DensityOperator) -> Result<f64> {
        rho.expectation(&self.hamiltonian)
    }

    /// Family of eigenspace projectors of H (eigenvalues grouped within
    /// 1e-8). It commutes with H and fixes the vacuum exactly.
    pub fn eigenprojector_family(&self) -> Result<KrausFamily> {
        let (eigs, vectors) = self.hamiltonian.hermitian_eigen()?;
        let dim = self.dim();
        let mut branches: Vec<KrausBranch> = Vec::new();
        let mut k = 0;
        while k < dim {
            let mut span_end = k + 1;
            while span_end < dim && eigs[span_end] - eigs[k] <= 1e-8 {
                span_end += 1;
            }
            let mut projector = ComplexMatrix::zeros(dim, dim);
            for col in k..span_end {
                let outer = ComplexMatrix::from_fn(dim, dim, |i, j| {
                    vectors.get(i, col) * vectors.get(j, col).conj()
                });
                projector = projector.add(&outer)?;
            }
            branches.push(KrausBranch { weight: 1.0, op: projector });
            k = span_end;
        }
        KrausFamily::new(dim, branches, "eigenprojectors")
    }
}

/// Mean energy gained per step over `n_steps` exact ensemble steps from the
/// vacuum: Tr(H·ρ̄_n)/n. Zero for families commuting with H; strictly
/// positive for families that pump the vacuum.
pub fn energy_production_rate(model: &VacuumModel, f: &KrausFamily, n_steps: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::InvalidInput { field: "n_steps", reason: "must be at least 1".into() });
    }
    if f.dim() != model.dim() {
        return Err(Error::DimensionMismatch { left: f.dim(), right: model.dim() });
    }
    let mut rho = DensityOperator::from_pure(model.vacuum());
    for _ in 0..n_steps {
        rho = f.apply(&rho)?;
    }
    Ok(model.energy(&rho)? / n_steps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bell() -> StateVector {
        StateVector::ghz(2)
    }

    fn first_qubit_algebra() -> LocalAlgebra {
        LocalAlgebra::first_factor_full(2, 2).unwrap()
    }

    #[test]
    fn algebra_closure_of_first_factor() {
        let algebra = first_qubit_algebra();
        // M₂ ⊗ 1 has dimension 4 as a linear space.
        assert_eq!(algebra.basis().len(), 4);
        // - and every basis element commutes with second-factor operators.
        let z1 = linops::embed_sites(2, 2, &[(1, &linops::pauli_z())]).unwrap();
        for b in algebra.basis() {
            assert!(linops::commutator_norm(b, &z1).unwrap() < 1e-12);
        }
    }

    #[test]
    fn product_vacuum_is_not_cyclic() {
        let omega = StateVector::basis(4, 0).unwrap();
        let (cyclic, rank) = cyclic_check(&omega, &first_qubit_algebra()).unwrap();
        assert!(!cyclic);
        assert_eq!(rank, 2);
    }

    #[test]
    fn bell_vacuum_is_cyclic_with_gram_oracle() {
        // Oracle: (E_ij⊗1)|Φ+⟩ = |i j⟩/√2, four orthogonal vectors of norm
        // 1/√2, so the Gram matrix is 1/2·1₄ and the rank is 4.
        let omega = bell();
        let algebra = first_qubit_algebra();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let mut unit = ComplexMatrix::zeros(2, 2);
            let mut data = vec![C64::new(0.0, 0.0); 4];
            data[i * 2 + j] = C64::new(1.0, 0.0);
            unit = ComplexMatrix::new(2, 2, data).unwrap();
            let embedded = linops::tensor_product(&unit, &ComplexMatrix::identity(2)).unwrap();
            let image = embedded.apply(omega.amplitudes()).unwrap();
            let expected_index = i * 2 + j;
            for (k, amp) in image.iter().enumerate() {
                let expected = if k == expected_index { std::f64::consts::FRAC_1_SQRT_2 } else { 0.0 };
                assert_abs_diff_eq!(amp.re, expected, epsilon = 1e-14);
                assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-14);
            }
        }
        let (cyclic, rank) = cyclic_check(&omega, &algebra).unwrap();
        assert!(cyclic);
        assert_eq!(rank, 4);
    }

    #[test]
    fn full_algebra_makes_any_state_cyclic() {
        let algebra = LocalAlgebra::first_factor_full(4, 1).unwrap();
        assert_eq!(algebra.ambient_dim(), 4);
        let psi = StateVector::new(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.4),
            C64::new(0.0, 0.5),
            C64::new(0.6, 0.0),
        ])
        .unwrap();
        let (cyclic, rank) = cyclic_check(&psi, &algebra).unwrap();
        assert!(cyclic);
        assert_eq!(rank, 4);
    }

    #[test]
    fn corollary_zero_operator_passes() {
        let a = ComplexMatrix::zeros(4, 4);
        let residual = corollary_check(&a, &bell(), &first_qubit_algebra()).unwrap();
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn corollary_forces_commutant_annihilators_to_vanish() {
        // Oracle: solve (1⊗B)|Φ+⟩ = 0. With full Schmidt rank the 4x4 linear
        // system has only B = 0, so any candidate built by projecting onto
        // the kernel must vanish.
        let omega = bell();
        let algebra = first_qubit_algebra();
        // (1⊗B)Ω amplitudes: entry (a,b) = B[b][a]/√2, so AΩ = 0 ⇔ B = 0.
        // Construct A from the least-squares kernel projection of a random B0.
        let b0 = ComplexMatrix::from_real(2, 2, &[0.3, -0.7, 0.2, 0.9]).unwrap();
        // Kernel of the map B ↦ (1⊗B)Ω is trivial; projection of b0 is 0.
        let a = linops::tensor_product(&ComplexMatrix::identity(2), &b0.scale(C64::new(0.0, 0.0))).unwrap();
        let residual = corollary_check(&a, &omega, &algebra).unwrap();
        assert!(residual <= 1e-12);
    }

    #[test]
    fn corollary_rejects_non_commuting_and_non_cyclic() {
        let algebra = first_qubit_algebra();
        let x0 = linops::embed_sites(2, 2, &[(0, &linops::pauli_x())]).unwrap();
        assert!(matches!(
            corollary_check(&x0, &bell(), &algebra),
            Err(Error::NotCommuting { .. })
        ));

        // Ω = |00⟩ admits the nonzero annihilator 1⊗|1⟩⟨1| in the commutant;
        // the check rejects it on the cyclicity precondition.
        let annihilator = linops::embed_sites(2, 2, &[(1, &ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap())]).unwrap();
        let omega00 = StateVector::basis(4, 0).unwrap();
        let image = annihilator.apply(omega00.amplitudes()).unwrap();
        assert!(image.iter().all(|z| z.norm() < 1e-15));
        assert!(matches!(
            corollary_check(&annihilator, &omega00, &algebra),
            Err(Error::NotCyclic { rank: 2, dim: 4 })
        ));
    }

    #[test]
    fn certify_phase_related_branches_deterministic() {
        let u = linops::embed_sites(2, 2, &[(1, &linops::pauli_x())]).unwrap();
        let f = KrausFamily::unitary_mixture(
            vec![(0.5, u.clone()), (0.5, u.scale(C64::from_polar(1.0, 0.9)))],
            "phase-pair",
        )
        .unwrap();
        let report = determinism_certify(&f, &bell(), &first_qubit_algebra()).unwrap();
        assert!(report.is_cyclic);
        assert!(report.vacuum_purity >= 1.0 - 1e-12);
        assert_eq!(report.verdict, Verdict::Deterministic);
        assert!(report.max_reference_residual() <= 1e-12);
    }

    #[test]
    fn certify_identity_z_mixture_violates_purity() {
        // 4x4 ensemble oracle: ½P_{Φ+} + ½P_{Φ−} has purity ½.
        let eye = ComplexMatrix::identity(4);
        let z1 = linops::embed_sites(2, 2, &[(1, &linops::pauli_z())]).unwrap();
        let f = KrausFamily::unitary_mixture(vec![(0.5, eye), (0.5, z1.clone())], "1z").unwrap();

        let phi_plus = bell().projector();
        let phi_minus = StateVector::new(z1.apply(bell().amplitudes()).unwrap()).unwrap().projector();
        let oracle = phi_plus
            .matrix()
            .add(phi_minus.matrix())
            .unwrap()
            .scale(C64::new(0.5, 0.0));
        let oracle_purity: f64 = oracle.data().iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(oracle_purity, 0.5, epsilon = 1e-13);

        let report = determinism_certify(&f, &bell(), &first_qubit_algebra()).unwrap();
        assert_abs_diff_eq!(report.vacuum_purity, 0.5, epsilon = 1e-12);
        assert_eq!(report.verdict, Verdict::StochasticViolatesPurity);
    }

    #[test]
    fn certify_first_factor_dephasing_violates_commutation() {
        let z0 = linops::embed_sites(2, 2, &[(0, &linops::pauli_z())]).unwrap();
        let eye = ComplexMatrix::identity(4);
        let f = KrausFamily::unitary_mixture(vec![(0.5, eye), (0.5, z0)], "z-first").unwrap();
        let report = determinism_certify(&f, &bell(), &first_qubit_algebra()).unwrap();
        assert_eq!(report.verdict, Verdict::StochasticViolatesCommutation);
        assert!(report.commutation_residual > 0.1);
    }

    #[test]
    fn single_branch_sweep_instances_are_deterministic() {
        let cfg = SweepConfig {
            n_instances: 9,
            factor_dims: (2, 2),
            seed: 5,
            vacuum: SweepVacuum::MaxEntangled,
        };
        let summary = random_nogo_sweep(&cfg).unwrap();
        assert_eq!(summary.counterexamples, 0);
        // The proportional instances (every third) are pure and deterministic.
        assert!(summary.n_pure >= 3);
        assert!(summary.n_deterministic >= 3);
        for r in summary.instances.iter().step_by(3) {
            assert_eq!(r.verdict, Verdict::Deterministic);
        }
    }

    #[test]
    fn cyclic_sweep_has_no_counterexamples() {
        for dims in [(2, 2), (4, 2)] {
            let cfg = SweepConfig {
                n_instances: 300,
                factor_dims: dims,
                seed: 11,
                vacuum: SweepVacuum::MaxEntangled,
            };
            let summary = random_nogo_sweep(&cfg).unwrap();
            assert_eq!(summary.counterexamples, 0, "dims {dims:?}");
            assert!(summary.max_pure_residual <= 1e-8, "dims {dims:?}: {}", summary.max_pure_residual);
            // Contrapositive: visibly non-proportional implies visibly mixed.
            for r in &summary.instances {
                if r.max_residual() > 1e-6 && r.commutation_residual <= COMMUTATION_THRESHOLD {
                    assert!(r.purity < 1.0 - 1e-6, "purity {} residual {}", r.purity, r.max_residual());
                }
            }
        }
    }

    #[test]
    fn non_cyclic_control_produces_counterexamples() {
        let cfg = SweepConfig {
            n_instances: 30,
            factor_dims: (2, 2),
            seed: 13,
            vacuum: SweepVacuum::Product,
        };
        let summary = random_nogo_sweep(&cfg).unwrap();
        assert!(summary.counterexamples >= 1, "control failed to discriminate");
        let witness = summary.instances.iter().find(|r| r.is_counterexample()).unwrap();
        assert_eq!(witness.verdict, Verdict::PureNonProportional);
    }

    #[test]
    fn ising_vacuum_model_invariants() {
        let model = VacuumModel::transverse_field_ising(4, 1.0, 1.25).unwrap();
        assert_eq!(model.dim(), 16);
        let eigs = model.hamiltonian().hermitian_eigenvalues().unwrap();
        assert!(eigs[0].abs() <= 1e-10, "floor {}", eigs[0]);
        assert!(eigs.iter().all(|&l| l >= -1e-10));
        // H·Ω = 0 after the shift.
        let image = model.hamiltonian().apply(model.vacuum().amplitudes()).unwrap();
        let norm: f64 = image.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm <= 1e-10, "residual {norm}");
    }

    #[test]
    fn degenerate_hamiltonian_rejected() {
        // Zero field: the Ising ground space is the two ferromagnetic states.
        assert!(matches!(
            VacuumModel::transverse_field_ising(3, 1.0, 0.0),
            Err(Error::DegenerateGround { .. })
        ));
    }

    #[test]
    fn energy_rate_identity_is_zero() {
        let model = VacuumModel::transverse_field_ising(3, 1.0, 1.25).unwrap();
        let f = KrausFamily::identity(8);
        // Limited only by the numerically shifted ground energy.
        assert!(energy_production_rate(&model, &f, 5).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn energy_rate_vanishes_for_h_commuting_family() {
        let model = VacuumModel::transverse_field_ising(3, 1.0, 1.25).unwrap();
        let f = model.eigenprojector_family().unwrap();
        assert!(f.completeness_residual() < 1e-10);
        for b in f.branches() {
            assert!(linops::commutator_norm(&b.op, model.hamiltonian()).unwrap() < 1e-9);
        }
        let rate = energy_production_rate(&model, &f, 4).unwrap();
        assert!(rate.abs() <= 1e-12, "rate {rate}");
    }

    #[test]
    fn site_dephasing_heats_the_ising_vacuum() {
        let model = VacuumModel::transverse_field_ising(4, 1.0, 1.25).unwrap();
        let z0 = linops::embed_sites(4, 2, &[(0, &linops::pauli_z())]).unwrap();
        let p = 0.1;
        let f = KrausFamily::unitary_mixture(
            vec![(1.0 - p, ComplexMatrix::identity(16)), (p, z0)],
            "site-dephasing",
        )
        .unwrap();
        let rate = energy_production_rate(&model, &f, 10).unwrap();
        assert!(rate > 1e-6, "rate {rate}");
        assert!(rate >= -1e-10);
    }

    #[test]
    fn energy_rate_is_never_below_the_floor() {
        let model = VacuumModel::transverse_field_ising(3, 1.0, 1.25).unwrap();
        for p in [0.05, 0.3, 0.7] {
            let z1 = linops::embed_sites(3, 2, &[(1, &linops::pauli_x())]).unwrap();
            let f = KrausFamily::unitary_mixture(
                vec![(1.0 - p, ComplexMatrix::identity(8)), (p, z1)],
                "probe",
            )
            .unwrap();
            for n in [1, 3, 9] {
                assert!(energy_production_rate(&model, &f, n).unwrap() >= -1e-10);
            }
        }
    }
}
