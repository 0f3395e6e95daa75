//! Kraus families as completely positive trace-preserving maps.
//!
//! A family is a finite weighted set of evolution operators {(w_i, K_i)}
//! with the completeness contract Σ w_i K_i†K_i = 1. The weights realize a
//! discrete probability measure over branch indices; iterating a fixed
//! family generates a discrete-time semigroup.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{ComplexMatrix, DensityOperator, Tolerances, C64};

/// One weighted evolution operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausBranch {
    pub weight: f64,
    pub op: ComplexMatrix,
}

/// Weighted set of evolution operators with the completeness contract
/// Σ w_i K_i†K_i = 1.
///
/// Completeness is enforced at construction; [`KrausFamily::apply`] only
/// re-checks the cached residual.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausFamily {
    dim: usize,
    branches: Vec<KrausBranch>,
    label: String,
    completeness_residual: f64,
}

/// Diagnostic summary of a family's completeness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub completeness_residual: f64,
    pub branch_count: usize,
    /// True when every branch operator satisfies K†K ∝ 1, i.e. the family
    /// is a mixture of scaled unitaries.
    pub is_unitary_family: bool,
}

impl ChannelReport {
    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.completeness_residual <= tol.completeness
    }
}

fn completeness_residual(dim: usize, branches: &[KrausBranch]) -> Result<f64> {
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for b in branches {
        let term = b.op.adjoint().mul(&b.op)?.scale(C64::new(b.weight, 0.0));
        sum = sum.add(&term)?;
    }
    Ok(sum.sub(&ComplexMatrix::identity(dim))?.frobenius_norm())
}

fn validate_branches(dim: usize, branches: &[KrausBranch]) -> Result<()> {
    if branches.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for b in branches {
        if !(b.weight > 0.0) || !b.weight.is_finite() {
            return Err(Error::NonPositiveWeight { weight: b.weight });
        }
        if b.op.rows() != dim || b.op.cols() != dim {
            return Err(Error::DimensionMismatch { left: b.op.rows(), right: dim });
        }
    }
    Ok(())
}

impl KrausFamily {
    /// Construct and enforce completeness at the default tolerance.
    pub fn new(dim: usize, branches: Vec<KrausBranch>, label: impl Into<String>) -> Result<Self> {
        let tol = Tolerances::default();
        validate_branches(dim, &branches)?;
        let residual = completeness_residual(dim, &branches)?;
        if residual > tol.completeness {
            return Err(Error::IncompleteFamily { residual, tolerance: tol.completeness });
        }
        Ok(Self { dim, branches, label: label.into(), completeness_residual: residual })
    }

    /// Construct without enforcing completeness. The residual is still
    /// computed and cached; [`KrausFamily::apply`] will reject an incomplete
    /// family. Intended for diagnostics and deliberate violation fixtures.
    pub fn new_unchecked(dim: usize, branches: Vec<KrausBranch>, label: impl Into<String>) -> Result<Self> {
        validate_branches(dim, &branches)?;
        let residual = completeness_residual(dim, &branches)?;
        Ok(Self { dim, branches, label: label.into(), completeness_residual: residual })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branches(&self) -> &[KrausBranch] {
        &self.branches
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn completeness_residual(&self) -> f64 {
        self.completeness_residual
    }

    pub fn is_complete(&self, tol: &Tolerances) -> bool {
        self.completeness_residual <= tol.completeness
    }

    /// Identity channel.
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            branches: vec![KrausBranch { weight: 1.0, op: ComplexMatrix::identity(dim) }],
            label: "identity".into(),
            completeness_residual: 0.0,
        }
    }

    /// Single-qubit dephasing: {√(1−p)·1, √p·Z}.
    pub fn dephasing(p: f64) -> Result<Self> {
        qubit_two_branch(p, crate::linops::pauli_z(), format!("dephasing:{p}"))
    }

    /// Single-qubit bit flip: {√(1−p)·1, √p·X}.
    pub fn bit_flip(p: f64) -> Result<Self> {
        qubit_two_branch(p, crate::linops::pauli_x(), format!("bitflip:{p}"))
    }

    /// Single-qubit depolarizing: {√(1−p)·1, √(p/3)·X, √(p/3)·Y, √(p/3)·Z}.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput { field: "p", reason: format!("{p} outside [0,1]") });
        }
        let s = |m: ComplexMatrix, f: f64| m.scale(C64::new(f.sqrt(), 0.0));
        let branches = vec![
            KrausBranch { weight: 1.0, op: s(ComplexMatrix::identity(2), 1.0 - p) },
            KrausBranch { weight: 1.0, op: s(crate::linops::pauli_x(), p / 3.0) },
            KrausBranch { weight: 1.0, op: s(crate::linops::pauli_y(), p / 3.0) },
            KrausBranch { weight: 1.0, op: s(crate::linops::pauli_z(), p / 3.0) },
        ];
        KrausFamily::new(2, branches, format!("depolarizing:{p}"))
    }

    /// Single-qubit amplitude damping with decay probability gamma.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidInput { field: "gamma", reason: format!("{gamma} outside [0,1]") });
        }
        let k0 = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()])?;
        let k1 = ComplexMatrix::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0])?;
        KrausFamily::new(
            2,
            vec![KrausBranch { weight: 1.0, op: k0 }, KrausBranch { weight: 1.0, op: k1 }],
            format!("ampdamp:{gamma}"),
        )
    }

    /// Probability-weighted mixture of unitaries: branches (w_i, U_i) with
    /// Σ w_i = 1.
    pub fn unitary_mixture(entries: Vec<(f64, ComplexMatrix)>, label: impl Into<String>) -> Result<Self> {
        let dim = entries.first().map(|(_, u)| u.rows()).ok_or(Error::EmptyFamily)?;
        let branches = entries
            .into_iter()
            .map(|(w, op)| KrausBranch { weight: w, op })
            .collect();
        KrausFamily::new(dim, branches, label)
    }

    /// Resolve a short textual label into a bundled single-site family.
    ///
    /// Recognized: `identity`, `dephasing:<p>`, `bitflip:<p>`,
    /// `depolarizing:<p>`, `ampdamp:<gamma>`. Parametrized labels are
    /// qubit-only.
    pub fn from_label(label: &str, dim: usize) -> Result<Self> {
        if label == "identity" {
            return Ok(Self::identity(dim));
        }
        let (kind, arg) = label.split_once(':').ok_or_else(|| Error::InvalidInput {
            field: "family label",
            reason: format!("unrecognized label {label:?}"),
        })?;
        let value: f64 = arg.parse().map_err(|_| Error::InvalidInput {
            field: "family label",
            reason: format!("cannot parse parameter in {label:?}"),
        })?;
        if dim != 2 {
            return Err(Error::InvalidInput {
                field: "family label",
                reason: format!("{kind} is qubit-only, got site dimension {dim}"),
            });
        }
        match kind {
            "dephasing" => Self::dephasing(value),
            "bitflip" => Self::bit_flip(value),
            "depolarizing" => Self::depolarizing(value),
            "ampdamp" => Self::amplitude_damping(value),
            _ => Err(Error::InvalidInput {
                field: "family label",
                reason: format!("unrecognized label {label:?}"),
            }),
        }
    }

    /// Completeness diagnostic: residual ‖Σ w_i K_i†K_i − 1‖_F plus branch
    /// statistics.
    pub fn verify_completeness(&self) -> ChannelReport {
        let is_unitary_family = self.branches.iter().all(|b| {
            let ktk = match b.op.adjoint().mul(&b.op) {
                Ok(m) => m,
                Err(_) => return false,
            };
            let c = ktk.trace().re / self.dim as f64;
            ktk.sub(&ComplexMatrix::identity(self.dim).scale(C64::new(c, 0.0)))
                .map(|d| d.frobenius_norm() <= 1e-10)
                .unwrap_or(false)
        });
        ChannelReport {
            completeness_residual: self.completeness_residual,
            branch_count: self.branches.len(),
            is_unitary_family,
        }
    }

    /// Channel action ρ ↦ Σ w_i K_i ρ K_i†.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let tol = Tolerances::default();
        if self.completeness_residual > tol.completeness {
            return Err(Error::IncompleteFamily {
                residual: self.completeness_residual,
                tolerance: tol.completeness,
            });
        }
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: rho.dim(), right: self.dim });
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for b in &self.branches {
            let term = b
                .op
                .mul(rho.matrix())?
                .mul(&b.op.adjoint())?
                .scale(C64::new(b.weight, 0.0));
            out = out.add(&term)?;
        }
        // Trace drift is bounded by the completeness residual, so output
        // validation must not be stricter than the family can deliver.
        let out_tol = Tolerances {
            trace: tol.trace.max(2.0 * self.completeness_residual),
            ..tol
        };
        DensityOperator::with_tolerances(out, &out_tol)
    }

    /// Merge branches that are equal up to a complex phase and scale. The
    /// representative operator of each group keeps its direction; weights
    /// absorb the relative scales. The channel action is unchanged.
    pub fn consolidate(&self) -> Result<Self> {
        let mut merged: Vec<KrausBranch> = Vec::new();
        for b in &self.branches {
            let norm_b = b.op.frobenius_norm();
            if norm_b == 0.0 {
                continue;
            }
            let mut absorbed = false;
            for m in merged.iter_mut() {
                let norm_m = m.op.frobenius_norm();
                // Hilbert-Schmidt overlap; |overlap| = 1 on the unit sphere
                // means proportional up to phase.
                let overlap: C64 = m
                    .op
                    .data()
                    .iter()
                    .zip(b.op.data())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                if (overlap.norm() / (norm_m * norm_b) - 1.0).abs() <= 1e-12 {
                    m.weight += b.weight * (norm_b * norm_b) / (norm_m * norm_m);
                    absorbed = true;
                    break;
                }
            }
            if !absorbed {
                merged.push(b.clone());
            }
        }
        Self::new_unchecked(self.dim, merged, self.label.clone())
    }

    /// Serialize to the canonical JSON wire format
    /// `{dim, label, branches:[{weight, re:[[..]], im:[[..]]}]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FamilyWire::from(self))?)
    }

    /// Parse from the JSON wire format and enforce completeness.
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: FamilyWire = serde_json::from_str(text)?;
        wire.try_into()
    }
}

fn qubit_two_branch(p: f64, flip: ComplexMatrix, label: String) -> Result<KrausFamily> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput { field: "p", reason: format!("{p} outside [0,1]") });
    }
    let k0 = ComplexMatrix::identity(2).scale(C64::new((1.0 - p).sqrt(), 0.0));
    let k1 = flip.scale(C64::new(p.sqrt(), 0.0));
    KrausFamily::new(
        2,
        vec![KrausBranch { weight: 1.0, op: k0 }, KrausBranch { weight: 1.0, op: k1 }],
        label,
    )
}

/// Compose two families into the channel f∘g (g acts first).
///
/// Branches are all pairwise products (w_f·w_g, K_f·K_g), ordered g-major:
/// the branch index is i_g·f.branch_count() + i_f. Iterated composition
/// therefore indexes branches by the base-b digit string of the trajectory,
/// with the earliest step as the most significant digit, so the index set of
/// a shorter evolution is a prefix projection of the longer one.
pub fn compose(f: &KrausFamily, g: &KrausFamily) -> Result<KrausFamily> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { left: f.dim(), right: g.dim() });
    }
    let mut branches = Vec::with_capacity(f.branch_count() * g.branch_count());
    for bg in g.branches() {
        for bf in f.branches() {
            branches.push(KrausBranch {
                weight: bf.weight * bg.weight,
                op: bf.op.mul(&bg.op)?,
            });
        }
    }
    KrausFamily::new_unchecked(f.dim(), branches, format!("{}.{}", f.label(), g.label()))
}

/// Iterate a one-step family into an n-step family, consolidating
/// proportional branches after every composition so the branch count stays
/// bounded for commuting families.
pub fn iterate_consolidated(step: &KrausFamily, n_steps: usize) -> Result<KrausFamily> {
    let mut acc = KrausFamily::identity(step.dim());
    for _ in 0..n_steps {
        acc = compose(step, &acc)?.consolidate()?;
    }
    Ok(acc)
}

/// Exact mean (ensemble) density operator of the stochastic process induced
/// by the family: identical to the channel action.
pub fn ensemble_map(f: &KrausFamily, rho: &DensityOperator) -> Result<DensityOperator> {
    f.apply(rho)
}

/// First-order discrete-time family for the generator (H, {L_j}) at step dt:
/// jump branches √dt·L_j plus a deterministic branch completed exactly as
/// exp(−iH·dt)·√(1 − dt·ΣL†L), so completeness holds to rounding. To first
/// order in dt the deterministic branch is 1 − iH·dt − ½ΣL†L·dt.
pub fn trotter_family(
    hamiltonian: &ComplexMatrix,
    lindblad_ops: &[ComplexMatrix],
    dt: f64,
) -> Result<KrausFamily> {
    if !hamiltonian.is_square() {
        return Err(Error::NotSquare { rows: hamiltonian.rows(), cols: hamiltonian.cols() });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput { field: "dt", reason: format!("{dt} not a positive real") });
    }
    let dim = hamiltonian.rows();
    let herm_dev = hamiltonian.hermiticity_deviation();
    if herm_dev > 1e-10 {
        return Err(Error::NotHermitian { deviation: herm_dev, tolerance: 1e-10 });
    }
    let mut dissipator = ComplexMatrix::zeros(dim, dim);
    for l in lindblad_ops {
        if l.rows() != dim || l.cols() != dim {
            return Err(Error::DimensionMismatch { left: l.rows(), right: dim });
        }
        dissipator = dissipator.add(&l.adjoint().mul(l)?)?;
    }
    let remainder = ComplexMatrix::identity(dim).sub(&dissipator.scale(C64::new(dt, 0.0)))?;
    let min_eig = remainder
        .hermitian_eigenvalues()?
        .first()
        .copied()
        .unwrap_or(1.0);
    if min_eig < -1e-12 {
        return Err(Error::StepTooLarge { min_eigenvalue: min_eig });
    }
    let sqrt_remainder = remainder.hermitian_map(|l| C64::new(l.max(0.0).sqrt(), 0.0))?;
    let unitary = hamiltonian.hermitian_map(|l| C64::from_polar(1.0, -l * dt))?;
    let k0 = unitary.mul(&sqrt_remainder)?;

    let mut branches = vec![KrausBranch { weight: 1.0, op: k0 }];
    let sqrt_dt = C64::new(dt.sqrt(), 0.0);
    for l in lindblad_ops {
        branches.push(KrausBranch { weight: 1.0, op: l.scale(sqrt_dt) });
    }
    KrausFamily::new(dim, branches, format!("trotter:dt={dt}"))
}

#[derive(Serialize, Deserialize)]
struct BranchWire {
    weight: f64,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FamilyWire {
    dim: usize,
    label: String,
    branches: Vec<BranchWire>,
}

impl From<&KrausFamily> for FamilyWire {
    fn from(f: &KrausFamily) -> Self {
        let branches = f
            .branches
            .iter()
            .map(|b| {
                let n = f.dim;
                let mut re = vec![vec![0.0; n]; n];
                let mut im = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let z = b.op.get(i, j);
                        re[i][j] = z.re;
                        im[i][j] = z.im;
                    }
                }
                BranchWire { weight: b.weight, re, im }
            })
            .collect();
        FamilyWire { dim: f.dim, label: f.label.clone(), branches }
    }
}

impl TryFrom<FamilyWire> for KrausFamily {
    type Error = Error;

    fn try_from(wire: FamilyWire) -> Result<Self> {
        let mut branches = Vec::with_capacity(wire.branches.len());
        for b in wire.branches {
            if b.re.len() != wire.dim || b.im.len() != wire.dim {
                return Err(Error::InvalidInput {
                    field: "branches",
                    reason: format!("expected {} rows in re/im", wire.dim),
                });
            }
            let mut data = Vec::with_capacity(wire.dim * wire.dim);
            for (row_re, row_im) in b.re.iter().zip(&b.im) {
                if row_re.len() != wire.dim || row_im.len() != wire.dim {
                    return Err(Error::InvalidInput {
                        field: "branches",
                        reason: format!("expected {} columns in re/im", wire.dim),
                    });
                }
                for (&re, &im) in row_re.iter().zip(row_im) {
                    data.push(Complex::new(re, im));
                }
            }
            branches.push(KrausBranch { weight: b.weight, op: ComplexMatrix::new(wire.dim, wire.dim, data)? });
        }
        KrausFamily::new(wire.dim, branches, wire.label)
    }
}
