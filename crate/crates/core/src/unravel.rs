//! Stochastic trajectory sampling and Monte Carlo ensemble estimation.
//!
//! A trajectory realizes the branch process: at each step one evolution
//! operator K_i is selected with probability w_i‖K_i ψ‖² and the state is
//! replaced by K_i ψ / ‖K_i ψ‖. Averaging final-state projectors over many
//! trajectories estimates the exact ensemble density operator.
//!
//! # Reproducibility
//!
//! Trajectory `i` draws from a ChaCha8 stream seeded with
//! `master_seed ^ splitmix64(i)`. Streams are therefore independent of
//! execution order and thread count, and ensemble averages are reduced in a
//! fixed chunk order, so every result here is bit-stable under parallelism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{ComplexMatrix, DensityOperator, StateVector, C64};
use crate::semigroup::KrausFamily;

/// Default floor under which a branch probability is treated as null and
/// never selected.
pub const DEFAULT_ZERO_BRANCH_EPSILON: f64 = 1e-14;

/// Trajectories per reduction chunk; fixed so the summation order never
/// depends on the thread count.
const CHUNK: usize = 1024;

/// splitmix64 finalizer, used to derive per-trajectory seeds.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under a master seed.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ splitmix64(index)
}

/// Monte Carlo sampling configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub master_seed: u64,
    pub n_trajectories: usize,
    pub zero_branch_epsilon: f64,
}

impl SamplerConfig {
    pub fn new(master_seed: u64, n_trajectories: usize) -> Result<Self> {
        if n_trajectories == 0 {
            return Err(Error::InvalidInput {
                field: "n_trajectories",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self { master_seed, n_trajectories, zero_branch_epsilon: DEFAULT_ZERO_BRANCH_EPSILON })
    }
}

/// One realized branch transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub branch_index: usize,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Full record of one trajectory: the seed it was generated from and every
/// realized transition in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
}

impl TrajectoryRecord {
    /// State after the last step, if any step was taken.
    pub fn final_state(&self) -> Option<&StateVector> {
        self.steps.last().map(|s| &s.post_state)
    }

    pub fn branch_indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.branch_index).collect()
    }
}

/// Select one branch by inversion sampling on the cumulative probabilities
/// w_i‖K_i ψ‖². Returns (branch index, its probability, normalized post
/// state). A draw landing exactly on a bin boundary goes to the lower index.
pub fn sample_branch(
    f: &KrausFamily,
    psi: &StateVector,
    random_draw: f64,
) -> Result<(usize, f64, StateVector)> {
    sample_branch_with_epsilon(f, psi, random_draw, DEFAULT_ZERO_BRANCH_EPSILON)
}

pub fn sample_branch_with_epsilon(
    f: &KrausFamily,
    psi: &StateVector,
    random_draw: f64,
    zero_branch_epsilon: f64,
) -> Result<(usize, f64, StateVector)> {
    if psi.dim() != f.dim() {
        return Err(Error::DimensionMismatch { left: psi.dim(), right: f.dim() });
    }
    if !(0.0..1.0).contains(&random_draw) {
        return Err(Error::InvalidInput {
            field: "random_draw",
            reason: format!("{random_draw} outside [0,1)"),
        });
    }
    if !f.is_complete(&Default::default()) {
        return Err(Error::IncompleteFamily {
            residual: f.completeness_residual(),
            tolerance: crate::linops::Tolerances::default().completeness,
        });
    }

    let mut images: Vec<Vec<C64>> = Vec::with_capacity(f.branch_count());
    let mut probabilities: Vec<f64> = Vec::with_capacity(f.branch_count());
    for b in f.branches() {
        let image = b.op.apply(psi.amplitudes())?;
        let p = b.weight * image.iter().map(|z| z.norm_sqr()).sum::<f64>();
        images.push(image);
        probabilities.push(p);
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InternalInconsistency(format!(
            "branch probabilities sum to {total}, expected 1"
        )));
    }

    let mut selected = None;
    let mut cumulative = 0.0;
    let mut last_eligible = None;
    for (i, &p) in probabilities.iter().enumerate() {
        if p < zero_branch_epsilon {
            continue;
        }
        cumulative += p;
        last_eligible = Some(i);
        if random_draw <= cumulative {
            selected = Some(i);
            break;
        }
    }
    // Rounding can leave the final cumulative just below the draw; fall back
    // to the last eligible branch.
    let index = selected
        .or(last_eligible)
        .ok_or_else(|| Error::InternalInconsistency("no branch with nonzero probability".into()))?;

    let post = StateVector::new(images.swap_remove(index))?;
    Ok((index, probabilities[index], post))
}

/// Run one trajectory for `n_steps` steps. The result is a deterministic
/// function of (family, initial state, step count, seed).
pub fn run_trajectory(
    f: &KrausFamily,
    psi0: &StateVector,
    n_steps: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    run_trajectory_with_epsilon(f, psi0, n_steps, seed, DEFAULT_ZERO_BRANCH_EPSILON)
}

fn run_trajectory_with_epsilon(
    f: &KrausFamily,
    psi0: &StateVector,
    n_steps: usize,
    seed: u64,
    eps: f64,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = psi0.clone();
    let mut steps = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let draw: f64 = rng.random();
        let (branch_index, probability, post_state) = sample_branch_with_epsilon(f, &state, draw, eps)?;
        state = post_state.clone();
        steps.push(TrajectoryStep { branch_index, probability, post_state });
    }
    Ok(TrajectoryRecord { seed, steps })
}

/// Run all configured trajectories (in parallel, in index order).
pub fn run_trajectories(
    f: &KrausFamily,
    psi0: &StateVector,
    n_steps: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<TrajectoryRecord>> {
    (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let seed = trajectory_seed(cfg.master_seed, i as u64);
            run_trajectory_with_epsilon(f, psi0, n_steps, seed, cfg.zero_branch_epsilon)
        })
        .collect()
}

/// Monte Carlo estimate of the ensemble density operator: the average of
/// |ψ_final⟩⟨ψ_final| over `cfg.n_trajectories` independent trajectories.
pub fn estimate_ensemble(
    f: &KrausFamily,
    psi0: &StateVector,
    n_steps: usize,
    cfg: &SamplerConfig,
) -> Result<DensityOperator> {
    if cfg.n_trajectories == 0 {
        return Err(Error::InvalidInput {
            field: "n_trajectories",
            reason: "must be at least 1".into(),
        });
    }
    let dim = psi0.dim();
    let n_chunks = cfg.n_trajectories.div_ceil(CHUNK);

    let chunk_sums: Vec<Result<ComplexMatrix>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_trajectories);
            let mut sum = ComplexMatrix::zeros(dim, dim);
            for i in lo..hi {
                let seed = trajectory_seed(cfg.master_seed, i as u64);
                let record = run_trajectory_with_epsilon(f, psi0, n_steps, seed, cfg.zero_branch_epsilon)?;
                let final_state = record.final_state().unwrap_or(psi0);
                sum = sum.add(final_state.projector().matrix())?;
            }
            Ok(sum)
        })
        .collect();

    // Chunks are reduced in index order regardless of which thread produced
    // them.
    let mut total = ComplexMatrix::zeros(dim, dim);
    for s in chunk_sums {
        total = total.add(&s?)?;
    }
    let avg = total.scale(C64::new(1.0 / cfg.n_trajectories as f64, 0.0));
    DensityOperator::new(avg)
}

/// Trace distance between the Monte Carlo estimate and the exact iterated
/// channel ensemble.
pub fn ensemble_consistency(
    f: &KrausFamily,
    psi0: &StateVector,
    n_steps: usize,
    cfg: &SamplerConfig,
) -> Result<f64> {
    let estimated = estimate_ensemble(f, psi0, n_steps, cfg)?;
    let mut exact = DensityOperator::from_pure(psi0);
    for _ in 0..n_steps {
        exact = f.apply(&exact)?;
    }
    crate::linops::trace_distance(&estimated, &exact)
}

/// One line of the JSON-lines trajectory log:
/// `{seed, branch_indices:[...], final_state:{re:[...], im:[...]}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLogLine {
    pub seed: u64,
    pub branch_indices: Vec<usize>,
    pub final_state: WireState,
}

/// Real/imaginary split of a state vector for wire formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireState {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl WireState {
    pub fn from_state(psi: &StateVector) -> Self {
        Self {
            re: psi.amplitudes().iter().map(|z| z.re).collect(),
            im: psi.amplitudes().iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_state(&self) -> Result<StateVector> {
        if self.re.len() != self.im.len() {
            return Err(Error::InvalidInput {
                field: "final_state",
                reason: "re and im lengths differ".into(),
            });
        }
        StateVector::new(
            self.re
                .iter()
                .zip(&self.im)
                .map(|(&re, &im)| C64::new(re, im))
                .collect(),
        )
    }
}

impl TrajectoryLogLine {
    pub fn from_record(record: &TrajectoryRecord, psi0: &StateVector) -> Self {
        Self {
            seed: record.seed,
            branch_indices: record.branch_indices(),
            final_state: WireState::from_state(record.final_state().unwrap_or(psi0)),
        }
    }
}

/// Write one JSON record per trajectory.
pub fn write_trajectory_log<W: std::io::Write>(
    mut out: W,
    records: &[TrajectoryRecord],
    psi0: &StateVector,
) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(&TrajectoryLogLine::from_record(record, psi0))?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::InternalInconsistency(format!("trajectory log write failed: {e}")))?;
    }
    Ok(())
}
