//! The Lorentz-invariant measure on the mass shell, its boost invariance,
//! and its divergence.
//!
//! For mass m the invariant measure assigns ω(Δ) = ∫_Δ dk/√(k² + m²) to a
//! momentum region Δ (with the 3D radial analog carrying the 4πk² shell
//! factor). Every measure is evaluated along two independent routes: an
//! adaptive Gauss–Legendre 7/15 quadrature and the closed-form
//! antiderivative in asinh.
//!
//! Natural units: ℏ = c = 1.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of the momentum space. 3D regions are restricted to
/// rotation-invariant radial intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialDim {
    One,
    Three,
}

impl TryFrom<u8> for SpatialDim {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(SpatialDim::One),
            3 => Ok(SpatialDim::Three),
            other => Err(Error::InvalidInput {
                field: "spatial_dim",
                reason: format!("must be 1 or 3, got {other}"),
            }),
        }
    }
}

/// Momentum interval on the mass shell for a fixed mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassShellSlice {
    pub mass: f64,
    pub spatial_dim: SpatialDim,
    pub k_lo: f64,
    pub k_hi: f64,
}

impl MassShellSlice {
    pub fn new(mass: f64, spatial_dim: SpatialDim, k_lo: f64, k_hi: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput { field: "mass", reason: format!("{mass} not a positive real") });
        }
        if !k_lo.is_finite() || !k_hi.is_finite() || k_lo > k_hi {
            return Err(Error::InvalidInput {
                field: "momentum_region",
                reason: format!("invalid interval [{k_lo}, {k_hi}]"),
            });
        }
        if spatial_dim == SpatialDim::Three && k_lo < 0.0 {
            return Err(Error::InvalidInput {
                field: "momentum_region",
                reason: "3D radial interval requires k_lo >= 0".into(),
            });
        }
        Ok(Self { mass, spatial_dim, k_lo, k_hi })
    }
}

/// Lorentz boost parametrized by rapidity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParameter {
    pub rapidity: f64,
}

impl BoostParameter {
    pub fn new(rapidity: f64) -> Result<Self> {
        if !rapidity.is_finite() {
            return Err(Error::InvalidInput { field: "rapidity", reason: "must be finite".into() });
        }
        Ok(Self { rapidity })
    }
}

/// On-shell momentum after a boost: k ↦ k·cosh η + √(k² + m²)·sinh η.
pub fn boost_momentum(k: f64, mass: f64, rapidity: f64) -> f64 {
    k * rapidity.cosh() + (k * k + mass * mass).sqrt() * rapidity.sinh()
}

/// Boost a 1D slice by mapping its endpoints (the map is monotone in k).
/// 3D radial slices are rejected: a boost breaks their rotation invariance.
pub fn boost_slice(slice: &MassShellSlice, boost: BoostParameter) -> Result<MassShellSlice> {
    match slice.spatial_dim {
        SpatialDim::Three => Err(Error::InvalidInput {
            field: "spatial_dim",
            reason: "boosts of 3D radial regions are unsupported".into(),
        }),
        SpatialDim::One => MassShellSlice::new(
            slice.mass,
            SpatialDim::One,
            boost_momentum(slice.k_lo, slice.mass, boost.rapidity),
            boost_momentum(slice.k_hi, slice.mass, boost.rapidity),
        ),
    }
}

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            GaussLegendre::new(NonZeroUsize::new(7).unwrap()),
            GaussLegendre::new(NonZeroUsize::new(15).unwrap()),
        )
    })
}

fn adaptive_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (coarse_rule, fine_rule) = rules();
    let fine = fine_rule.integrate(a, b, f);
    let coarse = coarse_rule.integrate(a, b, f);
    if (fine - coarse).abs() <= tol || depth >= 48 {
        return fine;
    }
    let mid = 0.5 * (a + b);
    adaptive_rec(f, a, mid, 0.5 * tol, depth + 1) + adaptive_rec(f, mid, b, 0.5 * tol, depth + 1)
}

/// Adaptive quadrature with a relative error target of about 1e-12.
fn adaptive_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (_, fine_rule) = rules();
    let first = fine_rule.integrate(a, b, &f);
    let tol = 1e-12 * first.abs().max(1e-3);
    adaptive_rec(&f, a, b, tol, 0)
}

/// Invariant measure ω(Δ) by adaptive quadrature of the on-shell density.
pub fn invariant_measure(slice: &MassShellSlice) -> f64 {
    let m2 = slice.mass * slice.mass;
    match slice.spatial_dim {
        SpatialDim::One => adaptive_quadrature(|k| 1.0 / (k * k + m2).sqrt(), slice.k_lo, slice.k_hi),
        SpatialDim::Three => adaptive_quadrature(
            |k| 4.0 * std::f64::consts::PI * k * k / (k * k + m2).sqrt(),
            slice.k_lo,
            slice.k_hi,
        ),
    }
}

/// Closed-form route: the antiderivative of the on-shell density.
///
/// 1D: asinh(k/m). 3D radial: 4π[(k/2)√(k² + m²) − (m²/2)·asinh(k/m)].
pub fn closed_form_measure(slice: &MassShellSlice) -> f64 {
    let m = slice.mass;
    match slice.spatial_dim {
        SpatialDim::One => (slice.k_hi / m).asinh() - (slice.k_lo / m).asinh(),
        SpatialDim::Three => {
            let anti = |k: f64| {
                4.0 * std::f64::consts::PI
                    * (0.5 * k * (k * k + m * m).sqrt() - 0.5 * m * m * (k / m).asinh())
            };
            anti(slice.k_hi) - anti(slice.k_lo)
        }
    }
}

/// Non-invariant control: the naive interval length ∫dk without the 1/E
/// weight. 1D only; used to confirm the boost-invariance test discriminates.
pub fn naive_measure(slice: &MassShellSlice) -> Result<f64> {
    match slice.spatial_dim {
        SpatialDim::One => Ok(slice.k_hi - slice.k_lo),
        SpatialDim::Three => Err(Error::InvalidInput {
            field: "spatial_dim",
            reason: "naive control measure is 1D only".into(),
        }),
    }
}

/// One point of a divergence scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub cutoff: f64,
    pub measure: f64,
}

/// Measure of the symmetric region up to each cutoff: [−K, K] in 1D, the
/// radial ball [0, K] in 3D. Cutoffs must be strictly increasing and
/// positive; the resulting sequence is monotone increasing and unbounded.
pub fn divergence_scan(mass: f64, spatial_dim: SpatialDim, cutoffs: &[f64]) -> Result<Vec<ScanPoint>> {
    if cutoffs.is_empty() {
        return Err(Error::InvalidInput { field: "cutoffs", reason: "empty".into() });
    }
    for pair in cutoffs.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidInput {
                field: "cutoffs",
                reason: format!("not strictly increasing at {} -> {}", pair[0], pair[1]),
            });
        }
    }
    if cutoffs[0] <= 0.0 {
        return Err(Error::InvalidInput { field: "cutoffs", reason: "must be positive".into() });
    }
    cutoffs
        .iter()
        .map(|&k| {
            let slice = match spatial_dim {
                SpatialDim::One => MassShellSlice::new(mass, spatial_dim, -k, k)?,
                SpatialDim::Three => MassShellSlice::new(mass, spatial_dim, 0.0, k)?,
            };
            Ok(ScanPoint { cutoff: k, measure: invariant_measure(&slice) })
        })
        .collect()
}
