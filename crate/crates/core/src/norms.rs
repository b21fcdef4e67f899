//! Lebesgue, Sobolev, modulation, and spectrally-penalized (Z) norms, plus
//! mixed space-time norms over sampled trajectories and scaling-property
//! checks.
//!
//! All spatial norms are evaluated spectrally or by the grid sum with measure
//! `dx`; the Z-norm discretizes its line integral with `∫ dξ ↦ (2π/L) Σ_k`
//! and `|û(ξ)|² ↦ (L²/2π)|c(ξ)|²`, which combine to a clean factor of `L`.

use crate::spectral::{SpectralError, SpectralField, WindowFamily};

/// `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn japanese_bracket(x: f64) -> f64 {
    x.hypot(1.0)
}

/// Errors from norm evaluation.
#[derive(Debug, thiserror::Error)]
pub enum NormError {
    #[error("Lebesgue exponent must satisfy p ≥ 1, got {0}")]
    BadExponent(f64),
    #[error("summation index q must lie in [2, ∞), got {0}")]
    BadSummationIndex(f64),
    #[error("spectral penalization κ0 must be ≥ 1, got {0}")]
    BadKappa(f64),
    #[error("regularity index s must be finite, got {0}")]
    BadRegularity(f64),
    #[error("scaling factor must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("requested time {requested} exceeds the trajectory span {span}")]
    TimeOutOfRange { requested: f64, span: f64 },
    #[error("trajectory time grid is not uniform")]
    NonUniformTimes,
    #[error("trajectory fields live on different grids")]
    MixedGrids,
    #[error("time and field sample counts differ: {times} vs {fields}")]
    SampleCountMismatch { times: usize, fields: usize },
    #[error("the Z-norm requires the box length to be an integer multiple of 2π")]
    NonIntegerPeriodicBox,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Parameters shared by the modulation and Z norms: regularity `s`,
/// summation index `q ∈ [2, ∞)`, and the spectral penalization `κ0 ≥ 1`
/// (used only by the Z-norm).
#[derive(Clone, Copy, Debug)]
pub struct NormParams {
    s: f64,
    q: f64,
    kappa0: f64,
}

impl NormParams {
    pub fn new(s: f64, q: f64, kappa0: f64) -> Result<Self, NormError> {
        if !s.is_finite() {
            return Err(NormError::BadRegularity(s));
        }
        if !(q.is_finite() && q >= 2.0) {
            return Err(NormError::BadSummationIndex(q));
        }
        if !(kappa0.is_finite() && kappa0 >= 1.0) {
            return Err(NormError::BadKappa(kappa0));
        }
        Ok(Self { s, q, kappa0 })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }
}

/// `‖u‖_{L^p}` on the box: `(Σ_j |u_j|^p dx)^{1/p}`, max over samples for
/// `p = ∞`.
pub fn lebesgue_norm(field: &SpectralField, p: f64) -> Result<f64, NormError> {
    if p.is_nan() || p < 1.0 {
        return Err(NormError::BadExponent(p));
    }
    let moduli = field.physical().iter().map(|u| u.norm());
    if p.is_infinite() {
        return Ok(moduli.fold(0.0, f64::max));
    }
    let dx = field.grid().dx();
    if p == 2.0 {
        // The common case, kept in the numerically friendliest form.
        return Ok(field
            .physical()
            .iter()
            .map(|u| u.norm_sqr())
            .sum::<f64>()
            .mul_add(dx, 0.0)
            .sqrt());
    }
    Ok((moduli.map(|m| m.powf(p)).sum::<f64>() * dx).powf(1.0 / p))
}

/// `‖u‖_{L^p_t L^q_x}` over `[0, T]` from a uniformly sampled trajectory:
/// the time integral uses the trapezoid rule, with a linearly interpolated
/// partial cell when `T` falls between samples; `p = ∞` takes the max over
/// the samples in `[0, T]`.
pub fn spacetime_norm(
    times: &[f64],
    fields: &[SpectralField],
    p: f64,
    q: f64,
    t_end: f64,
) -> Result<f64, NormError> {
    if p.is_nan() || p < 1.0 {
        return Err(NormError::BadExponent(p));
    }
    if times.is_empty() || fields.is_empty() {
        return Err(NormError::EmptyTrajectory);
    }
    if times.len() != fields.len() {
        return Err(NormError::SampleCountMismatch {
            times: times.len(),
            fields: fields.len(),
        });
    }
    let grid = fields[0].grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(NormError::MixedGrids);
    }
    let span = times[times.len() - 1] - times[0];
    let slack = 1e-9 * span.abs().max(1.0);
    if t_end < -slack || times[0] > slack || t_end > span + slack {
        return Err(NormError::TimeOutOfRange {
            requested: t_end,
            span,
        });
    }
    if times.len() > 1 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300))
        {
            return Err(NormError::NonUniformTimes);
        }
    }

    let values: Vec<f64> = fields
        .iter()
        .map(|f| lebesgue_norm(f, q))
        .collect::<Result<_, _>>()?;

    if p.is_infinite() {
        return Ok(times
            .iter()
            .zip(&values)
            .filter(|(&t, _)| t <= t_end + slack)
            .map(|(_, &v)| v)
            .fold(0.0, f64::max));
    }

    // Trapezoid rule for ∫₀ᵀ ‖u(t)‖_q^p dt over full cells, plus the
    // interpolated partial cell when T is interior to one.
    let g: Vec<f64> = values.iter().map(|v| v.powf(p)).collect();
    let mut integral = 0.0;
    for w in times.windows(2).zip(g.windows(2)) {
        let ((t0, t1), (g0, g1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        if t1 <= t_end + slack {
            integral += 0.5 * (g0 + g1) * (t1 - t0);
        } else if t0 < t_end {
            let theta = (t_end - t0) / (t1 - t0);
            let g_end = g0 + theta * (g1 - g0);
            integral += 0.5 * (g0 + g_end) * (t_end - t0);
            break;
        } else {
            break;
        }
    }
    Ok(integral.max(0.0).powf(1.0 / p))
}

/// Inhomogeneous Sobolev norm `‖u‖_{H^s} = (L Σ_k ⟨ξ_k⟩^{2s} |c_k|²)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> f64 {
    let l = field.grid().box_length();
    let sum: f64 = field
        .spectrum()
        .iter()
        .zip(field.grid().frequencies())
        .map(|(c, &xi)| japanese_bracket(xi).powf(2.0 * s) * c.norm_sqr())
        .sum();
    (l * sum).sqrt()
}

/// `‖□_n u‖_{L²} = (L Σ_k ψ(ξ_k − n)² |c_k|²)^{1/2}` without materializing
/// the projected field.
fn box_piece_l2(field: &SpectralField, n: i64, windows: &WindowFamily) -> f64 {
    let l = field.grid().box_length();
    let sum: f64 = field
        .spectrum()
        .iter()
        .zip(field.grid().frequencies())
        .map(|(c, &xi)| {
            let w = windows.psi(xi - n as f64);
            w * w * c.norm_sqr()
        })
        .sum();
    (l * sum).sqrt()
}

/// Modulation norm `‖u‖_{M^s_{2,q}} = (Σ_n ⟨n⟩^{sq} ‖□_n u‖_{L²}^q)^{1/q}`,
/// summed over every shift `n` whose window `[n−1, n+1]` meets the grid's
/// frequency range.
pub fn modulation_norm(field: &SpectralField, params: &NormParams, windows: &WindowFamily) -> f64 {
    let grid = field.grid();
    let shifts = windows.shifts_meeting(-grid.max_frequency(), grid.max_frequency());
    let (s, q) = (params.s(), params.q());
    let mut sum = 0.0;
    for n in shifts {
        let piece = box_piece_l2(field, n, windows);
        if piece > 0.0 {
            sum += japanese_bracket(n as f64).powf(s * q) * piece.powf(q);
        }
    }
    sum.powf(1.0 / q)
}

/// The Z-norm's inner integral at shift `n`,
/// `∫ κ0²|û(ξ+n)|²/(4κ0²+ξ²) dξ`, discretized after the exact change of
/// variables `η = ξ + n`:
/// `∫ κ0²|û(η)|²/(4κ0²+(η−n)²) dη ↦ L Σ_j κ0²|c_j|²/(4κ0²+(ξ_j−n)²)`.
///
/// Quadrature in the data variable keeps every Lorentzian weight exact and
/// puts the lattice-window truncation on the data's own spectral tail, which
/// is negligible for band-limited fields. The value is therefore unchanged
/// when the grid is refined (new lattice points carry zero coefficients),
/// which the unsubstituted form — dropping shifted positions that fall off
/// the window — would not achieve for `|n|` near the band edge.
pub fn z_inner(field: &SpectralField, params: &NormParams, n: i64) -> Result<f64, NormError> {
    let grid = field.grid();
    if !grid.is_integer_periodic() {
        return Err(NormError::NonIntegerPeriodicBox);
    }
    let kappa_sq4 = 4.0 * params.kappa0() * params.kappa0();
    let sum: f64 = field
        .spectrum()
        .iter()
        .zip(grid.frequencies())
        .map(|(c, &xi)| {
            let d = xi - n as f64;
            c.norm_sqr() / (kappa_sq4 + d * d)
        })
        .sum();
    Ok(grid.box_length() * params.kappa0() * params.kappa0() * sum)
}

/// Upper bound on the part of one inner integral invisible to the lattice
/// window. The Lorentzian weight never exceeds 1/4, so the loss is at most
/// `(1/4)·(mass of û beyond the window)`; the outer half of the represented
/// band serves as the computable indicator for that tail — if it carries
/// mass, the field is not effectively band-limited and Z-norm values should
/// not be trusted.
pub fn z_inner_truncation_bound(field: &SpectralField) -> f64 {
    let grid = field.grid();
    let half = grid.max_frequency() / 2.0;
    let outer_mass: f64 = field
        .spectrum()
        .iter()
        .zip(grid.frequencies())
        .filter(|(_, &xi)| xi.abs() >= half)
        .map(|(c, _)| c.norm_sqr())
        .sum();
    0.25 * grid.box_length() * outer_mass
}

/// Default outer shift range for [`z_norm`]: the field's effective spectral
/// band (mass outside `|ξ| ≤ B` below `1e−12` of the total) padded by
/// `20 + ⌈20 κ0⌉`.
///
/// The range is a property of the field and κ0, not of the grid, so refining
/// the grid leaves it unchanged — which is what makes Z-norm values stable
/// under resolution doubling despite the slowly decaying Lorentzian tails in
/// `n`.
pub fn z_shift_range(field: &SpectralField, params: &NormParams) -> std::ops::RangeInclusive<i64> {
    let grid = field.grid();
    let total: f64 = field.spectrum().iter().map(|c| c.norm_sqr()).sum();
    let mut band = grid.max_frequency().ceil() as i64;
    if total > 0.0 {
        let threshold = 1e-12 * total;
        let mut outside = 0.0;
        // Walk candidate bands downward, accumulating the mass they exclude.
        let mut by_abs: Vec<(f64, f64)> = field
            .spectrum()
            .iter()
            .zip(grid.frequencies())
            .map(|(c, &xi)| (xi.abs(), c.norm_sqr()))
            .collect();
        by_abs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite frequencies"));
        let mut candidate = band;
        let mut idx = 0;
        while candidate > 1 {
            let next = candidate - 1;
            let mut trial = outside;
            let mut j = idx;
            while j < by_abs.len() && by_abs[j].0 > next as f64 {
                trial += by_abs[j].1;
                j += 1;
            }
            if trial > threshold {
                break;
            }
            outside = trial;
            idx = j;
            candidate = next;
        }
        band = candidate;
    } else {
        band = 1;
    }
    let pad = 20 + (20.0 * params.kappa0()).ceil() as i64;
    -(band + pad)..=(band + pad)
}

/// Z-norm over an explicit shift range:
/// `(Σ_{n ∈ range} ⟨n⟩^{sq} z_inner(n)^{q/2})^{1/q}`.
pub fn z_norm_on_range(
    field: &SpectralField,
    params: &NormParams,
    range: std::ops::RangeInclusive<i64>,
) -> Result<f64, NormError> {
    let (s, q) = (params.s(), params.q());
    let mut sum = 0.0;
    for n in range {
        let inner = z_inner(field, params, n)?;
        if inner > 0.0 {
            sum += japanese_bracket(n as f64).powf(s * q) * inner.powf(0.5 * q);
        }
    }
    Ok(sum.powf(1.0 / q))
}

/// Z-norm with the default field-adapted shift range ([`z_shift_range`]).
pub fn z_norm(field: &SpectralField, params: &NormParams) -> Result<f64, NormError> {
    let range = z_shift_range(field, params);
    z_norm_on_range(field, params, range)
}

/// Both sides of a scaling inequality for `f(λ·)`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ScalingReport {
    /// `‖f(λ·)‖_{M^s_{2,q}}`, the rescaled field's modulation norm.
    pub lhs: f64,
    /// The inequality's right side: `λ^{−1/q'}·‖f‖` for `λ ≤ 1`,
    /// `λ^{s−1/2}·‖f‖` for `λ > 1`.
    pub rhs: f64,
    /// `lhs / rhs`; bounded by a fixed constant across a λ-sweep.
    pub ratio: f64,
}

/// Checks the modulation-space scaling inequality at factor `λ`.
///
/// The rescaled field `f(λ·)` is realized exactly: `f(λx) = Σ c_k e^{i(λξ_k)x}`,
/// so the same coefficient array is reinterpreted on the grid with box length
/// `L/λ` (whose lattice is `λξ_k`), with no interpolation.
pub fn scaling_check(
    field: &SpectralField,
    lambda: f64,
    params: &NormParams,
    windows: &WindowFamily,
) -> Result<ScalingReport, NormError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(NormError::BadScale(lambda));
    }
    let grid = field.grid();
    let scaled_grid = crate::spectral::SpectralGrid::new(
        grid.box_length() / lambda,
        grid.point_count(),
    )?;
    let scaled = SpectralField::from_spectrum(scaled_grid, field.spectrum().to_vec())?;
    let lhs = modulation_norm(&scaled, params, windows);
    let base = modulation_norm(field, params, windows);
    let exponent = if lambda <= 1.0 {
        -(1.0 - 1.0 / params.q())
    } else {
        params.s() - 0.5
    };
    let rhs = lambda.powf(exponent) * base;
    Ok(ScalingReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY },
    })
}
