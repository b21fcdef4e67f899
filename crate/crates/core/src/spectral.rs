//! Periodic grid, DFT contract, Fourier multipliers, the free biharmonic
//! propagator, and frequency decompositions.
//!
//! Conventions used throughout the crate:
//!
//! * physical samples live on the centered grid `x_j = -L/2 + j·dx`,
//!   `j = 0..N`, `dx = L/N`;
//! * the spectrum stores torus Fourier coefficients
//!   `c_k = (1/L) ∫ u(x) e^{-i ξ_k x} dx` with `ξ_k = 2πk/L`, held in
//!   **centered order** `k = -N/2, …, N/2-1` (the single asymmetric Nyquist
//!   mode sits at `k = -N/2`);
//! * synthesis is `u(x) = Σ_k c_k e^{i ξ_k x}`, so Parseval reads
//!   `Σ_j |u_j|² dx = L Σ_k |c_k|²`.
//!
//! When a whole-line formula with measure `dξ` is discretized on this lattice,
//! `∫ dξ ↦ (2π/L) Σ_k` and `|û(ξ_k)|² ↦ (L²/2π)|c_k|²`; the operations that do
//! so document their factor at the use site.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

/// Errors from grid construction and spectral operations.
#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("point count must be even, got {0}")]
    OddPointCount(usize),
    #[error("point count must be at least 8, got {0}")]
    TooFewPoints(usize),
    #[error("box length must be positive and finite, got {0}")]
    BadBoxLength(f64),
    #[error("sample count {got} does not match grid point count {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("grids differ between operands")]
    GridMismatch,
    #[error("multiplier symbol is not finite at ξ = {xi}")]
    NonFiniteSymbol { xi: f64 },
    #[error("frequency {0} is not on the grid lattice")]
    OffLattice(f64),
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized DFT, `out_k = Σ_j in_j e^{-2πijk/N}`, in natural FFT order.
fn dft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// Unnormalized inverse DFT, `out_j = Σ_k in_k e^{+2πijk/N}`, natural order.
fn dft_inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

/// `(-1)^k` for a (possibly negative) mode index; relates the centered grid
/// origin `x_0 = -L/2` to the natural FFT origin `x = 0`.
#[inline]
fn alternating_sign(k: i64) -> f64 {
    if k & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A uniform periodic grid: box length `L`, even point count `N`, and the
/// frequency lattice `ξ_k = 2πk/L` for `k = -N/2 … N/2-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    box_length: f64,
    point_count: usize,
    frequencies: Vec<f64>,
}

impl SpectralGrid {
    /// Builds a grid, rejecting odd `N`, `N < 8`, and non-positive `L`.
    pub fn new(box_length: f64, point_count: usize) -> Result<Self, SpectralError> {
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(SpectralError::BadBoxLength(box_length));
        }
        if point_count % 2 != 0 {
            return Err(SpectralError::OddPointCount(point_count));
        }
        if point_count < 8 {
            return Err(SpectralError::TooFewPoints(point_count));
        }
        let half = (point_count / 2) as i64;
        let d_xi = 2.0 * PI / box_length;
        let frequencies = (-half..half).map(|k| k as f64 * d_xi).collect();
        Ok(Self {
            box_length,
            point_count,
            frequencies,
        })
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    /// Grid spacing `dx = L/N`.
    pub fn dx(&self) -> f64 {
        self.box_length / self.point_count as f64
    }

    /// Frequency spacing `Δξ = 2π/L`.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// The frequency lattice in centered order, `ξ_k = 2πk/L`,
    /// `k = -N/2 … N/2-1`.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Largest represented |frequency| (the Nyquist magnitude `π N / L`).
    pub fn max_frequency(&self) -> f64 {
        PI * self.point_count as f64 / self.box_length
    }

    /// Physical sample points `x_j = -L/2 + j·dx`.
    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.point_count)
            .map(|j| -0.5 * self.box_length + j as f64 * dx)
            .collect()
    }

    /// Signed mode index for array position `i` (so `k = i - N/2`).
    pub fn mode_index(&self, position: usize) -> i64 {
        position as i64 - (self.point_count / 2) as i64
    }

    /// Array position of signed mode index `k`, if on the lattice.
    pub fn position_of_mode(&self, k: i64) -> Option<usize> {
        let half = (self.point_count / 2) as i64;
        if (-half..half).contains(&k) {
            Some((k + half) as usize)
        } else {
            None
        }
    }

    /// Whether `L` is an integer multiple of `2π` (so every integer frequency
    /// lies exactly on the lattice). Required by the Z-norm and by operator
    /// evaluations at half-integer `Im κ`.
    pub fn is_integer_periodic(&self) -> bool {
        let periods = self.box_length / (2.0 * PI);
        (periods - periods.round()).abs() <= 1e-9 * periods.max(1.0)
    }

    /// Array position of the lattice point with frequency `xi`, if `xi` lies
    /// on the lattice (within a relative tolerance of a few ulp-scale).
    pub fn position_of_frequency(&self, xi: f64) -> Result<usize, SpectralError> {
        let step = self.freq_spacing();
        let k = xi / step;
        let k_round = k.round();
        if (k - k_round).abs() > 1e-9 {
            return Err(SpectralError::OffLattice(xi));
        }
        self.position_of_mode(k_round as i64)
            .ok_or(SpectralError::OffLattice(xi))
    }
}

/// A complex field on a [`SpectralGrid`], stored in both representations,
/// kept DFT-consistent by construction. Values are immutable; operations
/// return new fields.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: SpectralGrid,
    physical: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl SpectralField {
    /// The zero field.
    pub fn zero(grid: SpectralGrid) -> Self {
        let n = grid.point_count();
        Self {
            grid,
            physical: vec![Complex64::new(0.0, 0.0); n],
            spectrum: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Analysis: builds the field from physical samples on `x_j = -L/2 + j·dx`,
    /// computing `c_k = (1/N) Σ_j u_j e^{-i ξ_k x_j}`.
    pub fn from_physical(
        grid: SpectralGrid,
        samples: Vec<Complex64>,
    ) -> Result<Self, SpectralError> {
        let n = grid.point_count();
        if samples.len() != n {
            return Err(SpectralError::LengthMismatch {
                got: samples.len(),
                expected: n,
            });
        }
        let mut buf = samples.clone();
        dft_forward(&mut buf);
        // Reorder to centered modes; e^{-i ξ_k x_j} = (-1)^k e^{-2πijk/N}.
        let half = n / 2;
        let scale = 1.0 / n as f64;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
        for (pos, slot) in spectrum.iter_mut().enumerate() {
            let k = pos as i64 - half as i64;
            let fft_pos = k.rem_euclid(n as i64) as usize;
            *slot = buf[fft_pos] * (alternating_sign(k) * scale);
        }
        Ok(Self {
            grid,
            physical: samples,
            spectrum,
        })
    }

    /// Synthesis: builds the field from centered-order coefficients,
    /// evaluating `u(x_j) = Σ_k c_k e^{i ξ_k x_j}`.
    pub fn from_spectrum(
        grid: SpectralGrid,
        spectrum: Vec<Complex64>,
    ) -> Result<Self, SpectralError> {
        let n = grid.point_count();
        if spectrum.len() != n {
            return Err(SpectralError::LengthMismatch {
                got: spectrum.len(),
                expected: n,
            });
        }
        let half = n / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (pos, &c) in spectrum.iter().enumerate() {
            let k = pos as i64 - half as i64;
            let fft_pos = k.rem_euclid(n as i64) as usize;
            buf[fft_pos] = c * alternating_sign(k);
        }
        dft_inverse(&mut buf);
        Ok(Self {
            grid,
            physical: buf,
            spectrum,
        })
    }

    /// Builds the field by sampling a function of `x`.
    pub fn from_fn(
        grid: SpectralGrid,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SpectralError> {
        let samples = grid.points().iter().map(|&x| f(x)).collect();
        Self::from_physical(grid, samples)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// Physical samples `u(x_j)` on the centered grid.
    pub fn physical(&self) -> &[Complex64] {
        &self.physical
    }

    /// Torus coefficients `c_k` in centered order.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Coefficient of signed mode `k`, zero when off the lattice.
    pub fn coefficient(&self, k: i64) -> Complex64 {
        self.grid
            .position_of_mode(k)
            .map_or(Complex64::new(0.0, 0.0), |p| self.spectrum[p])
    }

    /// `∫ |u|² dx = L Σ_k |c_k|²`, evaluated spectrally.
    pub fn mass(&self) -> f64 {
        self.grid.box_length() * self.spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Fraction of mass outside the center half-box `[-L/4, L/4]`; the
    /// line-approximation guard for localized data.
    pub fn mass_outside_center_half(&self) -> f64 {
        let total: f64 = self.physical.iter().map(|u| u.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let quarter = 0.25 * self.grid.box_length();
        let outside: f64 = self
            .grid
            .points()
            .iter()
            .zip(&self.physical)
            .filter(|(&x, _)| x.abs() > quarter)
            .map(|(_, u)| u.norm_sqr())
            .sum();
        outside / total
    }

    /// Applies a Fourier multiplier: `c_k ↦ symbol(ξ_k)·c_k`. Rejects symbols
    /// that are non-finite at any lattice frequency.
    pub fn apply_multiplier(
        &self,
        symbol: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SpectralError> {
        let mut spectrum = self.spectrum.clone();
        for (pos, c) in spectrum.iter_mut().enumerate() {
            let xi = self.grid.frequencies()[pos];
            let m = symbol(xi);
            if !(m.re.is_finite() && m.im.is_finite()) {
                return Err(SpectralError::NonFiniteSymbol { xi });
            }
            *c *= m;
        }
        Self::from_spectrum(self.grid.clone(), spectrum)
    }

    /// Free biharmonic propagator: multiplies the spectrum by `e^{i t ξ^4}`.
    /// The symbol is unimodular, so the L² norm is preserved exactly.
    pub fn free_evolve(&self, t: f64) -> Self {
        self.apply_multiplier(|xi| Complex64::from_polar(1.0, t * xi.powi(4)))
            .expect("unimodular symbol is always finite")
    }

    /// Frequency-uniform projection `□_n`: multiplies by `ψ(ξ_k - n)`.
    pub fn box_project(&self, n: i64, windows: &WindowFamily) -> Self {
        self.apply_multiplier(|xi| Complex64::new(windows.psi(xi - n as f64), 0.0))
            .expect("window values are finite")
    }

    /// Dyadic band projection `P_j`: sharp cutoff to `|ξ| ∈ [2^{j-1}, 2^j)`
    /// for `j ≥ 1`, and `|ξ| < 1` for `j = 0`.
    pub fn band_project(&self, j: u32) -> Self {
        let (lo, hi) = dyadic_band(j);
        self.apply_multiplier(|xi| {
            let a = xi.abs();
            if lo <= a && a < hi {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .expect("indicator values are finite")
    }

    /// Returns the field with the asymmetric Nyquist mode `k = -N/2` zeroed —
    /// required before nonlinear or operator work, where the unpaired mode
    /// would break the conjugate symmetry of real symbols.
    pub fn without_nyquist(&self) -> Self {
        if self.spectrum[0] == Complex64::new(0.0, 0.0) {
            return self.clone();
        }
        let mut spectrum = self.spectrum.clone();
        spectrum[0] = Complex64::new(0.0, 0.0);
        Self::from_spectrum(self.grid.clone(), spectrum).expect("length preserved")
    }

    /// Re-lays the field on a grid with `point_count` points over the same
    /// box, copying the shared central modes and zeroing the rest: upsampling
    /// zero-pads the spectrum, downsampling truncates it. The asymmetric
    /// Nyquist slot does not survive in either direction (it has no conjugate
    /// partner on either lattice), so the result is always Nyquist-free.
    pub fn resample(&self, point_count: usize) -> Result<Self, SpectralError> {
        let target = SpectralGrid::new(self.grid.box_length(), point_count)?;
        let shared_half = (self.grid.point_count().min(point_count) / 2) as i64;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); point_count];
        for k in -(shared_half - 1)..=(shared_half - 1) {
            let pos = target
                .position_of_mode(k)
                .expect("mode within both lattices");
            spectrum[pos] = self.coefficient(k);
        }
        Self::from_spectrum(target, spectrum)
    }
}

/// The half-open dyadic band `[2^{j-1}, 2^j)` covered by level `j` (`[0, 1)`
/// for `j = 0`).
pub fn dyadic_band(j: u32) -> (f64, f64) {
    if j == 0 {
        (0.0, 1.0)
    } else {
        (2f64.powi(j as i32 - 1), 2f64.powi(j as i32))
    }
}

/// Number of dyadic levels needed to tile a grid's frequency lattice:
/// levels `0..count` cover every represented frequency.
pub fn dyadic_level_count(grid: &SpectralGrid) -> u32 {
    let mut j = 0;
    while dyadic_band(j).1 <= grid.max_frequency() {
        j += 1;
    }
    j + 1
}

/// The translated-window family `ψ_n(ξ) = ψ(ξ - n)` built on
/// `ψ(ξ) = cos²(πξ/2)` for `|ξ| ≤ 1`, zero outside.
///
/// This window has exact compact support and satisfies the exact partition of
/// unity `Σ_n ψ(ξ-n) ≡ 1`, because `cos²(πξ/2) + cos²(π(ξ±1)/2) = 1` on the
/// overlaps. It is only C¹, which is fine here: nothing downstream depends on
/// window smoothness.
#[derive(Clone, Copy, Debug, Default)]
pub struct WindowFamily;

impl WindowFamily {
    pub fn new() -> Self {
        Self
    }

    /// The base window `ψ(ξ) = cos²(πξ/2)` on `[-1,1]`, zero outside
    /// (exactly: every `|ξ| ≥ 1` maps to 0.0).
    pub fn psi(&self, xi: f64) -> f64 {
        if xi.abs() >= 1.0 {
            0.0
        } else {
            let c = (0.5 * PI * xi).cos();
            c * c
        }
    }

    /// Integer shifts `n` whose window `[n-1, n+1]` meets `[lo, hi]`.
    pub fn shifts_meeting(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
        (lo.ceil() as i64 - 1)..=(hi.floor() as i64 + 1)
    }
}
