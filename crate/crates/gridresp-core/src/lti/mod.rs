//! Closed-form solutions of ẋ = A·x + B·u with constant u and zero initial
//! condition, via the spectral form
//!
//!   x(t) = V·diag(t·φ₁(λ_i t))·V⁻¹·B·u,   φ₁(z) = (eᶻ − 1)/z,
//!
//! which costs one factorization plus a matrix-vector product per sample and
//! has no step-size error. Near-defective eigenbases fall back to a
//! scaling-and-squaring matrix exponential on the augmented system
//! [[A, Bu], [0, 0]]. A fixed-step RK4 integrator is included purely as a
//! validation oracle.

mod eig;
mod expm;

pub use expm::expm;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// What a state row means physically; fixes its unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StateKind {
    /// Voltage angle relative to the reference device, rad.
    DeltaRel,
    /// Frequency deviation, pu.
    Omega,
    /// Governor/turbine mechanical-power state, pu.
    Pm,
    /// Terminal voltage-error magnitude, pu.
    Dv,
    /// AVR PI integrator state, pu·s.
    XPi,
}

impl StateKind {
    pub fn unit(self) -> &'static str {
        match self {
            StateKind::DeltaRel => "rad",
            StateKind::Omega => "pu",
            StateKind::Pm => "pu",
            StateKind::Dv => "pu",
            StateKind::XPi => "pu*s",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateKind::DeltaRel => "delta_rel",
            StateKind::Omega => "omega",
            StateKind::Pm => "p_m",
            StateKind::Dv => "dv",
            StateKind::XPi => "x_pi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateLabel {
    pub kind: StateKind,
    pub bus: usize,
}

/// Which physical input a column of B corresponds to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InputKind {
    /// Load-bus consumption change ΔP_L, pu (positive = load increase).
    LoadPower,
    /// Generator reactive-power change ΔQ_G, pu.
    GenReactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputLabel {
    pub kind: InputKind,
    pub bus: usize,
}

/// Assembled constant-coefficient system ẋ = A·x + B·u.
#[derive(Clone, Debug)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Constant input vector (step applied at t = 0).
    pub u: DVector<f64>,
    pub states: Vec<StateLabel>,
    pub inputs: Vec<InputLabel>,
}

impl LtiModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.a.nrows();
        if self.a.ncols() != n
            || self.b.nrows() != n
            || self.b.ncols() != self.u.len()
            || self.states.len() != n
            || self.inputs.len() != self.b.ncols()
        {
            return Err(SolveError::DimensionMismatch);
        }
        Ok(())
    }

    /// B·u, the constant forcing.
    pub fn forcing(&self) -> DVector<f64> {
        &self.b * &self.u
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("model matrices have inconsistent dimensions")]
    DimensionMismatch,
    #[error("time grid invalid: dt = {dt}, t_end = {t_end}")]
    BadGrid { dt: f64, t_end: f64 },
    #[error("real Schur iteration failed to converge")]
    SchurFailed,
    #[error("eigenvector matrix is numerically singular")]
    SingularEigenbasis,
    #[error("state became non-finite at t = {t} (unstable model or bad step)")]
    NonFinite { t: f64 },
    #[error("internal step dt_internal = {dt_internal} must not exceed output step {dt_out}")]
    BadInternalStep { dt_internal: f64, dt_out: f64 },
}

/// Eigenstructure of A with deterministic (real part, imag part) ordering.
#[derive(Clone, Debug)]
pub struct SpectralFactorization {
    pub eigenvalues: Vec<Complex64>,
    pub v: DMatrix<Complex64>,
    pub v_inv: DMatrix<Complex64>,
    /// ‖V‖·‖V⁻¹‖ (Frobenius); large values flag a near-defective basis.
    pub condition: f64,
}

/// Threshold on the eigenbasis condition beyond which `solve_analytic`
/// abandons the spectral path for the matrix-exponential fallback.
pub const CONDITION_FALLBACK: f64 = 1e8;

/// Largest tolerated imaginary residue when truncating the complex
/// reconstruction back to real states.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

impl SpectralFactorization {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, SolveError> {
        let (eigenvalues, v) = eig::complex_eigen(a)?;
        let n = a.nrows();
        let identity = DMatrix::<Complex64>::identity(n, n);
        let v_inv = v
            .clone()
            .lu()
            .solve(&identity)
            .ok_or(SolveError::SingularEigenbasis)?;
        let condition = v.norm() * v_inv.norm();
        Ok(Self { eigenvalues, v, v_inv, condition })
    }

    /// Modal weights w = V⁻¹·c of a forcing direction c.
    pub fn weights(&self, c: &DVector<f64>) -> DVector<Complex64> {
        let cc = c.map(|x| Complex64::new(x, 0.0));
        &self.v_inv * cc
    }

    /// Evaluates x(t_k) = Re(V·diag(t_k·φ₁(λ t_k))·w) for every grid point.
    /// Returns the state matrix (states × times) and the worst imaginary
    /// residue seen before truncation.
    pub fn evaluate(&self, w: &DVector<Complex64>, times: &[f64]) -> (DMatrix<f64>, f64) {
        let n = self.v.nrows();
        let mut z = DMatrix::<Complex64>::zeros(n, times.len());
        for (k, &t) in times.iter().enumerate() {
            for i in 0..n {
                z[(i, k)] = phi1(self.eigenvalues[i] * t) * t * w[i];
            }
        }
        let xc = &self.v * z;
        let mut residue = 0.0f64;
        let values = DMatrix::from_fn(n, times.len(), |i, k| {
            let c = xc[(i, k)];
            residue = residue.max(c.im.abs());
            c.re
        });
        (values, residue)
    }
}

/// φ₁(z) = (eᶻ − 1)/z with the removable singularity at z = 0 handled by a
/// short series; the series region |z| < 1e-4 keeps the truncation below
/// double-precision roundoff.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        // 1 + z/2 + z²/6 + z³/24; next term is ≤ |z|⁴/120 < 1e-18.
        Complex64::new(1.0, 0.0) + z * 0.5 + z * z * (1.0 / 6.0) + z * z * z * (1.0 / 24.0)
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Sampled solution with per-state labels.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// states × times.
    pub values: DMatrix<f64>,
    pub states: Vec<StateLabel>,
    /// True when the solver used the matrix-exponential fallback instead of
    /// the spectral path.
    pub used_expm_fallback: bool,
    /// Worst imaginary residue truncated away (0 on the fallback path).
    pub max_imag_residue: f64,
}

impl Trajectory {
    /// Row index of a labeled state.
    pub fn state_row(&self, kind: StateKind, bus: usize) -> Option<usize> {
        self.states.iter().position(|s| s.kind == kind && s.bus == bus)
    }

    /// Copy of one state's series.
    pub fn series(&self, row: usize) -> Vec<f64> {
        (0..self.times.len()).map(|k| self.values[(row, k)]).collect()
    }
}

fn sample_grid(t_end: f64, dt: f64) -> Result<Vec<f64>, SolveError> {
    if !(dt > 0.0) || !(t_end >= dt) || !t_end.is_finite() {
        return Err(SolveError::BadGrid { dt, t_end });
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

/// Closed-form trajectory on the uniform grid {0, dt, 2dt, …} ⊆ [0, t_end].
///
/// Falls back to stepping with e^{M·dt} on the augmented matrix
/// M = [[A, Bu], [0, 0]] when the eigenbasis condition exceeds
/// [`CONDITION_FALLBACK`] or the imaginary residue exceeds
/// [`IMAG_RESIDUE_TOL`]; the result is flagged accordingly.
pub fn solve_analytic(model: &LtiModel, t_end: f64, dt: f64) -> Result<Trajectory, SolveError> {
    model.validate()?;
    match SpectralFactorization::new(&model.a) {
        Ok(f) => solve_spectral(model, &f, t_end, dt),
        Err(SolveError::SingularEigenbasis) => solve_expm(model, t_end, dt),
        Err(e) => Err(e),
    }
}

/// Evaluates the response from a prebuilt factorization, falling back to the
/// stepping path when the eigenbasis is ill-conditioned or leaves a complex
/// residue. [`solve_analytic`] composes the factorization with this call;
/// callers that need to attribute time to each stage can do the same.
pub fn solve_spectral(
    model: &LtiModel,
    f: &SpectralFactorization,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SolveError> {
    model.validate()?;
    let times = sample_grid(t_end, dt)?;
    let bu = model.forcing();

    if f.condition <= CONDITION_FALLBACK {
        let w = f.weights(&bu);
        let (values, residue) = f.evaluate(&w, &times);
        if residue <= IMAG_RESIDUE_TOL {
            return Ok(Trajectory {
                times,
                values,
                states: model.states.clone(),
                used_expm_fallback: false,
                max_imag_residue: residue,
            });
        }
    }

    let values = solve_by_expm(&model.a, &bu, &times);
    Ok(Trajectory {
        times,
        values,
        states: model.states.clone(),
        used_expm_fallback: true,
        max_imag_residue: 0.0,
    })
}

/// The stepping path on its own: exact at grid points for any eigenstructure,
/// at the cost of one matrix exponential and a matrix-vector product per step.
pub fn solve_expm(model: &LtiModel, t_end: f64, dt: f64) -> Result<Trajectory, SolveError> {
    model.validate()?;
    let times = sample_grid(t_end, dt)?;
    let values = solve_by_expm(&model.a, &model.forcing(), &times);
    Ok(Trajectory {
        times,
        values,
        states: model.states.clone(),
        used_expm_fallback: true,
        max_imag_residue: 0.0,
    })
}

/// Steps the augmented system; exact at grid points regardless of the
/// eigenstructure of A.
fn solve_by_expm(a: &DMatrix<f64>, bu: &DVector<f64>, times: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, 1)).copy_from(bu);
    let e = expm(&(aug * dt));

    let mut z = DVector::zeros(n + 1);
    z[n] = 1.0;
    let mut values = DMatrix::zeros(n, times.len());
    for k in 0..times.len() {
        for i in 0..n {
            values[(i, k)] = z[i];
        }
        if k + 1 < times.len() {
            z = &e * z;
        }
    }
    values
}

/// Classical fixed-step RK4 oracle. `dt_internal` is rounded down so that an
/// integer number of internal steps lands exactly on each output sample.
pub fn solve_numeric_oracle(
    model: &LtiModel,
    t_end: f64,
    dt_internal: f64,
    dt_out: f64,
) -> Result<Trajectory, SolveError> {
    model.validate()?;
    if !(dt_internal > 0.0) || dt_internal > dt_out {
        return Err(SolveError::BadInternalStep { dt_internal, dt_out });
    }
    let times = sample_grid(t_end, dt_out)?;
    let substeps = (dt_out / dt_internal - 1e-9).ceil().max(1.0) as usize;
    let h = dt_out / substeps as f64;

    let n = model.n_states();
    let a = &model.a;
    let c = model.forcing();
    let mut x = DVector::zeros(n);
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut tmp = DVector::zeros(n);
    let mut values = DMatrix::zeros(n, times.len());

    for (kout, &t) in times.iter().enumerate() {
        for i in 0..n {
            values[(i, kout)] = x[i];
        }
        if !x.iter().all(|v: &f64| v.is_finite()) {
            return Err(SolveError::NonFinite { t });
        }
        if kout + 1 == times.len() {
            break;
        }
        for _ in 0..substeps {
            k1.copy_from(&c);
            k1.gemv(1.0, a, &x, 1.0);
            tmp.copy_from(&x);
            tmp.axpy(0.5 * h, &k1, 1.0);
            k2.copy_from(&c);
            k2.gemv(1.0, a, &tmp, 1.0);
            tmp.copy_from(&x);
            tmp.axpy(0.5 * h, &k2, 1.0);
            k3.copy_from(&c);
            k3.gemv(1.0, a, &tmp, 1.0);
            tmp.copy_from(&x);
            tmp.axpy(h, &k3, 1.0);
            k4.copy_from(&c);
            k4.gemv(1.0, a, &tmp, 1.0);
            x.axpy(h / 6.0, &k1, 1.0);
            x.axpy(h / 3.0, &k2, 1.0);
            x.axpy(h / 3.0, &k3, 1.0);
            x.axpy(h / 6.0, &k4, 1.0);
        }
    }

    Ok(Trajectory {
        times,
        values,
        states: model.states.clone(),
        used_expm_fallback: false,
        max_imag_residue: 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Clone, Debug)]
pub struct EigenReport {
    pub eigenvalues: Vec<Complex64>,
    /// Damping ratio −Re(λ)/|λ| per eigenvalue (0 for λ = 0).
    pub damping_ratios: Vec<f64>,
    pub stability: Stability,
}

/// Eigenvalue screening report: modal damping and a coarse stability flag
/// (real parts compared against ±1e-9).
pub fn eigen_diagnostics(model: &LtiModel) -> Result<EigenReport, SolveError> {
    model.validate()?;
    let f = SpectralFactorization::new(&model.a)?;
    let damping_ratios = f
        .eigenvalues
        .iter()
        .map(|l| {
            let mag = l.norm();
            if mag == 0.0 {
                0.0
            } else {
                -l.re / mag
            }
        })
        .collect();
    let max_re = f.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, l| m.max(l.re));
    let stability = if max_re > 1e-9 {
        Stability::Unstable
    } else if max_re > -1e-9 {
        Stability::Marginal
    } else {
        Stability::Stable
    };
    Ok(EigenReport { eigenvalues: f.eigenvalues, damping_ratios, stability })
}
