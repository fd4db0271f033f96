//! Calibration of SG transfer-function parameters from step-response data.
//!
//! Both model families reduce to a 2-state controllable-canonical
//! realization ẋ = [[0, 1], [−a₀, −a₁]]x + [0; 1]u, y = c₀x₁ + c₁x₂, whose
//! step response is evaluated exactly through the spectral solver. Fitting
//! minimizes step-response RMS with a deterministic Nelder–Mead simplex —
//! acceptance is on response error, not parameter recovery, because the
//! parameterizations are overcomplete (e.g. only K/R_SG is identifiable, so
//! K is pinned to 1 during fitting).

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

use crate::device::{SgFreqParams, SgVoltParams};
use crate::lti::{SpectralFactorization, SolveError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelFamily {
    SgFreq,
    SgVolt,
}

#[derive(Clone, Debug)]
pub struct StepResponseData {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Step magnitude applied at t = 0, pu.
    pub input: f64,
    pub family: ModelFamily,
}

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("times must be strictly increasing")]
    NonMonotonicTimes,
    #[error("need at least 20 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("guess family {guess:?} does not match data family {data:?}")]
    FamilyMismatch { guess: ModelFamily, data: ModelFamily },
    #[error("bounds need {expected} entries, got {got}")]
    BadBounds { expected: usize, got: usize },
    #[error("initial guess outside bounds at parameter {index}")]
    GuessOutsideBounds { index: usize },
    #[error("canonical realization failed: {0}")]
    Solve(#[from] SolveError),
}

impl StepResponseData {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.times.len() != self.values.len() {
            return Err(FitError::LengthMismatch {
                times: self.times.len(),
                values: self.values.len(),
            });
        }
        if self.times.len() < 20 {
            return Err(FitError::TooFewSamples { got: self.times.len() });
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::NonMonotonicTimes);
        }
        Ok(())
    }
}

/// Parameter record plus the (known) base-conversion gain α.
#[derive(Clone, Copy, Debug)]
pub enum FamilyParams {
    SgFreq { params: SgFreqParams, alpha: f64 },
    SgVolt { params: SgVoltParams, alpha: f64 },
}

impl FamilyParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            FamilyParams::SgFreq { .. } => ModelFamily::SgFreq,
            FamilyParams::SgVolt { .. } => ModelFamily::SgVolt,
        }
    }

    /// Free parameters during fitting. SgFreq: [M, D, R_SG, T_SG] with K
    /// normalized into R_SG; SgVolt: [G, T_G, K_I] with K_P and T_I held at
    /// their guess values (the remaining directions are redundant).
    fn to_vector(self) -> Vec<f64> {
        match self {
            FamilyParams::SgFreq { params: p, .. } => {
                alloc::vec![p.m, p.d, p.r_sg / p.k, p.t_sg]
            }
            FamilyParams::SgVolt { params: p, .. } => alloc::vec![p.g, p.t_g, p.k_i],
        }
    }

    fn with_vector(self, v: &[f64]) -> FamilyParams {
        match self {
            FamilyParams::SgFreq { params: p, alpha } => FamilyParams::SgFreq {
                params: SgFreqParams {
                    m: v[0],
                    d: v[1],
                    k: 1.0,
                    r_sg: v[2],
                    t_sg: v[3],
                    ..p
                },
                alpha,
            },
            FamilyParams::SgVolt { params: p, alpha } => FamilyParams::SgVolt {
                params: SgVoltParams { g: v[0], t_g: v[1], k_i: v[2], ..p },
                alpha,
            },
        }
    }

    /// Canonical coefficients ((a0, a1), (c0, c1)) of the family's transfer
    /// function c1·s + c0 over s² + a1·s + a0.
    fn canonical(&self) -> ((f64, f64), (f64, f64)) {
        match self {
            // α(sT+1) / (MTs² + (M+DT)s + D + K/R), normalized by MT.
            FamilyParams::SgFreq { params: p, alpha } => {
                let mt = p.m * p.t_sg;
                (
                    ((p.d + p.k / p.r_sg) / mt, 1.0 / p.t_sg + p.d / p.m),
                    (alpha / mt, alpha / p.m),
                )
            }
            // αGs / (T_Gs² + (GK_P+1)s + GK_I/T_I), normalized by T_G.
            FamilyParams::SgVolt { params: p, alpha } => (
                (
                    p.g * p.k_i / (p.t_i * p.t_g),
                    (p.g * p.k_p + 1.0) / p.t_g,
                ),
                (0.0, alpha * p.g / p.t_g),
            ),
        }
    }
}

/// Exact step response of the canonical realization at arbitrary sample
/// times (zero initial condition, step applied at t = 0).
pub fn simulate_step(
    params: &FamilyParams,
    input: f64,
    times: &[f64],
) -> Result<Vec<f64>, FitError> {
    let ((a0, a1), (c0, c1)) = params.canonical();
    if input == 0.0 {
        return Ok(alloc::vec![0.0; times.len()]);
    }
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -a0, -a1]);
    let f = SpectralFactorization::new(&a)?;
    let w = f.weights(&DVector::from_column_slice(&[0.0, input]));
    let (x, _residue) = f.evaluate(&w, times);
    Ok((0..times.len()).map(|k| c0 * x[(0, k)] + c1 * x[(1, k)]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitWarning {
    /// Data is (numerically) all zero; returned parameters equal the guess.
    DegenerateData,
    /// A fitted parameter ended on a bound.
    AtBound { index: usize },
    /// Residual stayed above the quality threshold.
    PoorFit { rms: f64 },
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub params: FamilyParams,
    pub rms: f64,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

/// Wide positive boxes per free parameter.
pub fn default_bounds(family: ModelFamily) -> Vec<(f64, f64)> {
    match family {
        ModelFamily::SgFreq => alloc::vec![
            (1e-3, 1e3),  // M
            (0.0, 1e3),   // D
            (1e-4, 1e2),  // R_SG
            (1e-3, 1e3),  // T_SG
        ],
        ModelFamily::SgVolt => alloc::vec![
            (1e-3, 1e3), // G
            (1e-3, 1e3), // T_G
            (1e-4, 1e4), // K_I
        ],
    }
}

/// Poor-fit threshold: residual worse than 5% of the data's own RMS.
const POOR_FIT_FRACTION: f64 = 0.05;
const MAX_ITER: usize = 4000;

/// Derivative-free simplex fit of the family's step response to data.
/// Deterministic: fixed simplex initialization and tie-breaking, no
/// randomness. Residual never exceeds the residual of the initial guess.
pub fn fit_transfer_function(
    data: &StepResponseData,
    guess: &FamilyParams,
    bounds: Option<&[(f64, f64)]>,
) -> Result<FitReport, FitError> {
    data.validate()?;
    if guess.family() != data.family {
        return Err(FitError::FamilyMismatch { guess: guess.family(), data: data.family });
    }
    let x0 = guess.to_vector();
    let dim = x0.len();
    let default = default_bounds(data.family);
    let bounds = match bounds {
        Some(b) if b.len() != dim => {
            return Err(FitError::BadBounds { expected: dim, got: b.len() })
        }
        Some(b) => b,
        None => &default,
    };
    for (i, (&x, &(lo, hi))) in x0.iter().zip(bounds).enumerate() {
        if x < lo || x > hi {
            return Err(FitError::GuessOutsideBounds { index: i });
        }
    }

    let data_rms = rms(&data.values);
    let mut warnings = Vec::new();
    if data_rms < 1e-15 {
        warnings.push(FitWarning::DegenerateData);
        let normalized = guess.with_vector(&x0);
        let resid = objective(&normalized, data).sqrt();
        return Ok(FitReport { params: normalized, rms: resid, iterations: 0, warnings });
    }

    // Mean-squared objective; out-of-bounds or unsolvable points are +inf so
    // the simplex never accepts them.
    let eval = |v: &[f64]| -> f64 {
        if v.iter().zip(bounds).any(|(&x, &(lo, hi))| x < lo || x > hi) {
            return f64::INFINITY;
        }
        objective(&guess.with_vector(v), data)
    };

    // Fixed initialization: bump each coordinate by 5% (or 0.05 absolute).
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.clone(), eval(&x0)));
    for i in 0..dim {
        let mut p = x0.clone();
        let step = 0.05 * p[i].abs().max(1.0);
        p[i] = (p[i] + step).min(bounds[i].1);
        simplex.push((p.clone(), eval(&p)));
    }

    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst.is_finite() && (worst - best) < 1e-24 * (1.0 + best) {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(p, _)| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let direction: Vec<f64> =
            (0..dim).map(|j| centroid[j] - simplex[dim].0[j]).collect();
        let at = |scale: f64| -> Vec<f64> {
            (0..dim).map(|j| centroid[j] + scale * direction[j]).collect()
        };

        let reflected = at(1.0);
        let f_r = eval(&reflected);
        if f_r < simplex[0].1 {
            let expanded = at(2.0);
            let f_e = eval(&expanded);
            simplex[dim] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
        } else {
            let contracted = if f_r < simplex[dim].1 { at(0.5) } else { at(-0.5) };
            let f_c = eval(&contracted);
            if f_c < simplex[dim].1.min(f_r) {
                simplex[dim] = (contracted, f_c);
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        v.0[j] = anchor[j] + 0.5 * (v.0[j] - anchor[j]);
                    }
                    v.1 = eval(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best_v, best_f) = (&simplex[0].0, simplex[0].1);

    for (i, (&x, &(lo, hi))) in best_v.iter().zip(bounds).enumerate() {
        let span = (hi - lo).max(1e-12);
        if (x - lo).abs() < 1e-9 * span || (hi - x).abs() < 1e-9 * span {
            warnings.push(FitWarning::AtBound { index: i });
        }
    }
    let fitted_rms = best_f.sqrt();
    if fitted_rms > POOR_FIT_FRACTION * data_rms {
        warnings.push(FitWarning::PoorFit { rms: fitted_rms });
    }

    Ok(FitReport {
        params: guess.with_vector(best_v),
        rms: fitted_rms,
        iterations,
        warnings,
    })
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn objective(params: &FamilyParams, data: &StepResponseData) -> f64 {
    match simulate_step(params, data.input, &data.times) {
        Ok(sim) => {
            sim.iter()
                .zip(&data.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / data.times.len() as f64
        }
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn freq_truth() -> FamilyParams {
        FamilyParams::SgFreq {
            params: SgFreqParams {
                s_i: 100.0,
                m: 7.0,
                d: 1.0,
                d_prime: 0.0,
                k: 1.0,
                r_sg: 0.05,
                t_sg: 7.0,
            },
            alpha: 1.0,
        }
    }

    fn volt_truth() -> FamilyParams {
        FamilyParams::SgVolt {
            params: SgVoltParams { s_i: 100.0, g: 2.0, t_g: 0.5, t_i: 1.0, k_p: 1.0, k_i: 5.0 },
            alpha: 1.0,
        }
    }

    fn grid(t_end: f64, dt: f64) -> Vec<f64> {
        let n = (t_end / dt + 0.5) as usize;
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn step_final_values() {
        let t = grid(200.0, 0.5);
        let y = simulate_step(&freq_truth(), -0.1, &t).unwrap();
        // Final value αu/(D + K/R_SG) = −0.1/21, independent of M.
        assert_abs_diff_eq!(y[t.len() - 1], -0.1 / 21.0, epsilon = 1e-9);

        let y = simulate_step(&volt_truth(), 0.3, &t).unwrap();
        // Zero at the origin: the response returns to zero.
        assert_abs_diff_eq!(y[t.len() - 1], 0.0, epsilon = 1e-9);

        let y = simulate_step(&freq_truth(), 0.0, &t).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    fn perturbed(v: &[f64], factors: &[f64]) -> Vec<f64> {
        v.iter().zip(factors).map(|(x, f)| x * f).collect()
    }

    #[test]
    fn round_trip_sg_freq() {
        let truth = freq_truth();
        let times = grid(40.0, 0.01);
        let values = simulate_step(&truth, -0.1, &times).unwrap();
        let data = StepResponseData { times, values, input: -0.1, family: ModelFamily::SgFreq };

        let guess = truth.with_vector(&perturbed(&truth.to_vector(), &[1.3, 0.7, 1.3, 0.7]));
        let report = fit_transfer_function(&data, &guess, None).unwrap();
        assert!(report.rms < 1e-6, "rms = {:.3e}", report.rms);
        assert!(!report.warnings.contains(&FitWarning::DegenerateData));
    }

    #[test]
    fn round_trip_sg_volt() {
        let truth = volt_truth();
        let times = grid(10.0, 0.005);
        let values = simulate_step(&truth, 0.4, &times).unwrap();
        let data = StepResponseData { times, values, input: 0.4, family: ModelFamily::SgVolt };

        let guess = truth.with_vector(&perturbed(&truth.to_vector(), &[0.7, 1.3, 0.7]));
        let report = fit_transfer_function(&data, &guess, None).unwrap();
        assert!(report.rms < 1e-6, "rms = {:.3e}", report.rms);
    }

    #[test]
    fn residual_never_worse_than_guess() {
        let truth = freq_truth();
        let times = grid(40.0, 0.02);
        let values = simulate_step(&truth, -0.1, &times).unwrap();
        let data =
            StepResponseData { times: times.clone(), values, input: -0.1, family: ModelFamily::SgFreq };
        let guess = truth.with_vector(&perturbed(&truth.to_vector(), &[1.25, 0.8, 0.75, 1.2]));
        let guess_sim = simulate_step(&guess, -0.1, &times).unwrap();
        let guess_rms = (guess_sim
            .iter()
            .zip(&data.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / times.len() as f64)
            .sqrt();
        let report = fit_transfer_function(&data, &guess, None).unwrap();
        assert!(report.rms <= guess_rms + 1e-18);
    }

    #[test]
    fn zero_data_flags_degenerate() {
        let times = grid(5.0, 0.05);
        let data = StepResponseData {
            values: alloc::vec![0.0; times.len()],
            times,
            input: 0.1,
            family: ModelFamily::SgFreq,
        };
        let report = fit_transfer_function(&data, &freq_truth(), None).unwrap();
        assert!(report.warnings.contains(&FitWarning::DegenerateData));
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn deterministic_fits() {
        let truth = volt_truth();
        let times = grid(8.0, 0.01);
        let values = simulate_step(&truth, 0.2, &times).unwrap();
        let data = StepResponseData { times, values, input: 0.2, family: ModelFamily::SgVolt };
        let guess = truth.with_vector(&perturbed(&truth.to_vector(), &[1.2, 0.85, 1.15]));
        let a = fit_transfer_function(&data, &guess, None).unwrap();
        let b = fit_transfer_function(&data, &guess, None).unwrap();
        assert_eq!(a.params.to_vector(), b.params.to_vector());
        assert_eq!(a.rms, b.rms);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn input_validation() {
        let data = StepResponseData {
            times: alloc::vec![0.0, 0.1],
            values: alloc::vec![0.0, 0.1],
            input: 0.1,
            family: ModelFamily::SgFreq,
        };
        match fit_transfer_function(&data, &freq_truth(), None) {
            Err(FitError::TooFewSamples { got: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }

        let times = grid(5.0, 0.05);
        let data = StepResponseData {
            values: alloc::vec![0.1; times.len()],
            times,
            input: 0.1,
            family: ModelFamily::SgVolt,
        };
        match fit_transfer_function(&data, &freq_truth(), None) {
            Err(FitError::FamilyMismatch { .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }

        match fit_transfer_function(
            &StepResponseData { family: ModelFamily::SgFreq, ..data },
            &freq_truth(),
            Some(&[(0.0, 1.0)]),
        ) {
            Err(FitError::BadBounds { expected: 4, got: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
