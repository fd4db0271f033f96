//! Per-device parameter records and their scalar transfer functions.
//!
//! Two device families exist: synchronous generators (three frequency states,
//! two voltage states) and droop-controlled grid-forming inverters (two
//! frequency states, one voltage state). All gains are per-unit on the device
//! base; `alpha = S_B / S_i` rescales device inputs to the system base.

use num_complex::Complex64;

/// SG frequency model: swing dynamics plus a first-order governor/turbine.
///
/// States Δδ, Δω, ΔP_M evolve as
/// dΔδ/dt = −D'Δδ + ω₀Δω,
/// dΔω/dt = −(D/M)Δω − (1/M)ΔP_M + (α/M)ΔP_G,
/// dΔP_M/dt = K/(T_SG·R_SG)·Δω − (1/T_SG)ΔP_M.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SgFreqParams {
    /// Rated capacity S_i in MVA.
    pub s_i: f64,
    /// Momentum M in pu·s.
    pub m: f64,
    /// Damping D in pu.
    pub d: f64,
    /// Transient synchronizing coefficient D' in 1/s. Applies to the
    /// relative-angle dynamics only; the shaft transfer function omits it.
    pub d_prime: f64,
    /// Governor/turbine gain K in pu.
    pub k: f64,
    /// Droop constant R_SG in pu.
    pub r_sg: f64,
    /// Governor/turbine time constant T_SG in s.
    pub t_sg: f64,
}

/// GFM frequency model: first-order power filter feeding a P-f droop.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GfmFreqParams {
    pub s_i: f64,
    /// P-f droop coefficient R in pu.
    pub r: f64,
    /// Power measurement filter time constant T_c in s.
    pub t_c: f64,
}

/// SG voltage model: AVR loop with a PI block on the terminal-voltage error.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SgVoltParams {
    pub s_i: f64,
    /// Forward gain G in pu.
    pub g: f64,
    /// Forward time constant T_G in s.
    pub t_g: f64,
    /// Integrator time constant T_I in s.
    pub t_i: f64,
    /// PI proportional gain K_P in pu.
    pub k_p: f64,
    /// PI integral gain K_I in pu.
    pub k_i: f64,
}

/// GFM voltage model: first-order Q-V droop response.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GfmVoltParams {
    pub s_i: f64,
    /// Q-V droop coefficient R_q in pu.
    pub r_q: f64,
    /// Voltage response time constant T_q in s.
    pub t_q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeviceKind {
    Sg,
    Gfm,
}

/// Tagged union of the frequency/voltage parameter records for one device.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeviceParams {
    Sg { freq: SgFreqParams, volt: SgVoltParams },
    Gfm { freq: GfmFreqParams, volt: GfmVoltParams },
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("rated capacities disagree between frequency ({freq}) and voltage ({volt}) records")]
    CapacityMismatch { freq: f64, volt: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

fn nonnegative(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::Negative { name, value })
    }
}

impl SgFreqParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("S_i", self.s_i)?;
        positive("M", self.m)?;
        positive("T_SG", self.t_sg)?;
        positive("R_SG", self.r_sg)?;
        nonnegative("K", self.k)?;
        nonnegative("D", self.d)?;
        nonnegative("D'", self.d_prime)
    }
}

impl GfmFreqParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("S_i", self.s_i)?;
        positive("R", self.r)?;
        positive("T_c", self.t_c)
    }
}

impl SgVoltParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("S_i", self.s_i)?;
        positive("G", self.g)?;
        positive("T_G", self.t_g)?;
        positive("T_I", self.t_i)?;
        nonnegative("K_P", self.k_p)?;
        // Integral action is what restores the terminal voltage; K_I = 0
        // would leave a steady offset the model does not represent.
        positive("K_I", self.k_i)
    }
}

impl GfmVoltParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("S_i", self.s_i)?;
        positive("R_q", self.r_q)?;
        positive("T_q", self.t_q)
    }
}

impl DeviceParams {
    pub fn kind(&self) -> DeviceKind {
        match self {
            DeviceParams::Sg { .. } => DeviceKind::Sg,
            DeviceParams::Gfm { .. } => DeviceKind::Gfm,
        }
    }

    pub fn s_rated(&self) -> f64 {
        match self {
            DeviceParams::Sg { freq, .. } => freq.s_i,
            DeviceParams::Gfm { freq, .. } => freq.s_i,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            DeviceParams::Sg { freq, volt } => {
                freq.validate()?;
                volt.validate()?;
                if freq.s_i != volt.s_i {
                    return Err(ParamError::CapacityMismatch { freq: freq.s_i, volt: volt.s_i });
                }
                Ok(())
            }
            DeviceParams::Gfm { freq, volt } => {
                freq.validate()?;
                volt.validate()?;
                if freq.s_i != volt.s_i {
                    return Err(ParamError::CapacityMismatch { freq: freq.s_i, volt: volt.s_i });
                }
                Ok(())
            }
        }
    }

    /// Placeholder SG parameter set for cases without fitted data. Calibrate
    /// real studies with the `fit` module instead of relying on these.
    pub fn generic_sg(s_i: f64) -> Self {
        DeviceParams::Sg {
            freq: SgFreqParams { s_i, m: 7.0, d: 1.0, d_prime: 0.05, k: 1.0, r_sg: 0.05, t_sg: 7.0 },
            volt: SgVoltParams { s_i, g: 2.0, t_g: 0.5, t_i: 1.0, k_p: 1.0, k_i: 5.0 },
        }
    }

    /// Placeholder GFM parameter set; see [`DeviceParams::generic_sg`].
    pub fn generic_gfm(s_i: f64) -> Self {
        DeviceParams::Gfm {
            freq: GfmFreqParams { s_i, r: 0.05, t_c: 0.05 },
            volt: GfmVoltParams { s_i, r_q: 0.05, t_q: 0.05 },
        }
    }

    /// Same device family and gains, converted to the other family's generic
    /// parameters at identical capacity. Used by share sweeps.
    pub fn as_kind(&self, kind: DeviceKind) -> Self {
        if self.kind() == kind {
            return self.clone();
        }
        match kind {
            DeviceKind::Sg => Self::generic_sg(self.s_rated()),
            DeviceKind::Gfm => Self::generic_gfm(self.s_rated()),
        }
    }
}

/// Base-change factor α = S_B / S_i.
pub fn alpha(s_b: f64, s_i: f64) -> Result<f64, ParamError> {
    positive("S_B", s_b)?;
    positive("S_i", s_i)?;
    Ok(s_b / s_i)
}

/// Closed-loop SG shaft/governor transfer function Δω(s)/ΔP_G(s) with the
/// input already scaled by α:
/// α(sT_SG + 1) / (s²T_SG + s(D·T_SG + 1) + D + K/R_SG).
pub fn sg_freq_tf(p: &SgFreqParams, alpha: f64, s: Complex64) -> Complex64 {
    let num = (s * p.t_sg + 1.0) * alpha;
    let den = s * s * p.t_sg + s * (p.d * p.t_sg + 1.0) + (p.d + p.k / p.r_sg);
    num / den
}

/// Closed-loop SG voltage-error transfer function Δ|V|(s)/ΔQ_G(s), input
/// scaled by α: αGs / (s²T_G + s(GK_P + 1) + GK_I/T_I).
pub fn sg_volt_tf(p: &SgVoltParams, alpha: f64, s: Complex64) -> Complex64 {
    let num = s * (alpha * p.g);
    let den = s * s * p.t_g + s * (p.g * p.k_p + 1.0) + p.g * p.k_i / p.t_i;
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(100.0, 100.0).unwrap(), 1.0);
        assert_eq!(alpha(100.0, 250.0).unwrap(), 0.4);
        assert_eq!(alpha(2300.0, 230.0).unwrap(), 10.0);
        assert!(alpha(0.0, 100.0).is_err());
        assert!(alpha(100.0, -1.0).is_err());
    }

    fn sg() -> SgFreqParams {
        SgFreqParams { s_i: 100.0, m: 7.0, d: 1.0, d_prime: 0.05, k: 1.0, r_sg: 0.05, t_sg: 7.0 }
    }

    #[test]
    fn sg_freq_tf_dc_gain_is_inverse_stiffness() {
        let h = sg_freq_tf(&sg(), 1.0, Complex64::new(0.0, 0.0));
        assert_relative_eq!(h.re, 1.0 / 21.0, max_relative = 1e-12);
        assert_eq!(h.im, 0.0);
    }

    #[test]
    fn sg_freq_tf_diverges_without_governor_or_damping() {
        let mut p = sg();
        p.k = 0.0;
        p.d = 0.0;
        let h = sg_freq_tf(&p, 1.0, Complex64::new(1e-9, 0.0));
        assert!(h.norm() > 1e6);
    }

    #[test]
    fn sg_freq_tf_rolls_off() {
        let h = sg_freq_tf(&sg(), 1.0, Complex64::new(0.0, 1e7));
        assert!(h.norm() < 1e-5);
    }

    #[test]
    fn sg_volt_tf_zero_at_origin() {
        let p = SgVoltParams { s_i: 100.0, g: 2.0, t_g: 0.5, t_i: 1.0, k_p: 1.0, k_i: 5.0 };
        let h0 = sg_volt_tf(&p, 1.0, Complex64::new(0.0, 0.0));
        assert_eq!(h0.norm(), 0.0);
        let hinf = sg_volt_tf(&p, 1.0, Complex64::new(0.0, 1e8));
        assert!(hinf.norm() < 1e-5);
    }

    #[test]
    fn sg_volt_tf_hand_value() {
        // G=1, T_G=1, T_I=1, K_P=0, K_I=1, s=i: i/(i²·1 + i·1 + 1) = i/i = 1.
        let p = SgVoltParams { s_i: 100.0, g: 1.0, t_g: 1.0, t_i: 1.0, k_p: 0.0, k_i: 1.0 };
        let h = sg_volt_tf(&p, 1.0, Complex64::new(0.0, 1.0));
        assert_relative_eq!(h.re, 1.0, max_relative = 1e-12);
        assert_relative_eq!(h.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn capacity_mismatch_rejected() {
        let mut d = DeviceParams::generic_sg(100.0);
        if let DeviceParams::Sg { volt, .. } = &mut d {
            volt.s_i = 50.0;
        }
        assert!(matches!(d.validate(), Err(ParamError::CapacityMismatch { .. })));
    }

    #[test]
    fn generic_sets_validate() {
        DeviceParams::generic_sg(250.0).validate().unwrap();
        DeviceParams::generic_gfm(250.0).validate().unwrap();
    }
}
