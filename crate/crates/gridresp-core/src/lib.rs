//! Closed-form frequency and voltage response models for power networks that
//! mix synchronous generators (SGs) with droop-controlled grid-forming
//! inverters (GFMs).
//!
//! The pipeline, end to end:
//!
//! 1. [`reduction`] — build the DC susceptance matrix of a case and
//!    Kron-eliminate every non-generator bus, leaving a generator-only
//!    equivalent (`B_r`) plus a load-injection map (`B_L`).
//! 2. [`device`] — low-order per-device models: a two-state droop GFM and a
//!    three-state SG (swing + governor) for frequency; a one-state Q-V droop
//!    GFM and a two-state AVR-style PI loop for voltage.
//! 3. [`freq`] / [`voltage`] — assemble the network-coupled LTI systems
//!    `ẋ = Ax + Bu` from the reduced network and the device list.
//! 4. [`powerflow`] — Newton-Raphson AC power flow with distributed slack,
//!    used to estimate the per-generator reactive power step that drives the
//!    voltage model.
//! 5. [`lti`] — the closed-form trajectory of a constant-input LTI system via
//!    spectral factorization (with a matrix-exponential fallback), plus an
//!    independent RK4 oracle for validation.
//! 6. [`metrics`] — nadir, RoCoF at PMU rate, hertz-seconds, settling time,
//!    maximum voltage deviation.
//! 7. [`fit`] — derivative-free calibration of the SG transfer functions from
//!    step-response data.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable default
//! features to drop `std`. All operations are pure and deterministic; types
//! are immutable after construction and safe to share across threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod case;
pub mod device;
pub mod fit;
pub mod freq;
pub mod lti;
pub mod metrics;
pub mod powerflow;
pub mod reduction;
pub mod sparse;
pub mod voltage;

pub use case::{Branch, Bus, BusKind, Constants, DisturbanceSpec, Generator, Load, NetworkCase};
pub use device::{DeviceKind, DeviceParams, GfmFreqParams, GfmVoltParams, SgFreqParams, SgVoltParams};
pub use fit::{fit_transfer_function, simulate_step, FamilyParams, FitReport, ModelFamily, StepResponseData};
pub use freq::{assemble_frequency_model, droop_stiffness, steady_state_frequency};
pub use lti::{
    eigen_diagnostics, solve_analytic, solve_expm, solve_numeric_oracle, solve_spectral,
    EigenReport, InputKind, InputLabel, LtiModel, SolveError, SpectralFactorization, Stability,
    StateKind, StateLabel, Trajectory,
};
pub use metrics::{
    frequency_metrics, hertz_sec, max_voltage_deviation, nadir, rocof, settling_time,
    to_frequency_hz, voltage_metrics, FrequencyMetrics, SettlingTime, VoltageMetrics,
};
pub use powerflow::{reactive_setpoints, solve_ac_powerflow, solve_ac_powerflow_from, PowerFlowSolution};
pub use reduction::{build_susceptance, kron_reduce, ReducedNetwork, SusceptancePartition};
pub use voltage::{assemble_voltage_model, estimate_reactive_disturbance, ReactiveDisturbance};
