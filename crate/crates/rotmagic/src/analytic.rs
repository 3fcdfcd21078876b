//! Closed-form dynamic polarizabilities and magic-window criteria.
//!
//! These formulas describe the M = 0 target state of each rotational level
//! near a narrow vibrational pole. They serve both as a fast prediction
//! layer and as the oracle against which the numeric Hamiltonian machinery
//! is validated.

use crate::consts::*;
use crate::model::{MoleculeParams, VibPole};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticError {
    #[error("detuning sits exactly on the {branch} rotational pole of J={j}")]
    PoleSingularity { j: i32, branch: &'static str },
    #[error("background polarizabilities are degenerate; no critical detuning exists")]
    DegenerateBackground,
    #[error("detuning 2pi x {detuning_ghz:.3} GHz is inside the rotational pole region of J={j}")]
    InsidePoleRegion { j: i32, detuning_ghz: f64 },
    #[error("pole v'={vprime} has no {side} neighbor in the pole list")]
    MissingNeighbor { vprime: u32, side: &'static str },
}

/// Angular weights of the two rotational branches.
#[derive(Clone, Copy, Debug)]
pub struct AngularFactors {
    pub a: f64,
    pub b: f64,
    pub j: i32,
    pub theta: f64,
}

/// A_J and B_J: weights of the J'' = J - 1 and J'' = J + 1 branches for the
/// M = 0 state with linear polarization tilted by theta.
pub fn angular_factors(j: i32, theta: f64) -> AngularFactors {
    let c2 = theta.cos().powi(2);
    let jf = j as f64;
    let a = if j == 0 {
        0.0
    } else {
        ((jf + 1.0) * (jf - 1.0) + (jf * jf + 1.0) * c2) / (2.0 * (2.0 * jf + 1.0) * (2.0 * jf - 1.0))
    };
    let b = ((jf + 2.0) * (jf + 1.0) + jf * (jf + 1.0) * c2) / (2.0 * (2.0 * jf + 3.0) * (2.0 * jf + 1.0));
    AngularFactors { a, b, j, theta }
}

/// Rotational offsets of the two branch poles relative to the J=0 -> J'=1
/// transition: the poles of alpha_J sit at detunings -L_J and -R_J.
pub fn branch_poles(j: i32, b_v: f64, b_vp: f64) -> (f64, f64) {
    let jf = j as f64;
    let l = jf * (jf + 1.0) * b_v - (jf * (jf - 1.0) - 2.0) * b_vp;
    let r = jf * (jf + 1.0) * b_v - ((jf + 1.0) * (jf + 2.0) - 2.0) * b_vp;
    (l, r)
}

/// Both branch offsets packaged with their J.
#[derive(Clone, Copy, Debug)]
pub struct BranchPoles {
    pub l: f64,
    pub r: f64,
    pub j: i32,
}

impl BranchPoles {
    pub fn of(j: i32, params: &MoleculeParams) -> Self {
        let (l, r) = branch_poles(j, params.b_v, params.b_vp);
        BranchPoles { l, r, j }
    }
}

/// 3 pi c^2 / (2 omega^3), the conversion from a transition width to a
/// polarizability scale.
pub fn pole_strength(omega: f64) -> f64 {
    3.0 * std::f64::consts::PI * C * C / (2.0 * omega.powi(3))
}

/// Single-pole polarizability of the |J, M=0> state at a detuning from the
/// given pole, in J/(W/m^2).
pub fn alpha_analytic(
    j: i32,
    theta: f64,
    detuning: f64,
    params: &MoleculeParams,
    pole: &VibPole,
) -> Result<f64, AnalyticError> {
    let af = angular_factors(j, theta);
    let (l, r) = branch_poles(j, params.b_v, params.b_vp);
    let k = pole_strength(pole.omega) * pole.gamma;
    let mut alpha = af.a * params.alpha_bg_par + af.b * params.alpha_bg_par
        + (1.0 - af.a - af.b) * params.alpha_bg_perp;
    if af.a != 0.0 {
        let denom = detuning + l;
        if denom == 0.0 {
            return Err(AnalyticError::PoleSingularity { j, branch: "left" });
        }
        alpha -= k * af.a / denom;
    }
    if af.b != 0.0 {
        let denom = detuning + r;
        if denom == 0.0 {
            return Err(AnalyticError::PoleSingularity { j, branch: "right" });
        }
        alpha -= k * af.b / denom;
    }
    Ok(alpha)
}

/// All-poles analytic polarizability: the same closed form summed over the
/// complete pole list, with the detuning referenced to `ref_pole`. This is
/// the analytic twin of the full AC Hamiltonian for the M = 0 target.
pub fn alpha_model(
    j: i32,
    theta: f64,
    detuning: f64,
    params: &MoleculeParams,
    ref_pole: u32,
) -> Result<f64, AnalyticError> {
    let omega_ref = params
        .poles
        .iter()
        .find(|p| p.vprime == ref_pole)
        .expect("reference pole present")
        .omega;
    let af = angular_factors(j, theta);
    let (l, r) = branch_poles(j, params.b_v, params.b_vp);
    let mut alpha = (af.a + af.b) * params.alpha_bg_par
        + (1.0 - af.a - af.b) * params.alpha_bg_perp;
    for pole in &params.poles {
        let delta = detuning + omega_ref - pole.omega;
        let k = pole_strength(pole.omega) * pole.gamma;
        if af.a != 0.0 {
            let denom = delta + l;
            if denom == 0.0 {
                return Err(AnalyticError::PoleSingularity { j, branch: "left" });
            }
            alpha -= k * af.a / denom;
        }
        if af.b != 0.0 {
            let denom = delta + r;
            if denom == 0.0 {
                return Err(AnalyticError::PoleSingularity { j, branch: "right" });
            }
            alpha -= k * af.b / denom;
        }
    }
    Ok(alpha)
}

/// Transition width from the transition dipole moment: Gamma = omega^3 mu^2 / (3 pi eps0 hbar c^3).
pub fn gamma_from_dipole(mu: f64, omega: f64) -> f64 {
    omega.powi(3) * mu * mu / (3.0 * std::f64::consts::PI * EPS0 * HBAR * C.powi(3))
}

/// Transition dipole moment from the width; inverse of [`gamma_from_dipole`].
pub fn dipole_from_gamma(gamma: f64, omega: f64) -> f64 {
    (3.0 * std::f64::consts::PI * EPS0 * HBAR * C.powi(3) * gamma / omega.powi(3)).sqrt()
}

/// Critical detuning at which the pole term cancels the background
/// anisotropy: Delta_cr = (3 pi c^2 / 2 omega^3) Gamma / (alpha_par - alpha_perp).
pub fn critical_detuning(params: &MoleculeParams, pole: &VibPole) -> Result<f64, AnalyticError> {
    let dalpha = params.alpha_bg_par - params.alpha_bg_perp;
    if dalpha == 0.0 {
        return Err(AnalyticError::DegenerateBackground);
    }
    Ok(pole_strength(pole.omega) * pole.gamma / dalpha)
}

/// Leading remainder of the medium-detuning expansion and a bound on the
/// next order.
pub struct Remainder {
    /// (3 pi c^2 / 2 omega^3) (Gamma / Delta^2) [A_J L_J + B_J R_J]
    pub t: f64,
    /// magnitude bound on the next-order term
    pub next_order_bound: f64,
}

pub fn remainder_term(
    j: i32,
    theta: f64,
    detuning: f64,
    params: &MoleculeParams,
    pole: &VibPole,
) -> Result<Remainder, AnalyticError> {
    let (l, r) = branch_poles(j, params.b_v, params.b_vp);
    if detuning.abs() <= l.abs().max(r.abs()) {
        return Err(AnalyticError::InsidePoleRegion { j, detuning_ghz: detuning / TWO_PI / 1e9 });
    }
    let af = angular_factors(j, theta);
    let k = pole_strength(pole.omega) * pole.gamma;
    let t = k / (detuning * detuning) * (af.a * l + af.b * r);
    let next_order_bound = k / detuning.abs().powi(3) * (af.a * l * l + af.b * r * r);
    Ok(Remainder { t, next_order_bound })
}

/// Outcome of one width criterion for one pole.
#[derive(Clone, Copy, Debug)]
pub struct CriterionResult {
    /// The bound on Gamma, rad/s.
    pub bound: f64,
    /// Gamma / bound (lower criterion) or bound / Gamma (upper criterion);
    /// large ratios mean a comfortable pass.
    pub ratio: f64,
    pub pass: bool,
}

pub const DEFAULT_MARGIN: f64 = 5.0;

/// Lower bound on the transition width for a usable magic window:
/// Gamma >> (2 omega^3 / 3 pi c^2) (alpha_par - alpha_perp)^2 / |alpha_perp| sqrt(Bv^2 + Bvp^2).
pub fn criterion_lower(params: &MoleculeParams, pole: &VibPole, margin: f64) -> CriterionResult {
    let dalpha = params.alpha_bg_par - params.alpha_bg_perp;
    let bound = dalpha * dalpha / params.alpha_bg_perp.abs()
        * (params.b_v * params.b_v + params.b_vp * params.b_vp).sqrt()
        / pole_strength(pole.omega);
    let ratio = pole.gamma / bound;
    CriterionResult { bound, ratio, pass: ratio >= margin }
}

/// Upper bound: the predicted window must fall inside the spacing to the
/// neighboring vibrational pole, on the side selected by the sign of
/// alpha_par - alpha_perp.
pub fn criterion_upper(
    params: &MoleculeParams,
    pole: &VibPole,
    margin: f64,
) -> Result<CriterionResult, AnalyticError> {
    let dalpha = params.alpha_bg_par - params.alpha_bg_perp;
    let (neighbor, side) = if dalpha > 0.0 {
        (params.poles.iter().find(|p| p.vprime == pole.vprime + 1), "upper")
    } else {
        (pole.vprime.checked_sub(1).and_then(|v| params.poles.iter().find(|p| p.vprime == v)), "lower")
    };
    let neighbor = neighbor.ok_or(AnalyticError::MissingNeighbor { vprime: pole.vprime, side })?;
    let bound = dalpha.abs() * (neighbor.omega - pole.omega).abs() / pole_strength(pole.omega);
    let ratio = bound / pole.gamma;
    Ok(CriterionResult { bound, ratio, pass: ratio >= margin })
}
