//! Closed-form boundary classifications and verdicts for the four canonical
//! models. Every rule dispatches on the derived exponents.

use crate::classify::{ExitBehavior, MartingaleReport, Tri};
use crate::error::{Error, Result};
use crate::model::Measure;
use crate::quad::Finiteness;
use crate::scale::BoundaryProfile;

/// State space of the Schöbel–Zhu variance factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SzSupport {
    /// `(−∞, ∞)`, the model's natural state space.
    RealLine,
    /// `(0, ∞)`: the factor is stopped when it first reaches zero.
    HalfLine,
}

impl SzSupport {
    pub fn label(&self) -> &'static str {
        match self {
            SzSupport::RealLine => "real-line",
            SzSupport::HalfLine => "half-line",
        }
    }
}

impl std::str::FromStr for SzSupport {
    type Err = Error;
    fn from_str(s: &str) -> Result<SzSupport> {
        match s {
            "real-line" | "real_line" => Ok(SzSupport::RealLine),
            "half-line" | "half_line" => Ok(SzSupport::HalfLine),
            _ => Err(Error::Validation(format!("unknown support '{s}' (real-line|half-line)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalParams {
    /// `dY = κ(θ − Y)dt + ξ√Y dW`, `b = √Y`.
    Heston { kappa: f64, theta: f64, xi: f64, rho: f64 },
    /// `dY = (ωY − θY²)dt + ξY^{3/2} dW`, `b = √Y`.
    ThreeHalves { omega: f64, theta: f64, xi: f64, rho: f64 },
    /// `dY = κ(θ − Y)dt + γ dW`, `b = Y`.
    SchobelZhu { kappa: f64, theta: f64, gamma: f64, rho: f64, support: SzSupport },
    /// `dY = μY dt + σY dW`, `b = √Y`.
    HullWhite { mu: f64, sigma: f64, rho: f64 },
}

/// Derived exponents of a Heston model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonExp {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Derived exponents of a 3/2 model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeHalvesExp {
    pub a: f64,
    pub a_tilde: f64,
    pub d: f64,
}

/// Derived exponents of a Hull–White model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullWhiteExp {
    pub alpha: f64,
    pub gamma: f64,
}

/// The three regimes of the Hull–White drift against half the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HwCase {
    /// `μ > σ²/2`, i.e. `α > 1`.
    I,
    /// `μ = σ²/2`.
    II,
    /// `μ < σ²/2`.
    III,
}

impl CanonicalParams {
    pub fn schobel_zhu(kappa: f64, theta: f64, gamma: f64, rho: f64) -> CanonicalParams {
        CanonicalParams::SchobelZhu { kappa, theta, gamma, rho, support: SzSupport::RealLine }
    }

    pub fn model_id(&self) -> &'static str {
        match self {
            CanonicalParams::Heston { .. } => "heston",
            CanonicalParams::ThreeHalves { .. } => "three_halves",
            CanonicalParams::SchobelZhu { .. } => "schobel_zhu",
            CanonicalParams::HullWhite { .. } => "hull_white",
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            CanonicalParams::Heston { rho, .. }
            | CanonicalParams::ThreeHalves { rho, .. }
            | CanonicalParams::SchobelZhu { rho, .. }
            | CanonicalParams::HullWhite { rho, .. } => rho,
        }
    }

    /// Checks the parameter constraints of the family, naming the first one
    /// violated.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let rho = self.rho();
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Validation(format!("rho must lie in [-1, 1], got {rho}")));
        }
        match *self {
            CanonicalParams::Heston { kappa, theta, xi, .. } => {
                pos("kappa", kappa)?;
                pos("theta", theta)?;
                pos("xi", xi)
            }
            CanonicalParams::ThreeHalves { omega, theta, xi, .. } => {
                pos("omega", omega)?;
                pos("xi", xi)?;
                if theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Validation(format!("theta must be finite, got {theta}")))
                }
            }
            CanonicalParams::SchobelZhu { kappa, theta, gamma, .. } => {
                pos("kappa", kappa)?;
                pos("theta", theta)?;
                pos("gamma", gamma)
            }
            CanonicalParams::HullWhite { mu, sigma, .. } => {
                pos("mu", mu)?;
                pos("sigma", sigma)
            }
        }
    }

    pub fn heston_exp(&self) -> Option<HestonExp> {
        match *self {
            CanonicalParams::Heston { kappa, theta, xi, rho } => Some(HestonExp {
                alpha: 2.0 * kappa * theta / (xi * xi),
                beta: 2.0 * kappa / (xi * xi),
                gamma: 2.0 * kappa / (xi * xi) - 2.0 * rho / xi,
            }),
            _ => None,
        }
    }

    pub fn three_halves_exp(&self) -> Option<ThreeHalvesExp> {
        match *self {
            CanonicalParams::ThreeHalves { omega, theta, xi, rho } => {
                let a = 2.0 * theta / (xi * xi);
                Some(ThreeHalvesExp { a, a_tilde: a - 2.0 * rho / xi, d: 2.0 * omega / (xi * xi) })
            }
            _ => None,
        }
    }

    /// `α = κ − ργ`, the mean-reversion speed under the auxiliary measure.
    pub fn schobel_zhu_alpha(&self) -> Option<f64> {
        match *self {
            CanonicalParams::SchobelZhu { kappa, gamma, rho, .. } => Some(kappa - rho * gamma),
            _ => None,
        }
    }

    pub fn hull_white_exp(&self) -> Option<HullWhiteExp> {
        match *self {
            CanonicalParams::HullWhite { mu, sigma, rho } => {
                Some(HullWhiteExp { alpha: 4.0 * mu / (sigma * sigma) - 1.0, gamma: 4.0 * rho / sigma })
            }
            _ => None,
        }
    }

    /// Derived exponents as named values, for reports.
    pub fn derived(&self) -> Vec<(String, f64)> {
        let named = |v: &[(&str, f64)]| v.iter().map(|(n, x)| (n.to_string(), *x)).collect();
        if let Some(e) = self.heston_exp() {
            return named(&[("alpha", e.alpha), ("beta", e.beta), ("gamma", e.gamma)]);
        }
        if let Some(e) = self.three_halves_exp() {
            return named(&[("a", e.a), ("a_tilde", e.a_tilde), ("d", e.d)]);
        }
        if let Some(a) = self.schobel_zhu_alpha() {
            return named(&[("alpha", a)]);
        }
        let e = self.hull_white_exp().expect("four families");
        named(&[("alpha", e.alpha), ("gamma", e.gamma)])
    }
}

impl HullWhiteExp {
    pub fn case(&self) -> HwCase {
        if self.alpha > 1.0 {
            HwCase::I
        } else if self.alpha == 1.0 {
            HwCase::II
        } else {
            HwCase::III
        }
    }
}

fn fin(b: bool) -> Finiteness {
    if b {
        Finiteness::FINITE
    } else {
        Finiteness::INFINITE
    }
}

/// Tabulated finiteness of `s`, `v`, `v_b` at both boundaries.
pub fn analytic_profile(params: &CanonicalParams, measure: Measure) -> BoundaryProfile {
    let tilde = measure == Measure::Tilde;
    // [s_left, s_right, v_left, v_right, vb_left, vb_right] as "finite?" flags.
    let f: [bool; 6] = match *params {
        CanonicalParams::Heston { .. } => {
            let e = params.heston_exp().unwrap();
            // Scale density y^{−α} e^{βy} (original) or y^{−α} e^{γy} (tilde).
            let g = if tilde { e.gamma } else { e.beta };
            let near_zero = e.alpha < 1.0;
            let s_right = g < 0.0 || (g == 0.0 && e.alpha > 1.0);
            [near_zero, s_right, near_zero, false, near_zero, false]
        }
        CanonicalParams::ThreeHalves { .. } => {
            let e = params.three_halves_exp().unwrap();
            let a = if tilde { e.a_tilde } else { e.a };
            // Scale density y^a e^{d/y}.
            [false, a < -1.0, false, a < -1.0, false, false]
        }
        CanonicalParams::SchobelZhu { support, .. } => {
            let alpha = if tilde { params.schobel_zhu_alpha().unwrap() } else { match *params {
                CanonicalParams::SchobelZhu { kappa, .. } => kappa,
                _ => unreachable!(),
            } };
            match support {
                SzSupport::HalfLine => [true, alpha <= 0.0, true, false, true, false],
                // Density exp(α(y − m)²/γ²) up to constants (exp(−2κθy/γ²) when α = 0).
                SzSupport::RealLine => [alpha < 0.0, alpha <= 0.0, false, false, false, false],
            }
        }
        CanonicalParams::HullWhite { .. } => {
            let e = params.hull_white_exp().unwrap();
            let case = e.case();
            if tilde {
                let s_right = e.gamma > 0.0 || (e.gamma == 0.0 && case == HwCase::I);
                [case == HwCase::III, s_right, false, e.gamma > 0.0, case == HwCase::III, false]
            } else {
                [case == HwCase::III, case == HwCase::I, false, false, case == HwCase::III, false]
            }
        }
    };
    BoundaryProfile {
        measure,
        s_left: fin(f[0]),
        s_right: fin(f[1]),
        v_left: fin(f[2]),
        v_right: fin(f[3]),
        vb_left: fin(f[4]),
        vb_right: fin(f[5]),
    }
}

/// Verdicts by direct inequalities on the derived exponents.
///
/// Order: true martingale, uniformly integrable, positive for finite `T`,
/// positive at infinity, absorbed at zero.
pub fn analytic_verdict_values(params: &CanonicalParams) -> [bool; 5] {
    match *params {
        CanonicalParams::Heston { .. } => {
            let e = params.heston_exp().unwrap();
            let pos_inf = e.alpha < 1.0;
            [true, e.alpha < 1.0 && e.gamma >= 0.0, true, pos_inf, !pos_inf]
        }
        CanonicalParams::ThreeHalves { .. } => {
            let e = params.three_halves_exp().unwrap();
            [e.a_tilde >= -1.0, false, e.a >= -1.0, false, true]
        }
        CanonicalParams::SchobelZhu { support: SzSupport::HalfLine, .. } => {
            let alpha = params.schobel_zhu_alpha().unwrap();
            [true, alpha > 0.0, true, true, false]
        }
        CanonicalParams::SchobelZhu { support: SzSupport::RealLine, .. } => [true, false, true, false, true],
        CanonicalParams::HullWhite { .. } => {
            let e = params.hull_white_exp().unwrap();
            let pos_inf = e.alpha < 1.0;
            [e.gamma <= 0.0, e.alpha < 1.0 && e.gamma <= 0.0, true, pos_inf, !pos_inf]
        }
    }
}

/// Oracle report: tabulated profiles, exit cases read off them, and verdicts
/// from the closed-form conditions. Exit probabilities are left empty.
pub fn analytic_verdicts(params: &CanonicalParams) -> MartingaleReport {
    let original = analytic_profile(params, Measure::Original);
    let tilde = analytic_profile(params, Measure::Tilde);
    let mut r = MartingaleReport::from_profiles(Tri::Yes, Tri::Yes, original, tilde);
    r.set_verdicts(analytic_verdict_values(params).map(Tri::from_bool));
    r.blocking.clear();
    r.exit_original = ExitBehavior::from_profile_kinds(&original);
    r.exit_tilde = ExitBehavior::from_profile_kinds(&tilde);
    r.derived = params.derived();
    r
}
