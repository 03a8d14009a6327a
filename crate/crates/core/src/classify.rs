//! Decision rules: exit behaviour of `Y`, finiteness of the integral
//! functional `φ`, and the martingale and positivity verdicts for `Z`.
//!
//! Rules are evaluated in three-valued logic over the profile fields, so a
//! verdict is definite only when every resolution of the inconclusive fields
//! gives the same answer.

use std::fmt;

use crate::analytic::analytic_verdicts;
use crate::error::{Error, Result};
use crate::model::{check_conditions, under, ConditionReport, DiffusionSpec, GridPolicy, Measure};
use crate::quad::Finiteness;
use crate::scale::{boundary_profile_with, scale_function, BoundaryProfile, ProfilePolicy};

/// Three-valued verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tri {
    Yes,
    No,
    Inconclusive,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }

    pub fn not(self) -> Tri {
        match self {
            Tri::Yes => Tri::No,
            Tri::No => Tri::Yes,
            Tri::Inconclusive => Tri::Inconclusive,
        }
    }

    pub fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::No, _) | (_, Tri::No) => Tri::No,
            (Tri::Yes, Tri::Yes) => Tri::Yes,
            _ => Tri::Inconclusive,
        }
    }

    pub fn or(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::Yes, _) | (_, Tri::Yes) => Tri::Yes,
            (Tri::No, Tri::No) => Tri::No,
            _ => Tri::Inconclusive,
        }
    }

    /// Conjunction used to combine condition checks.
    pub fn meet(self, o: Tri) -> Tri {
        self.and(o)
    }

    pub fn all<I: IntoIterator<Item = Tri>>(it: I) -> Tri {
        it.into_iter().fold(Tri::Yes, Tri::and)
    }

    pub fn any<I: IntoIterator<Item = Tri>>(it: I) -> Tri {
        it.into_iter().fold(Tri::No, Tri::or)
    }

    pub fn is_definite(self) -> bool {
        self != Tri::Inconclusive
    }

    pub fn label(self) -> &'static str {
        match self {
            Tri::Yes => "yes",
            Tri::No => "no",
            Tri::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Tri {
    type Err = Error;
    fn from_str(s: &str) -> Result<Tri> {
        match s {
            "yes" => Ok(Tri::Yes),
            "no" => Ok(Tri::No),
            "inconclusive" => Ok(Tri::Inconclusive),
            _ => Err(Error::Validation(format!("expected yes|no|inconclusive, got '{s}'"))),
        }
    }
}

fn finite(f: Finiteness) -> Tri {
    match f {
        Finiteness::Finite { .. } => Tri::Yes,
        Finiteness::Infinite { .. } => Tri::No,
        Finiteness::Inconclusive => Tri::Inconclusive,
    }
}

/// Feller's four cases for where `Y` can leave its interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCase {
    /// `s(ℓ) = −∞`, `s(r) = ∞`: no exit.
    A,
    /// Only `s(ℓ)` finite: exit at `ℓ` with positive probability.
    B,
    /// Only `s(r)` finite: exit at `r` with positive probability.
    C,
    /// Both finite: `Y` exits, at `r` with probability `exit_prob_right`.
    D,
    Inconclusive,
}

impl ExitCase {
    pub fn label(&self) -> &'static str {
        match self {
            ExitCase::A => "a",
            ExitCase::B => "b",
            ExitCase::C => "c",
            ExitCase::D => "d",
            ExitCase::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<ExitCase> {
        Some(match s {
            "a" => ExitCase::A,
            "b" => ExitCase::B,
            "c" => ExitCase::C,
            "d" => ExitCase::D,
            "inconclusive" => ExitCase::Inconclusive,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitBehavior {
    pub case: ExitCase,
    /// `P(lim Y = r)` in case (d), when the boundary limits of `s` are known.
    pub exit_prob_right: Option<f64>,
}

impl ExitBehavior {
    pub fn from_profile_kinds(profile: &BoundaryProfile) -> ExitBehavior {
        let case = match (profile.s_left, profile.s_right) {
            (Finiteness::Infinite { .. }, Finiteness::Infinite { .. }) => ExitCase::A,
            (Finiteness::Finite { .. }, Finiteness::Infinite { .. }) => ExitCase::B,
            (Finiteness::Infinite { .. }, Finiteness::Finite { .. }) => ExitCase::C,
            (Finiteness::Finite { .. }, Finiteness::Finite { .. }) => ExitCase::D,
            _ => ExitCase::Inconclusive,
        };
        ExitBehavior { case, exit_prob_right: None }
    }
}

/// Exit classification from the `s` fields of `profile`; in case (d) the exit
/// probability uses the extrapolated boundary limits of `s` and `s(x₀)` for
/// `spec` viewed under the profile's measure.
pub fn feller_exit(profile: &BoundaryProfile, spec: &DiffusionSpec) -> ExitBehavior {
    let mut out = ExitBehavior::from_profile_kinds(profile);
    if out.case == ExitCase::D {
        let view = under(spec, profile.measure);
        let sx0 = if view.start() == view.reference() { Ok(0.0) } else { scale_function(&view, view.start()) };
        if let (Some(sl), Some(sr), Ok(sx0)) = (profile.s_left.estimate(), profile.s_right.estimate(), sx0) {
            // s(ℓ) = −S_left, s(r) = S_right relative to c; the left-exit
            // probability is (s(r) − s(x₀))/(s(r) − s(ℓ)).
            let p = (sx0 + sl) / (sr + sl);
            if p.is_finite() {
                out.exit_prob_right = Some(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
            }
        }
    }
    out
}

/// Finiteness of the perpetual functional `φ_ζ = ∫_0^ζ b²(Y_u)du`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiVerdict {
    /// `P(φ_ζ < ∞) = 1`.
    AsFinite,
    /// `P(φ_ζ = ∞) = 1`.
    AsInfinite,
    /// `P(φ_ζ < ∞) ∈ (0, 1)`.
    Mixed,
    Inconclusive,
}

impl PhiVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            PhiVerdict::AsFinite => "as_finite",
            PhiVerdict::AsInfinite => "as_infinite",
            PhiVerdict::Mixed => "mixed",
            PhiVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Needs `s` and `v_b` at both ends to be definite and the profile to be
/// consistent; otherwise Inconclusive.
pub fn phi_perpetual(profile: &BoundaryProfile) -> PhiVerdict {
    let consulted = [profile.s_left, profile.s_right, profile.vb_left, profile.vb_right];
    if consulted.iter().any(|f| f.is_inconclusive()) || profile.consistency().is_err() {
        return PhiVerdict::Inconclusive;
    }
    let (sl, sr) = (profile.s_left.is_finite(), profile.s_right.is_finite());
    let (bl, br) = (profile.vb_left.is_finite(), profile.vb_right.is_finite());
    if !bl && !br {
        PhiVerdict::AsInfinite
    } else if (br && !sl) || (bl && !sr) || (bl && br) {
        PhiVerdict::AsFinite
    } else {
        PhiVerdict::Mixed
    }
}

/// Finiteness of `φ_{ζ∧T}` for every finite `T`: yes iff `v` is infinite at
/// both ends, or `v_b` is finite at one end and `v` infinite at the other, or
/// `v_b` is finite at both ends.
pub fn phi_capped(profile: &BoundaryProfile) -> Tri {
    let (vl, vr) = (finite(profile.v_left), finite(profile.v_right));
    let (bl, br) = (finite(profile.vb_left), finite(profile.vb_right));
    Tri::any([vl.not().and(vr.not()), br.and(vl.not()), bl.and(vr.not()), bl.and(br)])
}

/// The perpetual-finite rule shared by uniform integrability and positivity
/// at infinity: `v_b(r) < ∞` with `s(ℓ) = −∞`, or `v_b(ℓ) < ∞` with
/// `s(r) = ∞`, or both `v_b` finite.
pub fn phi_perpetual_finite(profile: &BoundaryProfile) -> Tri {
    let (sl, sr) = (finite(profile.s_left), finite(profile.s_right));
    let (bl, br) = (finite(profile.vb_left), finite(profile.vb_right));
    Tri::any([br.and(sl.not()), bl.and(sr.not()), bl.and(br)])
}

fn b_trivial(conditions: &ConditionReport) -> Tri {
    conditions.b_nontrivial.not()
}

/// The five verdicts from the two profiles and the `b ≢ 0` check.
fn rule_verdicts(original: &BoundaryProfile, tilde: &BoundaryProfile, trivial: Tri) -> [Tri; 5] {
    let vb_both_infinite = finite(original.vb_left).not().and(finite(original.vb_right).not());
    [
        phi_capped(tilde),
        trivial.or(phi_perpetual_finite(tilde)),
        phi_capped(original),
        trivial.or(phi_perpetual_finite(original)),
        trivial.not().and(vb_both_infinite),
    ]
}

/// Profile fields each verdict consults, by measure.
const CONSULTED: [(&str, Measure, &[&str]); 5] = [
    ("true_martingale", Measure::Tilde, &["v_left", "v_right", "vb_left", "vb_right"]),
    ("ui_martingale", Measure::Tilde, &["s_left", "s_right", "vb_left", "vb_right"]),
    ("positive_finite_t", Measure::Original, &["v_left", "v_right", "vb_left", "vb_right"]),
    ("positive_at_infinity", Measure::Original, &["s_left", "s_right", "vb_left", "vb_right"]),
    ("absorbed_at_zero", Measure::Original, &["vb_left", "vb_right"]),
];

/// Names of the verdict fields of a report, in report order.
pub const VERDICT_FIELDS: [&str; 5] =
    ["true_martingale", "ui_martingale", "positive_finite_t", "positive_at_infinity", "absorbed_at_zero"];

/// Verdicts, exit behaviour and the evidence behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub conditions_ok: Tri,
    pub true_martingale: Tri,
    pub ui_martingale: Tri,
    pub positive_finite_t: Tri,
    pub positive_at_infinity: Tri,
    pub absorbed_at_zero: Tri,
    pub exit_original: ExitBehavior,
    pub exit_tilde: ExitBehavior,
    pub profile_original: BoundaryProfile,
    pub profile_tilde: BoundaryProfile,
    /// Derived exponents of a canonical model, e.g. `("alpha", 0.5)`.
    pub derived: Vec<(String, f64)>,
    /// `verdict: measure.field` for each inconclusive field that kept a
    /// verdict from being definite.
    pub blocking: Vec<String>,
    pub diagnostics: Vec<String>,
    /// Oracle verdicts for canonical models.
    pub analytic: Option<Box<MartingaleReport>>,
    /// Fields where the numeric and analytic answers are both definite and differ.
    pub disagreements: Vec<String>,
}

impl MartingaleReport {
    pub fn verdicts(&self) -> [Tri; 5] {
        [
            self.true_martingale,
            self.ui_martingale,
            self.positive_finite_t,
            self.positive_at_infinity,
            self.absorbed_at_zero,
        ]
    }

    pub(crate) fn set_verdicts(&mut self, v: [Tri; 5]) {
        self.true_martingale = v[0];
        self.ui_martingale = v[1];
        self.positive_finite_t = v[2];
        self.positive_at_infinity = v[3];
        self.absorbed_at_zero = v[4];
    }

    pub fn any_inconclusive(&self) -> bool {
        self.verdicts().iter().any(|t| !t.is_definite()) || self.conditions_ok == Tri::Inconclusive
    }

    /// Assembles verdicts from two profiles and the `b ≢ 0` verdict.
    pub fn from_profiles(
        conditions_ok: Tri,
        b_nontrivial: Tri,
        original: BoundaryProfile,
        tilde: BoundaryProfile,
    ) -> MartingaleReport {
        let verdicts = rule_verdicts(&original, &tilde, b_nontrivial.not());
        let mut blocking = Vec::new();
        for ((name, measure, fields), v) in CONSULTED.iter().zip(verdicts.iter()) {
            if v.is_definite() {
                continue;
            }
            let profile = if *measure == Measure::Tilde { &tilde } else { &original };
            for f in fields.iter() {
                if profile.field(f).map(|x| x.is_inconclusive()).unwrap_or(false) {
                    blocking.push(format!("{name}: {}.{f}", measure.label()));
                }
            }
            if b_nontrivial == Tri::Inconclusive && *name != "true_martingale" && *name != "positive_finite_t" {
                blocking.push(format!("{name}: b_nontrivial"));
            }
        }
        let mut r = MartingaleReport {
            conditions_ok,
            true_martingale: Tri::Inconclusive,
            ui_martingale: Tri::Inconclusive,
            positive_finite_t: Tri::Inconclusive,
            positive_at_infinity: Tri::Inconclusive,
            absorbed_at_zero: Tri::Inconclusive,
            exit_original: ExitBehavior::from_profile_kinds(&original),
            exit_tilde: ExitBehavior::from_profile_kinds(&tilde),
            profile_original: original,
            profile_tilde: tilde,
            derived: Vec::new(),
            blocking,
            diagnostics: Vec::new(),
            analytic: None,
            disagreements: Vec::new(),
        };
        r.set_verdicts(verdicts);
        r
    }

    /// Invariants every report must satisfy. Returns the violated ones.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.ui_martingale == Tri::Yes && self.true_martingale != Tri::Yes {
            out.push("ui_martingale is yes but true_martingale is not".to_string());
        }
        if self.absorbed_at_zero == Tri::Yes && self.positive_at_infinity != Tri::No {
            out.push("absorbed_at_zero is yes but positive_at_infinity is not no".to_string());
        }
        if self.absorbed_at_zero.is_definite()
            && self.positive_at_infinity.is_definite()
            && self.absorbed_at_zero == self.positive_at_infinity
        {
            out.push("absorbed_at_zero and positive_at_infinity agree".to_string());
        }
        for p in [&self.profile_original, &self.profile_tilde] {
            if let Err(e) = p.consistency() {
                out.push(format!("{} profile: {e}", p.measure.label()));
            }
        }
        for e in [&self.exit_original, &self.exit_tilde] {
            if let Some(p) = e.exit_prob_right {
                if e.case != ExitCase::D || !(p > 0.0 && p < 1.0) {
                    out.push(format!("exit probability {p} outside case d or (0, 1)"));
                }
            }
        }
        out
    }
}

/// Knobs for [`full_report_with`].
#[derive(Debug, Clone, Default)]
pub struct ReportPolicy {
    pub grid: GridPolicy,
    pub profile: ProfilePolicy,
}

fn profiles(spec: &DiffusionSpec, policy: &ProfilePolicy) -> Result<(BoundaryProfile, BoundaryProfile)> {
    let original = boundary_profile_with(spec, Measure::Original, policy)?;
    let tilde = boundary_profile_with(spec, Measure::Tilde, policy)?;
    Ok((original, tilde))
}

/// Whether `Z` is a true martingale: the capped rule on the tilde profile.
pub fn martingale(spec: &DiffusionSpec) -> Result<Tri> {
    let p = boundary_profile_with(spec, Measure::Tilde, &ProfilePolicy::default())?;
    Ok(phi_capped(&p))
}

/// Whether `Z` is a uniformly integrable martingale.
pub fn ui_martingale(spec: &DiffusionSpec) -> Result<Tri> {
    let trivial = b_trivial(&check_conditions(spec, &GridPolicy::default())?);
    let p = boundary_profile_with(spec, Measure::Tilde, &ProfilePolicy::default())?;
    Ok(trivial.or(phi_perpetual_finite(&p)))
}

/// Whether `P(Z_T > 0) = 1` for every finite `T`.
pub fn positivity_finite(spec: &DiffusionSpec) -> Result<Tri> {
    let p = boundary_profile_with(spec, Measure::Original, &ProfilePolicy::default())?;
    Ok(phi_capped(&p))
}

/// Whether `P(Z_∞ > 0) = 1`.
pub fn positivity_infinite(spec: &DiffusionSpec) -> Result<Tri> {
    let trivial = b_trivial(&check_conditions(spec, &GridPolicy::default())?);
    let p = boundary_profile_with(spec, Measure::Original, &ProfilePolicy::default())?;
    Ok(trivial.or(phi_perpetual_finite(&p)))
}

/// Whether `Z_∞ = 0` almost surely: `b ≢ 0` and `v_b` infinite at both ends.
pub fn absorbed_zero(spec: &DiffusionSpec) -> Result<Tri> {
    let trivial = b_trivial(&check_conditions(spec, &GridPolicy::default())?);
    let p = boundary_profile_with(spec, Measure::Original, &ProfilePolicy::default())?;
    Ok(trivial.not().and(finite(p.vb_left).not()).and(finite(p.vb_right).not()))
}

/// Runs every check on `spec`. Failures become inconclusive verdicts with a
/// diagnostic; for canonical models the oracle verdicts are attached and
/// compared.
pub fn full_report(spec: &DiffusionSpec) -> MartingaleReport {
    full_report_with(spec, &ReportPolicy::default())
}

pub fn full_report_with(spec: &DiffusionSpec, policy: &ReportPolicy) -> MartingaleReport {
    let mut diagnostics = Vec::new();
    let (conditions_ok, b_nontrivial) = match check_conditions(spec, &policy.grid) {
        Ok(c) => {
            diagnostics.extend(c.notes.iter().cloned());
            (c.all_hold(), c.b_nontrivial)
        }
        Err(e) => {
            diagnostics.push(format!("condition check: {e}"));
            (Tri::Inconclusive, Tri::Inconclusive)
        }
    };
    let blank = |m| BoundaryProfile::from_fields(m, [Finiteness::Inconclusive; 6]);
    let (original, tilde) = match profiles(spec, &policy.profile) {
        Ok(p) => p,
        Err(e) => {
            diagnostics.push(format!("boundary profile: {e}"));
            (blank(Measure::Original), blank(Measure::Tilde))
        }
    };
    let mut report = MartingaleReport::from_profiles(conditions_ok, b_nontrivial, original, tilde);
    report.exit_original = feller_exit(&original, spec);
    report.exit_tilde = feller_exit(&tilde, spec);
    report.diagnostics = diagnostics;
    if let Some(d) = spec.descriptor() {
        report.derived = d.params.derived();
        if d.measure == Measure::Original {
            let oracle = analytic_verdicts(&d.params);
            report.disagreements = disagreements(&report, &oracle);
            report.analytic = Some(Box::new(oracle));
        }
    }
    report
}

/// Fields on which two reports give different definite answers.
pub fn disagreements(numeric: &MartingaleReport, oracle: &MartingaleReport) -> Vec<String> {
    let mut out = Vec::new();
    for ((name, a), b) in VERDICT_FIELDS.iter().zip(numeric.verdicts()).zip(oracle.verdicts()) {
        if a.is_definite() && b.is_definite() && a != b {
            out.push(format!("{name}: numeric {a}, analytic {b}"));
        }
    }
    for (mine, theirs) in [
        (&numeric.profile_original, &oracle.profile_original),
        (&numeric.profile_tilde, &oracle.profile_tilde),
    ] {
        for (name, (a, b)) in
            crate::scale::PROFILE_FIELDS.iter().zip(mine.fields().iter().zip(theirs.fields().iter()))
        {
            if !a.is_inconclusive() && !b.is_inconclusive() && !a.same_kind(b) {
                out.push(format!("{}.{name}: numeric {}, analytic {}", mine.measure.label(), a.label(), b.label()));
            }
        }
    }
    out
}
