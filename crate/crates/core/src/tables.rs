//! Classification and summary tables regenerated from the analytic oracle.
//!
//! Each table walks a fixed parameter grid; every row is one grid point with
//! the case it falls in and the tabulated boundary behaviour. Parameters are
//! chosen so the derived exponents are exact binary fractions, so points on a
//! critical line really sit on it.

use crate::analytic::{analytic_profile, analytic_verdict_values, CanonicalParams, HwCase, SzSupport};
use crate::model::Measure;
use crate::quad::Finiteness;
use crate::scale::PROFILE_FIELDS;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub case: String,
    pub params: CanonicalParams,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: &'static str,
    pub family: &'static str,
    pub title: &'static str,
    pub measure: Measure,
    pub columns: Vec<&'static str>,
    pub rows: Vec<TableRow>,
}

const ALL: [usize; 6] = [0, 1, 2, 3, 4, 5];
const V_ONLY: [usize; 4] = [2, 3, 4, 5];

fn cell(field: usize, f: &Finiteness) -> String {
    match (field, f.is_finite()) {
        (0, true) => ">-inf",
        (0, false) => "-inf",
        (_, true) => "<inf",
        (_, false) => "inf",
    }
    .to_string()
}

fn row(case: String, params: CanonicalParams, measure: Measure, cols: &[usize]) -> TableRow {
    let f = analytic_profile(&params, measure).fields();
    TableRow { case, params, cells: cols.iter().map(|&i| cell(i, &f[i])).collect() }
}

fn columns(cols: &[usize]) -> Vec<&'static str> {
    cols.iter().map(|&i| PROFILE_FIELDS[i]).collect()
}

fn cmp_label(name: &str, v: f64, at: f64) -> String {
    let op = if v < at { "<" } else if v == at { "=" } else { ">" };
    format!("{name}{op}{at}")
}

pub const HESTON_ALPHAS: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.25, 2.0];
pub const HESTON_GAMMAS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
pub const THREE_HALVES_AS: [f64; 6] = [-2.0, -1.5, -1.0, -0.5, 0.0, 1.0];
pub const SZ_ALPHAS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
pub const SZ_KAPPAS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const HW_ALPHAS: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];
pub const HW_GAMMAS: [f64; 3] = [-1.0, 0.0, 1.0];

/// Heston with `ξ = 1`, `κ = ½`: `α = θ`, `γ = 1 − 2ρ`.
pub fn heston_at(alpha: f64, gamma: f64) -> CanonicalParams {
    CanonicalParams::Heston { kappa: 0.5, theta: alpha, xi: 1.0, rho: (1.0 - gamma) / 2.0 }
}

/// 3/2 with `ξ = ω = 1`: `a = 2θ`, `ã = a − 2ρ`.
pub fn three_halves_at(a: f64, rho: f64) -> CanonicalParams {
    CanonicalParams::ThreeHalves { omega: 1.0, theta: a / 2.0, xi: 1.0, rho }
}

/// Schöbel–Zhu with `γ = θ = 1`, `κ = ½`: tilde `α = ½ − ρ`.
pub fn schobel_zhu_at(alpha: f64, support: SzSupport) -> CanonicalParams {
    CanonicalParams::SchobelZhu { kappa: 0.5, theta: 1.0, gamma: 1.0, rho: 0.5 - alpha, support }
}

/// Hull–White with `σ = 1`: `α = 4μ − 1`, `γ = 4ρ`.
pub fn hull_white_at(alpha: f64, gamma: f64) -> CanonicalParams {
    CanonicalParams::HullWhite { mu: (alpha + 1.0) / 4.0, sigma: 1.0, rho: gamma / 4.0 }
}

fn hw_case_label(p: &CanonicalParams) -> &'static str {
    match p.hull_white_exp().unwrap().case() {
        HwCase::I => "(I) mu>sigma^2/2",
        HwCase::II => "(II) mu=sigma^2/2",
        HwCase::III => "(III) mu<sigma^2/2",
    }
}

fn sz_tables(support: SzSupport) -> Vec<Table> {
    let (suffix_a, suffix_b) = match support {
        SzSupport::HalfLine => ("sz-tilde", "sz-original"),
        SzSupport::RealLine => ("sz-real-tilde", "sz-real-original"),
    };
    let tilde = SZ_ALPHAS
        .iter()
        .map(|&a| {
            // On the real line α = 0 is its own case: constant positive drift, so
            // s(r) < ∞ while s(ℓ) = −∞.
            let case = match support {
                SzSupport::HalfLine if a <= 0.0 => format!("alpha<=0 [{}]", cmp_label("alpha", a, 0.0)),
                SzSupport::HalfLine => format!("alpha>0 [{}]", cmp_label("alpha", a, 0.0)),
                SzSupport::RealLine => cmp_label("alpha", a, 0.0),
            };
            row(case, schobel_zhu_at(a, support), Measure::Tilde, &ALL)
        })
        .collect();
    let original = SZ_KAPPAS
        .iter()
        .map(|&k| {
            let p = CanonicalParams::SchobelZhu { kappa: k, theta: 1.0, gamma: 1.0, rho: 0.0, support };
            row("alpha>0".into(), p, Measure::Original, &ALL)
        })
        .collect();
    let (ta, tb) = match support {
        SzSupport::HalfLine => ("Schobel-Zhu, tilde measure, state space (0, inf)", "Schobel-Zhu, original measure, state space (0, inf)"),
        SzSupport::RealLine => ("Schobel-Zhu, tilde measure, state space (-inf, inf)", "Schobel-Zhu, original measure, state space (-inf, inf)"),
    };
    vec![
        Table { id: suffix_a, family: "schobel_zhu", title: ta, measure: Measure::Tilde, columns: columns(&ALL), rows: tilde },
        Table { id: suffix_b, family: "schobel_zhu", title: tb, measure: Measure::Original, columns: columns(&ALL), rows: original },
    ]
}

/// All classification tables, in a fixed order.
pub fn classification_tables() -> Vec<Table> {
    let heston_alpha_case = |a: f64| match a {
        a if a > 1.0 => "alpha>1",
        a if a == 1.0 => "alpha=1",
        _ => "alpha<1",
    };
    let heston_v_case = |a: f64| if a >= 1.0 { "alpha>=1" } else { "alpha<1" };
    let gamma_case = |g: f64| cmp_label("gamma", g, 0.0);

    let mut heston_v = Vec::new();
    let mut heston_full = Vec::new();
    for &a in &HESTON_ALPHAS {
        for &g in &HESTON_GAMMAS {
            let p = heston_at(a, g);
            heston_v.push(row(heston_v_case(a).into(), p, Measure::Tilde, &V_ONLY));
            heston_full.push(row(format!("{} {}", heston_alpha_case(a), gamma_case(g)), p, Measure::Tilde, &ALL));
        }
    }
    let heston_original = HESTON_ALPHAS
        .iter()
        .map(|&a| row(heston_alpha_case(a).into(), heston_at(a, 1.0), Measure::Original, &ALL))
        .collect();

    let th_case = |a: f64, name: &str| if a < -1.0 { format!("{name}<-1") } else { format!("{name}>=-1") };
    let th_tilde = THREE_HALVES_AS
        .iter()
        .map(|&at| row(th_case(at, "a_tilde"), three_halves_at(0.0, -at / 2.0), Measure::Tilde, &V_ONLY))
        .collect();
    let th_original = THREE_HALVES_AS
        .iter()
        .map(|&a| row(th_case(a, "a"), three_halves_at(a, 0.0), Measure::Original, &V_ONLY))
        .collect();

    let mut hw_v = Vec::new();
    let mut hw_full = Vec::new();
    for &a in &HW_ALPHAS {
        for &g in &HW_GAMMAS {
            let p = hull_white_at(a, g);
            let gv = if g <= 0.0 { "gamma<=0".to_string() } else { "gamma>0".to_string() };
            hw_v.push(row(format!("{} {gv}", hw_case_label(&p)), p, Measure::Tilde, &V_ONLY));
            hw_full.push(row(format!("{} {}", hw_case_label(&p), gamma_case(g)), p, Measure::Tilde, &ALL));
        }
    }
    let hw_original = HW_ALPHAS
        .iter()
        .map(|&a| {
            let p = hull_white_at(a, 0.0);
            row(hw_case_label(&p).into(), p, Measure::Original, &ALL)
        })
        .collect();

    let mut tables = vec![
        Table { id: "heston-tilde-v", family: "heston", title: "Heston, tilde measure, test functions", measure: Measure::Tilde, columns: columns(&V_ONLY), rows: heston_v },
        Table { id: "heston-tilde", family: "heston", title: "Heston, tilde measure", measure: Measure::Tilde, columns: columns(&ALL), rows: heston_full },
        Table { id: "heston-original", family: "heston", title: "Heston, original measure", measure: Measure::Original, columns: columns(&ALL), rows: heston_original },
        Table { id: "three-halves-tilde", family: "three_halves", title: "3/2, tilde measure", measure: Measure::Tilde, columns: columns(&V_ONLY), rows: th_tilde },
        Table { id: "three-halves-original", family: "three_halves", title: "3/2, original measure", measure: Measure::Original, columns: columns(&V_ONLY), rows: th_original },
    ];
    tables.extend(sz_tables(SzSupport::HalfLine));
    tables.extend(sz_tables(SzSupport::RealLine));
    tables.extend([
        Table { id: "hull-white-tilde-v", family: "hull_white", title: "Hull-White, tilde measure, test functions", measure: Measure::Tilde, columns: columns(&V_ONLY), rows: hw_v },
        Table { id: "hull-white-tilde", family: "hull_white", title: "Hull-White, tilde measure", measure: Measure::Tilde, columns: columns(&ALL), rows: hw_full },
        Table { id: "hull-white-original", family: "hull_white", title: "Hull-White, original measure", measure: Measure::Original, columns: columns(&ALL), rows: hw_original },
    ]);
    tables
}

/// One point of the verdict summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub params: CanonicalParams,
    /// True martingale, UI martingale, positive for finite `T`, positive at
    /// infinity.
    pub verdicts: [bool; 4],
}

/// Parameter grid for the verdict summary, at least six points per family
/// covering every branch of the closed-form conditions.
pub fn summary_grid() -> Vec<CanonicalParams> {
    let h = |kappa, theta, xi, rho| CanonicalParams::Heston { kappa, theta, xi, rho };
    let t = |omega, theta, xi, rho| CanonicalParams::ThreeHalves { omega, theta, xi, rho };
    let s = |kappa, gamma, rho| CanonicalParams::SchobelZhu { kappa, theta: 1.0, gamma, rho, support: SzSupport::HalfLine };
    let w = |mu, sigma, rho| CanonicalParams::HullWhite { mu, sigma, rho };
    vec![
        // Heston: Feller (κ ≥ ξ²/2θ) on/off × ρξ ≤ κ on/off.
        h(1.0, 1.0, 2.0, 0.0),
        h(1.0, 1.0, 2.0, 0.5),
        h(1.0, 1.0, 2.0, 0.75),
        h(1.0, 1.0, 2.0, -0.9),
        h(2.0, 1.0, 2.0, 0.0),
        h(2.0, 1.0, 1.0, 0.9),
        h(0.5, 2.0, 2.0, 0.5),
        // 3/2: ξ² + 2θ against 0 and 2ρξ.
        t(1.0, 1.0, 1.0, 0.0),
        t(1.0, 1.0, 1.0, 1.0),
        t(1.0, -0.5, 1.0, 0.0),
        t(1.0, -0.25, 1.0, 0.5),
        t(1.0, -1.0, 1.0, -0.5),
        t(1.0, -1.0, 1.0, 0.0),
        t(1.0, 0.5, 2.0, 0.75),
        // Schöbel–Zhu: κ against ργ.
        s(1.0, 1.0, 0.0),
        s(1.0, 1.0, 0.5),
        s(1.0, 1.0, 1.0),
        s(0.5, 1.0, 0.75),
        s(2.0, 0.5, -1.0),
        s(0.25, 2.0, 0.125),
        // Hull–White: ρ sign × μ against σ²/2.
        w(0.1, 1.0, -0.5),
        w(0.1, 1.0, 0.0),
        w(0.1, 1.0, 0.3),
        w(0.5, 1.0, -0.5),
        w(0.5, 1.0, 0.5),
        w(1.0, 1.0, -0.5),
        w(1.0, 1.0, 0.0),
        w(1.0, 1.0, 0.5),
    ]
}

pub fn summary_rows() -> Vec<SummaryRow> {
    summary_grid()
        .into_iter()
        .map(|params| {
            let v = analytic_verdict_values(&params);
            SummaryRow { params, verdicts: [v[0], v[1], v[2], v[3]] }
        })
        .collect()
}

fn params_text(p: &CanonicalParams) -> String {
    match *p {
        CanonicalParams::Heston { kappa, theta, xi, rho } => format!("kappa={kappa} theta={theta} xi={xi} rho={rho}"),
        CanonicalParams::ThreeHalves { omega, theta, xi, rho } => format!("omega={omega} theta={theta} xi={xi} rho={rho}"),
        CanonicalParams::SchobelZhu { kappa, theta, gamma, rho, support } => {
            format!("kappa={kappa} theta={theta} gamma={gamma} rho={rho} support={}", support.label())
        }
        CanonicalParams::HullWhite { mu, sigma, rho } => format!("mu={mu} sigma={sigma} rho={rho}"),
    }
}

fn derived_text(p: &CanonicalParams) -> String {
    p.derived().iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(" ")
}

fn yn(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_table(t: &Table) -> String {
    let mut out = format!("# {} [{}]\n", t.title, t.id);
    let case_w = t.rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
    out.push_str(&format!("{:<case_w$}", "case"));
    for c in &t.columns {
        out.push_str(&format!(" {c:>8}"));
    }
    out.push_str("   point\n");
    for r in &t.rows {
        out.push_str(&format!("{:<case_w$}", r.case));
        for c in &r.cells {
            out.push_str(&format!(" {c:>8}"));
        }
        out.push_str(&format!("   {} ({})\n", params_text(&r.params), derived_text(&r.params)));
    }
    out
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# Summary: martingale and uniform integrability\n");
    out.push_str("model          true_mart  ui_mart   point\n");
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<10} {:<9} {} ({})\n",
            r.params.model_id(),
            yn(r.verdicts[0]),
            yn(r.verdicts[1]),
            params_text(&r.params),
            derived_text(&r.params)
        ));
    }
    out.push_str("\n# Summary: positivity\n");
    out.push_str("model          pos_T      pos_inf   point\n");
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<10} {:<9} {} ({})\n",
            r.params.model_id(),
            yn(r.verdicts[2]),
            yn(r.verdicts[3]),
            params_text(&r.params),
            derived_text(&r.params)
        ));
    }
    out
}

/// Structured form: one `table.<id>.<row>.<column>=<cell>` line per cell.
pub fn emit_tables(tables: &[Table], summary: &[SummaryRow]) -> String {
    let mut out = format!("svmart-report {} tables\n", crate::report::FORMAT_VERSION);
    for t in tables {
        out.push_str(&format!("table.{}.measure={}\n", t.id, t.measure.label()));
        for (i, r) in t.rows.iter().enumerate() {
            out.push_str(&format!("table.{}.{i}.case={}\n", t.id, r.case));
            out.push_str(&format!("table.{}.{i}.params={}\n", t.id, params_text(&r.params)));
            for (c, v) in t.columns.iter().zip(&r.cells) {
                out.push_str(&format!("table.{}.{i}.{c}={v}\n", t.id));
            }
        }
    }
    const NAMES: [&str; 4] = ["true_martingale", "ui_martingale", "positive_finite_t", "positive_at_infinity"];
    for (i, r) in summary.iter().enumerate() {
        out.push_str(&format!("summary.{i}.model={}\n", r.params.model_id()));
        out.push_str(&format!("summary.{i}.params={}\n", params_text(&r.params)));
        for (n, v) in NAMES.iter().zip(r.verdicts) {
            out.push_str(&format!("summary.{i}.{n}={}\n", yn(v)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_hit_the_intended_exponents() {
        for &a in &HESTON_ALPHAS {
            for &g in &HESTON_GAMMAS {
                let e = heston_at(a, g).heston_exp().unwrap();
                assert_eq!((e.alpha, e.gamma), (a, g));
            }
        }
        for &a in &HW_ALPHAS {
            for &g in &HW_GAMMAS {
                let e = hull_white_at(a, g).hull_white_exp().unwrap();
                assert_eq!((e.alpha, e.gamma), (a, g));
            }
        }
        for &a in &SZ_ALPHAS {
            assert_eq!(schobel_zhu_at(a, SzSupport::HalfLine).schobel_zhu_alpha(), Some(a));
        }
        for &a in &THREE_HALVES_AS {
            assert_eq!(three_halves_at(0.0, -a / 2.0).three_halves_exp().unwrap().a_tilde, a);
        }
    }

    #[test]
    fn every_grid_point_is_valid() {
        for t in classification_tables() {
            for r in &t.rows {
                r.params.validate().unwrap_or_else(|e| panic!("{}: {e}", t.id));
            }
        }
        for p in summary_grid() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn rows_within_a_case_agree() {
        for t in classification_tables() {
            let mut seen: Vec<(&str, &Vec<String>)> = Vec::new();
            for r in &t.rows {
                let key = r.case.split(" [").next().unwrap();
                if let Some((_, cells)) = seen.iter().find(|(k, _)| *k == key) {
                    assert_eq!(*cells, &r.cells, "{} {}", t.id, r.case);
                } else {
                    seen.push((key, &r.cells));
                }
            }
        }
    }
}
