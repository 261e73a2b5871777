use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::measures::{DensityGrid, DomainKind, Population};
use crate::ot::w2_squared;
use crate::solver::{interior_nodes, BarycenterResult, GRADIENT_RESIDUAL_C};

/// One inequality `lhs ≤ rhs + slack`. For two-sided bands `lhs` is the observed
/// extreme on the violated side, or the worse side when none is violated.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Whether the hypotheses of the bound hold for this run.
    pub applicable: bool,
    pub holds: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub h: f64,
    pub checks: Vec<BoundCheck>,
    /// Every applicable check holds.
    pub all_passed: bool,
}

impl DiagnosticsReport {
    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn upper(name: &str, lhs: f64, rhs: f64, slack: f64, applicable: bool, note: &str) -> BoundCheck {
    BoundCheck {
        name: name.into(),
        lhs,
        rhs,
        slack,
        applicable,
        holds: lhs <= rhs + slack,
        note: note.into(),
    }
}

/// `∫|∇log ρ|² ρ` with central differences inside active runs and one-sided
/// differences at their ends.
pub fn fisher_information(rho: &DensityGrid) -> f64 {
    let d = rho.domain();
    let logs = rho.log_values();
    let v = rho.values();
    let dim = d.dim();
    let pts = d.points();
    let mut acc = 0.0;
    for i in 0..d.len() {
        if !d.is_active(i) || v[i] == 0.0 {
            continue;
        }
        let mut g2 = 0.0;
        for a in 0..dim {
            let s = d.strides()[a];
            let h = d.spacing()[a];
            let j = d.axis_index(i, a);
            let left = j > 0 && d.is_active(i - s);
            let right = j + 1 < pts[a] && d.is_active(i + s);
            let g = match (left, right) {
                (true, true) => (logs[i + s] - logs[i - s]) / (2.0 * h),
                (false, true) => (logs[i + s] - logs[i]) / h,
                (true, false) => (logs[i] - logs[i - s]) / h,
                (false, false) => 0.0,
            };
            g2 += g * g;
        }
        acc += d.weights()[i] * v[i] * g2;
    }
    acc
}

/// Checks the a-priori bounds on a converged barycenter: Fisher information,
/// second moment, `p`-th moments for `p ∈ {2, 4}`, maximum principle and the
/// Hessian band of `λ log ρ̄`. Every check reports its discretization slack
/// `C·h` (relative where the bound has a scale).
pub fn diagnostics(result: &BarycenterResult, pop: &Population, log_concavity: Option<f64>) -> DiagnosticsReport {
    let rho = &result.density;
    let d = rho.domain();
    let dim = d.dim() as f64;
    let lambda = pop.lambda();
    let h = d.spacing().iter().cloned().fold(0.0, f64::max);
    let ch = GRADIENT_RESIDUAL_C * h;
    let convex = d.is_convex();
    let full = d.kind() == DomainKind::FullSpaceTruncation;
    let mut checks = Vec::new();

    match pop.grid_atoms() {
        Ok(atoms) => {
            let transport: Option<f64> = atoms
                .iter()
                .map(|(w, nu)| w2_squared(rho, nu).ok().map(|c| w * c))
                .sum();
            match transport {
                Some(t) => {
                    let rhs = t / (lambda * lambda);
                    checks.push(upper(
                        "fisher",
                        fisher_information(rho),
                        rhs,
                        ch * (1.0 + rhs),
                        true,
                        "∫|∇log ρ̄|²ρ̄ ≤ λ⁻² Σ p_i W₂²(ρ̄, ν_i)",
                    ));
                }
                None => checks.push(BoundCheck {
                    name: "fisher".into(),
                    lhs: fisher_information(rho),
                    rhs: f64::NAN,
                    slack: 0.0,
                    applicable: false,
                    holds: false,
                    note: "transport costs unavailable on this grid".into(),
                }),
            }

            let m2_atoms: f64 = atoms.iter().map(|(w, nu)| w * nu.second_moment()).sum();
            let rhs = 2.0 * lambda * dim + m2_atoms;
            checks.push(upper(
                "second_moment",
                rho.second_moment(),
                rhs,
                ch * (1.0 + rhs),
                convex && d.contains(&vec![0.0; d.dim()]),
                "m₂(ρ̄) ≤ 2λd + Σ p_i m₂(ν_i) on convex Ω ∋ 0",
            ));

            for p in [2.0, 4.0] {
                let lhs = rho.p_moment(p).unwrap_or(f64::NAN);
                let mp: f64 = atoms.iter().map(|(w, nu)| w * nu.p_moment(p).unwrap_or(f64::NAN)).sum();
                let rhs = 6f64.powf(p) / 2.0 * mp + (3456.0 * lambda).powf(p / 2.0) * gamma((dim + p) / 2.0);
                checks.push(upper(
                    &format!("moment_p{p}"),
                    lhs,
                    rhs,
                    ch * (1.0 + rhs),
                    full,
                    "m_p(ρ̄) ≤ (6^p/2) Σ p_i m_p(ν_i) + (3456λ)^{p/2} Γ((d+p)/2) on a full-space truncation",
                ));
            }

            let sup = atoms.iter().map(|(_, nu)| nu.max_value()).fold(0.0, f64::max);
            checks.push(upper(
                "max_principle",
                rho.max_value(),
                sup,
                ch * sup,
                convex,
                "max ρ̄ ≤ max_i ‖ν_i‖_∞ on convex Ω",
            ));
        }
        Err(_) => checks.push(BoundCheck {
            name: "atoms".into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: 0.0,
            applicable: false,
            holds: false,
            note: "diagnostics need grid atoms".into(),
        }),
    }

    let nodes = interior_nodes(d, rho);
    let logs = rho.log_values();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in &nodes {
        for a in 0..d.dim() {
            let s = d.strides()[a];
            let sp = d.spacing()[a];
            let second = lambda * (logs[i + s] - 2.0 * logs[i] + logs[i - s]) / (sp * sp);
            lo = lo.min(second);
            hi = hi.max(second);
        }
    }
    let (ceiling, applicable) = match log_concavity {
        Some(a) if a > 0.0 => (1.0 / (lambda * a).sqrt() - 1.0, !nodes.is_empty()),
        _ => (f64::INFINITY, false),
    };
    let lower_ok = lo >= -1.0 - ch;
    let upper_ok = hi <= ceiling + ch;
    checks.push(BoundCheck {
        name: "hessian_band".into(),
        lhs: if lower_ok { hi } else { lo },
        rhs: if lower_ok { ceiling } else { -1.0 },
        slack: ch,
        applicable,
        holds: lower_ok && upper_ok,
        note: format!("λ D² log ρ̄ observed in [{lo:.4}, {hi:.4}], bound [-1, 1/√(λA) - 1]"),
    });

    let all_passed = checks.iter().filter(|c| c.applicable).all(|c| c.holds);
    DiagnosticsReport { h, checks, all_passed }
}
