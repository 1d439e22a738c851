use std::collections::VecDeque;

use serde::Serialize;

use crate::scalar::Scalar;

use super::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    /// 0-based branch index, when the diagnostic concerns one branch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
}

impl Diagnostic {
    fn error(code: &'static str, message: String) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message,
            branch: None,
        }
    }
}

/// Structural checks on a network. Never fails; problems come back as data.
pub fn validate<T: Scalar>(net: &Network<T>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let index = net.bus_index();

    match net.buses.iter().filter(|b| b.is_slack).count() {
        1 => {}
        0 => out.push(Diagnostic::error("no-slack", "no slack bus".into())),
        n => out.push(Diagnostic::error(
            "duplicate-slack",
            format!("{n} buses are marked as slack"),
        )),
    }

    for b in &net.buses {
        if !(b.v_min > T::zero() && b.v_min <= b.v_max) {
            out.push(Diagnostic::error(
                "voltage-bounds",
                format!("bus {}: require 0 < v_min <= v_max", b.id),
            ));
        }
    }
    for (k, g) in net.generators.iter().enumerate() {
        if !index.contains_key(&g.bus) {
            out.push(Diagnostic::error(
                "unknown-bus",
                format!("generator {} references unknown bus {}", k + 1, g.bus),
            ));
        }
        if g.p_min > g.p_max || g.q_min > g.q_max {
            out.push(Diagnostic::error(
                "generator-bounds",
                format!("generator {} has inverted bounds", k + 1),
            ));
        }
    }

    let mut adjacency = vec![Vec::new(); net.buses.len()];
    for (k, br) in net.branches.iter().enumerate() {
        let ends = (index.get(&br.from_bus), index.get(&br.to_bus));
        let (Some(&i), Some(&j)) = ends else {
            out.push(Diagnostic {
                branch: Some(k),
                ..Diagnostic::error("unknown-bus", format!("branch {} references an unknown bus", k + 1))
            });
            continue;
        };
        if i == j {
            out.push(Diagnostic {
                branch: Some(k),
                ..Diagnostic::error("self-loop", format!("branch {} is a self-loop", k + 1))
            });
        }
        if !br.in_service {
            continue;
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
        if br.has_zero_impedance() {
            out.push(Diagnostic {
                branch: Some(k),
                ..Diagnostic::error("zero-impedance", format!("branch {} has r = x = 0", k + 1))
            });
        }
        if br.x < T::zero() {
            out.push(Diagnostic {
                severity: Severity::Warning,
                code: "negative-reactance",
                message: format!(
                    "branch {} ({} -> {}) has negative reactance x = {}",
                    k + 1,
                    br.from_bus,
                    br.to_bus,
                    br.x
                ),
                branch: Some(k),
            });
        }
        if br.r == T::zero() {
            out.push(Diagnostic {
                severity: Severity::Warning,
                code: "zero-resistance",
                message: format!(
                    "branch {} has r = 0; its losses term is carried by epsilon_l only",
                    k + 1
                ),
                branch: Some(k),
            });
        }
    }

    if !net.buses.is_empty() && !is_connected(&adjacency) {
        out.push(Diagnostic::error(
            "disconnected",
            "in-service branches do not connect all buses".into(),
        ));
    }
    out
}

pub(crate) fn is_connected(adjacency: &[Vec<usize>]) -> bool {
    if adjacency.is_empty() {
        return true;
    }
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::two_bus;
    use crate::netmodel::{Branch, Bus};

    fn errors(d: &[Diagnostic]) -> Vec<&Diagnostic> {
        d.iter().filter(|d| d.severity == Severity::Error).collect()
    }

    #[test]
    fn connected_two_bus_has_no_errors() {
        let d = validate(&two_bus(0.01, 0.1, 0.1, 0.0));
        assert!(errors(&d).is_empty());
    }

    #[test]
    fn disjoint_islands_reported_once() {
        let mut net = two_bus(0.01, 0.1, 0.1, 0.0);
        net.buses.push(Bus::new(3, 0.0, 0.0, 0.9, 1.1, false));
        net.buses.push(Bus::new(4, 0.1, 0.0, 0.9, 1.1, false));
        net.branches.push(Branch::series(3, 4, 0.01, 0.1));
        let d = validate(&net);
        let e = errors(&d);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].code, "disconnected");
    }

    #[test]
    fn negative_reactance_is_a_warning_naming_the_branch() {
        let d = validate(&two_bus(0.01, -0.1, 0.1, 0.0));
        let w: Vec<_> = d.iter().filter(|d| d.code == "negative-reactance").collect();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].severity, Severity::Warning);
        assert_eq!(w[0].branch, Some(0));
    }

    #[test]
    fn zero_impedance_and_duplicate_slack_are_errors() {
        let mut net = two_bus(0.0, 0.0, 0.1, 0.0);
        net.buses[1].is_slack = true;
        let d = validate(&net);
        let codes: Vec<_> = errors(&d).iter().map(|d| d.code).collect();
        assert!(codes.contains(&"zero-impedance"));
        assert!(codes.contains(&"duplicate-slack"));
    }

    #[test]
    fn out_of_service_branch_does_not_connect() {
        let mut net = two_bus(0.01, 0.1, 0.1, 0.0);
        net.branches[0].in_service = false;
        assert!(validate(&net).iter().any(|d| d.code == "disconnected"));
    }
}
