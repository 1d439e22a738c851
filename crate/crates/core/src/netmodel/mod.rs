//! Per-unit network model: buses, series branches and generators.

mod parse;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use parse::{parse_matpower, ParseOptions, ParsedCase};
pub use validate::{validate, Diagnostic, Severity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bus<T> {
    /// External bus label from the case file.
    pub id: i64,
    pub demand_p: T,
    pub demand_q: T,
    pub v_min: T,
    pub v_max: T,
    pub is_slack: bool,
    /// Shunt conductance (p.u. at 1 p.u. voltage). Zero unless the case was
    /// parsed with shunts retained.
    #[serde(default)]
    pub g_shunt: T,
    /// Shunt susceptance, positive for capacitive.
    #[serde(default)]
    pub b_shunt: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Branch<T> {
    pub from_bus: i64,
    pub to_bus: i64,
    pub r: T,
    pub x: T,
    /// Upper bound on the squared series current, if any.
    pub i_max: Option<T>,
    pub in_service: bool,
    /// Total line-charging susceptance, split half to each end.
    #[serde(default)]
    pub charging: T,
    /// Off-nominal tap ratio on the from side (1 when absent).
    #[serde(default = "one")]
    pub tap: T,
    /// Phase shift in degrees; affects angle recovery only.
    #[serde(default)]
    pub shift_deg: T,
}

fn one<T: Scalar>() -> T {
    T::one()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Generator<T> {
    pub bus: i64,
    pub p_min: T,
    pub p_max: T,
    pub q_min: T,
    pub q_max: T,
    pub in_service: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Network<T> {
    pub base_mva: T,
    pub buses: Vec<Bus<T>>,
    pub branches: Vec<Branch<T>>,
    pub generators: Vec<Generator<T>>,
}

impl<T: Scalar> Bus<T> {
    pub fn new(id: i64, demand_p: T, demand_q: T, v_min: T, v_max: T, is_slack: bool) -> Self {
        Self {
            id,
            demand_p,
            demand_q,
            v_min,
            v_max,
            is_slack,
            g_shunt: T::zero(),
            b_shunt: T::zero(),
        }
    }
}

impl<T: Scalar> Branch<T> {
    /// An in-service series branch with no charging and unity tap.
    pub fn series(from_bus: i64, to_bus: i64, r: T, x: T) -> Self {
        Self {
            from_bus,
            to_bus,
            r,
            x,
            i_max: None,
            in_service: true,
            charging: T::zero(),
            tap: T::one(),
            shift_deg: T::zero(),
        }
    }

    pub fn has_zero_impedance(&self) -> bool {
        self.r == T::zero() && self.x == T::zero()
    }
}

impl<T: Scalar> Generator<T> {
    pub fn new(bus: i64, p_min: T, p_max: T, q_min: T, q_max: T) -> Self {
        Self {
            bus,
            p_min,
            p_max,
            q_min,
            q_max,
            in_service: true,
        }
    }
}

/// Branch endpoints resolved to positional bus indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Endpoints {
    pub from: usize,
    pub to: usize,
}

impl<T: Scalar> Network<T> {
    /// Maps external bus ids to positions in `buses`.
    pub fn bus_index(&self) -> HashMap<i64, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    /// Positional endpoints for every branch (in-service or not).
    pub fn endpoints(&self) -> Result<Vec<Endpoints>> {
        let index = self.bus_index();
        self.branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let lookup = |bus: i64| {
                    index.get(&bus).copied().ok_or_else(|| Error::UnknownBus {
                        what: format!("branch {}", k + 1),
                        bus,
                    })
                };
                Ok(Endpoints {
                    from: lookup(br.from_bus)?,
                    to: lookup(br.to_bus)?,
                })
            })
            .collect()
    }

    /// Positional bus index of every generator.
    pub fn generator_buses(&self) -> Result<Vec<usize>> {
        let index = self.bus_index();
        self.generators
            .iter()
            .enumerate()
            .map(|(k, g)| {
                index.get(&g.bus).copied().ok_or_else(|| Error::UnknownBus {
                    what: format!("generator {}", k + 1),
                    bus: g.bus,
                })
            })
            .collect()
    }

    /// True when the in-service branches connect every bus.
    pub fn is_connected(&self) -> Result<bool> {
        let ends = self.endpoints()?;
        let mut adjacency = vec![Vec::new(); self.buses.len()];
        for (br, e) in self.branches.iter().zip(&ends) {
            if br.in_service {
                adjacency[e.from].push(e.to);
                adjacency[e.to].push(e.from);
            }
        }
        Ok(validate::is_connected(&adjacency))
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_slack)
    }

    /// Returns a copy with the reactance of branch `branch` (0-based) negated.
    pub fn negate_reactance(&self, branch: usize) -> Result<Self> {
        if branch >= self.branches.len() {
            return Err(Error::IndexOutOfRange {
                index: branch,
                len: self.branches.len(),
            });
        }
        let mut out = self.clone();
        out.branches[branch].x = -out.branches[branch].x;
        Ok(out)
    }

    /// Canonical JSON dump.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Converts every quantity to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        Network {
            base_mva: c(self.base_mva),
            buses: self
                .buses
                .iter()
                .map(|b| Bus {
                    id: b.id,
                    demand_p: c(b.demand_p),
                    demand_q: c(b.demand_q),
                    v_min: c(b.v_min),
                    v_max: c(b.v_max),
                    is_slack: b.is_slack,
                    g_shunt: c(b.g_shunt),
                    b_shunt: c(b.b_shunt),
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| Branch {
                    from_bus: b.from_bus,
                    to_bus: b.to_bus,
                    r: c(b.r),
                    x: c(b.x),
                    i_max: b.i_max.map(c),
                    in_service: b.in_service,
                    charging: c(b.charging),
                    tap: c(b.tap),
                    shift_deg: c(b.shift_deg),
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| Generator {
                    bus: g.bus,
                    p_min: c(g.p_min),
                    p_max: c(g.p_max),
                    q_min: c(g.q_min),
                    q_max: c(g.q_max),
                    in_service: g.in_service,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Slack bus 1 with a wide generator, load bus 2, one branch 1 -> 2.
    pub fn two_bus(r: f64, x: f64, pd: f64, qd: f64) -> Network<f64> {
        Network {
            base_mva: 100.0,
            buses: vec![
                Bus::new(1, 0.0, 0.0, 1.0, 1.0, true),
                Bus::new(2, pd, qd, 0.8, 1.2, false),
            ],
            branches: vec![Branch::series(1, 2, r, x)],
            generators: vec![Generator::new(1, 0.0, 5.0, -5.0, 5.0)],
        }
    }
}
