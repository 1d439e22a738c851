//! MATPOWER `.m` case reader.
//!
//! Only `baseMVA`, `bus`, `gen` and `branch` are read. Column layouts:
//!
//! ```text
//! bus    = [bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin ...]
//! gen    = [bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin ...]
//! branch = [fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax ...]
//! ```

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Branch, Bus, Generator, Network};

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

/// Controls how non-series elements are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep bus shunts, line charging and tap ratios/phase shifts. When false
    /// they are dropped with a warning and the model is series-only.
    pub keep_shunts_and_taps: bool,
}

#[derive(Clone, Debug)]
pub struct ParsedCase<T> {
    pub network: Network<T>,
    pub warnings: Vec<String>,
}

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

pub fn parse_matpower<T: Scalar>(text: &str, opts: &ParseOptions) -> Result<ParsedCase<T>> {
    let (base_mva, matrices) = scan(text)?;
    let base_mva = base_mva.ok_or(Error::MissingField("baseMVA"))?;
    if !(base_mva > 0.0) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("baseMVA must be positive, got {base_mva}"),
        });
    }
    let take = |name: &'static str, min_cols: usize| -> Result<&Matrix> {
        let m = matrices.get(name).ok_or(Error::MissingField(name))?;
        check_columns(name, m, min_cols)?;
        Ok(m)
    };
    let bus_m = take("bus", BUS_COLS)?;
    let gen_m = take("gen", GEN_COLS)?;
    let branch_m = take("branch", BRANCH_COLS)?;

    if bus_m.rows.is_empty() {
        return Err(Error::NoBuses);
    }

    let t = |v: f64| T::lit(v);
    let pu = |v: f64| T::lit(v / base_mva);
    let mut warnings = Vec::new();
    let mut shunt_buses = Vec::new();

    let mut ids = HashSet::new();
    let mut buses = Vec::with_capacity(bus_m.rows.len());
    for (line, row) in &bus_m.rows {
        let id = integer(row[0], *line)?;
        if !ids.insert(id) {
            return Err(Error::Parse {
                line: *line,
                msg: format!("duplicate bus id {id}"),
            });
        }
        let (gs, bs) = (row[4], row[5]);
        if gs != 0.0 || bs != 0.0 {
            shunt_buses.push(id);
        }
        let keep = opts.keep_shunts_and_taps;
        buses.push(Bus {
            id,
            demand_p: pu(row[2]),
            demand_q: pu(row[3]),
            v_min: t(row[12]),
            v_max: t(row[11]),
            is_slack: integer(row[1], *line)? == 3,
            g_shunt: if keep { pu(gs) } else { T::zero() },
            b_shunt: if keep { pu(bs) } else { T::zero() },
        });
    }

    let mut generators = Vec::with_capacity(gen_m.rows.len());
    for (line, row) in &gen_m.rows {
        let bus = integer(row[0], *line)?;
        if !ids.contains(&bus) {
            return Err(Error::UnknownBus {
                what: format!("generator on line {line}"),
                bus,
            });
        }
        generators.push(Generator {
            bus,
            p_min: pu(row[9]),
            p_max: pu(row[8]),
            q_min: pu(row[4]),
            q_max: pu(row[3]),
            in_service: row[7] > 0.0,
        });
    }

    let (mut charged, mut tapped) = (Vec::new(), Vec::new());
    let mut branches = Vec::with_capacity(branch_m.rows.len());
    for (k, (line, row)) in branch_m.rows.iter().enumerate() {
        let from_bus = integer(row[0], *line)?;
        let to_bus = integer(row[1], *line)?;
        for bus in [from_bus, to_bus] {
            if !ids.contains(&bus) {
                return Err(Error::UnknownBus {
                    what: format!("branch on line {line}"),
                    bus,
                });
            }
        }
        let ratio = if row[8] == 0.0 { 1.0 } else { row[8] };
        if row[4] != 0.0 {
            charged.push(k + 1);
        }
        if ratio != 1.0 || row[9] != 0.0 {
            tapped.push(k + 1);
        }
        let keep = opts.keep_shunts_and_taps;
        branches.push(Branch {
            from_bus,
            to_bus,
            r: t(row[2]),
            x: t(row[3]),
            i_max: None,
            in_service: row[10] > 0.0,
            charging: if keep { t(row[4]) } else { T::zero() },
            tap: if keep { t(ratio) } else { T::one() },
            shift_deg: if keep { t(row[9]) } else { T::zero() },
        });
    }

    let verb = if opts.keep_shunts_and_taps {
        "retained"
    } else {
        "dropped"
    };
    if !shunt_buses.is_empty() {
        warnings.push(format!(
            "{} bus(es) with nonzero shunt (Gs/Bs) {verb}: {}",
            shunt_buses.len(),
            preview(&shunt_buses)
        ));
    }
    if !charged.is_empty() {
        warnings.push(format!(
            "{} branch(es) with line charging {verb}: {}",
            charged.len(),
            preview(&charged)
        ));
    }
    if !tapped.is_empty() {
        warnings.push(format!(
            "{} branch(es) with off-nominal tap or phase shift {verb}: {}",
            tapped.len(),
            preview(&tapped)
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(ParsedCase {
        network: Network {
            base_mva: t(base_mva),
            buses,
            branches,
            generators,
        },
        warnings,
    })
}

fn preview<D: std::fmt::Display>(items: &[D]) -> String {
    let mut s: Vec<String> = items.iter().take(8).map(|v| v.to_string()).collect();
    if items.len() > 8 {
        s.push("...".into());
    }
    s.join(", ")
}

fn integer(v: f64, line: usize) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("expected an integer, got {v}"),
        });
    }
    Ok(v as i64)
}

fn check_columns(name: &str, m: &Matrix, min_cols: usize) -> Result<()> {
    let Some((_, first)) = m.rows.first() else {
        return Ok(());
    };
    let width = first.len();
    for (line, row) in &m.rows {
        if row.len() != width || row.len() < min_cols {
            return Err(Error::Parse {
                line: *line,
                msg: format!(
                    "`{name}` row has {} columns (expected {} and at least {min_cols})",
                    row.len(),
                    width
                ),
            });
        }
    }
    Ok(())
}

fn number(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "Inf" | "inf" | "+Inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("cannot parse number `{tok}`"),
        }),
    }
}

/// Splits the script into `baseMVA` and the numeric matrices.
fn scan(text: &str) -> Result<(Option<f64>, HashMap<&'static str, Matrix>)> {
    const WANTED: [&str; 3] = ["bus", "gen", "branch"];
    let mut base_mva = None;
    let mut matrices: HashMap<&'static str, Matrix> = HashMap::new();
    // Matrix currently being read, and the partial row text carried across lines.
    let mut current: Option<(Option<&'static str>, Matrix)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }

        let body = if current.is_some() {
            line
        } else {
            let Some(rest) = line.strip_prefix("mpc.") else {
                continue;
            };
            let Some((name, value)) = rest.split_once('=') else {
                continue;
            };
            let (name, value) = (name.trim(), value.trim());
            if name == "baseMVA" {
                let v = value.trim_end_matches(';').trim();
                base_mva = Some(number(v, line_no)?);
                continue;
            }
            let Some(body) = value.strip_prefix('[') else {
                continue;
            };
            let key = WANTED.iter().copied().find(|w| *w == name);
            current = Some((key, Matrix { rows: Vec::new() }));
            body
        };

        let (body, closes) = match body.find(']') {
            Some(p) => (&body[..p], true),
            None => (body, false),
        };
        if let Some((_, m)) = current.as_mut() {
            for chunk in body.split(';') {
                let toks: Vec<&str> = chunk
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .collect();
                if toks.is_empty() {
                    continue;
                }
                let row = toks.iter().map(|t| number(t, line_no)).collect::<Result<Vec<f64>>>()?;
                m.rows.push((line_no, row));
            }
        }
        if closes {
            if let Some((Some(key), m)) = current.take() {
                matrices.insert(key, m);
            }
        }
    }
    if let Some((Some(key), _)) = current {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("unterminated `{key}` matrix"),
        });
    }
    Ok((base_mva, matrices))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.05	0.95;
	2	1	10	5	0	0	1	1	0	135	1	1.05	0.95; % load bus
];
mpc.gen = [
	1	0	0	300	-300	1	100	1	250	10	0	0	0	0	0	0	0	0	0	0	0;
];
mpc.branch = [
	1	2	0.01	0.1	0	250	250	250	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	3	0.11	5	150;
];
";

    fn parse(text: &str) -> Result<ParsedCase<f64>> {
        parse_matpower(text, &ParseOptions::default())
    }

    #[test]
    fn minimal_case_in_per_unit() {
        let case = parse(TWO_BUS).unwrap();
        let net = &case.network;
        assert_eq!(net.buses.len(), 2);
        assert_eq!(net.buses[1].demand_p, 10.0 / 100.0);
        assert_eq!(net.buses[1].demand_q, 5.0 / 100.0);
        assert!(net.buses[0].is_slack && !net.buses[1].is_slack);
        assert_eq!(net.generators[0].p_max, 2.5);
        assert_eq!(net.generators[0].p_min, 0.1);
        assert_eq!(net.branches[0].x, 0.1);
        assert!(net.branches[0].i_max.is_none());
        assert!(case.warnings.is_empty());
    }

    #[test]
    fn shunts_dropped_with_warning() {
        let text = TWO_BUS.replace("2	1	10	5	0	0", "2	1	10	5	0	19");
        let case = parse(&text).unwrap();
        assert_eq!(case.network.buses[1].b_shunt, 0.0);
        assert_eq!(case.warnings.len(), 1);
        let kept = parse_matpower::<f64>(
            &text,
            &ParseOptions {
                keep_shunts_and_taps: true,
            },
        )
        .unwrap();
        assert_eq!(kept.network.buses[1].b_shunt, 0.19);
    }

    #[test]
    fn taps_and_charging_warned() {
        let text = TWO_BUS.replace("0.01	0.1	0	250	250	250	0	0", "0.01	0.1	0.2	250	250	250	0.97	0");
        let case = parse(&text).unwrap();
        assert_eq!(case.warnings.len(), 2);
        assert_eq!(case.network.branches[0].tap, 1.0);
        assert_eq!(case.network.branches[0].charging, 0.0);
    }

    #[test]
    fn out_of_service_branch_retained() {
        let text = TWO_BUS.replace("0	0	1	-360	360", "0	0	0	-360	360");
        let net = parse(&text).unwrap().network;
        assert_eq!(net.branches.len(), 1);
        assert!(!net.branches[0].in_service);
    }

    #[test]
    fn wrong_column_count_is_an_error() {
        let text = TWO_BUS.replace("1	1	0	135	1	1.05	0.95; % load", "1	1	0	135	1	1.05; % load");
        match parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_matrix_is_an_error() {
        let text = TWO_BUS.replace("mpc.gen", "mpc.generators");
        assert!(matches!(parse(&text), Err(Error::MissingField("gen"))));
    }

    #[test]
    fn unknown_bus_reference_is_an_error() {
        let text = TWO_BUS.replace("1	2	0.01", "1	7	0.01");
        assert!(matches!(parse(&text), Err(Error::UnknownBus { bus: 7, .. })));
    }

    #[test]
    fn zero_buses_is_an_error() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n];\nmpc.gen = [\n];\nmpc.branch = [\n];\n";
        assert!(matches!(parse(text), Err(Error::NoBuses)));
    }

    #[test]
    fn infinite_bounds_parse() {
        let text = TWO_BUS.replace("250	10	0	0", "Inf	10	0	0");
        let net = parse(&text).unwrap().network;
        assert!(net.generators[0].p_max.is_infinite());
    }
}
