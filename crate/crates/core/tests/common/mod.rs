//! Networks with an exactly known AC operating point.
//!
//! Bus magnitudes and angles are drawn first; branch currents and flows
//! follow from circuit laws, and loads absorb whatever injection is left, so
//! the resulting branch-flow point satisfies every equation with equality.

#![allow(dead_code)]

pub mod battery;
pub mod oracle;
pub mod perturb;

use bfm_relax::bfm::BfmSolution;
use bfm_relax::netmodel::{Branch, Bus, Generator, Network};
use num_complex::Complex64;

/// Deterministic reader over a pool of uniform draws.
pub struct Draw<'a> {
    u: &'a [f64],
    at: usize,
}

impl<'a> Draw<'a> {
    pub fn new(u: &'a [f64]) -> Self {
        assert!(!u.is_empty());
        Self { u, at: 0 }
    }

    pub fn unit(&mut self) -> f64 {
        let v = self.u[self.at % self.u.len()];
        self.at += 1;
        v
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CaseOptions {
    pub buses: usize,
    /// Branches beyond the spanning tree.
    pub extra_branches: usize,
    pub taps: bool,
    pub shunts: bool,
    /// Probability that a branch gets a negative reactance.
    pub negative_x: f64,
    /// Adds an angle offset to the first non-tree branch so its cycle no
    /// longer closes.
    pub break_cycle: bool,
}

pub struct AcCase {
    pub net: Network<f64>,
    pub sol: BfmSolution<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn ac_case(d: &mut Draw<'_>, opts: CaseOptions) -> AcCase {
    let n = opts.buses.max(2);
    let id = |k: usize| 10 * k as i64 + 3;
    let buses: Vec<Bus<f64>> = (0..n)
        .map(|k| {
            let mut b = Bus::new(id(k), 0.0, 0.0, 0.5, 1.5, k == 0);
            if opts.shunts && d.coin(0.5) {
                b.g_shunt = d.range(0.0, 0.02);
                b.b_shunt = d.range(-0.05, 0.05);
            }
            b
        })
        .collect();
    let u: Vec<f64> = (0..n).map(|k| if k == 0 { 1.0 } else { d.range(0.95, 1.05) }).collect();
    let theta: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { d.range(-0.3, 0.3) }).collect();

    let mut pairs = Vec::new();
    for k in 1..n {
        pairs.push((d.index(k), k));
    }
    for _ in 0..opts.extra_branches {
        let a = d.index(n);
        let b = (a + 1 + d.index(n - 1)) % n;
        pairs.push((a, b));
    }
    let mut branches = Vec::new();
    let mut ends = Vec::new();
    for &(a, b) in &pairs {
        let (i, j) = if d.coin(0.5) { (a, b) } else { (b, a) };
        let x = d.range(0.02, 0.3) * if d.coin(opts.negative_x) { -1.0 } else { 1.0 };
        let mut br = Branch::series(id(i), id(j), d.range(0.005, 0.1), x);
        if opts.taps && d.coin(0.5) {
            br.tap = d.range(0.95, 1.05);
            br.shift_deg = d.range(-5.0, 5.0);
            br.charging = d.range(0.0, 0.05);
        }
        branches.push(br);
        ends.push((i, j));
    }

    let nl = branches.len();
    let mut sol = BfmSolution::zeros(n, nl, 1);
    sol.v = u.iter().map(|m| m * m).collect();
    let mut inj_p = vec![0.0; n];
    let mut inj_q = vec![0.0; n];
    for (i, bus) in buses.iter().enumerate() {
        inj_p[i] += bus.g_shunt * sol.v[i];
        inj_q[i] -= bus.b_shunt * sol.v[i];
    }
    for (k, br) in branches.iter().enumerate() {
        let (i, j) = ends[k];
        let phi = br.shift_deg.to_radians();
        let mut delta = theta[i] - phi - theta[j];
        if opts.break_cycle && k == n - 1 {
            delta += d.range(0.05, 0.2);
        }
        let vi = Complex64::from_polar(u[i] / br.tap, delta);
        let vj = Complex64::new(u[j], 0.0);
        let z = Complex64::new(br.r, br.x);
        let cur = (vi - vj) / z;
        let s = vi * cur.conj();
        let l = cur.norm_sqr();
        sol.l[k] = l;
        sol.f[k] = s.re;
        sol.h[k] = s.im;
        let half_b = 0.5 * br.charging;
        inj_p[i] += s.re;
        inj_q[i] += s.im - half_b * sol.v[i] / (br.tap * br.tap);
        inj_p[j] -= s.re - br.r * l;
        inj_q[j] -= s.im - br.x * l + half_b * sol.v[j];
    }

    let mut buses = buses;
    for i in 0..n {
        if i == 0 {
            sol.pg[0] = inj_p[0];
            sol.qg[0] = inj_q[0];
        } else {
            sol.pc[i] = -inj_p[i];
            sol.qc[i] = -inj_q[i];
            buses[i].demand_p = sol.pc[i];
            buses[i].demand_q = sol.qc[i];
        }
    }
    let net = Network {
        base_mva: 100.0,
        buses,
        branches,
        generators: vec![Generator::new(id(0), -100.0, 100.0, -100.0, 100.0)],
    };
    sol.objective = 0.0;
    AcCase { net, sol, u, theta }
}
