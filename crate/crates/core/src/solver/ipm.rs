//! Homogeneous self-dual embedding with Nesterov-Todd scaling and
//! Mehrotra predictor-corrector steps.
//!
//! Iterates `(x, s, z, tau, kappa)` satisfy, at convergence,
//! `A'z + c tau = 0`, `Ax + s = b tau`, `c'x + b'z + kappa = 0`,
//! with `s o z = 0` and `tau kappa = 0`.

use crate::bfm::ConicProblem;
use crate::scalar::{dot, norm_inf, Scalar};

use super::cones::Cone;
use super::equilibrate::{equilibrate, identity, Scaled};
use super::kkt::Kkt;
use super::{Residuals, SolveOutcome, SolveStatus, SolverSettings, TraceRow};

struct State<T> {
    x: Vec<T>,
    s: Vec<T>,
    z: Vec<T>,
    tau: T,
    kappa: T,
}

struct Direction<T> {
    x: Vec<T>,
    s: Vec<T>,
    z: Vec<T>,
    tau: T,
    kappa: T,
}

impl<T: Scalar> Direction<T> {
    fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![T::zero(); n],
            s: vec![T::zero(); m],
            z: vec![T::zero(); m],
            tau: T::zero(),
            kappa: T::zero(),
        }
    }
}

/// Unscaled quantities of the current iterate used for termination.
struct Check<T> {
    res: Residuals<T>,
    pobj: T,
    dobj: T,
    x: Vec<T>,
    s: Vec<T>,
    z: Vec<T>,
    status: Option<SolveStatus>,
}

pub(crate) fn run<T: Scalar>(prob: &ConicProblem<T>, settings: &SolverSettings<T>) -> SolveOutcome<T> {
    let (m, n) = (prob.num_rows(), prob.num_vars());
    let sc = if settings.equilibrate {
        equilibrate(prob, settings.equilibrate_iters)
    } else {
        identity(prob)
    };
    let mut cones: Vec<Cone<T>> = Cone::from_specs(&prob.cones);
    let degree: usize = cones.iter().map(|c| c.degree()).sum();
    let nu = T::lit((degree + 1) as f64);
    let mut kkt = Kkt::new(&sc.a, &cones, settings.static_reg);
    let refine = settings.refine_steps;
    let frac = settings.max_step_fraction;

    let mut trace = Vec::new();
    // Initial point: least-squares primal and dual estimates shifted into the cones.
    if !kkt.refactor(&cones, true) {
        return empty_outcome(n, m, SolveStatus::NumericalFailure);
    }
    let mut st = State {
        x: vec![T::zero(); n],
        s: vec![T::zero(); m],
        z: vec![T::zero(); m],
        tau: T::one(),
        kappa: T::one(),
    };
    let zeros_n = vec![T::zero(); n];
    let zeros_m = vec![T::zero(); m];
    let mut tmp_m = vec![T::zero(); m];
    let ok = kkt.solve(
        &sc.a,
        &cones,
        true,
        &zeros_n,
        &sc.b,
        &mut st.x,
        &mut tmp_m,
        refine.max(3),
    );
    for i in 0..m {
        st.s[i] = -tmp_m[i];
    }
    let neg_c: Vec<T> = sc.c.iter().map(|&v| -v).collect();
    let mut tmp_n = vec![T::zero(); n];
    if !(ok
        && kkt.solve(
            &sc.a,
            &cones,
            true,
            &neg_c,
            &zeros_m,
            &mut tmp_n,
            &mut st.z,
            refine.max(3),
        ))
    {
        return empty_outcome(n, m, SolveStatus::NumericalFailure);
    }
    for cone in &cones {
        if cone.is_zero() {
            for i in cone.rows() {
                st.s[i] = T::zero();
                st.z[i] = T::zero();
            }
            continue;
        }
        for v in [&mut st.s, &mut st.z] {
            let e = cone.min_eig(v);
            if e < T::lit(1e-8) {
                cone.add_identity(T::one() - e, v);
            }
        }
    }

    let mut lambda = vec![T::zero(); m];
    let mut rx = vec![T::zero(); n];
    let mut rz = vec![T::zero(); m];
    let (mut x1, mut z1) = (vec![T::zero(); n], vec![T::zero(); m]);
    let mut dir = Direction::zeros(n, m);
    let mut alt = Direction::zeros(n, m);
    let mut last_step = T::zero();
    let mut small_steps = 0;
    let mut prev: Option<Check<T>> = None;

    for iter in 0..=settings.max_iter {
        let chk = check(prob, &sc, &st, settings);
        if !chk.is_finite() {
            // Report the last finite iterate rather than garbage.
            log::debug!("ipm: non-finite iterate at iteration {iter}");
            return match prev {
                Some(p) => outcome(p, SolveStatus::NumericalFailure, iter.saturating_sub(1), trace),
                None => empty_outcome(n, m, SolveStatus::NumericalFailure),
            };
        }
        if settings.trace {
            trace.push(TraceRow {
                iteration: iter,
                primal_res: chk.res.primal,
                dual_res: chk.res.dual,
                gap: chk.res.gap,
                step: last_step,
            });
        }
        log::trace!(
            "ipm {iter:3}: pobj {:+.6e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e} step {:.3}",
            chk.pobj,
            chk.res.primal,
            chk.res.dual,
            chk.res.gap,
            st.tau,
            st.kappa,
            last_step
        );
        if let Some(status) = chk.status {
            return outcome(chk, status, iter, trace);
        }
        if iter == settings.max_iter {
            return outcome(chk, SolveStatus::MaxIter, iter, trace);
        }
        if small_steps >= 5 {
            log::debug!("ipm: stalled at iteration {iter}");
            return outcome(chk, SolveStatus::NumericalFailure, iter, trace);
        }

        // Residuals of the embedding at the current point.
        sc.a.tmul_vec(&st.z, &mut rx);
        crate::scalar::axpy(st.tau, &sc.c, &mut rx);
        sc.a.mul_vec(&st.x, &mut rz);
        for i in 0..m {
            rz[i] = rz[i] + st.s[i] - sc.b[i] * st.tau;
        }
        let rtau = dot(&sc.c, &st.x) + dot(&sc.b, &st.z) + st.kappa;
        let mu = (dot(&st.s, &st.z) + st.tau * st.kappa) / nu;

        let mut interior = true;
        for cone in cones.iter_mut() {
            interior &= cone.update_scaling(&st.s, &st.z, &mut lambda);
        }
        if !interior || !kkt.refactor(&cones, false) {
            return outcome(chk, SolveStatus::NumericalFailure, iter, trace);
        }
        if !kkt.solve(&sc.a, &cones, false, &neg_c, &sc.b, &mut x1, &mut z1, refine) {
            return outcome(chk, SolveStatus::NumericalFailure, iter, trace);
        }
        let c1 = dot(&sc.c, &x1) + dot(&sc.b, &z1);

        let ctx = StepContext {
            sc: &sc,
            cones: &cones,
            st: &st,
            lambda: &lambda,
            rx: &rx,
            rz: &rz,
            rtau,
            mu,
            x1: &x1,
            z1: &z1,
            c1,
            refine,
            frac,
        };
        // Both forms of ds are tried; the step that lands on the point with
        // the smaller residuals and gap wins.
        let first = ctx.predictor_corrector(&mut kkt, DsForm::Primal, &mut dir);
        let second = ctx.predictor_corrector(&mut kkt, DsForm::Blended, &mut alt);
        let alpha = match (first, second) {
            (Some(a1), Some(a2)) => {
                if merit(&sc, &st, &alt, a2) < merit(&sc, &st, &dir, a1) {
                    std::mem::swap(&mut dir, &mut alt);
                    a2
                } else {
                    a1
                }
            }
            (Some(a1), None) => a1,
            (None, Some(a2)) => {
                std::mem::swap(&mut dir, &mut alt);
                a2
            }
            (None, None) => return outcome(chk, SolveStatus::NumericalFailure, iter, trace),
        };
        small_steps = if alpha < T::lit(1e-8) { small_steps + 1 } else { 0 };

        crate::scalar::axpy(alpha, &dir.x, &mut st.x);
        crate::scalar::axpy(alpha, &dir.s, &mut st.s);
        crate::scalar::axpy(alpha, &dir.z, &mut st.z);
        st.tau = st.tau + alpha * dir.tau;
        st.kappa = st.kappa + alpha * dir.kappa;
        last_step = alpha;
        prev = Some(chk);
    }
    let chk = check(prob, &sc, &st, settings);
    outcome(chk, SolveStatus::MaxIter, settings.max_iter, trace)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum DsForm {
    /// `ds` from the linearized primal equation.
    Primal,
    /// Per eigendirection of `W`, the primal or the complementarity form.
    Blended,
}

/// Everything one predictor-corrector step needs besides the factorization.
struct StepContext<'a, T> {
    sc: &'a Scaled<T>,
    cones: &'a [Cone<T>],
    st: &'a State<T>,
    lambda: &'a [T],
    rx: &'a [T],
    rz: &'a [T],
    rtau: T,
    mu: T,
    x1: &'a [T],
    z1: &'a [T],
    c1: T,
    refine: usize,
    frac: T,
}

impl<T: Scalar> StepContext<'_, T> {
    /// Mehrotra predictor-corrector; the combined direction goes to `dir` and
    /// the damped step length is returned.
    fn predictor_corrector(&self, kkt: &mut Kkt<T>, form: DsForm, dir: &mut Direction<T>) -> Option<T> {
        let (cones, st, lambda) = (self.cones, self.st, self.lambda);
        let m = lambda.len();
        let n = self.x1.len();
        let mut ds = vec![T::zero(); m];
        let mut aff = Direction::zeros(n, m);

        // Predictor: ds = lambda o lambda, dkappa = tau kappa.
        for cone in cones {
            cone.circ(lambda, lambda, &mut ds);
        }
        let sys = Rhs {
            rx: self.rx,
            rz: self.rz,
            rtau: self.rtau,
            scale: T::one(),
            ds: &ds,
            dkappa: st.tau * st.kappa,
        };
        if !self.direction(kkt, &sys, form, &mut aff) {
            return None;
        }
        let alpha_aff = max_step(cones, st, &aff, T::one());
        let one_minus = T::one() - alpha_aff;
        let sigma = one_minus * one_minus * one_minus;

        // Corrector: ds = lambda o lambda + (W^-1 ds_a) o (W dz_a) - sigma mu e.
        let mut ws = vec![T::zero(); m];
        let mut wz = vec![T::zero(); m];
        let mut prod = vec![T::zero(); m];
        for cone in cones {
            cone.mul_w(&aff.s, &mut ws, true);
            cone.mul_w(&aff.z, &mut wz, false);
        }
        for cone in cones {
            cone.circ(&ws, &wz, &mut prod);
            cone.circ(lambda, lambda, &mut ds);
        }
        for i in 0..m {
            ds[i] = ds[i] + prod[i];
        }
        for cone in cones {
            cone.add_identity(-sigma * self.mu, &mut ds);
        }
        let sys = Rhs {
            rx: self.rx,
            rz: self.rz,
            rtau: self.rtau,
            scale: T::one() - sigma,
            ds: &ds,
            dkappa: st.tau * st.kappa + aff.tau * aff.kappa - sigma * self.mu,
        };
        if !self.direction(kkt, &sys, form, dir) {
            return None;
        }
        let alpha = (self.frac * max_step(cones, st, dir, T::lit(1e6))).min(T::one());
        alpha.is_finite().then_some(alpha)
    }

    fn direction(&self, kkt: &mut Kkt<T>, rhs: &Rhs<'_, T>, form: DsForm, out: &mut Direction<T>) -> bool {
        solve_direction(
            kkt,
            self.sc,
            self.cones,
            self.st,
            self.lambda,
            rhs,
            self.x1,
            self.z1,
            self.c1,
            self.refine,
            form,
            out,
        )
    }
}

struct Rhs<'a, T> {
    rx: &'a [T],
    rz: &'a [T],
    rtau: T,
    /// Multiplier on the linear residuals (`1` for the predictor, `1 - sigma` after).
    scale: T,
    ds: &'a [T],
    dkappa: T,
}

/// Solves the linearized embedding for one right-hand side.
#[allow(clippy::too_many_arguments)]
fn solve_direction<T: Scalar>(
    kkt: &mut Kkt<T>,
    sc: &Scaled<T>,
    cones: &[Cone<T>],
    st: &State<T>,
    lambda: &[T],
    rhs: &Rhs<'_, T>,
    x1: &[T],
    z1: &[T],
    c1: T,
    refine: usize,
    form: DsForm,
    out: &mut Direction<T>,
) -> bool {
    let (n, m) = (x1.len(), z1.len());
    // work = W (lambda \ ds)
    let mut ld = vec![T::zero(); m];
    for cone in cones {
        cone.inv_circ(lambda, rhs.ds, &mut ld);
    }
    let mut work = vec![T::zero(); m];
    for cone in cones {
        cone.mul_w(&ld, &mut work, false);
    }
    let bx: Vec<T> = rhs.rx.iter().map(|&v| -rhs.scale * v).collect();
    let bz: Vec<T> = (0..m).map(|i| -rhs.scale * rhs.rz[i] + work[i]).collect();
    let mut x2 = vec![T::zero(); n];
    let mut z2 = vec![T::zero(); m];
    if !kkt.solve(&sc.a, cones, false, &bx, &bz, &mut x2, &mut z2, refine) {
        return false;
    }

    let dtau_num = rhs.scale * rhs.rtau - rhs.dkappa / st.tau + dot(&sc.c, &x2) + dot(&sc.b, &z2);
    let dtau_den = st.kappa / st.tau - c1;
    let dtau = dtau_num / dtau_den;
    for j in 0..n {
        out.x[j] = x2[j] + dtau * x1[j];
    }
    for i in 0..m {
        out.z[i] = z2[i] + dtau * z1[i];
    }
    // Two equivalent forms of ds. The linearized primal equation
    // ds = -scale rz - A dx + b dtau has absolute error independent of W;
    // the complementarity form ds = -W (lambda \ ds + W dz) has error that
    // grows with W. The blended form takes, per eigendirection of W, the
    // one that is accurate there.
    sc.a.mul_vec(&out.x, &mut out.s);
    for i in 0..m {
        out.s[i] = -rhs.scale * rhs.rz[i] - out.s[i] + sc.b[i] * dtau;
    }
    let mut comp = vec![T::zero(); m];
    if form == DsForm::Blended {
        let mut wdz = vec![T::zero(); m];
        for cone in cones {
            cone.mul_w(&out.z, &mut wdz, false);
        }
        for i in 0..m {
            wdz[i] = -(wdz[i] + ld[i]);
        }
        for cone in cones {
            cone.mul_w(&wdz, &mut comp, false);
        }
    }
    for cone in cones {
        match form {
            DsForm::Blended => cone.blend(&mut out.s, &comp),
            DsForm::Primal if cone.is_zero() => cone.rows().for_each(|i| out.s[i] = T::zero()),
            DsForm::Primal => {}
        }
    }
    out.tau = dtau;
    out.kappa = -(rhs.dkappa + st.kappa * dtau) / st.tau;
    dtau.is_finite() && out.kappa.is_finite()
}

/// Residuals plus complementarity of the point reached by a step of `alpha`
/// along `d`, in the homogeneous scaling.
fn merit<T: Scalar>(sc: &Scaled<T>, st: &State<T>, d: &Direction<T>, alpha: T) -> T {
    let step = |u: &[T], du: &[T]| -> Vec<T> { u.iter().zip(du).map(|(&a, &b)| a + alpha * b).collect() };
    let (x, s, z) = (step(&st.x, &d.x), step(&st.s, &d.s), step(&st.z, &d.z));
    let tau = st.tau + alpha * d.tau;
    let kappa = st.kappa + alpha * d.kappa;
    let mut rz = vec![T::zero(); s.len()];
    sc.a.mul_vec(&x, &mut rz);
    for i in 0..rz.len() {
        rz[i] = rz[i] + s[i] - sc.b[i] * tau;
    }
    let mut rx = vec![T::zero(); x.len()];
    sc.a.tmul_vec(&z, &mut rx);
    crate::scalar::axpy(tau, &sc.c, &mut rx);
    (norm_inf(&rz) + norm_inf(&rx) + dot(&s, &z).abs() + tau * kappa) / tau
}

fn max_step<T: Scalar>(cones: &[Cone<T>], st: &State<T>, d: &Direction<T>, cap: T) -> T {
    let mut a = cap;
    if d.tau < T::zero() {
        a = a.min(-st.tau / d.tau);
    }
    if d.kappa < T::zero() {
        a = a.min(-st.kappa / d.kappa);
    }
    for cone in cones {
        a = cone.step_length(&st.s, &d.s, a);
        a = cone.step_length(&st.z, &d.z, a);
    }
    a
}

impl<T: Scalar> Check<T> {
    fn is_finite(&self) -> bool {
        let r = &self.res;
        r.primal.is_finite()
            && r.dual.is_finite()
            && r.gap.is_finite()
            && self.pobj.is_finite()
            && self.dobj.is_finite()
    }
}

fn check<T: Scalar>(prob: &ConicProblem<T>, sc: &Scaled<T>, st: &State<T>, settings: &SolverSettings<T>) -> Check<T> {
    let (m, n) = (prob.num_rows(), prob.num_vars());
    let mut x = vec![T::zero(); n];
    let mut s = vec![T::zero(); m];
    let mut z = vec![T::zero(); m];
    sc.unscale_x(&st.x, &mut x);
    sc.unscale_s(&st.s, &mut s);
    sc.unscale_z(&st.z, &mut z);

    // Certificates use the raw (homogeneous) iterates.
    let mut atz = vec![T::zero(); n];
    prob.a.tmul_vec(&z, &mut atz);
    let mut axs = vec![T::zero(); m];
    prob.a.mul_vec(&x, &mut axs);
    for i in 0..m {
        axs[i] = axs[i] + s[i];
    }
    let bz = dot(&prob.b, &z);
    let cx = dot(&prob.c, &x);

    let inv_tau = T::one() / st.tau;
    let xh: Vec<T> = x.iter().map(|&v| v * inv_tau).collect();
    let sh: Vec<T> = s.iter().map(|&v| v * inv_tau).collect();
    let zh: Vec<T> = z.iter().map(|&v| v * inv_tau).collect();
    let mut pr = vec![T::zero(); m];
    for i in 0..m {
        pr[i] = axs[i] * inv_tau - prob.b[i];
    }
    let mut dr = vec![T::zero(); n];
    for j in 0..n {
        dr[j] = atz[j] * inv_tau + prob.c[j];
    }
    let primal = norm_inf(&pr) / (T::one() + norm_inf(&prob.b) + norm_inf(&xh) + norm_inf(&sh));
    let dual = norm_inf(&dr) / (T::one() + norm_inf(&prob.c) + norm_inf(&zh));
    let pobj = cx * inv_tau;
    let dobj = -bz * inv_tau;
    let gap_abs = dot(&sh, &zh).abs();
    let gap_rel = gap_abs / T::one().max(pobj.abs().min(dobj.abs()));
    let gap = gap_abs.min(gap_rel);

    let mut status = None;
    if primal <= settings.tol_feas && dual <= settings.tol_feas && gap <= settings.tol_gap {
        status = Some(SolveStatus::Optimal);
    } else if st.kappa > st.tau {
        let tol = settings.tol_infeas;
        if bz < T::zero() && norm_inf(&atz) <= -bz * tol {
            status = Some(SolveStatus::PrimalInfeasible);
        } else if cx < T::zero() && norm_inf(&axs) <= -cx * tol {
            status = Some(SolveStatus::DualInfeasible);
        }
    }
    let (x, s, z) = match status {
        Some(SolveStatus::PrimalInfeasible) => {
            let k = -T::one() / bz;
            (vec![T::nan(); n], vec![T::nan(); m], z.iter().map(|&v| v * k).collect())
        }
        Some(SolveStatus::DualInfeasible) => {
            let k = -T::one() / cx;
            (
                x.iter().map(|&v| v * k).collect(),
                s.iter().map(|&v| v * k).collect(),
                vec![T::nan(); m],
            )
        }
        _ => (xh, sh, zh),
    };
    Check {
        res: Residuals { primal, dual, gap },
        pobj,
        dobj,
        x,
        s,
        z,
        status,
    }
}

fn outcome<T: Scalar>(
    chk: Check<T>,
    status: SolveStatus,
    iterations: usize,
    trace: Vec<TraceRow<T>>,
) -> SolveOutcome<T> {
    SolveOutcome {
        status,
        x: chk.x,
        y: chk.z,
        s: chk.s,
        iterations,
        residuals: chk.res,
        primal_objective: chk.pobj,
        dual_objective: chk.dobj,
        trace,
    }
}

fn empty_outcome<T: Scalar>(n: usize, m: usize, status: SolveStatus) -> SolveOutcome<T> {
    SolveOutcome {
        status,
        x: vec![T::nan(); n],
        y: vec![T::nan(); m],
        s: vec![T::nan(); m],
        iterations: 0,
        residuals: Residuals {
            primal: T::infinity(),
            dual: T::infinity(),
            gap: T::infinity(),
        },
        primal_objective: T::nan(),
        dual_objective: T::nan(),
        trace: Vec::new(),
    }
}
