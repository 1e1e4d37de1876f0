//! Gradient-flow integration, equilibrium polishing and seeded Monte Carlo
//! basin studies.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::FormationSystem;
use crate::error::{Error, Result};
use crate::geometry::{orbit_normal_basis, same_orbit, Configuration, DEFAULT_ALIGN_TOL};
use crate::spectral::{classify_orbit, enumerate_target_orbits, Signature, StabilityClass, DEFAULT_ZERO_TOL};

/// Gradient norm (relative to `max(1, largest target)`) at which Newton
/// polishing stops.
pub const POLISH_RTOL: f64 = 1e-12;
/// Polishing result accepted when progress stalls at roundoff.
pub const POLISH_ACCEPT_RTOL: f64 = 1e-10;
pub const POLISH_MAX_ITERATIONS: usize = 50;
/// Orbit matching tolerance, relative to the configuration diameter.
pub const ORBIT_MATCH_RTOL: f64 = 1e-5;
/// Distance tolerance for a target-orbit verdict, relative to the largest target.
pub const TARGET_DISTANCE_RTOL: f64 = 1e-6;
/// Minimum adjacent separation of a Monte Carlo seed, relative to the box.
pub const SEED_SEPARATION_RTOL: f64 = 1e-3;
/// Adjacent distance (relative to the initial extent) treated as a collision.
pub const COLLISION_DETECT_RTOL: f64 = 1e-9;
/// Environment variable capping the Monte Carlo thread count.
pub const THREADS_ENV: &str = "FORMCTL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed { dt: f64 },
    Rk45Adaptive { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub method: Method,
    pub t_max: f64,
    pub grad_stop: f64,
    pub max_steps: usize,
    /// Constant per-edge offset added to every measured distance, in
    /// canonical edge order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
    /// Record every `stride`-th accepted step (the first and last sample are
    /// always kept).
    pub stride: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            method: Method::Rk45Adaptive { rtol: 1e-8, atol: 1e-10 },
            t_max: 1e4,
            grad_stop: 1e-6,
            max_steps: 200_000,
            bias: None,
            stride: 1,
        }
    }
}

impl IntegratorSettings {
    pub fn rk4(dt: f64) -> Self {
        IntegratorSettings { method: Method::Rk4Fixed { dt }, ..Default::default() }
    }

    fn validate(&self, sys: &FormationSystem) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSettings(what.to_string()));
        match self.method {
            Method::Rk4Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => return bad("dt must be positive"),
            Method::Rk45Adaptive { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return bad("rtol and atol must be positive")
            }
            _ => {}
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.grad_stop > 0.0) {
            return bad("grad_stop must be positive");
        }
        if self.max_steps == 0 || self.stride == 0 {
            return bad("max_steps and stride must be at least 1");
        }
        if let Some(b) = &self.bias {
            if b.len() != sys.graph().edges().len() || b.iter().any(|x| !x.is_finite()) {
                return bad("bias needs one finite value per edge");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradStop,
    TMax,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configurations: Vec<Configuration>,
    pub potential: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub stop: StopReason,
    pub steps: usize,
}

impl Trajectory {
    pub fn terminal(&self) -> &Configuration {
        self.configurations.last().unwrap()
    }

    /// CSV with header `t,x1,y1,...,xn,yn,phi,gradnorm`.
    pub fn to_csv(&self) -> String {
        let n = self.configurations.first().map_or(0, Configuration::n);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i},y{i}"));
        }
        out.push_str(",phi,gradnorm\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.times[k],
                self.configurations[k].to_csv_row(),
                self.potential[k],
                self.grad_norms[k]
            ));
        }
        out
    }
}

struct Flow<'a> {
    sys: &'a FormationSystem,
    bias: Option<&'a [f64]>,
}

impl Flow<'_> {
    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let p = Configuration::from_flat(y);
        self.sys.biased_gradient(&p, self.bias).map(|g| -g).map_err(|e| match e {
            Error::CollisionOnEdge(edge) => Error::CollisionDetected(edge),
            other => other,
        })
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step from `y` with `k0 = f(y)`; returns the fifth-order
/// solution, its derivative (first stage of the next step) and the error
/// estimate.
fn dopri_step(
    flow: &Flow,
    y: &DVector<f64>,
    k0: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    const { assert!(C[0] == 0.0) };
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    k.push(k0.clone());
    for row in A.iter().skip(1) {
        let mut yi = y.clone();
        for (a, kj) in row.iter().zip(&k) {
            if *a != 0.0 {
                yi.axpy(h * a, kj, 1.0);
            }
        }
        k.push(flow.eval(&yi)?);
    }
    // Row 6 of A equals B5, so the seventh stage is f(y5) (first same as last).
    let mut y5 = y.clone();
    let mut err = DVector::zeros(y.len());
    for s in 0..7 {
        if B5[s] != 0.0 {
            y5.axpy(h * B5[s], &k[s], 1.0);
        }
        err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
    }
    let k_next = k.pop().unwrap();
    Ok((y5, k_next, err))
}

fn rk4_step(flow: &Flow, y: &DVector<f64>, k1: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let k2 = flow.eval(&(y + k1 * (0.5 * h)))?;
    let k3 = flow.eval(&(y + &k2 * (0.5 * h)))?;
    let k4 = flow.eval(&(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn check_separation(sys: &FormationSystem, y: &DVector<f64>, floor: f64) -> Result<()> {
    let p = Configuration::from_flat(y);
    for (e, d) in sys.graph().edges().iter().zip(sys.edge_lengths(&p).map_err(|err| match err {
        Error::CollisionOnEdge(edge) => Error::CollisionDetected(edge),
        other => other,
    })?) {
        if d <= floor {
            return Err(Error::CollisionDetected(*e));
        }
    }
    Ok(())
}

/// Integrates `p' = -grad Phi(p)` (with the optional distance bias inside
/// every gain) until the field norm drops to `grad_stop`, `t_max` is reached,
/// or `max_steps` steps were taken.
pub fn integrate(sys: &FormationSystem, p0: &Configuration, settings: &IntegratorSettings) -> Result<Trajectory> {
    settings.validate(sys)?;
    p0.check_len(sys.graph().n())?;
    let flow = Flow { sys, bias: settings.bias.as_deref() };
    let floor = COLLISION_DETECT_RTOL * p0.extent();
    let mut y = p0.to_flat();
    let mut k = flow.eval(&y)?;
    let mut t = 0.0;
    let mut traj = Trajectory {
        times: vec![],
        configurations: vec![],
        potential: vec![],
        grad_norms: vec![],
        stop: StopReason::MaxSteps,
        steps: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, y: &DVector<f64>, gn: f64| -> Result<()> {
        let p = Configuration::from_flat(y);
        traj.potential.push(sys.potential(&p)?);
        traj.times.push(t);
        traj.configurations.push(p);
        traj.grad_norms.push(gn);
        Ok(())
    };
    record(&mut traj, t, &y, k.norm())?;
    if k.norm() <= settings.grad_stop {
        traj.stop = StopReason::GradStop;
        return Ok(traj);
    }
    let mut h = match settings.method {
        Method::Rk4Fixed { dt } => dt,
        Method::Rk45Adaptive { .. } => (0.01 * p0.extent().max(f64::MIN_POSITIVE) / k.norm()).min(settings.t_max),
    };
    let mut last_recorded = 0;
    let mut steps = 0;
    while steps < settings.max_steps {
        let step = h.min(settings.t_max - t);
        match settings.method {
            Method::Rk4Fixed { .. } => {
                y = rk4_step(&flow, &y, &k, step)?;
                k = flow.eval(&y)?;
                t += step;
            }
            Method::Rk45Adaptive { rtol, atol } => {
                let attempt = dopri_step(&flow, &y, &k, step);
                let (y5, k5, err) = match attempt {
                    Ok(v) => v,
                    // A trial stage that lands on a collision is treated as a rejected step.
                    Err(Error::CollisionDetected(_)) if step > 1e-14 * t.max(1.0) => {
                        h = 0.2 * step;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let scaled = err
                    .iter()
                    .zip(y.iter().zip(y5.iter()))
                    .map(|(e, (a, b))| (e / (atol + rtol * a.abs().max(b.abs()))).powi(2))
                    .sum::<f64>();
                let enorm = (scaled / y.len() as f64).sqrt();
                let factor = if enorm == 0.0 { 5.0 } else { (0.9 * enorm.powf(-0.2)).clamp(0.2, 5.0) };
                if enorm > 1.0 {
                    h = step * factor;
                    if h <= 1e-14 * t.max(1.0) {
                        return Err(Error::StepUnderflow(t));
                    }
                    continue;
                }
                y = y5;
                k = k5;
                t += step;
                h = step * factor;
            }
        }
        steps += 1;
        check_separation(sys, &y, floor)?;
        let gn = k.norm();
        let stop = if gn <= settings.grad_stop {
            Some(StopReason::GradStop)
        } else if t >= settings.t_max {
            Some(StopReason::TMax)
        } else if steps == settings.max_steps {
            Some(StopReason::MaxSteps)
        } else {
            None
        };
        if stop.is_some() || steps - last_recorded >= settings.stride {
            record(&mut traj, t, &y, gn)?;
            last_recorded = steps;
        }
        if let Some(s) = stop {
            traj.stop = s;
            break;
        }
    }
    traj.steps = steps;
    Ok(traj)
}

/// Newton iteration on the gradient restricted to the orbit-normal space,
/// with backtracking on the gradient norm.
fn polish(sys: &FormationSystem, p: Configuration) -> Result<Configuration> {
    let scale = sys.max_target().max(1.0);
    let mut p = p;
    let mut g = sys.gradient(&p)?;
    for _ in 0..POLISH_MAX_ITERATIONS {
        let gn = g.norm();
        if gn <= POLISH_RTOL * scale {
            return Ok(p);
        }
        let q = orbit_normal_basis(&p)?;
        let a = q.transpose() * sys.hessian(&p)? * &q;
        let rhs = -(q.transpose() * &g);
        let svd = a.svd(true, true);
        let eps = 1e-14 * svd.singular_values.max();
        let y = svd.solve(&rhs, eps).map_err(|_| Error::NewtonStalled(gn))?;
        let dir = &q * y;
        let mut step = 1.0;
        let mut improved = None;
        for _ in 0..40 {
            let cand = Configuration::from_flat(&(p.to_flat() + &dir * step));
            if let Ok(gc) = sys.gradient(&cand) {
                if gc.norm() < gn {
                    improved = Some((cand, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        match improved {
            Some((cand, gc)) => {
                p = cand;
                g = gc;
            }
            None if gn <= POLISH_ACCEPT_RTOL * scale => return Ok(p),
            None => return Err(Error::NewtonStalled(gn)),
        }
    }
    let gn = g.norm();
    if gn <= POLISH_ACCEPT_RTOL * scale {
        Ok(p)
    } else {
        Err(Error::NewtonStalled(gn))
    }
}

/// Gradient flow down to `settings.grad_stop`, then Newton polishing to a
/// gradient norm of `1e-12` (relative to the largest target).
pub fn find_equilibrium(
    sys: &FormationSystem,
    p0: &Configuration,
    settings: &IntegratorSettings,
) -> Result<Configuration> {
    let quiet = IntegratorSettings { stride: usize::MAX, bias: None, ..settings.clone() };
    let traj = integrate(sys, p0, &quiet)?;
    let end = traj.terminal().clone();
    if traj.stop != StopReason::GradStop {
        return Err(Error::NewtonStalled(*traj.grad_norms.last().unwrap()));
    }
    polish(sys, end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalClass {
    TargetOrbit,
    LineEquilibrium,
    OtherEquilibrium,
    MaxStepsReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub terminal: Configuration,
    pub orbit: Option<usize>,
    pub class: TerminalClass,
    pub stability: Option<StabilityClass>,
    pub signature: Option<Signature>,
    /// Error code when the run did not end at a classified equilibrium.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Labels an equilibrium by target orbit (if any) and stability class.
pub fn label_equilibrium(sys: &FormationSystem, p: &Configuration, targets: &[Configuration]) -> SimOutcome {
    let tol = ORBIT_MATCH_RTOL * p.diameter();
    let dist_ok = sys.edge_lengths(p).is_ok_and(|ds| {
        ds.iter()
            .zip(sys.targets())
            .all(|(d, t)| (d - t).abs() <= TARGET_DISTANCE_RTOL * sys.max_target())
    });
    let orbit = if dist_ok {
        targets.iter().position(|t| same_orbit(p, t, tol).unwrap_or(false))
    } else {
        None
    };
    let mut out = SimOutcome {
        terminal: p.clone(),
        orbit,
        class: TerminalClass::OtherEquilibrium,
        stability: None,
        signature: None,
        error: None,
    };
    match classify_orbit(sys, p, DEFAULT_ZERO_TOL, DEFAULT_ALIGN_TOL) {
        Ok(c) => {
            out.stability = Some(c.class);
            out.signature = Some(c.signature);
            out.class = if orbit.is_some() {
                TerminalClass::TargetOrbit
            } else if c.predicates.line_configuration {
                TerminalClass::LineEquilibrium
            } else {
                TerminalClass::OtherEquilibrium
            };
        }
        Err(e) => out.error = Some(e.code().to_string()),
    }
    out
}

/// Runs `find_equilibrium` from `p0` and labels the result; failures to
/// converge are reported as [`TerminalClass::MaxStepsReached`].
pub fn simulate_outcome(
    sys: &FormationSystem,
    p0: &Configuration,
    settings: &IntegratorSettings,
    targets: &[Configuration],
) -> SimOutcome {
    match find_equilibrium(sys, p0, settings) {
        Ok(p) => label_equilibrium(sys, &p, targets),
        Err(e) => SimOutcome {
            terminal: p0.clone(),
            orbit: None,
            class: TerminalClass::MaxStepsReached,
            stability: None,
            signature: None,
            error: Some(e.code().to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub initial: Configuration,
    #[serde(flatten)]
    pub outcome: SimOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub seed: u64,
    pub box_size: f64,
    /// Hits per target orbit, indexed as in `enumerate_target_orbits`.
    pub orbit_counts: Vec<usize>,
    pub class_counts: BTreeMap<TerminalClass, usize>,
    pub stability_counts: BTreeMap<StabilityClass, usize>,
    pub records: Vec<TrialRecord>,
}

impl MonteCarloReport {
    pub fn fraction(&self, class: TerminalClass) -> f64 {
        *self.class_counts.get(&class).unwrap_or(&0) as f64 / self.trials as f64
    }
}

/// Uniform seed in `[0, box]^2` per agent, redrawn until all adjacent agents
/// are at least `1e-3 * box` apart.
pub fn sample_configuration(sys: &FormationSystem, rng: &mut impl Rng, box_size: f64) -> Configuration {
    let g = sys.graph();
    loop {
        let pts: Vec<(f64, f64)> = (0..g.n())
            .map(|_| (rng.random::<f64>() * box_size, rng.random::<f64>() * box_size))
            .collect();
        let p = Configuration::from_xy(&pts);
        let ok = g
            .edges()
            .iter()
            .all(|e| (p.at(g, e.lo) - p.at(g, e.hi)).norm() >= SEED_SEPARATION_RTOL * box_size);
        if ok {
            return p;
        }
    }
}

/// Generator for trial `trial`: the master seed selects the key, the trial
/// index the stream, so every trial is reproducible on its own.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

pub fn monte_carlo(
    sys: &FormationSystem,
    trials: usize,
    seed: u64,
    box_size: f64,
    settings: &IntegratorSettings,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::InvalidSettings("trials must be at least 1".to_string()));
    }
    if !(box_size > 0.0 && box_size.is_finite()) {
        return Err(Error::InvalidSettings("box size must be positive".to_string()));
    }
    settings.validate(sys)?;
    let targets = enumerate_target_orbits(sys)?;
    let run = || -> Vec<TrialRecord> {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let initial = sample_configuration(sys, &mut trial_rng(seed, trial), box_size);
                let outcome = simulate_outcome(sys, &initial, settings, &targets);
                TrialRecord { trial, initial, outcome }
            })
            .collect()
    };
    let records = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidSettings(e.to_string()))?
            .install(run),
        None => run(),
    };
    let mut orbit_counts = vec![0; targets.len()];
    let mut class_counts = BTreeMap::new();
    let mut stability_counts = BTreeMap::new();
    for r in &records {
        if let Some(o) = r.outcome.orbit {
            orbit_counts[o] += 1;
        }
        *class_counts.entry(r.outcome.class).or_insert(0) += 1;
        if let Some(s) = r.outcome.stability {
            *stability_counts.entry(s).or_insert(0) += 1;
        }
    }
    Ok(MonteCarloReport { trials, seed, box_size, orbit_counts, class_counts, stability_counts, records })
}
