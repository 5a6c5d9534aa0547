//! Adaptive integration of the reduced soliton ODEs: Dormand-Prince 5(4)
//! with dense output, a series start at the singular pole, bidirectional
//! full-line runs, and event detection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{curvature_sample_2d, curvature_sample_3d, CurvatureSample};
use crate::odes::{
    scalar_from_state, steady_first_integral, BoundaryCase, OdeError, SolitonParams, WarpState,
};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    BadConfig(String),
    #[error("start state is invalid: {0}")]
    BadStart(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("a smooth 3D pole forces rbar = 2, got rbar = {0}")]
    PoleObstruction(f64),
    #[error("series start requires a pole-start parameter set")]
    NotPoleStart,
    #[error("step size underflow below h_min at r = {r} (stiff or degenerating)")]
    StepUnderflow { r: f64, trajectory: Box<Trajectory> },
}

impl IntegrateError {
    /// Recover the partial trajectory from a step-underflow stop.
    pub fn into_trajectory(self) -> Option<Trajectory> {
        match self {
            IntegrateError::StepUnderflow { trajectory, .. } => Some(*trajectory),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Forward integration horizon.
    pub r_max: f64,
    /// Backward integration horizon.
    pub r_min: f64,
    /// Handoff radius of the pole series start.
    pub pole_offset: f64,
    /// Terminal threshold for the rho -> 0 event.
    pub rho_floor: f64,
    /// Terminal threshold for the slope blow-up event.
    pub slope_cap: f64,
    /// Trailing fraction of the r-span used for asymptote estimation.
    pub tail_window: f64,
    /// Deadband for sign-crossing events; crossings are only raised between
    /// samples that clear the band on both sides.
    pub crossing_band: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.5,
            r_max: 50.0,
            r_min: -50.0,
            pole_offset: 1e-4,
            rho_floor: 1e-8,
            slope_cap: 1e6,
            tail_window: 0.1,
            crossing_band: 1e-7,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(IntegrateError::BadConfig(format!(
                "need 0 < h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(IntegrateError::BadConfig("tolerances must be positive".into()));
        }
        if self.pole_offset <= 0.0 {
            return Err(IntegrateError::BadConfig("pole_offset must be positive".into()));
        }
        if !(self.tail_window > 0.0 && self.tail_window <= 1.0) {
            return Err(IntegrateError::BadConfig("tail_window must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    RhoZero,
    DrhoZeroCross,
    ScalarZeroCross,
    SlopeBlowup,
    HorizonReached,
}

impl EventKind {
    pub fn is_terminal(&self) -> bool {
        matches!(self, EventKind::RhoZero | EventKind::SlopeBlowup | EventKind::HorizonReached)
    }

    pub fn is_breakdown(&self) -> bool {
        matches!(self, EventKind::RhoZero | EventKind::SlopeBlowup)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub r: f64,
    pub state: WarpState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub state: WarpState,
    pub ddrho: f64,
    pub curvature: CurvatureSample,
    /// Steady flat-fiber first integral, when applicable.
    pub c_steady: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajDirection {
    Forward,
    Backward,
    Bidirectional,
}

/// Dense-output segment of one accepted step (quartic interpolant).
#[derive(Debug, Clone, Copy)]
pub struct DenseSegment {
    pub r0: f64,
    pub h: f64,
    /// rcont coefficients per component (rho, drho, F).
    pub c: [[f64; 5]; 3],
}

impl DenseSegment {
    pub fn contains(&self, r: f64) -> bool {
        let theta = (r - self.r0) / self.h;
        (-1e-12..=1.0 + 1e-12).contains(&theta)
    }

    pub fn eval(&self, r: f64) -> [f64; 3] {
        let theta = (r - self.r0) / self.h;
        let t1 = 1.0 - theta;
        let mut y = [0.0; 3];
        for i in 0..3 {
            let c = self.c[i];
            y[i] = c[0] + theta * (c[1] + t1 * (c[2] + theta * (c[3] + t1 * c[4])));
        }
        y
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SolitonParams,
    pub config: IntegratorConfig,
    pub direction: TrajDirection,
    /// Samples in strictly increasing r.
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<Event>,
    /// Integration stopped by step underflow instead of an event.
    pub stiff_stop: bool,
    #[serde(skip)]
    dense: Vec<DenseSegment>,
}

/// Which end of a trajectory a tail statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailEnd {
    Low,
    High,
}

impl Trajectory {
    pub fn r_first(&self) -> f64 {
        self.samples.first().map(|s| s.state.r).unwrap_or(f64::NAN)
    }

    pub fn r_last(&self) -> f64 {
        self.samples.last().map(|s| s.state.r).unwrap_or(f64::NAN)
    }

    /// Dense-output evaluation of (rho, rho', F) anywhere on the computed range.
    pub fn eval(&self, r: f64) -> Option<[f64; 3]> {
        self.dense.iter().find(|seg| seg.contains(r)).map(|seg| seg.eval(r))
    }

    pub fn terminal_event(&self) -> Option<&Event> {
        self.events.iter().find(|e| e.kind.is_terminal() && e.kind.is_breakdown()).or_else(|| {
            self.events.iter().find(|e| e.kind.is_terminal())
        })
    }

    /// Breakdown event at the given end, if any.
    pub fn breakdown_at(&self, end: TailEnd) -> Option<&Event> {
        let mid = (self.r_first() + self.r_last()) / 2.0;
        self.events.iter().find(|e| {
            e.kind.is_breakdown()
                && match end {
                    TailEnd::Low => e.r <= mid,
                    TailEnd::High => e.r >= mid,
                }
        })
    }

    /// Least-squares constant fit of rho' over the trailing window:
    /// returns (mean, rms residual).
    pub fn tail_drho_fit(&self, end: TailEnd) -> Option<(f64, f64)> {
        if self.samples.len() < 2 {
            return None;
        }
        let span = self.r_last() - self.r_first();
        let window = self.config.tail_window * span;
        let keep: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| match end {
                TailEnd::High => s.state.r >= self.r_last() - window,
                TailEnd::Low => s.state.r <= self.r_first() + window,
            })
            .map(|s| s.state.drho)
            .collect();
        if keep.len() < 2 {
            return None;
        }
        let mean = keep.iter().sum::<f64>() / keep.len() as f64;
        let var = keep.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / keep.len() as f64;
        Some((mean, var.sqrt()))
    }

    /// Scalar curvature series (soliton identity) over the samples.
    pub fn scalar_series(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let lambda = self.params.lambda;
        self.samples.iter().map(move |s| (s.state.r, scalar_from_state(&s.state, lambda)))
    }

    /// Merge a backward and a forward run from the same seed into one
    /// trajectory ordered by increasing r.
    pub fn merge(backward: Trajectory, forward: Trajectory) -> Trajectory {
        let mut samples = backward.samples;
        // Both runs share the seed sample.
        samples.extend(forward.samples.into_iter().skip(1));
        let mut events = backward.events;
        events.extend(forward.events);
        events.sort_by(|a, b| a.r.total_cmp(&b.r));
        let mut dense = backward.dense;
        dense.extend(forward.dense);
        Trajectory {
            params: forward.params,
            config: forward.config,
            direction: TrajDirection::Bidirectional,
            samples,
            events,
            stiff_stop: backward.stiff_stop || forward.stiff_stop,
            dense,
        }
    }
}

/// Series start at the pole: `rho = s (h0 + a3 h0^3)` with `s` the branch
/// sign and `a3 = -(1+lambda)/12` (n = 2) or `-(1+lambda)/36` (n = 3, rbar = 2).
pub fn series_start_pole(
    params: &SolitonParams,
    config: &IntegratorConfig,
) -> Result<WarpState, IntegrateError> {
    let branch = match params.case {
        BoundaryCase::PoleStart { branch } => branch,
        BoundaryCase::FullLine => return Err(IntegrateError::NotPoleStart),
    };
    let a3 = match params.n {
        2 => -(1.0 + params.lambda) / 12.0,
        3 => {
            // Leading balance of the 3D equation forces rbar = 2 rho'(0)^2.
            if params.rbar() != 2.0 {
                return Err(IntegrateError::PoleObstruction(params.rbar()));
            }
            -(1.0 + params.lambda) / 36.0
        }
        n => return Err(IntegrateError::Ode(OdeError::BadDimension(n))),
    };
    let s = branch.sign();
    let h0 = config.pole_offset;
    let rho = s * (h0 + a3 * h0.powi(3));
    let drho = s * (1.0 + 3.0 * a3 * h0 * h0);
    let f_pot = s * (h0 * h0 / 2.0 + a3 * h0.powi(4) / 4.0);
    Ok(WarpState::new(h0, rho, drho, f_pot))
}

/// Full-line seed at r = 0 with the potential gauge `F(0) = 0`. For 2D
/// expanding parameters the seed slope must lie in `(0, -lambda)` for a
/// complete soliton; outside that window a breakdown warning is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullLineSeed {
    pub state: WarpState,
    pub breakdown_warning: bool,
}

pub fn full_line_seed(
    params: &SolitonParams,
    rho0: f64,
    drho0: f64,
) -> Result<FullLineSeed, IntegrateError> {
    if rho0 <= 0.0 {
        return Err(IntegrateError::BadStart(format!("full-line seed needs rho0 > 0, got {rho0}")));
    }
    let breakdown_warning = params.n == 2
        && params.lambda < 0.0
        && !(drho0 > 0.0 && drho0 < -params.lambda);
    Ok(FullLineSeed { state: WarpState::new(0.0, rho0, drho0, 0.0), breakdown_warning })
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub(crate) struct StepOutcome {
    pub y1: [f64; 3],
    pub k7: [f64; 3],
    pub err: f64,
    pub dense: DenseSegment,
}

/// One trial Dormand-Prince step; `Err` means a stage left the rhs domain.
pub(crate) fn dopri_step(
    params: &SolitonParams,
    r: f64,
    y: &[f64; 3],
    k1: &[f64; 3],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<StepOutcome, OdeError> {
    let f = |r: f64, y: &[f64; 3]| -> Result<[f64; 3], OdeError> {
        let state = WarpState::new(r, y[0], y[1], y[2]);
        let ddrho = params.rho_accel(&state)?;
        Ok([y[1], ddrho, y[0]])
    };
    let mut k = [[0.0f64; 3]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for i in 0..3 {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        k[s] = f(r + C[s] * h, &ys)?;
    }
    let mut y1 = *y;
    for (j, kj) in k.iter().enumerate() {
        for i in 0..3 {
            y1[i] += h * B5[j] * kj[i];
        }
    }
    let mut err = 0.0;
    for i in 0..3 {
        let mut e = 0.0;
        for (j, kj) in k.iter().enumerate() {
            e += E[j] * kj[i];
        }
        e *= h;
        let sc = abs_tol + rel_tol * y[i].abs().max(y1[i].abs());
        err += (e / sc) * (e / sc);
    }
    err = (err / 3.0).sqrt();

    let mut dense = DenseSegment { r0: r, h, c: [[0.0; 5]; 3] };
    for i in 0..3 {
        let dy = y1[i] - y[i];
        let r3 = h * k[0][i] - dy;
        let r4 = dy - h * k[6][i] - r3;
        let mut r5 = 0.0;
        for (j, kj) in k.iter().enumerate() {
            r5 += D[j] * kj[i];
        }
        r5 *= h;
        dense.c[i] = [y[i], dy, r3, r4, r5];
    }
    Ok(StepOutcome { y1, k7: k[6], err, dense })
}

/// Sign-crossing watcher with a deadband: a crossing is raised only between
/// two observations that both clear the band, with opposite signs.
struct CrossWatcher {
    kind: EventKind,
    band: f64,
    armed: Option<(f64, f64)>,
}

impl CrossWatcher {
    fn new(kind: EventKind, band: f64) -> Self {
        CrossWatcher { kind, band, armed: None }
    }

    fn observe(&mut self, r: f64, v: f64) -> Option<(f64, f64)> {
        if v.abs() <= self.band {
            return None;
        }
        let sign = v.signum();
        let bracket = match self.armed {
            Some((r_prev, s_prev)) if s_prev != sign => Some((r_prev, r)),
            _ => None,
        };
        self.armed = Some((r, sign));
        bracket
    }
}

fn bisect(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut ga = g(a);
    if ga == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= 1e-13 * m.abs().max(1.0) {
            return m;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn make_sample(params: &SolitonParams, state: WarpState, ddrho: f64) -> TrajectorySample {
    let curvature = match params.n {
        2 => curvature_sample_2d(state.r, state.rho, ddrho).unwrap_or_else(|_| {
            // Branch (B) runs with rho <= 0; fall back to the soliton identity.
            let k = if state.rho.abs() > 1e-12 {
                -ddrho / state.rho
            } else {
                scalar_from_state(&state, params.lambda) / 2.0
            };
            CurvatureSample {
                r: state.r,
                scalar_r: 2.0 * k,
                k_gauss: Some(k),
                k_rad: None,
                k_fib: None,
                ricci_rr: None,
                ricci_fib: None,
            }
        }),
        _ => curvature_sample_3d(state.r, params.rbar(), state.rho, state.drho, ddrho)
            .unwrap_or(CurvatureSample {
                r: state.r,
                scalar_r: scalar_from_state(&state, params.lambda),
                k_gauss: None,
                k_rad: None,
                k_fib: None,
                ricci_rr: None,
                ricci_fib: None,
            }),
    };
    let c_steady = if params.n == 3 && params.lambda == 0.0 && params.rbar() == 0.0 {
        steady_first_integral(&state).ok()
    } else {
        None
    };
    TrajectorySample { state, ddrho, curvature, c_steady }
}

/// Integrate the reduced ODE from `start` toward the configured horizon.
///
/// Terminal events (`RhoZero`, `SlopeBlowup`, `HorizonReached`) stop the run;
/// sign crossings of rho' and R are recorded and integration continues.
/// Samples are returned in increasing r regardless of direction.
pub fn integrate(
    params: &SolitonParams,
    start: &WarpState,
    config: &IntegratorConfig,
    direction: Direction,
) -> Result<Trajectory, IntegrateError> {
    config.validate()?;
    let dir = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let r_end = match direction {
        Direction::Forward => config.r_max,
        Direction::Backward => config.r_min,
    };
    if dir * (r_end - start.r) <= 0.0 {
        return Err(IntegrateError::BadStart(format!(
            "horizon {r_end} is not ahead of start r = {}",
            start.r
        )));
    }

    let mut r = start.r;
    let mut y = [start.rho, start.drho, start.f_pot];
    let first = WarpState::new(r, y[0], y[1], y[2]);
    let k_first = {
        let ddrho = params.rho_accel(&first)?;
        [y[1], ddrho, y[0]]
    };
    let mut k1 = k_first;

    let rho_sign = if start.rho != 0.0 { start.rho.signum() } else { start.drho.signum() };
    let band = config.crossing_band;
    let mut watch_drho = CrossWatcher::new(EventKind::DrhoZeroCross, band);
    let mut watch_scalar = CrossWatcher::new(EventKind::ScalarZeroCross, band);
    watch_drho.observe(r, y[1]);
    watch_scalar.observe(r, y[1] + params.lambda);

    let mut samples = vec![make_sample(params, first, k1[1])];
    let mut events: Vec<Event> = Vec::new();
    let mut dense: Vec<DenseSegment> = Vec::new();
    let mut stiff_stop = false;

    let eval_dense = |dense: &[DenseSegment], r: f64| -> [f64; 3] {
        dense
            .iter()
            .rev()
            .find(|seg| seg.contains(r))
            .map(|seg| seg.eval(r))
            .unwrap_or([f64::NAN; 3])
    };

    let mut h = config.h_init.min(config.h_max) * dir;
    let mut done = false;
    let mut iterations = 0usize;
    while !done {
        iterations += 1;
        if iterations > 5_000_000 {
            stiff_stop = true;
            break;
        }
        if dir * (r_end - r) <= 1e-14 * r_end.abs().max(1.0) {
            let state = WarpState::new(r, y[0], y[1], y[2]);
            events.push(Event { kind: EventKind::HorizonReached, r, state });
            break;
        }
        if h.abs() > config.h_max {
            h = config.h_max * dir;
        }
        if dir * (r + h - r_end) > 0.0 {
            h = r_end - r;
        }
        if h.abs() < config.h_min {
            stiff_stop = true;
            break;
        }

        let outcome = match dopri_step(params, r, &y, &k1, h, config.rel_tol, config.abs_tol) {
            Ok(o) => o,
            Err(_) => {
                // A stage left the domain (rho <= 0 in 3D): retry shorter.
                h *= 0.5;
                continue;
            }
        };
        if outcome.err > 1.0 {
            let fac = (0.9 * outcome.err.powf(-0.2)).max(0.2);
            h *= fac;
            continue;
        }

        // Accepted.
        let r1 = r + h;
        let y1 = outcome.y1;
        dense.push(outcome.dense);

        // Terminal events inside the step, nearest-first.
        let seg = *dense.last().unwrap();
        let mut cut: Option<(EventKind, f64)> = None;
        let g_rho = |rr: f64| rho_sign * seg.eval(rr)[0] - config.rho_floor;
        if g_rho(r1) <= 0.0 {
            let rc = bisect(r, r1, g_rho);
            cut = Some((EventKind::RhoZero, rc));
        }
        let g_slope = |rr: f64| config.slope_cap - seg.eval(rr)[1].abs();
        if g_slope(r1) <= 0.0 {
            let rc = bisect(r, r1, g_slope);
            if cut.map_or(true, |(_, rc0)| dir * (rc - rc0) < 0.0) {
                cut = Some((EventKind::SlopeBlowup, rc));
            }
        }

        let (r_stop, y_stop) = match cut {
            Some((_, rc)) => (rc, seg.eval(rc)),
            None => (r1, y1),
        };

        // Non-terminal crossings up to the stop point.
        for (watcher, value) in [
            (&mut watch_drho, y_stop[1]),
            (&mut watch_scalar, y_stop[1] + params.lambda),
        ] {
            if let Some((a, b)) = watcher.observe(r_stop, value) {
                let g = |rr: f64| match watcher.kind {
                    EventKind::DrhoZeroCross => eval_dense(&dense, rr)[1],
                    _ => eval_dense(&dense, rr)[1] + params.lambda,
                };
                let rc = bisect(a, b, g);
                let yc = eval_dense(&dense, rc);
                events.push(Event {
                    kind: watcher.kind,
                    r: rc,
                    state: WarpState::new(rc, yc[0], yc[1], yc[2]),
                });
            }
        }

        let state = WarpState::new(r_stop, y_stop[0], y_stop[1], y_stop[2]);
        let ddrho = match cut {
            None => outcome.k7[1],
            Some(_) => params.rho_accel(&state).unwrap_or(f64::NAN),
        };
        samples.push(make_sample(params, state, ddrho));

        if let Some((kind, rc)) = cut {
            events.push(Event { kind, r: rc, state });
            done = true;
        } else {
            r = r1;
            y = y1;
            k1 = outcome.k7;
            let fac = if outcome.err == 0.0 {
                5.0
            } else {
                (0.9 * outcome.err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        }
    }

    if matches!(direction, Direction::Backward) {
        samples.reverse();
    }
    events.sort_by(|a, b| a.r.total_cmp(&b.r));
    let trajectory = Trajectory {
        params: *params,
        config: *config,
        direction: match direction {
            Direction::Forward => TrajDirection::Forward,
            Direction::Backward => TrajDirection::Backward,
        },
        samples,
        events,
        stiff_stop,
        dense,
    };
    if stiff_stop {
        return Err(IntegrateError::StepUnderflow { r, trajectory: Box::new(trajectory) });
    }
    Ok(trajectory)
}

/// Integrate both directions from a full-line seed and merge. A step
/// underflow on either side is kept as a stiff stop on the merged trajectory
/// rather than an error.
pub fn integrate_full_line(
    params: &SolitonParams,
    seed: &WarpState,
    config: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let flatten = |res: Result<Trajectory, IntegrateError>| match res {
        Ok(t) => Ok(t),
        Err(e @ IntegrateError::StepUnderflow { .. }) => Ok(e.into_trajectory().unwrap()),
        Err(e) => Err(e),
    };
    let backward = flatten(integrate(params, seed, config, Direction::Backward))?;
    let forward = flatten(integrate(params, seed, config, Direction::Forward))?;
    Ok(Trajectory::merge(backward, forward))
}

/// Run a pole-start problem: series handoff, then forward integration.
pub fn integrate_pole_start(
    params: &SolitonParams,
    config: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    let start = series_start_pole(params, config)?;
    integrate(params, &start, config, Direction::Forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FiberModel;
    use crate::odes::{cigar_closed_form, residual, PoleBranch};

    fn pole_2d(lambda: f64) -> SolitonParams {
        SolitonParams::new(
            2,
            lambda,
            FiberModel::circle(),
            BoundaryCase::PoleStart { branch: PoleBranch::A },
        )
        .unwrap()
    }

    fn line_2d(lambda: f64) -> SolitonParams {
        SolitonParams::new(2, lambda, FiberModel::circle(), BoundaryCase::FullLine).unwrap()
    }

    #[test]
    fn series_start_matches_cigar_expansion() {
        // 2 tanh(r/2) = r - r^3/12 + O(r^5).
        let cfg = IntegratorConfig::default();
        let start = series_start_pole(&pole_2d(0.0), &cfg).unwrap();
        let exact = cigar_closed_form(cfg.pole_offset);
        assert!((start.rho - exact.rho).abs() < 1e-18);
        assert!((start.drho - exact.drho).abs() < 1e-15);
        assert!((start.rho - (1e-4 - 1e-12 / 12.0)).abs() < 1e-19);
    }

    #[test]
    fn series_start_flat_cone_free_case() {
        // lambda = -1: a3 = 0, rho(h0) = h0 exactly to this order.
        let cfg = IntegratorConfig::default();
        let start = series_start_pole(&pole_2d(-1.0), &cfg).unwrap();
        assert_eq!(start.rho, cfg.pole_offset);
        assert_eq!(start.drho, 1.0);
    }

    #[test]
    fn series_start_3d_coefficient() {
        let cfg = IntegratorConfig::default();
        let params = SolitonParams::new(
            3,
            0.0,
            FiberModel::round_sphere2(),
            BoundaryCase::PoleStart { branch: PoleBranch::A },
        )
        .unwrap();
        let start = series_start_pole(&params, &cfg).unwrap();
        let h0 = cfg.pole_offset;
        assert!((start.rho - (h0 - h0.powi(3) / 36.0)).abs() < 1e-19);
    }

    #[test]
    fn series_start_pole_obstruction() {
        // Building the params already rejects rbar != 2 at a 3D pole.
        assert!(SolitonParams::new(
            3,
            0.0,
            FiberModel::const_scal(0.0),
            BoundaryCase::PoleStart { branch: PoleBranch::A },
        )
        .is_err());
    }

    #[test]
    fn cigar_trajectory_matches_closed_form() {
        let cfg = IntegratorConfig { r_max: 20.0, ..Default::default() };
        let traj = integrate_pole_start(&pole_2d(0.0), &cfg).unwrap();
        let mut worst = 0.0f64;
        for s in &traj.samples {
            let exact = cigar_closed_form(s.state.r);
            worst = worst.max((s.state.rho - exact.rho).abs());
        }
        assert!(worst <= 1e-6, "max rho error {worst}");
        assert!(traj
            .events
            .iter()
            .all(|e| !matches!(e.kind, EventKind::DrhoZeroCross | EventKind::ScalarZeroCross)));
        assert!(matches!(traj.terminal_event().unwrap().kind, EventKind::HorizonReached));
    }

    #[test]
    fn dense_output_between_samples() {
        let cfg = IntegratorConfig { r_max: 10.0, ..Default::default() };
        let traj = integrate_pole_start(&pole_2d(0.0), &cfg).unwrap();
        for i in 0..200 {
            let r = 0.01 + i as f64 * 0.049;
            let y = traj.eval(r).unwrap();
            let exact = cigar_closed_form(r);
            assert!((y[0] - exact.rho).abs() < 1e-7, "dense error at r = {r}");
        }
    }

    #[test]
    fn shrinking_pole_hits_rho_zero() {
        let cfg = IntegratorConfig { r_max: 100.0, ..Default::default() };
        let err_or = integrate_pole_start(&pole_2d(1.0), &cfg);
        let traj = err_or.unwrap();
        let term = traj.terminal_event().unwrap();
        assert!(term.kind.is_breakdown(), "expected breakdown, got {:?}", term.kind);
        assert!(term.r < 100.0);
    }

    #[test]
    fn constant_3d_trajectory_stays_put() {
        let params =
            SolitonParams::new(3, -1.0, FiberModel::hyperbolic2(-2.0).unwrap(), BoundaryCase::FullLine)
                .unwrap();
        let cfg = IntegratorConfig { r_max: 20.0, ..Default::default() };
        let seed = WarpState::new(0.0, 2.0f64.sqrt(), 0.0, 0.0);
        let traj = integrate(&params, &seed, &cfg, Direction::Forward).unwrap();
        for s in &traj.samples {
            assert!((s.state.rho - 2.0f64.sqrt()).abs() < 1e-10, "r = {}", s.state.r);
        }
    }

    #[test]
    fn residual_bound_along_accepted_samples() {
        let cfg = IntegratorConfig { r_max: 20.0, ..Default::default() };
        let params = pole_2d(-0.5);
        let traj = integrate_pole_start(&params, &cfg).unwrap();
        for s in &traj.samples {
            let res = residual(&s.state, s.ddrho, &params).unwrap();
            let scale = s.state.rho.powi(2).max(s.state.drho.powi(2)).max(1.0);
            assert!(res.abs() <= 10.0 * cfg.rel_tol * scale, "residual {res} at r {}", s.state.r);
        }
    }

    #[test]
    fn series_handoff_insensitivity() {
        let params = pole_2d(-0.5);
        let base = IntegratorConfig { r_max: 2.0, ..Default::default() };
        let fine = IntegratorConfig { pole_offset: 1e-5, ..base };
        let t1 = integrate_pole_start(&params, &base).unwrap();
        let t2 = integrate_pole_start(&params, &fine).unwrap();
        let a = t1.eval(1.0).unwrap();
        let b = t2.eval(1.0).unwrap();
        assert!((a[0] - b[0]).abs() <= 10.0 * base.rel_tol, "drift {}", (a[0] - b[0]).abs());
    }

    #[test]
    fn no_scalar_crossing_for_expanding_pole() {
        let cfg = IntegratorConfig { r_max: 50.0, ..Default::default() };
        let traj = integrate_pole_start(&pole_2d(-2.0), &cfg).unwrap();
        assert!(traj.events.iter().all(|e| e.kind != EventKind::ScalarZeroCross));
        // R < 0 throughout.
        for (_, scal) in traj.scalar_series() {
            assert!(scal < 0.0);
        }
    }

    #[test]
    fn steady_first_integral_drift() {
        let params =
            SolitonParams::new(3, 0.0, FiberModel::euclidean2(), BoundaryCase::FullLine).unwrap();
        let cfg = IntegratorConfig { r_max: 50.0, ..Default::default() };
        let seed = full_line_seed(&params, 10.0, -3.15).unwrap();
        let traj = integrate(&params, &seed.state, &cfg, Direction::Forward).unwrap();
        let c0 = traj.samples[0].c_steady.unwrap();
        for s in &traj.samples {
            let c = s.c_steady.unwrap();
            assert!((c - c0).abs() <= 1e-8, "drift {} at r {}", (c - c0).abs(), s.state.r);
        }
    }

    #[test]
    fn full_line_merge_is_ordered() {
        let params = line_2d(-1.0);
        let cfg = IntegratorConfig { r_max: 5.0, r_min: -5.0, ..Default::default() };
        let seed = full_line_seed(&params, 1.0, 0.5).unwrap();
        assert!(!seed.breakdown_warning);
        let traj = integrate_full_line(&params, &seed.state, &cfg).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[0].state.r < w[1].state.r);
        }
        assert_eq!(traj.direction, TrajDirection::Bidirectional);
    }

    #[test]
    fn full_line_seed_warning_window() {
        let params = line_2d(-1.0);
        assert!(!full_line_seed(&params, 1.0, 0.5).unwrap().breakdown_warning);
        assert!(full_line_seed(&params, 1.0, 1.5).unwrap().breakdown_warning);
        assert!(full_line_seed(&params, 1.0, -0.1).unwrap().breakdown_warning);
        assert!(full_line_seed(&params, 0.0, 0.5).is_err());
    }

    #[test]
    fn seed_outside_window_breaks_down() {
        let params = line_2d(-1.0);
        let cfg = IntegratorConfig { r_max: 100.0, r_min: -100.0, ..Default::default() };
        let seed = full_line_seed(&params, 1.0, 1.5).unwrap();
        assert!(seed.breakdown_warning);
        let traj = integrate_full_line(&params, &seed.state, &cfg).unwrap();
        assert!(
            traj.events.iter().any(|e| e.kind.is_breakdown()) || traj.stiff_stop,
            "expected a breakdown witness"
        );
    }

    #[test]
    fn fixed_step_convergence_order() {
        // Fixed-step probe on the cigar: fitted exponent >= 4.5.
        let params = pole_2d(0.0);
        let start = cigar_closed_form(0.5);
        let mut errs = Vec::new();
        for n in [100usize, 200, 400] {
            let h = 4.0 / n as f64;
            let mut y = [start.rho, start.drho, start.f_pot];
            let mut r = start.r;
            for _ in 0..n {
                let state = WarpState::new(r, y[0], y[1], y[2]);
                let k1 = [y[1], params.rho_accel(&state).unwrap(), y[0]];
                let out = dopri_step(&params, r, &y, &k1, h, 1.0, 1.0).unwrap();
                y = out.y1;
                r += h;
            }
            let exact = cigar_closed_form(r);
            errs.push((y[0] - exact.rho).abs().max(1e-17));
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 4.5 && order2 >= 4.5, "orders {order1:.2}, {order2:.2}, errs {errs:?}");
    }

    #[test]
    fn tightening_tolerance_never_hurts() {
        let params = pole_2d(0.0);
        let mut prev = f64::INFINITY;
        for rel in [1e-6, 1e-8, 1e-10] {
            let cfg = IntegratorConfig {
                rel_tol: rel,
                abs_tol: rel * 1e-2,
                r_max: 20.0,
                ..Default::default()
            };
            let traj = integrate_pole_start(&params, &cfg).unwrap();
            let mut worst = 0.0f64;
            for s in &traj.samples {
                worst = worst.max((s.state.rho - cigar_closed_form(s.state.r).rho).abs());
            }
            assert!(worst <= prev * 1.05, "error grew: {worst} after {prev}");
            prev = worst;
        }
    }

    #[test]
    fn config_validation() {
        let bad = IntegratorConfig { h_min: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig { rel_tol: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
