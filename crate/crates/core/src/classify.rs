//! Turns trajectories into regime verdicts and checks them against the
//! classification theorems' quantitative predictions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{
    full_line_seed, integrate_full_line, integrate_pole_start, EventKind, IntegratorConfig,
    TailEnd, Trajectory,
};
use crate::odes::{
    constant_expanding_solution, expanding_separatrix_slope, BoundaryCase, PoleBranch,
    SolitonParams,
};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("trajectory has {0} samples; classification needs at least 10")]
    InsufficientData(usize),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarSign {
    Positive,
    Negative,
    Zero,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    StrictlyIncreasing,
    StrictlyDecreasing,
    Constant,
    NonMonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Completeness {
    CompleteWithinHorizon,
    BreakdownRhoZero,
    BreakdownBlowup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremMatch {
    Match,
    Mismatch,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub params: SolitonParams,
    pub scalar_sign: ScalarSign,
    pub k_monotonicity: Monotonicity,
    /// Observed (inf, sup) of the curvature series.
    pub k_range: (f64, f64),
    pub predicted_k_bounds: Option<(f64, f64)>,
    /// Tail fit of rho' at the forward end: (value, fit residual).
    pub asymptote_drho: Option<(f64, f64)>,
    pub completeness: Completeness,
    pub theorem_match: TheoremMatch,
    pub explanation: String,
}

/// Encoded expectation for one parameter point of the classification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOutcome {
    pub applicable: bool,
    pub expect_breakdown: bool,
    pub scalar_sign: Option<ScalarSign>,
    pub k_monotonicity: Option<Monotonicity>,
    /// Curvature bounds (lo, hi) valid at every sample.
    pub k_bounds: Option<(f64, f64)>,
    /// Forward-end limit of rho'.
    pub asymptote_drho: Option<f64>,
    /// Backward-end limit of K (2D full-line expanding case).
    pub backward_k_limit: Option<f64>,
    pub note: String,
}

impl ExpectedOutcome {
    fn not_applicable(note: &str) -> Self {
        ExpectedOutcome {
            applicable: false,
            expect_breakdown: false,
            scalar_sign: None,
            k_monotonicity: None,
            k_bounds: None,
            asymptote_drho: None,
            backward_k_limit: None,
            note: note.into(),
        }
    }

    fn breakdown(note: &str) -> Self {
        ExpectedOutcome {
            applicable: true,
            expect_breakdown: true,
            scalar_sign: None,
            k_monotonicity: None,
            k_bounds: None,
            asymptote_drho: None,
            backward_k_limit: None,
            note: note.into(),
        }
    }
}

/// Expected outcome for a parameter point, with the full-line seed
/// `(rho0, drho0)` when one applies.
pub fn predicted_regime(params: &SolitonParams, seed: Option<(f64, f64)>) -> ExpectedOutcome {
    match params.n {
        2 => predicted_regime_2d(params, seed),
        3 => predicted_regime_3d(params, seed),
        _ => ExpectedOutcome::not_applicable("dimension outside the classified range"),
    }
}

fn predicted_regime_2d(params: &SolitonParams, seed: Option<(f64, f64)>) -> ExpectedOutcome {
    let lambda = params.lambda;
    match params.case {
        BoundaryCase::PoleStart { branch: PoleBranch::B } => {
            ExpectedOutcome::breakdown("negative pole branch cannot close up")
        }
        BoundaryCase::PoleStart { branch: PoleBranch::A } => {
            if lambda > 0.0 {
                ExpectedOutcome::breakdown("no nontrivial nonflat 2D shrinking soliton")
            } else if lambda == 0.0 {
                // Hamilton's cigar.
                ExpectedOutcome {
                    applicable: true,
                    expect_breakdown: false,
                    scalar_sign: Some(ScalarSign::Positive),
                    k_monotonicity: Some(Monotonicity::StrictlyDecreasing),
                    k_bounds: Some((0.0, 0.5)),
                    asymptote_drho: Some(0.0),
                    backward_k_limit: None,
                    note: "steady pole start: Hamilton's cigar".into(),
                }
            } else if lambda == -1.0 {
                ExpectedOutcome::not_applicable("lambda = -1 pole start is the flat cone-free case")
            } else if lambda > -1.0 {
                ExpectedOutcome {
                    applicable: true,
                    expect_breakdown: false,
                    scalar_sign: Some(ScalarSign::Positive),
                    k_monotonicity: Some(Monotonicity::StrictlyDecreasing),
                    k_bounds: Some((0.0, (1.0 + lambda) / 2.0)),
                    asymptote_drho: Some(-lambda),
                    backward_k_limit: None,
                    note: "expanding pole start, lambda > -1: K decreasing in (0, (1+lambda)/2]"
                        .into(),
                }
            } else {
                ExpectedOutcome {
                    applicable: true,
                    expect_breakdown: false,
                    scalar_sign: Some(ScalarSign::Negative),
                    k_monotonicity: Some(Monotonicity::StrictlyIncreasing),
                    k_bounds: Some(((1.0 + lambda) / 2.0, 0.0)),
                    asymptote_drho: Some(-lambda),
                    backward_k_limit: None,
                    note: "expanding pole start, lambda < -1: K increasing in [(1+lambda)/2, 0)"
                        .into(),
                }
            }
        }
        BoundaryCase::FullLine => {
            if lambda >= 0.0 {
                ExpectedOutcome::breakdown("no steady or shrinking 2D soliton on the full line")
            } else {
                match seed {
                    Some((rho0, drho0)) if drho0 > 0.0 && drho0 < -lambda => {
                        // The complete solution is the single phase-plane
                        // orbit connecting (0, 0) to the linear end; slopes
                        // inside (0, -lambda) but off that orbit still lose
                        // positivity backward.
                        let on_orbit = expanding_separatrix_slope(lambda, rho0)
                            .map(|w| (drho0 - w).abs() <= 1e-9)
                            .unwrap_or(false);
                        if on_orbit {
                            ExpectedOutcome {
                                applicable: true,
                                expect_breakdown: false,
                                scalar_sign: Some(ScalarSign::Negative),
                                k_monotonicity: Some(Monotonicity::StrictlyIncreasing),
                                k_bounds: Some((lambda / 2.0, 0.0)),
                                asymptote_drho: Some(-lambda),
                                backward_k_limit: Some(lambda / 2.0),
                                note: "expanding full line: K increasing in (lambda/2, 0), \
                                       asymptotically flat forward"
                                    .into(),
                            }
                        } else {
                            ExpectedOutcome::breakdown(
                                "slope inside (0, -lambda) but off the connecting orbit",
                            )
                        }
                    }
                    Some(_) => ExpectedOutcome::breakdown(
                        "full-line slope outside (0, -lambda) cannot stay positive",
                    ),
                    None => ExpectedOutcome::not_applicable("full-line regime needs the seed"),
                }
            }
        }
    }
}

fn predicted_regime_3d(params: &SolitonParams, seed: Option<(f64, f64)>) -> ExpectedOutcome {
    let lambda = params.lambda;
    let rbar = params.rbar();
    if rbar > 0.0 {
        return ExpectedOutcome::not_applicable(
            "spherical fiber: existence only, no quantitative prediction encoded",
        );
    }
    if lambda >= 0.0 {
        // Shrinking and steady solitons force a positive-curvature fiber.
        return ExpectedOutcome::breakdown(
            "3D shrinking/steady over a nonpositive-curvature fiber cannot be complete",
        );
    }
    // Expanding over rbar <= 0: negative scalar curvature throughout.
    let constant_seed = match (seed, constant_expanding_solution(lambda, rbar)) {
        (Some((rho0, drho0)), Ok(rho_star)) => {
            drho0 == 0.0 && (rho0 - rho_star).abs() <= 1e-12
        }
        _ => false,
    };
    ExpectedOutcome {
        applicable: true,
        expect_breakdown: false,
        scalar_sign: Some(ScalarSign::Negative),
        k_monotonicity: constant_seed.then_some(Monotonicity::Constant),
        k_bounds: None,
        asymptote_drho: constant_seed.then_some(0.0),
        backward_k_limit: None,
        note: if constant_seed {
            "expanding constant solution with R = lambda".into()
        } else {
            "expanding over nonpositive fiber curvature: R < 0 while the solution persists".into()
        },
    }
}

/// Curvature series used for verdicts: Gaussian K in 2D, scalar R in 3D.
fn k_series(traj: &Trajectory) -> Vec<f64> {
    traj.samples
        .iter()
        .map(|s| match traj.params.n {
            2 => s.curvature.k_gauss.unwrap_or(s.curvature.scalar_r / 2.0),
            _ => s.curvature.scalar_r,
        })
        .collect()
}

fn monotonicity(values: &[f64], band: f64) -> Monotonicity {
    let mut pos = false;
    let mut neg = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d.abs() > band {
            if d > 0.0 {
                pos = true;
            } else {
                neg = true;
            }
        }
    }
    match (pos, neg) {
        (false, false) => Monotonicity::Constant,
        (true, false) => Monotonicity::StrictlyIncreasing,
        (false, true) => Monotonicity::StrictlyDecreasing,
        (true, true) => Monotonicity::NonMonotone,
    }
}

fn scalar_sign(traj: &Trajectory) -> ScalarSign {
    let crossed = traj.events.iter().any(|e| e.kind == EventKind::ScalarZeroCross);
    let band = traj.config.crossing_band;
    let mut pos = false;
    let mut neg = false;
    for (_, scal) in traj.scalar_series() {
        if scal > band {
            pos = true;
        } else if scal < -band {
            neg = true;
        }
    }
    match (pos, neg) {
        _ if crossed => ScalarSign::Mixed,
        (true, true) => ScalarSign::Mixed,
        (true, false) => ScalarSign::Positive,
        (false, true) => ScalarSign::Negative,
        (false, false) => ScalarSign::Zero,
    }
}

/// A `RhoZero` stop with a vanishing slope is the warp factor closing up
/// asymptotically, not a finite-distance degeneration.
const ASYMPTOTIC_SLOPE: f64 = 1e-3;

pub fn completeness(traj: &Trajectory) -> Completeness {
    if traj.stiff_stop {
        return Completeness::BreakdownBlowup;
    }
    for e in &traj.events {
        match e.kind {
            EventKind::RhoZero if e.state.drho.abs() > ASYMPTOTIC_SLOPE => {
                return Completeness::BreakdownRhoZero;
            }
            EventKind::SlopeBlowup => return Completeness::BreakdownBlowup,
            _ => {}
        }
    }
    Completeness::CompleteWithinHorizon
}

/// Tolerances of the theorem comparison.
const BOUND_TOL: f64 = 1e-6;
const ASYMPTOTE_TOL: f64 = 1e-3;
const ASYMPTOTE_RESIDUAL_TOL: f64 = 1e-4;
const BACKWARD_LIMIT_TOL: f64 = 1e-3;

pub fn classify(traj: &Trajectory) -> Result<ClassificationReport, ClassifyError> {
    if traj.samples.len() < 10 {
        return Err(ClassifyError::InsufficientData(traj.samples.len()));
    }
    let ks = k_series(traj);
    let k_scale = ks.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let band = 10.0 * traj.config.rel_tol * k_scale;
    let k_monotonicity = monotonicity(&ks, band);
    let k_range = (
        ks.iter().cloned().fold(f64::INFINITY, f64::min),
        ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let sign = scalar_sign(traj);
    let complete = completeness(traj);
    let asymptote = traj.tail_drho_fit(TailEnd::High);

    let seed = seed_of(traj);
    let expected = predicted_regime(&traj.params, seed);
    let mut notes: Vec<String> = vec![expected.note.clone()];
    let theorem_match = if !expected.applicable {
        TheoremMatch::NotApplicable
    } else {
        let mut ok = true;
        if expected.expect_breakdown {
            if complete == Completeness::CompleteWithinHorizon {
                ok = false;
                notes.push("expected breakdown but the trajectory stayed complete".into());
            }
        } else {
            if complete != Completeness::CompleteWithinHorizon {
                ok = false;
                notes.push(format!("expected a complete trajectory, got {complete:?}"));
            }
            if let Some(want) = expected.scalar_sign {
                if sign != want {
                    ok = false;
                    notes.push(format!("scalar sign {sign:?} != expected {want:?}"));
                }
            }
            if let Some(want) = expected.k_monotonicity {
                if k_monotonicity != want {
                    ok = false;
                    notes.push(format!("K monotonicity {k_monotonicity:?} != expected {want:?}"));
                }
            }
            if let Some((lo, hi)) = expected.k_bounds {
                if let Some(bad) =
                    ks.iter().find(|&&k| k < lo - BOUND_TOL || k > hi + BOUND_TOL)
                {
                    ok = false;
                    notes.push(format!("K sample {bad} violates bounds [{lo}, {hi}]"));
                }
            }
            if let Some(want) = expected.asymptote_drho {
                match asymptote {
                    Some((value, resid))
                        if (value - want).abs() <= ASYMPTOTE_TOL
                            && resid < ASYMPTOTE_RESIDUAL_TOL => {}
                    _ => {
                        ok = false;
                        notes.push(format!(
                            "forward tail fit {asymptote:?} does not settle at {want}"
                        ));
                    }
                }
            }
            if let Some(want) = expected.backward_k_limit {
                let k_first = ks[0];
                if (k_first - want).abs() > BACKWARD_LIMIT_TOL {
                    ok = false;
                    notes.push(format!("backward K endpoint {k_first} != expected limit {want}"));
                }
            }
        }
        if ok {
            TheoremMatch::Match
        } else {
            TheoremMatch::Mismatch
        }
    };

    Ok(ClassificationReport {
        params: traj.params,
        scalar_sign: sign,
        k_monotonicity,
        k_range,
        predicted_k_bounds: expected.k_bounds,
        asymptote_drho: asymptote,
        completeness: complete,
        theorem_match,
        explanation: notes.join("; "),
    })
}

/// Seed of a full-line trajectory: the sample nearest r = 0.
fn seed_of(traj: &Trajectory) -> Option<(f64, f64)> {
    if !matches!(traj.params.case, BoundaryCase::FullLine) {
        return None;
    }
    traj.samples
        .iter()
        .min_by(|a, b| a.state.r.abs().total_cmp(&b.state.r.abs()))
        .map(|s| (s.state.rho, s.state.drho))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub rho0: Option<f64>,
    pub drho0: Option<f64>,
    pub report: Option<ClassificationReport>,
    pub error: Option<String>,
}

/// One classification per grid point, in deterministic input order.
/// Individual failures are recorded in-row and never abort the sweep.
/// `YAMABE_LAB_THREADS` caps the parallelism.
pub fn sweep(
    template: &SolitonParams,
    lambda_grid: &[f64],
    seed_grid: &[(f64, f64)],
    config: &IntegratorConfig,
) -> Result<Vec<SweepRow>, ClassifyError> {
    if lambda_grid.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    let full_line = matches!(template.case, BoundaryCase::FullLine);
    if full_line && seed_grid.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    let jobs: Vec<(f64, Option<(f64, f64)>)> = if full_line {
        lambda_grid
            .iter()
            .flat_map(|&l| seed_grid.iter().map(move |&s| (l, Some(s))))
            .collect()
    } else {
        lambda_grid.iter().map(|&l| (l, None)).collect()
    };

    let run = |&(lambda, seed): &(f64, Option<(f64, f64)>)| -> SweepRow {
        let mut row = SweepRow {
            lambda,
            rho0: seed.map(|s| s.0),
            drho0: seed.map(|s| s.1),
            report: None,
            error: None,
        };
        let params =
            match SolitonParams::new(template.n, lambda, template.fiber, template.case) {
                Ok(p) => p,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            };
        let traj = match seed {
            Some((rho0, drho0)) => full_line_seed(&params, rho0, drho0)
                .and_then(|s| integrate_full_line(&params, &s.state, config)),
            None => match integrate_pole_start(&params, config) {
                Ok(t) => Ok(t),
                Err(e) => e
                    .into_trajectory()
                    .ok_or_else(|| crate::integrate::IntegrateError::BadStart("failed".into())),
            },
        };
        match traj {
            Ok(t) => match classify(&t) {
                Ok(report) => row.report = Some(report),
                Err(e) => row.error = Some(e.to_string()),
            },
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };

    let rows = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(|| jobs.par_iter().map(run).collect::<Vec<_>>()))
            .unwrap_or_else(|_| jobs.iter().map(run).collect()),
        None => jobs.par_iter().map(run).collect(),
    };
    Ok(rows)
}

fn thread_cap() -> Option<usize> {
    std::env::var("YAMABE_LAB_THREADS").ok()?.parse().ok()
}
