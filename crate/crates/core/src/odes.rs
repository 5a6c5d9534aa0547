//! The reduced soliton ODE systems, their differentiated forms, first
//! integrals, the 2D sign law, and closed-form reference solutions.
//!
//! With the warp factor `rho(r) = F'(r)` and scalar curvature `R = rho' + lambda`:
//!   2D:  2 rho'' + rho rho' + lambda rho = 0
//!   3D:  rho^2 rho' + lambda rho^2 + 2 rho'^2 + 4 rho rho'' - rbar = 0

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FiberKind, FiberModel};

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(u32),
    #[error("2D solitons live over a circle fiber, got {0:?}")]
    FiberMismatch2d(FiberKind),
    #[error("a smooth 3D pole forces the unit round sphere fiber (rbar = 2), got rbar = {0}")]
    PoleObstruction(f64),
    #[error("3D right-hand side is singular at rho = {0}")]
    Singular(f64),
    #[error("warp factor must be positive, got rho = {0}")]
    NonPositiveWarp(f64),
    #[error("constant expanding solution needs lambda < 0 and rbar < 0, got lambda = {lambda}, rbar = {rbar}")]
    SignViolation { lambda: f64, rbar: f64 },
    #[error("operation requires an expanding soliton (lambda < 0), got lambda = {0}")]
    NotExpanding(f64),
}

/// Pole branch: sign of `rho'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleBranch {
    A,
    B,
}

impl PoleBranch {
    pub fn sign(&self) -> f64 {
        match self {
            PoleBranch::A => 1.0,
            PoleBranch::B => -1.0,
        }
    }
}

/// Boundary-data case: smooth pole at r = 0 or data on the full line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCase {
    PoleStart { branch: PoleBranch },
    FullLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub n: u32,
    pub lambda: f64,
    pub fiber: FiberModel,
    pub case: BoundaryCase,
}

impl SolitonParams {
    pub fn new(
        n: u32,
        lambda: f64,
        fiber: FiberModel,
        case: BoundaryCase,
    ) -> Result<Self, OdeError> {
        if n != 2 && n != 3 {
            return Err(OdeError::BadDimension(n));
        }
        if n == 2 && fiber.kind != FiberKind::Circle {
            return Err(OdeError::FiberMismatch2d(fiber.kind));
        }
        if n == 3 && matches!(case, BoundaryCase::PoleStart { .. }) && fiber.rbar() != 2.0 {
            return Err(OdeError::PoleObstruction(fiber.rbar()));
        }
        Ok(SolitonParams { n, lambda, fiber, case })
    }

    pub fn rbar(&self) -> f64 {
        self.fiber.rbar()
    }

    /// Dispatch to the dimension-appropriate right-hand side.
    pub fn rho_accel(&self, state: &WarpState) -> Result<f64, OdeError> {
        match self.n {
            2 => Ok(rhs_2d(state, self.lambda)),
            3 => rhs_3d(state, self.lambda, self.rbar()),
            n => Err(OdeError::BadDimension(n)),
        }
    }
}

/// State of the reduced ODE: `(r, rho, rho')` plus the accumulated potential
/// `F` with gauge `F = 0` at the trajectory start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpState {
    pub r: f64,
    pub rho: f64,
    pub drho: f64,
    pub f_pot: f64,
}

impl WarpState {
    pub fn new(r: f64, rho: f64, drho: f64, f_pot: f64) -> Self {
        WarpState { r, rho, drho, f_pot }
    }
}

///// 2D right-hand side: `rho'' = -rho (rho' + lambda) / 2`.
pub fn rhs_2d(state: &WarpState, lambda: f64) -> f64 {
    -state.rho * (state.drho + lambda) / 2.0
}

/// 3D right-hand side: `rho'' = (rbar - rho^2 rho' - lambda rho^2 - 2 rho'^2) / (4 rho)`.
///
/// Singular at `rho = 0`; pole data must go through the series start.
pub fn rhs_3d(state: &WarpState, lambda: f64, rbar: f64) -> Result<f64, OdeError> {
    if state.rho <= 0.0 {
        return Err(OdeError::Singular(state.rho));
    }
    let rho2 = state.rho * state.rho;
    Ok((rbar - rho2 * state.drho - lambda * rho2 - 2.0 * state.drho * state.drho)
        / (4.0 * state.rho))
}

/// Soliton identity `R = rho' + lambda`.
pub fn scalar_from_state(state: &WarpState, lambda: f64) -> f64 {
    state.drho + lambda
}

/// Third derivative from the differentiated soliton equation.
pub fn third_derivative(
    state: &WarpState,
    ddrho: f64,
    params: &SolitonParams,
) -> Result<f64, OdeError> {
    let lambda = params.lambda;
    match params.n {
        2 => Ok(-(state.drho * state.drho + state.rho * ddrho + lambda * state.drho) / 2.0),
        3 => {
            if state.rho <= 0.0 {
                return Err(OdeError::Singular(state.rho));
            }
            let scal = state.drho + lambda;
            Ok(-(2.0 * state.rho * state.drho * scal
                + state.rho * state.rho * ddrho
                + 8.0 * state.drho * ddrho)
                / (4.0 * state.rho))
        }
        n => Err(OdeError::BadDimension(n)),
    }
}

/// First integral of the steady (`lambda = 0`) 3D flow over a flat fiber:
/// `C = 2 rho^{1/2} rho' + rho^{5/2} / 5`, conserved along exact solutions.
pub fn steady_first_integral(state: &WarpState) -> Result<f64, OdeError> {
    if state.rho <= 0.0 {
        return Err(OdeError::NonPositiveWarp(state.rho));
    }
    let s = state.rho.sqrt();
    Ok(2.0 * s * state.drho + s.powi(5) / 5.0)
}

/// First-order reduction of the steady flat-fiber flow:
/// `rho' = -rho^2/10 + (C/2) rho^{-1/2}`.
pub fn steady_reduced_rhs(rho: f64, c: f64) -> Result<f64, OdeError> {
    if rho <= 0.0 {
        return Err(OdeError::NonPositiveWarp(rho));
    }
    Ok(-rho * rho / 10.0 + c / (2.0 * rho.sqrt()))
}

/// Hamilton's cigar: `rho = 2 tanh(r/2)`, `rho' = sech^2(r/2)`,
/// `F = 4 log cosh(r/2)` with `F(0) = 0`.
pub fn cigar_closed_form(r: f64) -> WarpState {
    let u = r / 2.0;
    let sech2 = 1.0 / (u.cosh() * u.cosh());
    WarpState::new(r, 2.0 * u.tanh(), sech2, 4.0 * u.cosh().ln())
}

/// Constant expanding 3D solution `rho* = sqrt(rbar/lambda)` with `R = lambda`.
pub fn constant_expanding_solution(lambda: f64, rbar: f64) -> Result<f64, OdeError> {
    if lambda >= 0.0 || rbar >= 0.0 {
        return Err(OdeError::SignViolation { lambda, rbar });
    }
    Ok((rbar / lambda).sqrt())
}

/// Slope of the complete 2D expanding full-line solution at warp value `rho`.
///
/// The sign law gives the phase-plane first integral
/// `R - lambda log(R / lambda) + rho^2 / 4`; the complete solution is the
/// orbit through `(rho, R) -> (0, lambda)` where the integral equals
/// `lambda`. Solving for `R` in `(lambda, 0)` at the given `rho` and using
/// `R = rho' + lambda` yields the unique slope for which the trajectory
/// closes onto `rho' -> 0` backward instead of breaking down. The defining
/// function is strictly monotone in `R` on `(lambda, 0)`, so bisection is
/// exact to rounding.
pub fn expanding_separatrix_slope(lambda: f64, rho: f64) -> Result<f64, OdeError> {
    if lambda >= 0.0 {
        return Err(OdeError::NotExpanding(lambda));
    }
    if rho <= 0.0 {
        return Err(OdeError::NonPositiveWarp(rho));
    }
    let g = |scal: f64| scal - lambda * (scal / lambda).ln() - lambda + rho * rho / 4.0;
    let mut a = lambda * (1.0 - 1e-15);
    let mut b = lambda * 1e-300;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b) - lambda)
}

/// Left-hand side of the governing equation; zero on exact solution data.
pub fn residual(state: &WarpState, ddrho: f64, params: &SolitonParams) -> Result<f64, OdeError> {
    match params.n {
        2 => Ok(2.0 * ddrho + state.rho * state.drho + params.lambda * state.rho),
        3 => {
            if state.rho <= 0.0 {
                return Err(OdeError::Singular(state.rho));
            }
            let rho2 = state.rho * state.rho;
            Ok(rho2 * state.drho
                + params.lambda * rho2
                + 2.0 * state.drho * state.drho
                + 4.0 * state.rho * ddrho
                - params.rbar())
        }
        n => Err(OdeError::BadDimension(n)),
    }
}

/// Composite Simpson quadrature of `f` over `[a, b]` with `panels` panels
/// (`b < a` is allowed; the usual signed integral convention applies).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let h = (b - a) / (2 * n) as f64;
    let mut acc = f(a) + f(b);
    for i in 1..2 * n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Sign-law prediction in 2D: `R(r) = R(r0) exp(-1/2 int_{r0}^r rho)`.
///
/// `rho_of` supplies the warp factor (typically a trajectory's dense output);
/// the quadrature is composite Simpson with `panels` panels.
pub fn predicted_scalar_2d(
    r0: f64,
    scalar0: f64,
    r: f64,
    rho_of: impl Fn(f64) -> f64,
    panels: usize,
) -> f64 {
    if scalar0 == 0.0 {
        return 0.0;
    }
    let half_area = simpson(|s| rho_of(s) / 2.0, r0, r, panels);
    scalar0 * (-half_area).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params_2d(lambda: f64) -> SolitonParams {
        SolitonParams::new(
            2,
            lambda,
            FiberModel::circle(),
            BoundaryCase::PoleStart { branch: PoleBranch::A },
        )
        .unwrap()
    }

    fn params_3d(lambda: f64, rbar: f64) -> SolitonParams {
        let fiber = if rbar == 2.0 {
            FiberModel::round_sphere2()
        } else {
            FiberModel::const_scal(rbar)
        };
        SolitonParams::new(3, lambda, fiber, BoundaryCase::FullLine).unwrap()
    }

    /// Closed-form derivatives of the cigar profile, used as the symbolic
    /// oracle: rho = 2 tanh(u), rho' = sech^2 u, rho'' = -sech^2 u tanh u,
    /// rho''' = (2 sech^2 u tanh^2 u - sech^4 u)/2, with u = r/2.
    fn cigar_derivs(r: f64) -> (f64, f64, f64, f64) {
        let u = r / 2.0;
        let t = u.tanh();
        let s2 = 1.0 / (u.cosh() * u.cosh());
        (2.0 * t, s2, -s2 * t, (2.0 * s2 * t * t - s2 * s2) / 2.0)
    }

    #[test]
    fn rhs_2d_examples() {
        assert_eq!(rhs_2d(&WarpState::new(0.0, 1.0, 0.0, 0.0), 0.0), 0.0);
        let (rho, drho, ddrho, _) = cigar_derivs(1.0);
        let got = rhs_2d(&WarpState::new(1.0, rho, drho, 0.0), 0.0);
        assert!((got - ddrho).abs() < 1e-15);
        assert!((got - (-0.363430)).abs() < 1e-6);
        assert_eq!(rhs_2d(&WarpState::new(0.0, 1.0, 0.5, 0.0), -1.0), 0.25);
    }

    #[test]
    fn rhs_3d_examples() {
        let eq = WarpState::new(0.0, 2.0f64.sqrt(), 0.0, 0.0);
        let got = rhs_3d(&eq, -1.0, -2.0).unwrap();
        assert!(got.abs() < 1e-15, "equilibrium rhs = {got}");
        assert_eq!(rhs_3d(&WarpState::new(0.0, 1.0, 0.0, 0.0), 0.0, 2.0).unwrap(), 0.5);
        assert_eq!(rhs_3d(&WarpState::new(0.0, 1.0, 1.0, 0.0), 0.0, 2.0).unwrap(), -0.25);
        assert!(rhs_3d(&WarpState::new(0.0, 0.0, 1.0, 0.0), 0.0, 2.0).is_err());
    }

    #[test]
    fn scalar_from_state_examples() {
        assert_eq!(scalar_from_state(&WarpState::new(0.0, 1.0, 0.0, 0.0), -1.0), -1.0);
        assert_eq!(scalar_from_state(&WarpState::new(0.0, 1.0, 1.0, 0.0), 0.0), 1.0);
        let (_, drho, ddrho, _) = cigar_derivs(2.0);
        let got = scalar_from_state(&WarpState::new(2.0, 0.0, drho, 0.0), 0.0);
        assert!((got - 0.419974).abs() < 1e-6);
        // Cross-check against -2 rho''/rho on the closed form.
        let (rho, _, _, _) = cigar_derivs(2.0);
        assert!((got - (-2.0 * ddrho / rho)).abs() < 1e-15);
    }

    #[test]
    fn third_derivative_examples() {
        let p = params_2d(0.0);
        assert_eq!(
            third_derivative(&WarpState::new(0.0, 1.0, 0.0, 0.0), 0.0, &p).unwrap(),
            0.0
        );
        let (rho, drho, ddrho, dddrho) = cigar_derivs(1.0);
        let got = third_derivative(&WarpState::new(1.0, rho, drho, 0.0), ddrho, &p).unwrap();
        assert!((got - dddrho).abs() < 1e-12, "got {got}, symbolic {dddrho}");

        let p3 = params_3d(-1.0, -2.0);
        let eq = WarpState::new(0.0, 2.0f64.sqrt(), 0.0, 0.0);
        assert_eq!(third_derivative(&eq, 0.0, &p3).unwrap(), 0.0);
    }

    #[test]
    fn steady_first_integral_examples() {
        // Zero-slope level set: rho = (5C)^{2/5}.
        let rho = 5.0f64.powf(0.4);
        assert!((rho - 1.903654).abs() < 1e-6);
        let c = steady_first_integral(&WarpState::new(0.0, rho, 0.0, 0.0)).unwrap();
        assert!((c - 1.0).abs() < 1e-14);
        let c = steady_first_integral(&WarpState::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((c - 0.2).abs() < 1e-15);
        let c = steady_first_integral(&WarpState::new(0.0, 4.0, -3.15, 0.0)).unwrap();
        assert!((c - (-6.2)).abs() < 1e-12);
    }

    #[test]
    fn steady_reduced_rhs_examples() {
        let rho = 5.0f64.powf(0.4);
        assert!(steady_reduced_rhs(rho, 1.0).unwrap().abs() < 1e-15);
        assert!((steady_reduced_rhs(1.0, 0.0).unwrap() - (-0.1)).abs() < 1e-15);
        let got = steady_reduced_rhs(2.0, 1.0).unwrap();
        assert!((got - (-0.046447)).abs() < 1e-6);
        assert!(steady_reduced_rhs(0.0, 1.0).is_err());
    }

    #[test]
    fn cigar_closed_form_examples() {
        let s = cigar_closed_form(0.0);
        assert_eq!((s.rho, s.drho, s.f_pot), (0.0, 1.0, 0.0));
        let s = cigar_closed_form(1.0);
        assert!((s.rho - 0.924234).abs() < 1e-6);
        let s = cigar_closed_form(60.0);
        assert!((s.rho - 2.0).abs() < 1e-12);
        assert!(s.drho < 1e-12);
    }

    #[test]
    fn cigar_satisfies_equation() {
        // max over r in [-10, 10] of |2 rho'' + rho rho'| <= 1e-12.
        let mut worst = 0.0f64;
        for i in 0..=2000 {
            let r = -10.0 + i as f64 * 0.01;
            let (rho, drho, ddrho, _) = cigar_derivs(r);
            worst = worst.max((2.0 * ddrho + rho * drho).abs());
        }
        assert!(worst <= 1e-12, "max residual {worst}");
    }

    #[test]
    fn constant_expanding_examples() {
        assert!((constant_expanding_solution(-1.0, -2.0).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(constant_expanding_solution(-2.0, -2.0).unwrap(), 1.0);
        assert!((constant_expanding_solution(-0.5, -3.0).unwrap() - 6.0f64.sqrt()).abs() < 1e-12);
        assert!(constant_expanding_solution(0.5, -2.0).is_err());
        assert!(constant_expanding_solution(-0.5, 0.0).is_err());
    }

    #[test]
    fn equilibrium_property_random_pairs() {
        let mut x = 0.7f64;
        for _ in 0..50 {
            x = (x * 9301.0 + 49297.0) % 233280.0 / 233280.0;
            let lambda = -0.05 - 3.0 * x;
            let rbar = -0.1 - 2.0 * (1.0 - x);
            let rho = constant_expanding_solution(lambda, rbar).unwrap();
            let got = rhs_3d(&WarpState::new(0.0, rho, 0.0, 0.0), lambda, rbar).unwrap();
            assert!(got.abs() < 1e-14, "lambda {lambda} rbar {rbar} rhs {got}");
        }
    }

    #[test]
    fn residual_on_cigar_and_constant() {
        for i in 0..50 {
            let r = 0.1 + i as f64 * 0.2;
            let (rho, drho, ddrho, _) = cigar_derivs(r);
            let res = residual(&WarpState::new(r, rho, drho, 0.0), ddrho, &params_2d(0.0)).unwrap();
            assert!(res.abs() <= 1e-14, "r {r}: {res}");
        }
        let p = params_3d(-1.0, -2.0);
        let eq = WarpState::new(0.0, 2.0f64.sqrt(), 0.0, 0.0);
        let res = residual(&eq, 0.0, &p).unwrap();
        assert!(res.abs() < 1e-15, "constant residual {res}");
    }

    #[test]
    fn predicted_scalar_2d_examples() {
        assert_eq!(predicted_scalar_2d(0.0, 0.0, 5.0, |_| 1.0, 100), 0.0);
        // Constant rho = p: R = c exp(-p (r - r0)/2).
        let got = predicted_scalar_2d(1.0, 3.0, 4.0, |_| 0.8, 200);
        let expect = 3.0 * (-0.8 * 3.0 / 2.0f64).exp();
        assert!((got - expect).abs() < 1e-12);
        // Cigar: R(r) = sech^2(r/2) predicted from R(r0).
        let r0 = 0.1;
        let scalar0 = cigar_closed_form(r0).drho;
        let got = predicted_scalar_2d(r0, scalar0, 3.0, |s| cigar_closed_form(s).rho, 2000);
        let expect = cigar_closed_form(3.0).drho;
        assert!((got - expect).abs() < 1e-10, "got {got}, expect {expect}");
    }

    #[test]
    fn params_validation() {
        assert!(SolitonParams::new(4, 0.0, FiberModel::circle(), BoundaryCase::FullLine).is_err());
        assert!(SolitonParams::new(2, 0.0, FiberModel::round_sphere2(), BoundaryCase::FullLine)
            .is_err());
        assert!(matches!(
            SolitonParams::new(
                3,
                1.0,
                FiberModel::euclidean2(),
                BoundaryCase::PoleStart { branch: PoleBranch::A }
            ),
            Err(OdeError::PoleObstruction(_))
        ));
    }

    #[test]
    fn separatrix_slope_examples() {
        // Phase-plane invariant R - lambda log(R/lambda) + rho^2/4 equals
        // lambda on the connecting orbit; checked directly.
        for (lambda, rho) in [(-1.0, 1.0), (-1.0, 0.3), (-0.5, 2.0), (-3.0, 0.7)] {
            let drho = expanding_separatrix_slope(lambda, rho).unwrap();
            assert!(drho > 0.0 && drho < -lambda);
            let scal = drho + lambda;
            let inv = scal - lambda * (scal / lambda).ln() + rho * rho / 4.0;
            assert!((inv - lambda).abs() < 1e-12, "invariant {inv} at ({lambda}, {rho})");
        }
        // Near the origin the orbit leaves along the unstable eigenvector,
        // slope rho sqrt(-lambda/2).
        let w = expanding_separatrix_slope(-1.0, 1e-6).unwrap();
        assert!((w - 1e-6 / 2.0f64.sqrt()).abs() < 1e-9);
        assert!(expanding_separatrix_slope(0.5, 1.0).is_err());
        assert!(expanding_separatrix_slope(-1.0, 0.0).is_err());
    }

    proptest! {
        /// Definitional residual: plugging the rhs back into the equation
        /// gives zero to 1e-13 relative.
        #[test]
        fn residual_of_rhs_vanishes(
            rho in 1e-3f64..50.0,
            drho in -20.0f64..20.0,
            lambda in -5.0f64..5.0,
            rbar in -5.0f64..5.0,
            dim in 2u32..4,
        ) {
            let state = WarpState::new(0.0, rho, drho, 0.0);
            let params = if dim == 2 { params_2d(lambda) } else { params_3d(lambda, rbar) };
            let ddrho = params.rho_accel(&state).unwrap();
            let res = residual(&state, ddrho, &params).unwrap();
            let scale = rho.max(drho.abs()).max(1.0).powi(2).max(ddrho.abs());
            prop_assert!(res.abs() <= 1e-13 * scale.max(1.0), "residual {} scale {}", res, scale);
        }

        /// First-integral / reduction consistency for all rho > 0, C.
        #[test]
        fn first_integral_roundtrip(rho in 1e-3f64..100.0, c in -50.0f64..50.0) {
            let drho = steady_reduced_rhs(rho, c).unwrap();
            let back = steady_first_integral(&WarpState::new(0.0, rho, drho, 0.0)).unwrap();
            // The two terms of C cancel near equilibria; the achievable
            // absolute accuracy scales with their magnitude, not with C.
            let scale = rho.powf(2.5) / 5.0 + c.abs() + 1.0;
            prop_assert!((back - c).abs() <= 32.0 * f64::EPSILON * scale);
        }

        /// 2D sign law: the predicted scalar never changes sign.
        #[test]
        fn sign_law_preserves_sign(
            scalar0 in prop::sample::select(vec![-2.0f64, -0.1, 0.1, 2.0]),
            r in -10.0f64..10.0,
        ) {
            let got = predicted_scalar_2d(0.0, scalar0, r, |s| 1.0 + 0.5 * (s * 0.3).sin(), 400);
            prop_assert!(got * scalar0 > 0.0);
        }
    }
}
