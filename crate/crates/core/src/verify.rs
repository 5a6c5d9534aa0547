//! The acceptance battery: twelve self-contained checks that exercise the
//! whole pipeline against closed forms, conservation laws, and the
//! quantitative content of the classification theorems.

use crate::classify::{classify, ScalarSign};
use crate::geometry::{
    fd_scalar_curvature_oracle, gaussian_curvature_2d, FiberModel, WarpProfile,
};
use crate::integrate::{
    full_line_seed, integrate, integrate_full_line, integrate_pole_start, Direction, EventKind,
    IntegrateError, IntegratorConfig, TailEnd, Trajectory,
};
use crate::odes::{
    cigar_closed_form, expanding_separatrix_slope, residual, rhs_3d, simpson,
    steady_first_integral, steady_reduced_rhs, BoundaryCase, PoleBranch, SolitonParams, WarpState,
};

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

type CriterionFn = fn(f64) -> Result<String, String>;

pub const CRITERIA: [(usize, &str, CriterionFn); 12] = [
    (1, "cigar", c01_cigar),
    (2, "pole-curvature", c02_pole_curvature),
    (3, "expanding-case2", c03_expanding_case2),
    (4, "expanding-case3", c04_expanding_case3),
    (5, "expanding-case1", c05_expanding_case1),
    (6, "shrinking-2d", c06_shrinking_2d),
    (7, "steady-integral", c07_steady_integral),
    (8, "breakdown-3d", c08_breakdown_3d),
    (9, "expanding-3d", c09_expanding_3d),
    (10, "curvature-oracle", c10_curvature_oracle),
    (11, "sign-law", c11_sign_law),
    (12, "series-coefficients", c12_series_coefficients),
];

/// Run the suite. `tol_scale` multiplies every stated tolerance; `only`
/// restricts to the criterion with that name.
pub fn run_suite(tol_scale: f64, only: Option<&str>) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|(_, name, _)| only.is_none_or(|o| o == *name))
        .map(|&(id, name, f)| match f(tol_scale) {
            Ok(details) => CriterionOutcome { id, name, passed: true, details },
            Err(details) => CriterionOutcome { id, name, passed: false, details },
        })
        .collect()
}

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

fn line_3d(lambda: f64, fiber: FiberModel) -> SolitonParams {
    SolitonParams::new(3, lambda, fiber, BoundaryCase::FullLine).unwrap()
}

/// Gaussian curvature series of a 2D trajectory.
fn k_of(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples
        .iter()
        .map(|s| (s.state.r, s.curvature.k_gauss.expect("2D trajectory")))
        .collect()
}

/// Strict monotonicity with an epsilon floor: samples frozen at the f64
/// asymptote produce zero differences, which are tolerated; any difference
/// above the floor must have the required sign, and the overall trend must
/// be genuine.
fn strictly_monotone(ks: &[(f64, f64)], increasing: bool, floor: f64) -> Result<(), String> {
    for w in ks.windows(2) {
        let d = w[1].1 - w[0].1;
        let wrong = if increasing { -d } else { d };
        if wrong > floor {
            return Err(format!(
                "monotonicity violated at r = {}: K steps from {} to {}",
                w[0].0, w[0].1, w[1].1
            ));
        }
    }
    let total = ks.last().unwrap().1 - ks.first().unwrap().1;
    let ok = if increasing { total > 0.0 } else { total < 0.0 };
    if !ok {
        return Err(format!("no net K trend: total change {total}"));
    }
    Ok(())
}

fn c01_cigar(ts: f64) -> Result<String, String> {
    let cfg = IntegratorConfig { r_max: 20.0, ..Default::default() };
    let traj = integrate_pole_start(&pole_2d(0.0), &cfg).map_err(|e| e.to_string())?;
    let mut rho_err = 0.0f64;
    let mut f_err = 0.0f64;
    for s in &traj.samples {
        let exact = cigar_closed_form(s.state.r);
        rho_err = rho_err.max((s.state.rho - exact.rho).abs());
        f_err = f_err.max((s.state.f_pot - exact.f_pot).abs());
    }
    if rho_err > 1e-6 * ts {
        return Err(format!("max |rho - 2 tanh(r/2)| = {rho_err:e}"));
    }
    if f_err > 1e-5 * ts {
        return Err(format!("max |F - 4 log cosh(r/2)| = {f_err:e}"));
    }
    Ok(format!("max rho err {rho_err:.2e}, max F err {f_err:.2e} over [h0, 20]"))
}

fn c02_pole_curvature(ts: f64) -> Result<String, String> {
    let cfg = IntegratorConfig { r_max: 1.0, ..Default::default() };
    let mut worst = 0.0f64;
    for lambda in [0.0, -0.5, -2.0] {
        let traj = integrate_pole_start(&pole_2d(lambda), &cfg).map_err(|e| e.to_string())?;
        let k0 = traj.samples[0].curvature.k_gauss.unwrap();
        let want = (1.0 + lambda) / 2.0;
        let err = (k0 - want).abs();
        worst = worst.max(err);
        if err > 1e-5 * ts {
            return Err(format!("lambda {lambda}: first K = {k0}, want {want}"));
        }
    }
    Ok(format!("first K sample hits (1+lambda)/2, worst err {worst:.2e}"))
}

/// Shared body of the two expanding pole-start criteria.
fn expanding_pole(
    ts: f64,
    lambda: f64,
    increasing: bool,
    k_lo: f64,
    k_hi: f64,
) -> Result<String, String> {
    let cfg = IntegratorConfig { r_max: 50.0, ..Default::default() };
    let traj = integrate_pole_start(&pole_2d(lambda), &cfg).map_err(|e| e.to_string())?;
    let ks = k_of(&traj);
    // The floor sits above the integrator's absolute noise in rho', which
    // does not decay with R once R underflows toward the asymptote.
    strictly_monotone(&ks, increasing, 1e-9 * ts)?;
    let slack = 1e-9 * ts;
    for &(r, k) in &ks {
        if k < k_lo - slack || k > k_hi + slack {
            return Err(format!("K = {k} at r = {r} outside [{k_lo}, {k_hi}]"));
        }
    }
    let (mean, resid) = traj.tail_drho_fit(TailEnd::High).ok_or("no tail window")?;
    let want = -lambda;
    if (mean - want).abs() > 1e-3 * ts || resid > 1e-4 * ts {
        return Err(format!("tail rho' fit ({mean}, resid {resid:.2e}) not settled at {want}"));
    }
    Ok(format!(
        "K {} within [{k_lo}, {k_hi}], tail rho' = {mean:.6} (want {want})",
        if increasing { "increasing" } else { "decreasing" },
    ))
}

fn c03_expanding_case2(ts: f64) -> Result<String, String> {
    // Open lower endpoint: K underflows onto 0 once R leaves f64 range,
    // hence the epsilon slack baked into the shared bound check.
    expanding_pole(ts, -0.5, false, 0.0, 0.25)
}

fn c04_expanding_case3(ts: f64) -> Result<String, String> {
    expanding_pole(ts, -2.0, true, -0.5, 0.0)
}

fn c05_expanding_case1(ts: f64) -> Result<String, String> {
    let params = line_2d(-1.0);
    // The connecting orbit repels at rate e^{|r|/sqrt(2)} backward, so the
    // seed must sit on it to rounding and the backward end must stop while
    // the ulp-level shooting error is still invisible; a raised warp floor
    // does that without touching the asymptotics being checked.
    let cfg = IntegratorConfig {
        r_max: 50.0,
        r_min: -50.0,
        rho_floor: 1e-6,
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..Default::default()
    };
    let drho0 = expanding_separatrix_slope(-1.0, 1.0).map_err(|e| e.to_string())?;
    let seed = full_line_seed(&params, 1.0, drho0).map_err(|e| e.to_string())?;
    let traj = integrate_full_line(&params, &seed.state, &cfg).map_err(|e| e.to_string())?;
    let ks = k_of(&traj);
    let slack = 1e-9 * ts;
    for &(r, k) in &ks {
        if k <= -0.5 - slack || k >= slack {
            return Err(format!("K = {k} at r = {r} outside (-0.5, 0)"));
        }
    }
    strictly_monotone(&ks, true, 1e-9 * ts)?;
    let (fwd, fresid) = traj.tail_drho_fit(TailEnd::High).ok_or("no forward tail")?;
    if (fwd - 1.0).abs() > 1e-3 * ts || fresid > 1e-4 * ts {
        return Err(format!("forward tail rho' = {fwd} (resid {fresid:.2e}), want 1"));
    }
    let (bwd, bresid) = traj.tail_drho_fit(TailEnd::Low).ok_or("no backward tail")?;
    if bwd.abs() > 1e-3 * ts || bresid > 1e-4 * ts {
        return Err(format!("backward tail rho' = {bwd} (resid {bresid:.2e}), want 0"));
    }
    let k_low = ks.first().unwrap().1;
    Ok(format!(
        "K increasing in (-0.5, 0); rho' -> {fwd:.6} forward, {bwd:.2e} backward (K -> {k_low:.6})"
    ))
}

fn c06_shrinking_2d(_ts: f64) -> Result<String, String> {
    let cfg = IntegratorConfig { r_max: 100.0, ..Default::default() };
    let mut rs = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        let traj = integrate_pole_start(&pole_2d(lambda), &cfg).map_err(|e| e.to_string())?;
        let ev = traj
            .events
            .iter()
            .find(|e| matches!(e.kind, EventKind::RhoZero | EventKind::SlopeBlowup))
            .ok_or(format!("lambda {lambda}: no breakdown before r = 100"))?;
        rs.push(format!("lambda {lambda}: {:?} at r = {:.4}", ev.kind, ev.r));
    }
    Ok(rs.join("; "))
}

fn c07_steady_integral(ts: f64) -> Result<String, String> {
    let params = line_3d(0.0, FiberModel::euclidean2());
    // Lower slope cap: the first integral is a difference of large terms
    // during blow-up, and its float evaluation degrades with rho^{5/2}.
    let cfg = IntegratorConfig {
        r_max: 50.0,
        r_min: -50.0,
        slope_cap: 50.0,
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..Default::default()
    };
    let mut drifts = Vec::new();
    for (rho0, drho0) in [(10.0, -3.15), (2.0, -0.2)] {
        let seed = full_line_seed(&params, rho0, drho0).map_err(|e| e.to_string())?;
        let traj = integrate_full_line(&params, &seed.state, &cfg).map_err(|e| e.to_string())?;
        let c0 = steady_first_integral(&seed.state).map_err(|e| e.to_string())?;
        let drift = traj
            .samples
            .iter()
            .filter_map(|s| s.c_steady)
            .fold(0.0f64, |acc, c| acc.max((c - c0).abs()));
        if drift > 1e-8 * ts {
            return Err(format!("seed ({rho0}, {drho0}): C drift {drift:e}"));
        }
        drifts.push(format!("seed ({rho0}, {drho0}): drift {drift:.2e}"));
    }
    // Reduction round-trip on random (rho, C).
    let mut rng = SplitMix::new(0x5eed_0007);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let rho = rng.uniform(0.1, 10.0);
        let c = rng.uniform(-10.0, 10.0);
        let drho = steady_reduced_rhs(rho, c).map_err(|e| e.to_string())?;
        let back = steady_first_integral(&WarpState::new(0.0, rho, drho, 0.0))
            .map_err(|e| e.to_string())?;
        let err = (back - c).abs() / c.abs().max(1.0);
        worst = worst.max(err);
        if err > 1e-12 * ts {
            return Err(format!("round-trip at (rho {rho}, C {c}): err {err:e}"));
        }
    }
    Ok(format!("{}; 1000 round-trips worst rel err {worst:.2e}", drifts.join("; ")))
}

fn c08_breakdown_3d(_ts: f64) -> Result<String, String> {
    let cfg = IntegratorConfig {
        r_max: 200.0,
        r_min: -200.0,
        rel_tol: 1e-8,
        abs_tol: 1e-10,
        ..Default::default()
    };
    let mut count = 0;
    for lambda in [0.0, 1.0] {
        for rbar in [0.0, -2.0] {
            let fiber = if rbar == 0.0 {
                FiberModel::euclidean2()
            } else {
                FiberModel::hyperbolic2(rbar).unwrap()
            };
            let params = line_3d(lambda, fiber);
            for rho0 in [0.5, 1.0, 2.0] {
                for drho0 in [-1.0, -0.1, 0.1, 1.0] {
                    let seed =
                        full_line_seed(&params, rho0, drho0).map_err(|e| e.to_string())?;
                    let traj = integrate_full_line(&params, &seed.state, &cfg)
                        .map_err(|e| e.to_string())?;
                    let broke = traj.stiff_stop
                        || traj.events.iter().any(|e| e.kind.is_breakdown());
                    if !broke {
                        return Err(format!(
                            "lambda {lambda}, rbar {rbar}, seed ({rho0}, {drho0}): \
                             survived |r| <= 200 without breakdown"
                        ));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(format!("{count}/48 trajectories broke down within |r| <= 200"))
}

fn c09_expanding_3d(ts: f64) -> Result<String, String> {
    let params = line_3d(-1.0, FiberModel::hyperbolic2(-2.0).unwrap());
    let rho_star = 2.0f64.sqrt();
    let seed = WarpState::new(0.0, rho_star, 0.0, 0.0);
    let ddrho = rhs_3d(&seed, -1.0, -2.0).map_err(|e| e.to_string())?;
    let res = residual(&seed, ddrho, &params).map_err(|e| e.to_string())?;
    // fl(sqrt(2))^2 != 2, so "zero" means a few ulps of the term scale.
    if res.abs() > 1e-15 * ts {
        return Err(format!("seed residual {res:e}"));
    }
    let cfg = IntegratorConfig { r_max: 20.0, r_min: -20.0, ..Default::default() };
    // The constant solution is a saddle; backward integration amplifies the
    // ulp-level seed representation error, so the tight drift check runs
    // forward only.
    let traj =
        integrate(&params, &seed, &cfg, Direction::Forward).map_err(|e| e.to_string())?;
    let mut rho_err = 0.0f64;
    let mut r_err = 0.0f64;
    for s in &traj.samples {
        rho_err = rho_err.max((s.state.rho - rho_star).abs());
        r_err = r_err.max((s.curvature.scalar_r + 1.0).abs());
    }
    if rho_err > 1e-10 * ts {
        return Err(format!("max |rho - sqrt(2)| = {rho_err:e}"));
    }
    if r_err > 1e-10 * ts {
        return Err(format!("max |R + 1| = {r_err:e}"));
    }
    // Perturbed seeds: scalar curvature stays negative while the solution
    // persists as a soliton-like profile in [-20, 20]. Once the warp factor
    // has collapsed past half the equilibrium the run is deep in its
    // terminal breakdown and R legitimately blows through zero.
    for rho0 in [rho_star - 0.1, rho_star + 0.1] {
        let seed = full_line_seed(&params, rho0, 0.0).map_err(|e| e.to_string())?;
        let traj = match integrate_full_line(&params, &seed.state, &cfg) {
            Ok(t) => t,
            Err(e @ IntegrateError::StepUnderflow { .. }) => e.into_trajectory().unwrap(),
            Err(e) => return Err(e.to_string()),
        };
        let scal: Vec<(f64, f64)> = traj.scalar_series().collect();
        for (s, &(r, scalar)) in traj.samples.iter().zip(&scal) {
            if s.state.rho >= rho_star / 2.0 && scalar >= 0.0 {
                return Err(format!("perturbed seed rho0 = {rho0}: R = {scalar} at r = {r}"));
            }
        }
    }
    Ok(format!(
        "constant solution held: residual {res:.1e}, max rho err {rho_err:.2e}, \
         max R err {r_err:.2e}; perturbed runs stayed R < 0"
    ))
}

fn c10_curvature_oracle(ts: f64) -> Result<String, String> {
    let h = 1e-3;
    let mut worst = 0.0f64;
    // Cigar profile, 2D.
    let cigar_rho = |r: f64| 2.0 * (r / 2.0).tanh();
    let circle = FiberModel::circle();
    for i in 0..100 {
        let r = 0.5 + 4.5 * i as f64 / 99.0;
        let exact = cigar_scalar(r);
        let got = fd_at(cigar_rho, &circle, r, h)?;
        worst = worst.max((got - exact).abs());
    }
    // Spherical suspension profile, 3D: rho = sin r over the round 2-sphere
    // has R identically 6.
    let sphere = FiberModel::round_sphere2();
    for i in 0..100 {
        let r = 0.5 + 2.1 * i as f64 / 99.0;
        let got = fd_at(f64::sin, &sphere, r, h)?;
        worst = worst.max((got - 6.0).abs());
    }
    if worst > 1e-4 * ts {
        return Err(format!("max closed-form vs FD gap {worst:e} at h = {h:e}"));
    }
    // Convergence order under h-halving at a few probe points.
    let mut min_order = f64::INFINITY;
    for (r, exact, f, fiber) in [
        (1.0, cigar_scalar(1.0), cigar_rho as fn(f64) -> f64, &circle),
        (2.2, 6.0, f64::sin as fn(f64) -> f64, &sphere),
    ] {
        let e1 = (fd_at(f, fiber, r, h)? - exact).abs();
        let e2 = (fd_at(f, fiber, r, h / 2.0)? - exact).abs();
        if e2 > 0.0 {
            min_order = min_order.min((e1 / e2).log2());
        }
    }
    if min_order < 1.9 {
        return Err(format!("convergence order {min_order:.3} < 1.9"));
    }
    Ok(format!("max gap {worst:.2e} at h = 1e-3, observed order {min_order:.2}"))
}

/// Closed-form scalar curvature of the cigar: R = sech^2(r/2).
fn cigar_scalar(r: f64) -> f64 {
    let u = r / 2.0;
    let sech2 = 1.0 / (u.cosh() * u.cosh());
    2.0 * gaussian_curvature_2d(2.0 * u.tanh(), -sech2 * u.tanh()).unwrap()
}

fn fd_at(
    rho: impl Fn(f64) -> f64,
    fiber: &FiberModel,
    r: f64,
    h: f64,
) -> Result<f64, String> {
    let profile = WarpProfile::from_fn(r - 5.0 * h, r + 5.0 * h, h, rho);
    fd_scalar_curvature_oracle(&profile, fiber, r).map_err(|e| e.to_string())
}

fn c11_sign_law(ts: f64) -> Result<String, String> {
    let cfg20 = IntegratorConfig { r_max: 20.0, ..Default::default() };
    let cfg50 = IntegratorConfig { r_max: 50.0, r_min: -50.0, ..Default::default() };
    let mut trajs: Vec<(String, Trajectory)> = Vec::new();
    for (label, lambda, cfg) in
        [("cigar", 0.0, &cfg20), ("case2", -0.5, &cfg50), ("case3", -2.0, &cfg50)]
    {
        let t = integrate_pole_start(&pole_2d(lambda), cfg).map_err(|e| e.to_string())?;
        trajs.push((label.into(), t));
    }
    let params = line_2d(-1.0);
    let cfg_line =
        IntegratorConfig { rho_floor: 1e-6, rel_tol: 1e-12, abs_tol: 1e-14, ..cfg50 };
    let drho0 = expanding_separatrix_slope(-1.0, 1.0).map_err(|e| e.to_string())?;
    let seed = full_line_seed(&params, 1.0, drho0).map_err(|e| e.to_string())?;
    trajs.push((
        "case1".into(),
        integrate_full_line(&params, &seed.state, &cfg_line).map_err(|e| e.to_string())?,
    ));

    let mut worst = 0.0f64;
    for (label, traj) in &trajs {
        let scal: Vec<(f64, f64)> = traj.scalar_series().collect();
        let r0 = scal[0].0;
        let scal0 = scal[0].1;
        // Cumulative A(r) = int rho/2 on the sample grid via the dense output.
        let mut a = 0.0f64;
        let mut idx = 1;
        for w in traj.samples.windows(2) {
            let (ra, rb) = (w[0].state.r, w[1].state.r);
            a += simpson(
                |s| traj.eval(s).map(|y| y[0]).unwrap_or((w[0].state.rho + w[1].state.rho) / 2.0)
                    / 2.0,
                ra,
                rb,
                8,
            );
            let predicted = scal0 * (-a).exp();
            let err = (scal[idx].1 - predicted).abs();
            worst = worst.max(err);
            if err > 1e-6 * ts {
                return Err(format!(
                    "{label}: |R - R0 e^(-A)| = {err:e} at r = {rb} (A from r0 = {r0})"
                ));
            }
            idx += 1;
        }
        let report = classify(traj).map_err(|e| e.to_string())?;
        if report.scalar_sign == ScalarSign::Mixed {
            return Err(format!("{label}: scalar_sign reported Mixed"));
        }
    }
    Ok(format!("sign law held on 4 trajectories, worst |R - R0 e^(-A)| = {worst:.2e}"))
}

/// Truncated power series in the pole coordinate with f64 coefficients,
/// used as the independent oracle for the pole expansion.
#[derive(Clone)]
struct Poly(Vec<f64>);

impl Poly {
    fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    fn mul(&self, other: &Poly, keep: usize) -> Poly {
        let mut out = vec![0.0; keep + 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                if i + j <= keep {
                    out[i + j] += a * b;
                }
            }
        }
        Poly(out)
    }

    fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect())
    }
}

/// Coefficient of h^k in the equation residual of the degree-5 candidate
/// `rho = h + a3 h^3` for the given dimension.
fn residual_coeff(n: u32, lambda: f64, a3: f64, k: usize) -> f64 {
    let rho = Poly(vec![0.0, 1.0, 0.0, a3, 0.0, 0.0]);
    let drho = rho.deriv();
    let ddrho = drho.deriv();
    let keep = 5;
    match n {
        2 => {
            // rho'' + rho (rho' + lambda) / 2
            let mut slope = drho.clone();
            slope.0[0] += lambda;
            let prod = rho.mul(&slope, keep);
            ddrho.coeff(k) + prod.coeff(k) / 2.0
        }
        _ => {
            // 4 rho rho'' - rbar + rho^2 rho' + lambda rho^2 + 2 rho'^2, rbar = 2
            let rho2 = rho.mul(&rho, keep);
            let t1 = rho.mul(&ddrho, keep);
            let t2 = rho2.mul(&drho, keep);
            let t3 = drho.mul(&drho, keep);
            4.0 * t1.coeff(k) + t2.coeff(k) + lambda * rho2.coeff(k) + 2.0 * t3.coeff(k)
                - if k == 0 { 2.0 } else { 0.0 }
        }
    }
}

fn c12_series_coefficients(ts: f64) -> Result<String, String> {
    let mut rng = SplitMix::new(0x5eed_000c);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lambda = rng.uniform(-3.0, 3.0);
        for (n, k, want) in [(2u32, 1usize, -(1.0 + lambda) / 12.0), (3, 2, -(1.0 + lambda) / 36.0)]
        {
            // The target coefficient is affine in a3; solve from two samples
            // and confirm linearity with a third.
            let f0 = residual_coeff(n, lambda, 0.0, k);
            let f1 = residual_coeff(n, lambda, 1.0, k);
            let f2 = residual_coeff(n, lambda, 2.0, k);
            let curvature = (f0 - 2.0 * f1 + f2).abs();
            if curvature > 1e-12 {
                return Err(format!("n = {n}: coefficient not affine in a3 ({curvature:e})"));
            }
            let slope = f1 - f0;
            let a3 = -f0 / slope;
            let err = (a3 - want).abs();
            worst = worst.max(err);
            if err > 1e-12 * ts {
                return Err(format!(
                    "n = {n}, lambda = {lambda}: oracle a3 = {a3}, closed form {want}"
                ));
            }
        }
    }
    Ok(format!("a3 matched the coefficient-matching oracle for 20 lambdas, worst err {worst:.2e}"))
}

/// splitmix64: deterministic across platforms, no dependency.
struct SplitMix(u64);

impl SplitMix {
    fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_coefficient_examples() {
        // lambda = 0: residual h-coefficient of rho = h + a3 h^3 in 2D is
        // 6 a3 + 1/2.
        assert_eq!(residual_coeff(2, 0.0, 0.0, 1), 0.5);
        assert_eq!(residual_coeff(2, 0.0, 1.0, 1), 6.5);
        // 3D h^2-coefficient is 36 a3 + 1 + lambda.
        assert_eq!(residual_coeff(3, 0.0, 0.0, 2), 1.0);
        assert_eq!(residual_coeff(3, 0.0, 1.0, 2), 37.0);
        // Constant term vanishes for the smooth-pole branch.
        assert_eq!(residual_coeff(3, 1.5, 0.7, 0), 0.0);
    }

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix::new(42);
        let mut b = SplitMix::new(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let v = SplitMix::new(7).uniform(-1.0, 1.0);
        assert!((-1.0..1.0).contains(&v));
    }

    #[test]
    fn filter_selects_one_criterion() {
        let out = run_suite(1.0, Some("series-coefficients"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 12);
        assert!(out[0].passed, "{}", out[0].details);
    }
}
