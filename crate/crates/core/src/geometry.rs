//! Closed-form curvature of the warped metric `g = dr^2 + rho(r)^2 gbar`,
//! plus a finite-difference curvature oracle used to cross-check the closed
//! forms in tests.
//!
//! Conventions: the unit round sphere has positive curvature; in dimension 2
//! the Gaussian curvature is `K = R/2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("warp factor must be positive, got rho = {0}")]
    NonPositiveWarp(f64),
    #[error("fiber scalar curvature {rbar} is invalid for {kind:?}")]
    InvalidFiber { kind: FiberKind, rbar: f64 },
    #[error("finite-difference stencil leaves the sampled grid at r = {0}")]
    StencilOutOfRange(f64),
    #[error("fiber kind {0:?} has the wrong dimension for this chart")]
    FiberDimension(FiberKind),
}

/// Model fibers `(N, gbar)` with constant scalar curvature `rbar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiberKind {
    /// 1-dimensional circle fiber (2D base + fiber total), `rbar = 0`.
    Circle,
    /// Unit round 2-sphere, `rbar = 2`.
    RoundSphere2,
    /// Flat plane, `rbar = 0`.
    Euclidean2,
    /// Hyperbolic surface, `rbar < 0`.
    Hyperbolic2,
    /// Arbitrary constant-scalar-curvature surface.
    ConstScal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberModel {
    pub kind: FiberKind,
    rbar: f64,
}

impl FiberModel {
    pub fn circle() -> Self {
        FiberModel { kind: FiberKind::Circle, rbar: 0.0 }
    }

    pub fn round_sphere2() -> Self {
        FiberModel { kind: FiberKind::RoundSphere2, rbar: 2.0 }
    }

    pub fn euclidean2() -> Self {
        FiberModel { kind: FiberKind::Euclidean2, rbar: 0.0 }
    }

    pub fn hyperbolic2(rbar: f64) -> Result<Self, GeometryError> {
        if rbar >= 0.0 {
            return Err(GeometryError::InvalidFiber { kind: FiberKind::Hyperbolic2, rbar });
        }
        Ok(FiberModel { kind: FiberKind::Hyperbolic2, rbar })
    }

    pub fn const_scal(rbar: f64) -> Self {
        FiberModel { kind: FiberKind::ConstScal, rbar }
    }

    pub fn rbar(&self) -> f64 {
        self.rbar
    }

    /// Fiber dimension: 1 for the circle, 2 otherwise.
    pub fn dim(&self) -> usize {
        match self.kind {
            FiberKind::Circle => 1,
            _ => 2,
        }
    }
}

/// Pointwise curvature data of the warped metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub r: f64,
    pub scalar_r: f64,
    /// 2D Gaussian curvature `K = -rho''/rho`.
    pub k_gauss: Option<f64>,
    /// 3D sectional curvature of planes containing `d/dr`.
    pub k_rad: Option<f64>,
    /// 3D sectional curvature of fiber planes.
    pub k_fib: Option<f64>,
    /// Ricci eigenvalue in the `d/dr` direction.
    pub ricci_rr: Option<f64>,
    /// Fiber Ricci eigenvalue.
    pub ricci_fib: Option<f64>,
}

/// Scalar curvature of `g = dr^2 + rho^2 gbar` in dimension `n`:
/// `R = rbar/rho^2 - (n-1)(n-2)(rho'/rho)^2 - 2(n-1) rho''/rho`.
pub fn scalar_curvature_warped(
    n: u32,
    rbar: f64,
    rho: f64,
    drho: f64,
    ddrho: f64,
) -> Result<f64, GeometryError> {
    assert!(n >= 2, "warped chart needs n >= 2");
    if rho <= 0.0 {
        return Err(GeometryError::NonPositiveWarp(rho));
    }
    let nm1 = (n - 1) as f64;
    let nm2 = (n - 2) as f64;
    let s = drho / rho;
    Ok(rbar / (rho * rho) - nm1 * nm2 * s * s - 2.0 * nm1 * ddrho / rho)
}

/// Gaussian curvature of `dr^2 + rho^2 dtheta^2`: `K = -rho''/rho`.
pub fn gaussian_curvature_2d(rho: f64, ddrho: f64) -> Result<f64, GeometryError> {
    if rho <= 0.0 {
        return Err(GeometryError::NonPositiveWarp(rho));
    }
    Ok(-ddrho / rho)
}

/// Full curvature decomposition at one point of a 3D warped product over a
/// constant-curvature surface fiber.
pub fn curvature_sample_3d(
    r: f64,
    rbar: f64,
    rho: f64,
    drho: f64,
    ddrho: f64,
) -> Result<CurvatureSample, GeometryError> {
    if rho <= 0.0 {
        return Err(GeometryError::NonPositiveWarp(rho));
    }
    let rho2 = rho * rho;
    let k_rad = -ddrho / rho;
    let k_fib = (rbar / 2.0 - drho * drho) / rho2;
    let ricci_rr = -2.0 * ddrho / rho;
    let ricci_fib = (rbar / 2.0 - drho * drho - rho * ddrho) / rho2;
    let scalar_r = scalar_curvature_warped(3, rbar, rho, drho, ddrho)?;
    Ok(CurvatureSample {
        r,
        scalar_r,
        k_gauss: None,
        k_rad: Some(k_rad),
        k_fib: Some(k_fib),
        ricci_rr: Some(ricci_rr),
        ricci_fib: Some(ricci_fib),
    })
}

/// 2D counterpart of [`curvature_sample_3d`].
pub fn curvature_sample_2d(r: f64, rho: f64, ddrho: f64) -> Result<CurvatureSample, GeometryError> {
    let k = gaussian_curvature_2d(rho, ddrho)?;
    Ok(CurvatureSample {
        r,
        scalar_r: 2.0 * k,
        k_gauss: Some(k),
        k_rad: None,
        k_fib: None,
        ricci_rr: None,
        ricci_fib: None,
    })
}

/// Warp factor sampled on a uniform r-grid, input to the FD oracle.
#[derive(Debug, Clone)]
pub struct WarpProfile {
    pub r_start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl WarpProfile {
    /// Sample a closed-form profile on `[r_start, r_end]` with spacing `step`.
    pub fn from_fn(r_start: f64, r_end: f64, step: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = ((r_end - r_start) / step).round() as usize + 1;
        let values = (0..n).map(|i| f(r_start + i as f64 * step)).collect();
        WarpProfile { r_start, step, values }
    }

    fn index_of(&self, r: f64) -> Option<usize> {
        let x = (r - self.r_start) / self.step;
        let i = x.round();
        if (x - i).abs() > 1e-6 || i < 0.0 {
            return None;
        }
        let i = i as usize;
        (i < self.values.len()).then_some(i)
    }
}

/// Scalar curvature by central finite differences of the metric components in
/// the warped chart: Christoffel symbols, then Riemann, then the trace.
///
/// `r` must lie on the profile grid with at least two grid points on either
/// side; the grid spacing is the FD step, so the error is `O(step^2)`. Test
/// oracle only; the closed forms above are the production path.
pub fn fd_scalar_curvature_oracle(
    profile: &WarpProfile,
    fiber: &FiberModel,
    r: f64,
) -> Result<f64, GeometryError> {
    let i = profile
        .index_of(r)
        .ok_or(GeometryError::StencilOutOfRange(r))?;
    if i < 2 || i + 2 >= profile.values.len() {
        return Err(GeometryError::StencilOutOfRange(r));
    }
    for k in i - 2..=i + 2 {
        if profile.values[k] <= 0.0 {
            return Err(GeometryError::NonPositiveWarp(profile.values[k]));
        }
    }
    let dim = 1 + fiber.dim();
    let chart = Chart::new(fiber)?;
    let h = profile.step;

    // Christoffel symbols at grid offset di (in r) and theta offset dj*h.
    let gamma = |di: i64, dj: i64| -> Vec<Vec<Vec<f64>>> {
        let idx = (i as i64 + di) as usize;
        let theta = chart.theta0 + dj as f64 * h;
        let g = |ii: usize, tt: f64| chart.metric(profile.values[ii], tt);
        let g0 = g(idx, theta);
        // dg[k][a][b] = d g_ab / d x_k
        let mut dg = vec![[[0.0f64; 3]; 3]; dim];
        let gp = g(idx + 1, theta);
        let gm = g(idx - 1, theta);
        for a in 0..dim {
            for b in 0..dim {
                dg[0][a][b] = (gp[a][b] - gm[a][b]) / (2.0 * h);
            }
        }
        if dim == 3 {
            let gtp = g(idx, theta + h);
            let gtm = g(idx, theta - h);
            for a in 0..dim {
                for b in 0..dim {
                    dg[1][a][b] = (gtp[a][b] - gtm[a][b]) / (2.0 * h);
                }
            }
        }
        let ginv = invert_diag(&g0, dim);
        let mut out = vec![vec![vec![0.0f64; dim]; dim]; dim];
        for l in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    let mut s = 0.0;
                    for m in 0..dim {
                        s += ginv[l][m] * (dg[a][m][b] + dg[b][a][m] - dg[m][a][b]);
                    }
                    out[l][a][b] = 0.5 * s;
                }
            }
        }
        out
    };

    let g0 = chart.metric(profile.values[i], chart.theta0);
    let ginv = invert_diag(&g0, dim);
    let gam = gamma(0, 0);
    // dgamma[k][l][a][b] = d Gamma^l_ab / d x_k
    let mut dgamma = vec![vec![vec![vec![0.0f64; dim]; dim]; dim]; dim];
    {
        let gp = gamma(1, 0);
        let gm = gamma(-1, 0);
        for l in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    dgamma[0][l][a][b] = (gp[l][a][b] - gm[l][a][b]) / (2.0 * h);
                }
            }
        }
        if dim == 3 {
            let tp = gamma(0, 1);
            let tm = gamma(0, -1);
            for l in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        dgamma[1][l][a][b] = (tp[l][a][b] - tm[l][a][b]) / (2.0 * h);
                    }
                }
            }
        }
    }

    // Ricci_{s,n} = R^m_{s m n}
    // R^l_{s,mu,nu} = d_mu Gamma^l_{nu s} - d_nu Gamma^l_{mu s}
    //               + Gamma^l_{mu p} Gamma^p_{nu s} - Gamma^l_{nu p} Gamma^p_{mu s}
    let mut scalar = 0.0;
    for s in 0..dim {
        for nu in 0..dim {
            let mut ric = 0.0;
            for m in 0..dim {
                let mut riem = dgamma[m][m][nu][s] - dgamma[nu][m][m][s];
                for p in 0..dim {
                    riem += gam[m][m][p] * gam[p][nu][s] - gam[m][nu][p] * gam[p][m][s];
                }
                ric += riem;
            }
            scalar += ginv[s][nu] * ric;
        }
    }
    Ok(scalar)
}

/// Coordinate chart for the warped metric over a constant-curvature fiber.
struct Chart {
    theta0: f64,
    /// Gaussian curvature of the 2D fiber (`rbar/2`); unused for the circle.
    kbar: f64,
    circle: bool,
}

impl Chart {
    fn new(fiber: &FiberModel) -> Result<Self, GeometryError> {
        let kbar = fiber.rbar() / 2.0;
        let circle = matches!(fiber.kind, FiberKind::Circle);
        // Keep theta away from the axis of the fiber polar chart and inside
        // its injectivity range.
        let theta0 = if kbar.abs() > 1.0 { 1.0 / kbar.abs().sqrt() } else { 1.0 };
        Ok(Chart { theta0, kbar, circle })
    }

    /// Fiber profile s(theta) with -s''/s = kbar: sin/linear/sinh.
    fn fiber_profile(&self, theta: f64) -> f64 {
        let k = self.kbar;
        if k > 0.0 {
            (k.sqrt() * theta).sin() / k.sqrt()
        } else if k < 0.0 {
            ((-k).sqrt() * theta).sinh() / (-k).sqrt()
        } else {
            theta
        }
    }

    fn metric(&self, rho: f64, theta: f64) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        g[0][0] = 1.0;
        g[1][1] = rho * rho;
        if !self.circle {
            let s = self.fiber_profile(theta);
            g[2][2] = rho * rho * s * s;
        }
        g
    }
}

fn invert_diag(g: &[[f64; 3]; 3], dim: usize) -> Vec<Vec<f64>> {
    let mut inv = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        inv[a][a] = 1.0 / g[a][a];
    }
    inv
}
