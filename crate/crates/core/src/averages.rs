//! Kernel weights and ball/sphere quadrature.
//!
//! The weighted ball average at radius r multiplies the midpoint-rule
//! integral over the open ball B(x,r) by
//!
//! ```text
//! w(r) = r^β (1+r^n)^(γβ/n) / ((1 + ϖ_n r^n)^γ · ϖ_n r^n)
//! ```
//!
//! with ϖ_n the unit-ball volume (2 in 1D, π in 2D); the sphere variant uses
//! the surface measure |∂B| = n ϖ_n r^(n-1) in place of |B| = ϖ_n r^n.
//! Ball membership is decided on squared integer index offsets so the
//! prefix-table fast path and the direct-summation oracle always agree on
//! which points a ball contains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Volume of the unit ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => unreachable!("dim is 1 or 2"),
    }
}

/// Surface measure of the sphere of radius r: n ϖ_n r^(n-1).
pub fn sphere_area(n: usize, r: f64) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI * r,
        _ => unreachable!("dim is 1 or 2"),
    }
}

/// Which part of the radius range the supremum runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// 0 < r < sigma(x)
    All,
    /// 0 < r < min(1, sigma(x))
    Small,
    /// 1 <= r < sigma(x)
    Large,
}

impl Branch {
    pub fn id(&self) -> &'static str {
        match self {
            Branch::All => "all",
            Branch::Small => "small",
            Branch::Large => "large",
        }
    }

    pub fn parse(s: &str) -> Result<Branch> {
        match s {
            "all" => Ok(Branch::All),
            "small" => Ok(Branch::Small),
            "large" => Ok(Branch::Large),
            other => Err(Error::InvalidParam(format!("unknown branch `{other}`"))),
        }
    }

    pub fn admits(&self, r: f64) -> bool {
        match self {
            Branch::All => true,
            Branch::Small => r < 1.0,
            Branch::Large => r >= 1.0,
        }
    }
}

/// Knobs of the weighted fractional averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    /// Fractional order β >= 0.
    pub beta: f64,
    /// Size-penalty exponent γ >= 0.
    pub gamma: f64,
    pub branch: Branch,
    /// Replace the continuum ball volume in the weight denominator by the
    /// discrete count·h^n. Off by default; used to isolate quadrature error.
    pub measure_consistent: bool,
}

impl OperatorParams {
    pub fn new(beta: f64, gamma: f64, branch: Branch) -> Result<OperatorParams> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParam(format!("beta must be >= 0, got {beta}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParam(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(OperatorParams { beta, gamma, branch, measure_consistent: false })
    }

    pub fn with_measure_consistent(mut self, on: bool) -> OperatorParams {
        self.measure_consistent = on;
        self
    }

    pub fn with_beta(&self, beta: f64) -> OperatorParams {
        let mut p = self.clone();
        p.beta = beta;
        p
    }

    pub fn with_branch(&self, branch: Branch) -> OperatorParams {
        let mut p = self.clone();
        p.branch = branch;
        p
    }

    /// The nominal definition asks for beta < n; larger values still evaluate
    /// and are recorded as out-of-range in reports.
    pub fn in_definition_range(&self, n: usize) -> bool {
        self.beta < n as f64
    }
}

/// Multiplier of the open-ball integral of |f| at radius r.
pub fn ball_kernel_weight(r: f64, params: &OperatorParams, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParam(format!("radius must be positive, got {r}")));
    }
    let rn = r.powi(n as i32);
    let vol = unit_ball_volume(n) * rn;
    let num = r.powf(params.beta) * (1.0 + rn).powf(params.gamma * params.beta / n as f64);
    Ok(num / ((1.0 + vol).powf(params.gamma) * vol))
}

/// Multiplier of the sphere integral of |f| at radius r.
pub fn sphere_kernel_weight(r: f64, params: &OperatorParams, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParam(format!("radius must be positive, got {r}")));
    }
    let rn = r.powi(n as i32);
    let area = sphere_area(n, r);
    let num = r.powf(params.beta) * (1.0 + rn).powf(params.gamma * params.beta / n as f64);
    Ok(num / ((1.0 + area).powf(params.gamma) * area))
}

/// Threshold T such that a grid offset with squared index distance d2 lies in
/// the open ball of radius r iff (d2 as f64) < T.
///
/// When r sits on the radius grid (r = k·h) the threshold is k² − 1/2, which
/// makes strict open-ball membership an exact integer comparison; the fast
/// path and the oracle therefore break ties identically.
pub fn open_ball_index_threshold(r: f64, h: f64) -> f64 {
    let rho = r / h;
    let k = rho.round();
    if k >= 1.0 && (rho - k).abs() < 1e-9 {
        k * k - 0.5
    } else {
        rho * rho
    }
}

/// Largest integer d >= 0 with d² < threshold (assumes threshold > 0).
pub(crate) fn max_offset(threshold: f64) -> i64 {
    let mut d = threshold.sqrt().floor() as i64;
    while (((d + 1) * (d + 1)) as f64) < threshold {
        d += 1;
    }
    while d > 0 && (d * d) as f64 >= threshold {
        d -= 1;
    }
    d.max(0)
}

fn check_ball_in_box(grid: &GridSpec, center: usize, r: f64) -> Result<()> {
    let p = grid.point(center);
    let tol = 1e-9 * grid.spacing();
    for a in 0..grid.dim() {
        if p[a] - r < grid.axis_min(a) - tol || p[a] + r > grid.axis_max(a) + tol {
            return Err(Error::OutOfBounds {
                center: p[..grid.dim()].to_vec(),
                radius: r,
            });
        }
    }
    Ok(())
}

/// Row-prefix sums of value·h^n for O(1) contiguous segment sums.
///
/// 1D grids hold one row; 2D grids one prefix row per y. Each row is stored
/// with a leading zero so the sum over `[a, b]` is `pref[b+1] - pref[a]`.
#[derive(Clone, Debug)]
pub struct PrefixTable {
    grid: GridSpec,
    rows: Vec<f64>, // (nx + 1) entries per row
}

impl PrefixTable {
    pub fn new(field: &ScalarField) -> PrefixTable {
        let grid = field.grid().clone();
        let nx = grid.nx();
        let ny = grid.ny();
        let hn = grid.spacing().powi(grid.dim() as i32);
        let mut rows = vec![0.0; (nx + 1) * ny];
        for y in 0..ny {
            let base = y * (nx + 1);
            for x in 0..nx {
                rows[base + x + 1] = rows[base + x] + field.values()[y * nx + x] * hn;
            }
        }
        PrefixTable { grid, rows }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Sum of value·h^n over row y, columns `x_lo..=x_hi`.
    pub fn row_segment(&self, y: usize, x_lo: usize, x_hi: usize) -> f64 {
        let base = y * (self.grid.nx() + 1);
        self.rows[base + x_hi + 1] - self.rows[base + x_lo]
    }
}

/// Midpoint-rule integral over the open ball via the prefix table.
pub fn ball_integral(table: &PrefixTable, center: usize, r: f64) -> Result<f64> {
    let grid = table.grid();
    check_ball_in_box(grid, center, r)?;
    let thr = open_ball_index_threshold(r, grid.spacing());
    let (cx, cy) = grid.unravel(center);
    let dmax = max_offset(thr);
    if grid.dim() == 1 {
        let lo = cx as i64 - dmax;
        let hi = cx as i64 + dmax;
        return Ok(table.row_segment(0, lo as usize, hi as usize));
    }
    let mut total = 0.0;
    for dy in -dmax..=dmax {
        let rem = thr - (dy * dy) as f64;
        if rem <= 0.0 {
            continue;
        }
        let w = max_offset(rem);
        let y = (cy as i64 + dy) as usize;
        total += table.row_segment(y, (cx as i64 - w) as usize, (cx as i64 + w) as usize);
    }
    Ok(total)
}

/// Direct-summation oracle for [`ball_integral`]: same membership predicate,
/// point-by-point accumulation.
pub fn ball_integral_direct(field: &ScalarField, center: usize, r: f64) -> Result<f64> {
    let grid = field.grid();
    check_ball_in_box(grid, center, r)?;
    let thr = open_ball_index_threshold(r, grid.spacing());
    let (cx, cy) = grid.unravel(center);
    let dmax = max_offset(thr);
    let hn = grid.spacing().powi(grid.dim() as i32);
    let nx = grid.nx();
    let mut total = 0.0;
    if grid.dim() == 1 {
        for dx in -dmax..=dmax {
            if ((dx * dx) as f64) < thr {
                total += field.values()[(cx as i64 + dx) as usize] * hn;
            }
        }
        return Ok(total);
    }
    for dy in -dmax..=dmax {
        for dx in -dmax..=dmax {
            if ((dx * dx + dy * dy) as f64) < thr {
                let idx = (cy as i64 + dy) as usize * nx + (cx as i64 + dx) as usize;
                total += field.values()[idx] * hn;
            }
        }
    }
    Ok(total)
}

/// Integral and point count over the open ball in one pass over the table.
pub fn ball_integral_and_count(table: &PrefixTable, center: usize, r: f64) -> Result<(f64, usize)> {
    let grid = table.grid();
    check_ball_in_box(grid, center, r)?;
    let thr = open_ball_index_threshold(r, grid.spacing());
    let (cx, cy) = grid.unravel(center);
    let dmax = max_offset(thr);
    if grid.dim() == 1 {
        let lo = cx as i64 - dmax;
        let hi = cx as i64 + dmax;
        return Ok((table.row_segment(0, lo as usize, hi as usize), (2 * dmax + 1) as usize));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for dy in -dmax..=dmax {
        let rem = thr - (dy * dy) as f64;
        if rem <= 0.0 {
            continue;
        }
        let w = max_offset(rem);
        let y = (cy as i64 + dy) as usize;
        total += table.row_segment(y, (cx as i64 - w) as usize, (cx as i64 + w) as usize);
        count += (2 * w + 1) as usize;
    }
    Ok((total, count))
}

/// Number of grid points in the open ball times h^n.
pub fn discrete_ball_volume(grid: &GridSpec, center: usize, r: f64) -> Result<f64> {
    let ones = ScalarField::constant(grid, 1.0);
    ball_integral_direct(&ones, center, r)
}

/// Weighted average of |f| over the open ball at radius r.
pub fn ball_average_weighted(
    field: &ScalarField,
    center: usize,
    r: f64,
    params: &OperatorParams,
) -> Result<f64> {
    let absf = field.abs();
    let table = PrefixTable::new(&absf);
    let (integral, count) = ball_integral_and_count(&table, center, r)?;
    apply_ball_weight(integral, count, r, params, field.grid())
}

/// Multiply a precomputed |f| ball integral by the kernel weight, honoring
/// measure-consistent mode.
pub fn apply_ball_weight(
    integral: f64,
    count: usize,
    r: f64,
    params: &OperatorParams,
    grid: &GridSpec,
) -> Result<f64> {
    let n = grid.dim();
    if params.measure_consistent {
        let rn = r.powi(n as i32);
        let vol = unit_ball_volume(n) * rn;
        let disc = count as f64 * grid.spacing().powi(n as i32);
        if disc == 0.0 {
            return Err(Error::InvalidParam("empty discrete ball".into()));
        }
        let num = r.powf(params.beta) * (1.0 + rn).powf(params.gamma * params.beta / n as f64);
        Ok(num / ((1.0 + vol).powf(params.gamma) * disc) * integral)
    } else {
        Ok(ball_kernel_weight(r, params, n)? * integral)
    }
}

/// Number of quadrature angles for a circle of radius r at spacing h.
pub fn circle_quadrature_points(r: f64, h: f64) -> usize {
    ((2.0 * std::f64::consts::PI * r / h).ceil() as usize).max(16)
}

/// Unnormalized integral of f over the sphere of radius r.
///
/// 1D: the two endpoint values with unit weight each. 2D: trapezoidal rule
/// over equally spaced angles with point weight 2πr/m and multilinear
/// interpolation of the field.
pub fn sphere_integral(field: &ScalarField, center: usize, r: f64) -> Result<f64> {
    let grid = field.grid();
    check_ball_in_box(grid, center, r)?;
    let p = grid.point(center);
    if grid.dim() == 1 {
        let left = field.interpolate(&[p[0] - r])?;
        let right = field.interpolate(&[p[0] + r])?;
        return Ok(left + right);
    }
    let m = circle_quadrature_points(r, grid.spacing());
    let w = 2.0 * std::f64::consts::PI * r / m as f64;
    let mut total = 0.0;
    for j in 0..m {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        let q = [p[0] + r * theta.cos(), p[1] + r * theta.sin()];
        total += field.interpolate(&q)?;
    }
    Ok(total * w)
}

/// Weighted average of |f| over the sphere at radius r. The absolute value is
/// taken on the sampled field before interpolation.
pub fn sphere_average_weighted(
    field: &ScalarField,
    center: usize,
    r: f64,
    params: &OperatorParams,
) -> Result<f64> {
    let absf = field.abs();
    let n = field.grid().dim();
    Ok(sphere_kernel_weight(r, params, n)? * sphere_integral(&absf, center, r)?)
}
