//! Finite-difference gradients, L^p and Sobolev norms, and the integral
//! identities behind the gradient expansions.
//!
//! Gradients use central differences where both axis neighbors are inside the
//! domain, one-sided differences where only one is, and are flagged undefined
//! where neither is. Norms accumulate with deterministic pairwise summation.

use serde::{Deserialize, Serialize};

use crate::averages::{max_offset, open_ball_index_threshold, sphere_area, sphere_integral};
use crate::catalog::TestFunction;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec, ScalarField};
use crate::maximal::MaximalField;

/// Weak gradient realized by finite differences.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub components: Vec<ScalarField>,
    pub magnitude: ScalarField,
    /// Points where every axis had at least one usable neighbor.
    pub defined: Vec<bool>,
}

/// Finite-difference gradient of f restricted to the domain.
pub fn weak_gradient(f: &ScalarField, mask: &DomainMask) -> Result<GradientField> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    gradient_impl(f, Some(mask))
}

/// Finite-difference gradient over the whole grid (one-sided at box faces).
pub fn full_grid_gradient(f: &ScalarField) -> GradientField {
    gradient_impl(f, None).expect("full-grid gradient cannot mismatch")
}

fn gradient_impl(f: &ScalarField, mask: Option<&DomainMask>) -> Result<GradientField> {
    let grid = f.grid().clone();
    let h = grid.spacing();
    let dim = grid.dim();
    let nx = grid.nx();
    let ny = grid.ny();
    let vals = f.values();
    let usable = |idx: usize| mask.map_or(true, |m| m.is_inside(idx));

    let mut comps = vec![vec![0.0; grid.len()]; dim];
    let mut defined = vec![false; grid.len()];

    for idx in 0..grid.len() {
        if !usable(idx) {
            continue;
        }
        let (ix, iy) = grid.unravel(idx);
        let mut all_axes = true;
        for a in 0..dim {
            let (coord, extent, stride) =
                if a == 0 { (ix, nx, 1usize) } else { (iy, ny, nx) };
            let prev = (coord > 0 && usable(idx - stride)).then(|| vals[idx - stride]);
            let next = (coord + 1 < extent && usable(idx + stride)).then(|| vals[idx + stride]);
            comps[a][idx] = match (prev, next) {
                (Some(p), Some(q)) => (q - p) / (2.0 * h),
                (None, Some(q)) => (q - vals[idx]) / h,
                (Some(p), None) => (vals[idx] - p) / h,
                (None, None) => {
                    all_axes = false;
                    0.0
                }
            };
        }
        defined[idx] = all_axes;
    }

    let magnitude = (0..grid.len())
        .map(|idx| (0..dim).map(|a| comps[a][idx] * comps[a][idx]).sum::<f64>().sqrt())
        .collect();
    Ok(GradientField {
        components: comps
            .into_iter()
            .map(|c| ScalarField::new(grid.clone(), c))
            .collect::<Result<Vec<_>>>()?,
        magnitude: ScalarField::new(grid, magnitude)?,
        defined,
    })
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// (Σ_inside |f|^p h^n)^(1/p).
pub fn lp_norm(f: &ScalarField, mask: &DomainMask, p: f64) -> Result<f64> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParam(format!("p must be >= 1, got {p}")));
    }
    let hn = f.grid().spacing().powi(f.grid().dim() as i32);
    let terms: Vec<f64> = (0..f.grid().len())
        .filter(|&i| mask.is_inside(i))
        .map(|i| f.values()[i].abs().powf(p) * hn)
        .collect();
    Ok(pairwise_sum(&terms).powf(1.0 / p))
}

/// ‖f‖_p + ‖ |∇f| ‖_p with the finite-difference gradient.
pub fn sobolev_norm(f: &ScalarField, mask: &DomainMask, p: f64) -> Result<f64> {
    let grad = weak_gradient(f, mask)?;
    Ok(lp_norm(f, mask, p)? + lp_norm(&grad.magnitude, mask, p)?)
}

/// How the output exponent q is derived from (p, β, n).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentRule {
    /// 1/q = 1/p − β/n
    Sobolev,
    /// 1/q = 1/p − (β−1)/n
    Shifted,
}

impl ExponentRule {
    pub fn id(&self) -> &'static str {
        match self {
            ExponentRule::Sobolev => "sobolev",
            ExponentRule::Shifted => "shifted",
        }
    }

    pub fn parse(s: &str) -> Result<ExponentRule> {
        match s {
            "sobolev" => Ok(ExponentRule::Sobolev),
            "shifted" => Ok(ExponentRule::Shifted),
            other => Err(Error::InvalidParam(format!("unknown exponent rule `{other}`"))),
        }
    }
}

/// Input/output exponent pair tied to its derivation rule, so mismatched
/// (p, q, β) combinations cannot be constructed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub p: f64,
    pub q: f64,
    pub rule: ExponentRule,
    pub beta: f64,
    pub n: usize,
}

impl NormParams {
    pub fn derive(p: f64, beta: f64, n: usize, rule: ExponentRule) -> Result<NormParams> {
        if !(p > 1.0) {
            return Err(Error::InvalidParam(format!("p must exceed 1, got {p}")));
        }
        let shift = match rule {
            ExponentRule::Sobolev => beta,
            ExponentRule::Shifted => beta - 1.0,
        };
        let inv_q = 1.0 / p - shift / n as f64;
        if !(inv_q > 0.0) {
            return Err(Error::InvalidParam(format!(
                "exponent rule {} gives 1/q = {inv_q} <= 0 for p={p}, beta={beta}, n={n}",
                rule.id()
            )));
        }
        let q = 1.0 / inv_q;
        if q < p - 1e-12 {
            return Err(Error::InvalidParam(format!(
                "derived q = {q} falls below p = {p}"
            )));
        }
        Ok(NormParams { p, q, rule, beta, n })
    }
}

/// Sum of g(idx, y − x) · h^n over the open ball, visiting points in a fixed
/// row-major order.
fn ball_sum_with(
    grid: &GridSpec,
    center: usize,
    r: f64,
    mut g: impl FnMut(usize, [f64; 2]) -> f64,
) -> Result<(f64, usize)> {
    let p = grid.point(center);
    let tol = 1e-9 * grid.spacing();
    for a in 0..grid.dim() {
        if p[a] - r < grid.axis_min(a) - tol || p[a] + r > grid.axis_max(a) + tol {
            return Err(Error::OutOfBounds { center: p[..grid.dim()].to_vec(), radius: r });
        }
    }
    let h = grid.spacing();
    let hn = h.powi(grid.dim() as i32);
    let thr = open_ball_index_threshold(r, h);
    let (cx, cy) = grid.unravel(center);
    let dmax = max_offset(thr);
    let nx = grid.nx();
    let mut sum = 0.0;
    let mut count = 0usize;
    if grid.dim() == 1 {
        for dx in -dmax..=dmax {
            if ((dx * dx) as f64) < thr {
                let idx = (cx as i64 + dx) as usize;
                sum += g(idx, [dx as f64 * h, 0.0]) * hn;
                count += 1;
            }
        }
        return Ok((sum, count));
    }
    for dy in -dmax..=dmax {
        for dx in -dmax..=dmax {
            if ((dx * dx + dy * dy) as f64) < thr {
                let idx = (cy as i64 + dy) as usize * nx + (cx as i64 + dx) as usize;
                sum += g(idx, [dx as f64 * h, dy as f64 * h]) * hn;
                count += 1;
            }
        }
    }
    Ok((sum, count))
}

/// Per-point analytic gradient when the field has a source, finite differences
/// otherwise.
fn gradient_lookup(f: &ScalarField) -> Box<dyn Fn(usize) -> [f64; 2] + '_> {
    if let Some(src) = f.source() {
        let grid = f.grid().clone();
        let src = src.clone();
        Box::new(move |idx| {
            let p = grid.point(idx);
            src.grad(&p[..grid.dim()])
        })
    } else {
        let grad = full_grid_gradient(f);
        let dim = f.grid().dim();
        Box::new(move |idx| {
            let mut g = [0.0; 2];
            for a in 0..dim {
                g[a] = grad.components[a].values()[idx];
            }
            g
        })
    }
}

/// Residual of the divergence identity
/// `r·∮_∂B f  =  ∫_B (n·f(y) + ∇f(y)·(y−x)) dy`
/// evaluated with the module's quadratures.
pub fn green_identity_residual(f: &ScalarField, center: usize, r: f64) -> Result<f64> {
    let grid = f.grid();
    let n = grid.dim() as f64;
    let grad = gradient_lookup(f);
    let lhs = r * sphere_integral(f, center, r)?;
    let (rhs, _) = ball_sum_with(grid, center, r, |idx, offset| {
        let g = grad(idx);
        n * f.values()[idx] + g[0] * offset[0] + g[1] * offset[1]
    })?;
    Ok((lhs - rhs).abs())
}

/// Residual of
/// `sphere_avg(f) − ball_avg(f) = (1/n)·ball_avg((y−x)·∇f)`
/// with discrete-count ball averages (the identity is exact on linear data).
pub fn sphere_ball_identity_residual(f: &ScalarField, center: usize, r: f64) -> Result<f64> {
    let grid = f.grid();
    let n = grid.dim();
    let grad = gradient_lookup(f);
    let sphere_avg = sphere_integral(f, center, r)? / sphere_area(n, r);
    let (fsum, count) = ball_sum_with(grid, center, r, |idx, _| f.values()[idx])?;
    let (tsum, _) = ball_sum_with(grid, center, r, |idx, offset| {
        let g = grad(idx);
        g[0] * offset[0] + g[1] * offset[1]
    })?;
    let disc_vol = count as f64 * grid.spacing().powi(n as i32);
    let ball_avg = fsum / disc_vol;
    let correction = tsum / (n as f64 * disc_vol);
    Ok((sphere_avg - ball_avg - correction).abs())
}

const RADIAL_PROBE_INDICES: [i64; 9] = [2, 3, 4, 6, 8, 12, 16, 24, 32];

/// Residual of `d/dr ∫_B(x,r) f = ∮_∂B(x,r) f`, centered difference over the
/// radius grid, maximized over a small probe set of radii.
pub fn radial_derivative_residual(f: &ScalarField, mask: &DomainMask, center: usize) -> Result<f64> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let h = grid.spacing();
    if mask.sigma_d2()[center] < 16 {
        return Err(Error::InsufficientRoom(
            "radial probe needs sigma >= 4 grid cells".into(),
        ));
    }
    let d2 = mask.sigma_d2()[center];
    let (cx, cy) = grid.unravel(center);
    let mut margin = (cx as i64).min(grid.nx() as i64 - 1 - cx as i64);
    if grid.dim() == 2 {
        margin = margin.min((cy as i64).min(grid.ny() as i64 - 1 - cy as i64));
    }
    let mut worst: Option<f64> = None;
    for &k in RADIAL_PROBE_INDICES.iter() {
        if (k + 1) * (k + 1) >= d2 || k + 1 > margin {
            continue;
        }
        let below = ball_sum_with(grid, center, (k - 1) as f64 * h, |idx, _| f.values()[idx])?.0;
        let above = ball_sum_with(grid, center, (k + 1) as f64 * h, |idx, _| f.values()[idx])?.0;
        let derivative = (above - below) / (2.0 * h);
        let surface = sphere_integral(f, center, k as f64 * h)?;
        let res = (derivative - surface).abs();
        worst = Some(worst.map_or(res, |w: f64| w.max(res)));
    }
    worst.ok_or_else(|| Error::InsufficientRoom("no admissible probe radius".into()))
}

/// Σ_inside (Mf(x)/sigma(x))^q h^n over evaluated points.
pub fn hardy_quotient_integral(mf: &MaximalField, mask: &DomainMask, q: f64) -> Result<f64> {
    if mf.values.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParam(format!("q must be positive, got {q}")));
    }
    let grid = mf.values.grid();
    let hn = grid.spacing().powi(grid.dim() as i32);
    let terms: Vec<f64> = (0..grid.len())
        .filter(|&i| mask.is_inside(i) && mf.evaluated[i])
        .map(|i| (mf.values.values()[i] / mask.sigma(i)).powf(q) * hn)
        .collect();
    let total = pairwise_sum(&terms);
    if !total.is_finite() {
        return Err(Error::NonFinite("distance-quotient integral".into()));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{rasterize_domain, DomainShape};

    fn interval_setup(points: usize) -> (GridSpec, DomainMask) {
        let g = GridSpec::unit_box(1, points).unwrap();
        let m = rasterize_domain(&g, DomainShape::Interval { a: 0.0, b: 1.0 }).unwrap();
        (g, m)
    }

    #[test]
    fn gradient_exact_on_linear() {
        let (g, m) = interval_setup(11);
        let f = ScalarField::sample(&g, &TestFunction::Linear { offset: 0.0, slope: [1.0, 0.0] });
        let grad = weak_gradient(&f, &m).unwrap();
        for i in 1..=9 {
            assert!((grad.components[0].values()[i] - 1.0).abs() < 1e-13, "at {i}");
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let (g, m) = interval_setup(11);
        let f = ScalarField::constant(&g, 5.0);
        let grad = weak_gradient(&f, &m).unwrap();
        assert!(grad.magnitude.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_sine_second_order() {
        let (g, m) = interval_setup(11);
        let h = g.spacing();
        let f = ScalarField::sample(&g, &TestFunction::SinProduct { amplitude: 1.0, freq: [1.0, 1.0] });
        let grad = weak_gradient(&f, &m).unwrap();
        // at x=0.5 the centered difference of sin(πx) is exactly 0 by symmetry
        let fd = grad.components[0].values()[5];
        let bound = std::f64::consts::PI.powi(3) * h * h / 6.0;
        assert!(fd.abs() <= bound, "fd={fd}, bound={bound}");
    }

    #[test]
    fn lp_norm_examples() {
        let (g, m) = interval_setup(256);
        let one = ScalarField::constant(&g, 1.0);
        let measure = (m.inside_count() as f64 * g.spacing()).powf(1.0 / 2.0);
        assert!((lp_norm(&one, &m, 2.0).unwrap() - measure).abs() < 1e-13);
        let zero = ScalarField::constant(&g, 0.0);
        assert_eq!(lp_norm(&zero, &m, 2.0).unwrap(), 0.0);
        let x = ScalarField::sample(&g, &TestFunction::Linear { offset: 0.0, slope: [1.0, 0.0] });
        let val = lp_norm(&x, &m, 2.0).unwrap();
        assert!((val - 1.0 / 3f64.sqrt()).abs() < 0.01, "got {val}");
        assert!(lp_norm(&x, &m, 0.5).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let (g, m) = interval_setup(256);
        let one = ScalarField::constant(&g, 1.0);
        let s = sobolev_norm(&one, &m, 2.0).unwrap();
        assert!((s - 1.0).abs() < 0.01);
        let x = ScalarField::sample(&g, &TestFunction::Linear { offset: 0.0, slope: [1.0, 0.0] });
        let s = sobolev_norm(&x, &m, 2.0).unwrap();
        assert!((s - (1.0 / 3f64.sqrt() + 1.0)).abs() < 0.01, "got {s}");
        // homogeneity is exact
        let x2 = x.scaled(2.0);
        let a = sobolev_norm(&x2, &m, 2.0).unwrap();
        let b = 2.0 * sobolev_norm(&x, &m, 2.0).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn norm_triangle_inequality() {
        let (g, m) = interval_setup(64);
        let f1 = ScalarField::sample(&g, &TestFunction::SinProduct { amplitude: 1.0, freq: [1.0, 1.0] });
        let f2 = ScalarField::sample(&g, &TestFunction::Gaussian { amplitude: 1.0, center: [0.6, 0.5], width: 0.2 });
        let sum = f1.zip(&f2, |a, b| a + b).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            let lhs = lp_norm(&sum, &m, p).unwrap();
            let rhs = lp_norm(&f1, &m, p).unwrap() + lp_norm(&f2, &m, p).unwrap();
            assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
        }
    }

    #[test]
    fn exponent_rules() {
        let np = NormParams::derive(1.5, 1.0, 2, ExponentRule::Sobolev).unwrap();
        assert!((np.q - 6.0).abs() < 1e-12);
        let np = NormParams::derive(2.0, 1.0, 2, ExponentRule::Shifted).unwrap();
        assert!((np.q - 2.0).abs() < 1e-12); // β=1 keeps q = p
        assert!(NormParams::derive(2.0, 1.0, 1, ExponentRule::Sobolev).is_err());
        assert!(NormParams::derive(0.9, 0.0, 1, ExponentRule::Sobolev).is_err());
    }

    #[test]
    fn green_identity_1d_constant() {
        // exact bookkeeping: lhs = 2r, rhs = discrete volume = 2r − h
        let (g, _) = interval_setup(11);
        let f = ScalarField::constant(&g, 1.0);
        let res = green_identity_residual(&f, 5, 0.3).unwrap();
        assert!((res - g.spacing()).abs() < 1e-13, "res={res}");
    }

    #[test]
    fn green_identity_2d_closed_forms() {
        let g = GridSpec::unit_box(2, 33).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let res = green_identity_residual(&one, g.index(16, 16), 0.25).unwrap();
        assert!(res < 0.05, "res={res}");
        let lin = ScalarField::sample(&g, &TestFunction::Linear { offset: 1.0, slope: [0.5, -0.25] });
        let res = green_identity_residual(&lin, g.index(16, 16), 0.25).unwrap();
        assert!(res < 0.05, "res={res}");
    }

    #[test]
    fn sphere_ball_identity_exact_cases() {
        let g = GridSpec::unit_box(2, 33).unwrap();
        let c = ScalarField::constant(&g, 4.0);
        assert!(sphere_ball_identity_residual(&c, g.index(16, 16), 0.25).unwrap() < 1e-12);
        let lin = ScalarField::sample(&g, &TestFunction::Linear { offset: 1.0, slope: [0.5, -0.25] });
        let res = sphere_ball_identity_residual(&lin, g.index(16, 16), 0.25).unwrap();
        assert!(res < 1e-10, "res={res}");
    }

    #[test]
    fn radial_derivative_constants() {
        let (g, m) = interval_setup(33);
        let one = ScalarField::constant(&g, 1.0);
        // In 1D the centered difference of the discrete volume is exactly the
        // two-point surface sum.
        let res = radial_derivative_residual(&one, &m, 16).unwrap();
        assert!(res < 1e-12, "res={res}");

        let g2 = GridSpec::unit_box(2, 33).unwrap();
        let m2 = rasterize_domain(&g2, DomainShape::Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 })
            .unwrap();
        let one2 = ScalarField::constant(&g2, 1.0);
        let res = radial_derivative_residual(&one2, &m2, g2.index(16, 16)).unwrap();
        assert!(res < 1.0, "res={res}");
    }

    #[test]
    fn radial_derivative_needs_room() {
        let (g, m) = interval_setup(11);
        let one = ScalarField::constant(&g, 1.0);
        assert!(matches!(
            radial_derivative_residual(&one, &m, 1),
            Err(Error::InsufficientRoom(_))
        ));
        let _ = g;
    }

    #[test]
    fn hardy_quotient_zero_field() {
        use crate::averages::{Branch, OperatorParams};
        use crate::maximal::maximal_field;
        let (g, m) = interval_setup(33);
        let zero = ScalarField::constant(&g, 0.0);
        let p = OperatorParams::new(1.0, 0.0, Branch::Small).unwrap();
        let mf = maximal_field(&zero, &m, &p).unwrap();
        assert_eq!(hardy_quotient_integral(&mf, &m, 2.0).unwrap(), 0.0);
        assert!(hardy_quotient_integral(&mf, &m, 0.0).is_err());
    }
}
