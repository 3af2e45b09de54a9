//! Uniform grids, sampled scalar fields, and rasterized domains.
//!
//! Everything downstream works on a uniform grid with the same spacing `h` on
//! every axis, values stored row-major. A domain Ω is a set of inside grid
//! points together with `sigma`, the Euclidean distance to the nearest
//! *outside* grid point. Distances are computed in integer lattice arithmetic
//! (squared index offsets), so the fast transform and the brute-force oracle
//! agree bit-for-bit and radius admissibility `r < sigma` can be decided
//! exactly.

use serde::{Deserialize, Serialize};

use crate::catalog::TestFunction;
use crate::error::{Error, Result};

/// Sentinel for "no outside point in this row" during the distance transform.
const FAR: i64 = i64::MAX / 4;

/// A uniform grid in 1 or 2 dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    shape: Vec<usize>,
    spacing: f64,
    origin: Vec<f64>,
}

impl GridSpec {
    pub fn new(dim: usize, shape: Vec<usize>, spacing: f64, origin: Vec<f64>) -> Result<GridSpec> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParam(format!("dim must be 1 or 2, got {dim}")));
        }
        if shape.len() != dim || origin.len() != dim {
            return Err(Error::InvalidParam(
                "shape and origin must have one entry per axis".into(),
            ));
        }
        if shape.iter().any(|&s| s < 4) {
            return Err(Error::InvalidParam("every axis needs at least 4 points".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParam(format!("spacing must be positive, got {spacing}")));
        }
        Ok(GridSpec { dim, shape, spacing, origin })
    }

    /// `n` points on `[lo, hi]` per axis (spacing `(hi-lo)/(n-1)`).
    pub fn unit_box(dim: usize, points_per_axis: usize) -> Result<GridSpec> {
        let h = 1.0 / (points_per_axis as f64 - 1.0);
        GridSpec::new(dim, vec![points_per_axis; dim], h, vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn nx(&self) -> usize {
        self.shape[0]
    }
    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.shape[1]
        } else {
            1
        }
    }
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx() && iy < self.ny());
        iy * self.nx() + ix
    }

    /// Flat index -> (ix, iy); iy is 0 in 1D.
    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    /// Physical coordinates of a flat index (second entry unused in 1D).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.unravel(idx);
        let mut p = [0.0; 2];
        p[0] = self.origin[0] + ix as f64 * self.spacing;
        if self.dim == 2 {
            p[1] = self.origin[1] + iy as f64 * self.spacing;
        }
        p
    }

    pub fn axis_min(&self, a: usize) -> f64 {
        self.origin[a]
    }
    pub fn axis_max(&self, a: usize) -> f64 {
        self.origin[a] + (self.shape[a] as f64 - 1.0) * self.spacing
    }

    /// Same box, spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<GridSpec> {
        if factor < 2 {
            return Err(Error::InvalidParam("refinement factor must be >= 2".into()));
        }
        let shape = self.shape.iter().map(|&s| (s - 1) * factor + 1).collect();
        GridSpec::new(self.dim, shape, self.spacing / factor as f64, self.origin.clone())
    }
}

/// A real-valued function sampled at every grid point.
///
/// Fields sampled from the catalog keep their analytic source so refinement
/// can re-sample instead of interpolate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    source: Option<TestFunction>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field construction".into()));
        }
        Ok(ScalarField { grid, values, source: None })
    }

    /// Sample an analytic function at every cell center.
    pub fn sample(grid: &GridSpec, f: &TestFunction) -> ScalarField {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f.eval(&p[..dim])
            })
            .collect();
        ScalarField { grid: grid.clone(), values, source: Some(f.clone()) }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
        let dim = grid.dim();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..dim])
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn constant(grid: &GridSpec, value: f64) -> ScalarField {
        ScalarField { grid: grid.clone(), values: vec![value; grid.len()], source: None }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn source(&self) -> Option<&TestFunction> {
        self.source.as_ref()
    }
    pub fn set_source(&mut self, src: Option<TestFunction>) {
        self.source = src;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            source: None,
        }
    }

    pub fn abs(&self) -> ScalarField {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
            source: None,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation at a physical point inside the bounding box.
    pub fn interpolate(&self, p: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let h = g.spacing();
        let tol = 1e-9 * h;
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..g.dim() {
            if p[a] < g.axis_min(a) - tol || p[a] > g.axis_max(a) + tol {
                return Err(Error::OutOfBounds {
                    center: p[..g.dim()].to_vec(),
                    radius: 0.0,
                });
            }
            let t = ((p[a] - g.origin()[a]) / h).clamp(0.0, (g.shape()[a] - 1) as f64);
            let i = (t.floor() as usize).min(g.shape()[a] - 2);
            cell[a] = i;
            frac[a] = t - i as f64;
        }
        if g.dim() == 1 {
            let v0 = self.values[cell[0]];
            let v1 = self.values[cell[0] + 1];
            Ok(v0 + frac[0] * (v1 - v0))
        } else {
            let i = |dx: usize, dy: usize| g.index(cell[0] + dx, cell[1] + dy);
            let v00 = self.values[i(0, 0)];
            let v10 = self.values[i(1, 0)];
            let v01 = self.values[i(0, 1)];
            let v11 = self.values[i(1, 1)];
            let a = v00 + frac[0] * (v10 - v00);
            let b = v01 + frac[0] * (v11 - v01);
            Ok(a + frac[1] * (b - a))
        }
    }

    /// New field on the refined grid: re-sampled from the analytic source when
    /// one is attached, multilinear interpolation otherwise.
    pub fn refine(&self, factor: usize) -> Result<ScalarField> {
        let fine = self.grid.refined(factor)?;
        if let Some(src) = &self.source {
            Ok(ScalarField::sample(&fine, src))
        } else {
            let dim = fine.dim();
            let values = (0..fine.len())
                .map(|i| {
                    let p = fine.point(i);
                    self.interpolate(&p[..dim])
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ScalarField { grid: fine, values, source: None })
        }
    }
}

/// Analytic description of a domain, evaluated at cell centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainShape {
    /// 1D open interval (a, b).
    Interval { a: f64, b: f64 },
    /// 2D open axis-aligned rectangle.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Open disk.
    Disk { cx: f64, cy: f64, radius: f64 },
    /// Open annulus inner < |p−c| < outer.
    Annulus { cx: f64, cy: f64, inner: f64, outer: f64 },
    /// Explicit inside flags (not refinable).
    Explicit(Vec<bool>),
}

impl DomainShape {
    fn contains(&self, p: &[f64]) -> bool {
        match self {
            DomainShape::Interval { a, b } => p[0] > *a && p[0] < *b,
            DomainShape::Rect { x0, y0, x1, y1 } => {
                p[0] > *x0 && p[0] < *x1 && p[1] > *y0 && p[1] < *y1
            }
            DomainShape::Disk { cx, cy, radius } => {
                let d2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                d2 < radius * radius
            }
            DomainShape::Annulus { cx, cy, inner, outer } => {
                let d2 = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                d2 > inner * inner && d2 < outer * outer
            }
            DomainShape::Explicit(_) => unreachable!("explicit masks are rasterized by index"),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            DomainShape::Interval { .. } => "interval",
            DomainShape::Rect { .. } => "rect",
            DomainShape::Disk { .. } => "disk",
            DomainShape::Annulus { .. } => "annulus",
            DomainShape::Explicit(_) => "explicit",
        }
    }
}

/// Inside/outside flags for Ω plus the distance field to the complement.
///
/// `sigma_d2` holds the squared index distance to the nearest outside grid
/// point (0 outside Ω); the physical distance is `spacing · sqrt(sigma_d2)`.
#[derive(Clone, Debug)]
pub struct DomainMask {
    grid: GridSpec,
    inside: Vec<bool>,
    sigma_d2: Vec<i64>,
    shape: Option<DomainShape>,
}

impl DomainMask {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }
    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }
    pub fn sigma_d2(&self) -> &[i64] {
        &self.sigma_d2
    }
    pub fn shape_spec(&self) -> Option<&DomainShape> {
        self.shape.as_ref()
    }

    /// Distance from a grid point to the nearest outside grid point (0 outside).
    pub fn sigma(&self, idx: usize) -> f64 {
        self.grid.spacing() * (self.sigma_d2[idx] as f64).sqrt()
    }

    pub fn inside_indices(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Re-rasterize on a refined grid. Masks built from explicit flags carry
    /// no analytic descriptor and cannot be refined.
    pub fn refine(&self, factor: usize) -> Result<DomainMask> {
        match &self.shape {
            None | Some(DomainShape::Explicit(_)) => Err(Error::RefineExplicitMask),
            Some(shape) => rasterize_domain(&self.grid.refined(factor)?, shape.clone()),
        }
    }

    /// Rebuild a mask from stored inside flags (distances are recomputed).
    pub fn from_parts(
        grid: GridSpec,
        inside: Vec<bool>,
        shape: Option<DomainShape>,
    ) -> Result<DomainMask> {
        if inside.len() != grid.len() {
            return Err(Error::InvalidParam("inside flag count does not match grid".into()));
        }
        if inside.iter().all(|&b| !b) {
            return Err(Error::EmptyDomain);
        }
        if inside.iter().all(|&b| b) {
            return Err(Error::FullDomain);
        }
        let sigma_d2 = distance_transform_d2(&grid, &inside);
        Ok(DomainMask { grid, inside, sigma_d2, shape })
    }
}

/// Rasterize a domain descriptor: inside flags from the predicate at cell
/// centers, distances by the exact transform.
pub fn rasterize_domain(grid: &GridSpec, shape: DomainShape) -> Result<DomainMask> {
    let inside: Vec<bool> = match &shape {
        DomainShape::Explicit(flags) => {
            if flags.len() != grid.len() {
                return Err(Error::InvalidParam(format!(
                    "explicit mask has {} flags for a grid of {} points",
                    flags.len(),
                    grid.len()
                )));
            }
            flags.clone()
        }
        s => {
            let dim = grid.dim();
            if dim == 1 && !matches!(s, DomainShape::Interval { .. }) {
                return Err(Error::InvalidParam("1D grids take interval domains".into()));
            }
            if dim == 2 && matches!(s, DomainShape::Interval { .. }) {
                return Err(Error::InvalidParam("interval domains are 1D".into()));
            }
            (0..grid.len())
                .map(|i| {
                    let p = grid.point(i);
                    s.contains(&p[..dim])
                })
                .collect()
        }
    };
    if inside.iter().all(|&b| !b) {
        return Err(Error::EmptyDomain);
    }
    if inside.iter().all(|&b| b) {
        return Err(Error::FullDomain);
    }
    let sigma_d2 = distance_transform_d2(grid, &inside);
    Ok(DomainMask { grid: grid.clone(), inside, sigma_d2, shape: Some(shape) })
}

/// Exact squared-index-distance transform to the nearest outside point.
///
/// Row pass finds the nearest outside offset within each row; the column pass
/// minimizes `(dy)² + g²` directly. All arithmetic is on integers, so the
/// result matches [`brute_force_d2`] exactly.
pub fn distance_transform_d2(grid: &GridSpec, inside: &[bool]) -> Vec<i64> {
    let nx = grid.nx();
    let ny = grid.ny();
    // Nearest outside offset along the row, or FAR.
    let mut row_dist = vec![FAR; nx * ny];
    for y in 0..ny {
        let base = y * nx;
        let mut last: Option<usize> = None;
        for x in 0..nx {
            if !inside[base + x] {
                last = Some(x);
                row_dist[base + x] = 0;
            } else if let Some(x0) = last {
                row_dist[base + x] = (x - x0) as i64;
            }
        }
        last = None;
        for x in (0..nx).rev() {
            if !inside[base + x] {
                last = Some(x);
            } else if let Some(x0) = last {
                let d = (x0 - x) as i64;
                if d < row_dist[base + x] {
                    row_dist[base + x] = d;
                }
            }
        }
    }
    if grid.dim() == 1 {
        return row_dist.iter().map(|&d| if d >= FAR { FAR } else { d * d }).collect();
    }
    let mut d2 = vec![FAR; nx * ny];
    for x in 0..nx {
        for y in 0..ny {
            if !inside[y * nx + x] {
                d2[y * nx + x] = 0;
                continue;
            }
            let mut best = FAR;
            for yp in 0..ny {
                let g = row_dist[yp * nx + x];
                if g >= FAR {
                    continue;
                }
                let dy = y as i64 - yp as i64;
                let cand = dy * dy + g * g;
                if cand < best {
                    best = cand;
                }
            }
            d2[y * nx + x] = best;
        }
    }
    d2
}

/// O(N·M) reference for the distance transform: for every point, minimize the
/// squared index offset over all outside points.
pub fn brute_force_d2(grid: &GridSpec, inside: &[bool]) -> Vec<i64> {
    let nx = grid.nx() as i64;
    let outside: Vec<(i64, i64)> = (0..grid.len())
        .filter(|&i| !inside[i])
        .map(|i| ((i % grid.nx()) as i64, (i / grid.nx()) as i64))
        .collect();
    (0..grid.len())
        .map(|i| {
            if !inside[i] {
                return 0;
            }
            let x = i as i64 % nx;
            let y = i as i64 / nx;
            outside
                .iter()
                .map(|&(ox, oy)| (x - ox).pow(2) + (y - oy).pow(2))
                .min()
                .unwrap_or(FAR)
        })
        .collect()
}

/// The distance field sigma as a scalar field (0 outside Ω).
pub fn distance_to_complement(mask: &DomainMask) -> ScalarField {
    let h = mask.grid().spacing();
    let values = mask.sigma_d2().iter().map(|&d2| h * (d2 as f64).sqrt()).collect();
    ScalarField { grid: mask.grid().clone(), values, source: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d_11() -> GridSpec {
        GridSpec::new(1, vec![11], 0.1, vec![0.0]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(3, vec![4, 4, 4], 0.1, vec![0.0; 3]).is_err());
        assert!(GridSpec::new(1, vec![3], 0.1, vec![0.0]).is_err());
        assert!(GridSpec::new(1, vec![8], 0.0, vec![0.0]).is_err());
        assert!(GridSpec::new(1, vec![8], 0.1, vec![0.0]).is_ok());
    }

    #[test]
    fn coordinates_follow_origin_and_spacing() {
        let g = GridSpec::new(2, vec![5, 4], 0.25, vec![1.0, -1.0]).unwrap();
        let idx = g.index(2, 3);
        let p = g.point(idx);
        assert!((p[0] - 1.5).abs() < 1e-15);
        assert!((p[1] - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn open_interval_excludes_endpoints() {
        let g = grid_1d_11();
        let mask = rasterize_domain(&g, DomainShape::Interval { a: 0.0, b: 1.0 }).unwrap();
        assert!(!mask.is_inside(0));
        assert!(!mask.is_inside(10));
        for i in 1..=9 {
            assert!(mask.is_inside(i), "index {i} should be inside");
        }
    }

    #[test]
    fn disjoint_interval_is_empty_domain() {
        let g = grid_1d_11();
        let err = rasterize_domain(&g, DomainShape::Interval { a: 2.0, b: 3.0 });
        assert!(matches!(err, Err(Error::EmptyDomain)));
    }

    #[test]
    fn disk_rasterizes_by_center_distance() {
        let g = GridSpec::unit_box(2, 21).unwrap();
        let mask =
            rasterize_domain(&g, DomainShape::Disk { cx: 0.5, cy: 0.5, radius: 0.4 }).unwrap();
        for i in 0..g.len() {
            let p = g.point(i);
            let d = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            assert_eq!(mask.is_inside(i), d < 0.4, "at {p:?}");
        }
    }

    #[test]
    fn sigma_on_unit_interval() {
        let g = grid_1d_11();
        let mask = rasterize_domain(&g, DomainShape::Interval { a: 0.0, b: 1.0 }).unwrap();
        // midpoint: distance 0.5 to either endpoint
        assert!((mask.sigma(5) - 0.5).abs() < 1e-15);
        // adjacent to the boundary point at 0
        assert!((mask.sigma(1) - 0.1).abs() < 1e-15);
        let sf = distance_to_complement(&mask);
        assert_eq!(sf.values()[0], 0.0);
    }

    #[test]
    fn fast_transform_matches_brute_force() {
        // a box-minus-ring domain and a disk, several sizes
        for n in [8usize, 17, 33] {
            let g = GridSpec::unit_box(2, n).unwrap();
            for shape in [
                DomainShape::Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 },
                DomainShape::Disk { cx: 0.5, cy: 0.5, radius: 0.37 },
                DomainShape::Annulus { cx: 0.5, cy: 0.5, inner: 0.15, outer: 0.45 },
            ] {
                let mask = rasterize_domain(&g, shape).unwrap();
                let brute = brute_force_d2(&g, mask.inside());
                assert_eq!(mask.sigma_d2(), &brute[..], "n={n}");
            }
        }
    }

    #[test]
    fn sigma_is_one_lipschitz() {
        let g = GridSpec::unit_box(2, 17).unwrap();
        let mask =
            rasterize_domain(&g, DomainShape::Disk { cx: 0.5, cy: 0.5, radius: 0.42 }).unwrap();
        let pts = mask.inside_indices();
        for &i in &pts {
            for &j in &pts {
                let pi = g.point(i);
                let pj = g.point(j);
                let dist = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                assert!(mask.sigma(i) - mask.sigma(j) <= dist + 1e-12);
            }
        }
    }

    #[test]
    fn sample_linear_exact() {
        let g = GridSpec::new(1, vec![5], 0.25, vec![0.0]).unwrap();
        let f = ScalarField::sample(&g, &TestFunction::Linear { offset: 0.0, slope: [1.0, 0.0] });
        assert_eq!(f.values(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn refine_keeps_box_and_halves_spacing() {
        let g = grid_1d_11();
        let fine = g.refined(2).unwrap();
        assert_eq!(fine.shape(), &[21]);
        assert!((fine.spacing() - 0.05).abs() < 1e-15);
        assert!((fine.axis_max(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refine_constant_and_linear_fields() {
        let g = grid_1d_11();
        let c = ScalarField::constant(&g, 2.0).refine(2).unwrap();
        assert!(c.values().iter().all(|&v| v == 2.0));

        // interpolation is exact on linear data even without a source
        let mut lin =
            ScalarField::sample(&g, &TestFunction::Linear { offset: 0.5, slope: [2.0, 0.0] });
        lin.set_source(None);
        let fine = lin.refine(2).unwrap();
        for i in 0..fine.grid().len() {
            let p = fine.grid().point(i);
            assert!((fine.values()[i] - (0.5 + 2.0 * p[0])).abs() < 1e-13);
        }
    }

    #[test]
    fn refine_explicit_mask_fails() {
        let g = grid_1d_11();
        let mut flags = vec![true; 11];
        flags[0] = false;
        flags[10] = false;
        let mask = rasterize_domain(&g, DomainShape::Explicit(flags)).unwrap();
        assert!(matches!(mask.refine(2), Err(Error::RefineExplicitMask)));
    }

    #[test]
    fn interpolation_exact_on_grid_points_and_bilinear() {
        let g = GridSpec::unit_box(2, 9).unwrap();
        let f = ScalarField::sample(
            &g,
            &TestFunction::Linear { offset: 1.0, slope: [0.5, -0.25] },
        );
        assert!((f.interpolate(&[0.5, 0.5]).unwrap() - (1.0 + 0.25 - 0.125)).abs() < 1e-15);
        assert!((f.interpolate(&[0.3, 0.45]).unwrap() - (1.0 + 0.15 - 0.1125)).abs() < 1e-13);
        assert!(f.interpolate(&[1.5, 0.5]).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = grid_1d_11();
        let mut vals = vec![0.0; 11];
        vals[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, vals), Err(Error::NonFinite(_))));
    }
}
