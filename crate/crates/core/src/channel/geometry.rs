use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A point (or offset) in the array plane, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, dir: [f64; 2]) -> f64 {
        self.x * dir[0] + self.y * dir[1]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point2,
    pub max: Point2,
}

impl Region {
    pub fn around(center: Point2, half_x: f64, half_y: f64) -> Self {
        Region {
            min: Point2::new(center.x - half_x, center.y - half_y),
            max: Point2::new(center.x + half_x, center.y + half_y),
        }
    }

    /// Exact containment test (boundary included).
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Dimensions used to lay out an [`ArrayGeometry`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Sub-array rows.
    pub n_rf_h: usize,
    /// Sub-array columns.
    pub n_rf_v: usize,
    /// Antenna rows per sub-array.
    pub n_h: usize,
    /// Antenna columns per sub-array.
    pub n_v: usize,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Side length `D` of each square frame (m).
    pub frame_size: f64,
    /// Antenna offsets relative to the sub-array center, row-major over
    /// `(i, j)`. `None` selects a half-wavelength grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Point2>>,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            n_rf_h: 2,
            n_rf_v: 2,
            n_h: 2,
            n_v: 2,
            wavelength: 0.01,
            frame_size: 0.02,
            delta: None,
        }
    }
}

/// Half-wavelength UPA offsets centered on the origin. For a 2x2 array this is
/// `[(-l/4, l/4), (l/4, l/4), (-l/4, -l/4), (l/4, -l/4)]`.
pub fn half_wavelength_offsets(n_h: usize, n_v: usize, wavelength: f64) -> Vec<Point2> {
    let pitch = 0.5 * wavelength;
    let mut out = Vec::with_capacity(n_h * n_v);
    for i in 0..n_h {
        for j in 0..n_v {
            let x = (j as f64 - (n_v as f64 - 1.0) / 2.0) * pitch;
            let y = ((n_h as f64 - 1.0) / 2.0 - i as f64) * pitch;
            out.push(Point2::new(x, y));
        }
    }
    out
}

/// Sub-connected movable array: a grid of sub-arrays, each confined to its
/// own square frame.
///
/// Sub-array `(m, n)` has flat index `m * n_rf_v + n`; antenna `(i, j)` inside
/// a sub-array has flat index `i * n_v + j`. The global antenna index is
/// `subarray * n_h * n_v + antenna`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_rf_h: usize,
    pub n_rf_v: usize,
    pub n_h: usize,
    pub n_v: usize,
    pub wavelength: f64,
    pub delta: Vec<Point2>,
    pub frame_size: f64,
    /// Frame centers, one per sub-array.
    pub frame_origins: Vec<Point2>,
    /// Feasible rectangle for each sub-array center.
    pub region_bounds: Vec<Region>,
}

impl ArrayGeometry {
    /// Tiles the frames on a grid of pitch `D` centered on the origin and
    /// shrinks each frame by the largest offset per axis to get the movable
    /// region of the center point.
    pub fn tiled(params: &GeometryParams) -> Result<Self> {
        let delta = params
            .delta
            .clone()
            .unwrap_or_else(|| half_wavelength_offsets(params.n_h, params.n_v, params.wavelength));
        let d = params.frame_size;
        let (ext_x, ext_y) = max_extent(&delta);
        let mut frame_origins = Vec::with_capacity(params.n_rf_h * params.n_rf_v);
        let mut region_bounds = Vec::with_capacity(params.n_rf_h * params.n_rf_v);
        for m in 0..params.n_rf_h {
            for n in 0..params.n_rf_v {
                let c = Point2::new(
                    (n as f64 - (params.n_rf_v as f64 - 1.0) / 2.0) * d,
                    ((params.n_rf_h as f64 - 1.0) / 2.0 - m as f64) * d,
                );
                frame_origins.push(c);
                region_bounds.push(Region::around(
                    c,
                    (0.5 * d - ext_x).max(0.0),
                    (0.5 * d - ext_y).max(0.0),
                ));
            }
        }
        let geom = ArrayGeometry {
            n_rf_h: params.n_rf_h,
            n_rf_v: params.n_rf_v,
            n_h: params.n_h,
            n_v: params.n_v,
            wavelength: params.wavelength,
            delta,
            frame_size: d,
            frame_origins,
            region_bounds,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Re-tiles the same array with a different frame size.
    pub fn with_frame_size(&self, frame_size: f64) -> Result<Self> {
        ArrayGeometry::tiled(&GeometryParams {
            n_rf_h: self.n_rf_h,
            n_rf_v: self.n_rf_v,
            n_h: self.n_h,
            n_v: self.n_v,
            wavelength: self.wavelength,
            frame_size,
            delta: Some(self.delta.clone()),
        })
    }

    pub fn num_subarrays(&self) -> usize {
        self.n_rf_h * self.n_rf_v
    }

    pub fn subarray_size(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn num_antennas(&self) -> usize {
        self.num_subarrays() * self.subarray_size()
    }

    /// Wavenumber `2 pi / lambda`.
    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength
    }

    /// Frame centers, the fixed-array reference placement.
    pub fn frame_centers(&self) -> SubArrayCenters {
        SubArrayCenters(self.frame_origins.clone())
    }

    /// Checks every structural invariant of the geometry.
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas() == 0 {
            return Err(Error::config("array must contain at least one antenna"));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::config("wavelength must be positive"));
        }
        if !(self.frame_size > 0.0 && self.frame_size.is_finite()) {
            return Err(Error::config("frame size must be positive"));
        }
        if self.delta.len() != self.subarray_size() {
            return Err(Error::Dimension {
                context: "antenna offsets",
                expected: self.subarray_size(),
                actual: self.delta.len(),
            });
        }
        let m = self.num_subarrays();
        if self.frame_origins.len() != m {
            return Err(Error::Dimension {
                context: "frame origins",
                expected: m,
                actual: self.frame_origins.len(),
            });
        }
        if self.region_bounds.len() != m {
            return Err(Error::Dimension {
                context: "region bounds",
                expected: m,
                actual: self.region_bounds.len(),
            });
        }
        let half = 0.5 * self.frame_size;
        let (ext_x, ext_y) = max_extent(&self.delta);
        if ext_x > half || ext_y > half {
            return Err(Error::config(format!(
                "sub-array extent ({ext_x:.3e}, {ext_y:.3e}) m does not fit in a frame of size {:.3e} m",
                self.frame_size
            )));
        }
        // Slack for the rounding in the frame tiling arithmetic.
        let tol = 1e-12 * self.frame_size;
        for (b, (origin, region)) in self.frame_origins.iter().zip(&self.region_bounds).enumerate() {
            if region.min.x > region.max.x || region.min.y > region.max.y {
                return Err(Error::config(format!("region {b} is empty")));
            }
            for corner in [region.min, region.max] {
                if (corner.x - origin.x).abs() + ext_x > half + tol
                    || (corner.y - origin.y).abs() + ext_y > half + tol
                {
                    return Err(Error::config(format!(
                        "region {b} lets the sub-array leave its frame"
                    )));
                }
            }
        }
        for a in 0..m {
            for b in (a + 1)..m {
                let (pa, pb) = (self.frame_origins[a], self.frame_origins[b]);
                if (pa.x - pb.x).abs() < self.frame_size - tol
                    && (pa.y - pb.y).abs() < self.frame_size - tol
                {
                    return Err(Error::config(format!("frames {a} and {b} overlap")));
                }
            }
        }
        Ok(())
    }
}

fn max_extent(delta: &[Point2]) -> (f64, f64) {
    delta.iter().fold((0.0f64, 0.0f64), |(ex, ey), d| {
        (ex.max(d.x.abs()), ey.max(d.y.abs()))
    })
}

/// Center position of every sub-array, indexed by flat sub-array index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubArrayCenters(pub Vec<Point2>);

impl SubArrayCenters {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, b: usize) -> Point2 {
        self.0[b]
    }

    pub fn set(&mut self, b: usize, p: Point2) {
        self.0[b] = p;
    }

    /// True when every center lies inside its region.
    pub fn is_feasible(&self, geometry: &ArrayGeometry) -> bool {
        self.0.len() == geometry.num_subarrays()
            && self
                .0
                .iter()
                .zip(&geometry.region_bounds)
                .all(|(c, r)| r.contains(*c))
    }

    pub fn check(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.0.len() != geometry.num_subarrays() {
            return Err(Error::Dimension {
                context: "sub-array centers",
                expected: geometry.num_subarrays(),
                actual: self.0.len(),
            });
        }
        for (b, (c, r)) in self.0.iter().zip(&geometry.region_bounds).enumerate() {
            if !r.contains(*c) {
                return Err(Error::Precondition(format!(
                    "center {b} at ({:.6e}, {:.6e}) is outside its region",
                    c.x, c.y
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_geom() -> ArrayGeometry {
        ArrayGeometry::tiled(&GeometryParams::default()).unwrap()
    }

    #[test]
    fn default_offsets_match_reference_matrix() {
        let l = 0.01;
        let d = half_wavelength_offsets(2, 2, l);
        let want = [(-l / 4.0, l / 4.0), (l / 4.0, l / 4.0), (-l / 4.0, -l / 4.0), (l / 4.0, -l / 4.0)];
        for (p, (x, y)) in d.iter().zip(want) {
            assert!((p.x - x).abs() < 1e-18 && (p.y - y).abs() < 1e-18);
        }
    }

    #[test]
    fn reference_layout() {
        let g = default_geom();
        assert_eq!(g.num_antennas(), 16);
        assert_eq!(g.num_subarrays(), 4);
        // D = 2 lambda, offsets lambda/4: region half-width 0.75 lambda
        for r in &g.region_bounds {
            assert!((r.width() - 0.015).abs() < 1e-15);
            assert!((r.height() - 0.015).abs() < 1e-15);
        }
        assert_eq!(g.frame_origins[0], Point2::new(-0.01, 0.01));
        assert_eq!(g.frame_origins[1], Point2::new(0.01, 0.01));
        assert!(g.frame_centers().is_feasible(&g));
    }

    #[test]
    fn zero_size_region_when_frame_is_tight() {
        let g = default_geom().with_frame_size(0.005).unwrap();
        for r in &g.region_bounds {
            assert_eq!(r.width(), 0.0);
        }
        assert!(g.frame_centers().is_feasible(&g));
    }

    #[test]
    fn frame_too_small_is_rejected() {
        assert!(matches!(
            default_geom().with_frame_size(0.004),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overlapping_frames_are_rejected() {
        let mut g = default_geom();
        g.frame_origins[1] = Point2::new(-0.005, 0.01);
        g.region_bounds[1] = Region::around(g.frame_origins[1], 0.0, 0.0);
        assert!(g.validate().is_err());
    }

    #[test]
    fn centers_outside_region_are_flagged() {
        let g = default_geom();
        let mut c = g.frame_centers();
        c.set(2, Point2::new(1.0, 1.0));
        assert!(!c.is_feasible(&g));
        assert!(matches!(c.check(&g), Err(Error::Precondition(_))));
    }
}
