//! One-parameter model geometries with nonnegative Ricci curvature.
//!
//! Fields are stored on uniform nodes. Derivatives use fourth-order central
//! differences; ghost values come from periodic wrap (torus), even
//! reflection at the origin and the poles, and a Neumann mirror at the
//! artificial outer radius of `RadialEuclidean`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    FlatTorus1D,
    RadialEuclidean,
    RadialSphere,
}

/// JSON description of a geometry: `{"kind": ..., "n": ..., "num_points": ..., "extent": ...}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub n: u32,
    pub num_points: usize,
    /// Torus circumference or outer radius; ignored for the sphere.
    #[serde(default)]
    pub extent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    kind: GeometryKind,
    n: u32,
    num_points: usize,
    extent: f64,
    spacing: f64,
    coords: Vec<f64>,
}

pub const MIN_POINTS: usize = 16;

impl Geometry {
    pub fn new(kind: GeometryKind, n: u32, num_points: usize, extent: f64) -> Result<Self> {
        if num_points < MIN_POINTS {
            return Err(Error::domain(format!(
                "geometry needs at least {MIN_POINTS} points, got {num_points}"
            )));
        }
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let extent = match kind {
            GeometryKind::FlatTorus1D => {
                if n != 1 {
                    return Err(Error::Dimension(format!(
                        "the flat torus is one-dimensional, got n = {n}"
                    )));
                }
                extent
            }
            GeometryKind::RadialEuclidean => extent,
            GeometryKind::RadialSphere => PI,
        };
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::domain(format!("extent must be positive, got {extent}")));
        }
        let spacing = match kind {
            GeometryKind::FlatTorus1D => extent / num_points as f64,
            _ => extent / (num_points - 1) as f64,
        };
        let coords = (0..num_points).map(|i| i as f64 * spacing).collect();
        Ok(Geometry {
            kind,
            n,
            num_points,
            extent,
            spacing,
            coords,
        })
    }

    pub fn flat_torus(num_points: usize, circumference: f64) -> Result<Self> {
        Self::new(GeometryKind::FlatTorus1D, 1, num_points, circumference)
    }

    pub fn radial_euclidean(n: u32, num_points: usize, outer_radius: f64) -> Result<Self> {
        Self::new(GeometryKind::RadialEuclidean, n, num_points, outer_radius)
    }

    pub fn radial_sphere(n: u32, num_points: usize) -> Result<Self> {
        Self::new(GeometryKind::RadialSphere, n, num_points, PI)
    }

    pub fn from_spec(spec: &GeometrySpec) -> Result<Self> {
        let extent = match spec.kind {
            GeometryKind::RadialSphere => PI,
            _ => spec
                .extent
                .ok_or_else(|| Error::config("geometry.extent", "required for this kind"))?,
        };
        Self::new(spec.kind, spec.n, spec.num_points, extent)
    }

    pub fn spec(&self) -> GeometrySpec {
        GeometrySpec {
            kind: self.kind,
            n: self.n,
            num_points: self.num_points,
            extent: Some(self.extent),
        }
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// All three model spaces have `Ric ≥ 0` (flat, flat, positive).
    pub fn nonneg_ricci(&self) -> bool {
        match self.kind {
            GeometryKind::FlatTorus1D | GeometryKind::RadialEuclidean => true,
            GeometryKind::RadialSphere => true,
        }
    }

    /// Ghost-aware node lookup.
    #[inline]
    fn at(&self, u: &[f64], idx: isize) -> f64 {
        let n = self.num_points as isize;
        match self.kind {
            GeometryKind::FlatTorus1D => u[idx.rem_euclid(n) as usize],
            _ => {
                let last = n - 1;
                let k = if idx < 0 {
                    -idx
                } else if idx > last {
                    2 * last - idx
                } else {
                    idx
                };
                u[k as usize]
            }
        }
    }

    #[inline]
    fn d2(&self, u: &[f64], i: usize) -> f64 {
        let i = i as isize;
        let h2 = self.spacing * self.spacing;
        let near = self.at(u, i + 1) + self.at(u, i - 1);
        let far = self.at(u, i + 2) + self.at(u, i - 2);
        (16.0 * near - far - 30.0 * u[i as usize]) / (12.0 * h2)
    }

    #[inline]
    fn d1(&self, u: &[f64], i: usize) -> f64 {
        let i = i as isize;
        let near = self.at(u, i + 1) - self.at(u, i - 1);
        let far = self.at(u, i + 2) - self.at(u, i - 2);
        (8.0 * near - far) / (12.0 * self.spacing)
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_points];
        self.laplacian_into(field, &mut out);
        out
    }

    /// Laplace–Beltrami operator of a symmetric field.
    pub fn laplacian_into(&self, field: &[f64], out: &mut [f64]) {
        assert_eq!(field.len(), self.num_points, "field length must match the node count");
        assert_eq!(out.len(), self.num_points);
        let nm1 = f64::from(self.n) - 1.0;
        let last = self.num_points - 1;
        match self.kind {
            GeometryKind::FlatTorus1D => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.d2(field, i);
                }
            }
            GeometryKind::RadialEuclidean => {
                out[0] = f64::from(self.n) * self.d2(field, 0);
                for i in 1..self.num_points {
                    // The Neumann mirror makes d1 vanish at the outer node.
                    let drift = if i == last {
                        0.0
                    } else {
                        nm1 * self.d1(field, i) / self.coords[i]
                    };
                    out[i] = self.d2(field, i) + drift;
                }
            }
            GeometryKind::RadialSphere => {
                let nf = f64::from(self.n);
                out[0] = nf * self.d2(field, 0);
                out[last] = nf * self.d2(field, last);
                for i in 1..last {
                    let theta = self.coords[i];
                    out[i] = self.d2(field, i) + nm1 * self.d1(field, i) / theta.tan();
                }
            }
        }
    }

    /// First derivative along the coordinate. Radial outer ends fall back
    /// to second-order central and one-sided differences.
    pub fn gradient(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.num_points, "field length must match the node count");
        let last = self.num_points - 1;
        let h = self.spacing;
        (0..self.num_points)
            .map(|i| match self.kind {
                GeometryKind::RadialEuclidean if i == last => {
                    (3.0 * (field[last] - field[last - 1]) - (field[last - 1] - field[last - 2])) / (2.0 * h)
                }
                GeometryKind::RadialEuclidean if i == last - 1 => (field[last] - field[last - 2]) / (2.0 * h),
                _ => self.d1(field, i),
            })
            .collect()
    }

    pub fn grad_sq(&self, field: &[f64]) -> Vec<f64> {
        self.gradient(field).into_iter().map(|g| g * g).collect()
    }

    pub fn geodesic_distance(&self, i: usize, j: usize) -> f64 {
        let d = (self.coords[i] - self.coords[j]).abs();
        match self.kind {
            GeometryKind::FlatTorus1D => d.min(self.extent - d),
            _ => d,
        }
    }

    /// Signed displacement of the minimizing path from node `from` to node `to`.
    pub fn displacement(&self, from: usize, to: usize) -> f64 {
        let d = self.coords[to] - self.coords[from];
        match self.kind {
            GeometryKind::FlatTorus1D => {
                let l = self.extent;
                let w = d.rem_euclid(l);
                if w > 0.5 * l {
                    w - l
                } else {
                    w
                }
            }
            _ => d,
        }
    }

    /// Distance between two coordinates along the minimizing path.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self.kind {
            GeometryKind::FlatTorus1D => {
                let w = d.rem_euclid(self.extent);
                w.min(self.extent - w)
            }
            _ => d,
        }
    }

    /// Point at fraction `s` of the constant-speed path from `from` to `to`.
    pub fn path_point(&self, from: f64, to: f64, s: f64) -> f64 {
        match self.kind {
            GeometryKind::FlatTorus1D => {
                let l = self.extent;
                let w = (to - from).rem_euclid(l);
                let d = if w > 0.5 * l { w - l } else { w };
                (from + s * d).rem_euclid(l)
            }
            _ => from + s * (to - from),
        }
    }

    /// Linear interpolation of a nodal field at coordinate `x`.
    pub fn interpolate(&self, field: &[f64], x: f64) -> f64 {
        let h = self.spacing;
        match self.kind {
            GeometryKind::FlatTorus1D => {
                let xr = x.rem_euclid(self.extent);
                let pos = xr / h;
                let i0 = pos.floor() as usize % self.num_points;
                let frac = pos - pos.floor();
                let i1 = (i0 + 1) % self.num_points;
                field[i0] * (1.0 - frac) + field[i1] * frac
            }
            _ => {
                let pos = (x / h).clamp(0.0, (self.num_points - 1) as f64);
                let i0 = (pos.floor() as usize).min(self.num_points - 2);
                let frac = pos - i0 as f64;
                field[i0] * (1.0 - frac) + field[i0 + 1] * frac
            }
        }
    }

    /// Nodes taking part in inequality checks: a 10% band next to the
    /// artificial outer boundary of `RadialEuclidean` is excluded.
    pub fn checked_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.num_points];
        if self.kind == GeometryKind::RadialEuclidean {
            let band = (self.num_points as f64 * 0.1).ceil() as usize;
            for m in mask.iter_mut().rev().take(band) {
                *m = false;
            }
        }
        mask
    }

    /// Gershgorin bound on the spectral radius of the discrete Laplacian.
    pub fn stiffness_bound(&self) -> f64 {
        let h = self.spacing;
        let second = 64.0 / (12.0 * h * h);
        let first = 18.0 / (12.0 * h);
        let nf = f64::from(self.n);
        let nm1 = nf - 1.0;
        match self.kind {
            GeometryKind::FlatTorus1D => second,
            GeometryKind::RadialEuclidean => {
                let interior = (1..self.num_points)
                    .map(|i| second + nm1 * first / self.coords[i])
                    .fold(0.0, f64::max);
                interior.max(nf * second)
            }
            GeometryKind::RadialSphere => {
                let interior = (1..self.num_points - 1)
                    .map(|i| second + nm1 * first / self.coords[i].tan().abs())
                    .fold(0.0, f64::max);
                interior.max(nf * second)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn talenti(r: f64) -> f64 {
        24.0 / ((1.0 + r * r) * (1.0 + r * r))
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let geoms = [
            Geometry::flat_torus(64, 3.0).unwrap(),
            Geometry::radial_euclidean(6, 64, 5.0).unwrap(),
            Geometry::radial_sphere(5, 64).unwrap(),
        ];
        for g in &geoms {
            let c = vec![0.731_f64; g.num_points()];
            assert!(g.laplacian(&c).iter().all(|&v| v == 0.0), "{:?}", g.kind());
            assert!(g.grad_sq(&c).iter().all(|&v| v == 0.0), "{:?}", g.kind());
        }
    }

    #[test]
    fn torus_sine_eigenfunction() {
        let g = Geometry::flat_torus(256, 2.0 * PI).unwrap();
        let u: Vec<f64> = g.coords().iter().map(|x| x.sin()).collect();
        let lap = g.laplacian(&u);
        let gs = g.grad_sq(&u);
        let h2 = g.spacing().powi(2);
        for (i, x) in g.coords().iter().enumerate() {
            assert!((lap[i] + x.sin()).abs() < h2);
            assert!((gs[i] - x.cos().powi(2)).abs() < h2);
        }
    }

    #[test]
    fn talenti_laplacian_at_origin() {
        let g = Geometry::radial_euclidean(6, 512, 10.0).unwrap();
        let u: Vec<f64> = g.coords().iter().map(|&r| talenti(r)).collect();
        let lap = g.laplacian(&u);
        // Δu(0) = n u''(0) = 6 · (-96) = -u(0)²
        assert!((lap[0] + 576.0).abs() < 100.0 * g.spacing().powi(2), "{}", lap[0]);
    }

    #[test]
    fn radial_r_squared_gradient() {
        let g = Geometry::radial_euclidean(3, 100, 2.0).unwrap();
        let u: Vec<f64> = g.coords().iter().map(|r| r * r).collect();
        let gs = g.grad_sq(&u);
        for i in 1..g.num_points() - 1 {
            let r = g.coords()[i];
            assert_abs_diff_eq!(gs[i], 4.0 * r * r, epsilon = 1e-9);
        }
        // Δ r² = 2n away from the mirrored outer node.
        let lap = g.laplacian(&u);
        for &v in &lap[..g.num_points() - 3] {
            assert_abs_diff_eq!(v, 6.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn distances() {
        let g = Geometry::flat_torus(20, 10.0).unwrap();
        // nodes at x = 1 and x = 9
        assert_abs_diff_eq!(g.geodesic_distance(2, 18), 2.0, epsilon = 1e-12);
        assert_eq!(g.geodesic_distance(7, 7), 0.0);
        assert_abs_diff_eq!(g.displacement(2, 18), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.displacement(18, 2), 2.0, epsilon = 1e-12);

        let s = Geometry::radial_sphere(3, 17).unwrap();
        // θ = π/4 is node 4, 3π/4 is node 12
        assert_abs_diff_eq!(s.geodesic_distance(4, 12), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn torus_conservation_and_shift() {
        let g = Geometry::flat_torus(128, 7.0).unwrap();
        let u: Vec<f64> = g
            .coords()
            .iter()
            .map(|&x| 1.0 + 0.3 * (2.0 * PI * x / 7.0).sin() + 0.1 * (6.0 * PI * x / 7.0).cos())
            .collect();
        let lap = g.laplacian(&u);
        let total: f64 = lap.iter().sum();
        let scale: f64 = lap.iter().map(|v| v.abs()).sum();
        assert!(total.abs() < 1e-12 * scale);

        let shift = 17;
        let shifted: Vec<f64> = (0..128).map(|i| u[(i + shift) % 128]).collect();
        let lap_s = g.laplacian(&shifted);
        for i in 0..128 {
            assert_abs_diff_eq!(lap_s[i], lap[(i + shift) % 128], epsilon = 1e-9);
        }
    }

    #[test]
    fn sphere_reflection_symmetry() {
        let g = Geometry::radial_sphere(5, 65).unwrap();
        let u: Vec<f64> = g
            .coords()
            .iter()
            .map(|&t| 2.0 + t.cos() + 0.5 * (3.0 * t).cos())
            .collect();
        let refl: Vec<f64> = u.iter().rev().copied().collect();
        let (a, b) = (g.laplacian(&u), g.laplacian(&refl));
        let (ga, gb) = (g.grad_sq(&u), g.grad_sq(&refl));
        let n = u.len();
        for i in 0..n {
            assert_abs_diff_eq!(a[i], b[n - 1 - i], epsilon = 1e-9);
            assert_abs_diff_eq!(ga[i], gb[n - 1 - i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sphere_first_eigenfunction() {
        // cos θ is a first spherical harmonic on S^n: Δ cos θ = -n cos θ.
        let g = Geometry::radial_sphere(4, 201).unwrap();
        let u: Vec<f64> = g.coords().iter().map(|t| t.cos()).collect();
        let lap = g.laplacian(&u);
        for (i, &t) in g.coords().iter().enumerate() {
            assert_abs_diff_eq!(lap[i], -4.0 * t.cos(), epsilon = 1e-5);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::flat_torus(8, 1.0).is_err());
        assert!(Geometry::new(GeometryKind::FlatTorus1D, 2, 32, 1.0).is_err());
        assert!(Geometry::radial_euclidean(3, 32, -1.0).is_err());
        assert!(Geometry::radial_sphere(3, 32).unwrap().extent() == PI);
    }

    #[test]
    fn every_kind_has_nonneg_ricci() {
        for k in [
            GeometryKind::FlatTorus1D,
            GeometryKind::RadialEuclidean,
            GeometryKind::RadialSphere,
        ] {
            let g = Geometry::new(k, 1, 32, 1.0).unwrap();
            assert!(g.nonneg_ricci());
        }
    }

    #[test]
    fn guard_band() {
        let g = Geometry::radial_euclidean(3, 100, 1.0).unwrap();
        let m = g.checked_mask();
        assert_eq!(m.iter().filter(|&&b| !b).count(), 10);
        assert!(!m[99] && m[89]);
        assert!(Geometry::flat_torus(100, 1.0)
            .unwrap()
            .checked_mask()
            .iter()
            .all(|&b| b));
    }

    #[test]
    fn interpolation() {
        let g = Geometry::flat_torus(16, 16.0).unwrap();
        let u: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_abs_diff_eq!(g.interpolate(&u, 2.5), 2.5, epsilon = 1e-12);
        // wrap between node 15 and node 0
        assert_abs_diff_eq!(g.interpolate(&u, 15.5), 7.5, epsilon = 1e-12);
        let r = Geometry::radial_euclidean(2, 17, 16.0).unwrap();
        let v: Vec<f64> = (0..17).map(|i| 2.0 * i as f64).collect();
        assert_abs_diff_eq!(r.interpolate(&v, 16.0), 32.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.interpolate(&v, 3.25), 6.5, epsilon = 1e-12);
    }
}
