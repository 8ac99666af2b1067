//! Static solutions `Δu + u^p = 0` on radial ℝⁿ.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};

/// A radial profile with value and first two derivatives.
pub trait RadialProfile: Sync {
    fn eval(&self, r: f64) -> (f64, f64, f64);
    fn n(&self) -> u32;
    fn p(&self) -> f64;
}

/// `u(r) = 24 / (1 + r²)²`, a static solution on ℝ⁶ with p = 2.
#[derive(Clone, Copy, Debug, Default)]
pub struct Talenti;

impl RadialProfile for Talenti {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let q = 1.0 + r * r;
        let q2 = q * q;
        let q3 = q2 * q;
        let u = 24.0 / q2;
        let du = -96.0 * r / q3;
        let ddu = -96.0 / q3 + 576.0 * r * r / (q3 * q);
        (u, du, ddu)
    }

    fn n(&self) -> u32 {
        6
    }

    fn p(&self) -> f64 {
        2.0
    }
}

/// Wraps a value-only profile and supplies derivatives by second-order
/// central differences with step `h`; the profile is extended evenly to r < 0.
pub struct FdProfile<F> {
    f: F,
    h: f64,
    n: u32,
    p: f64,
}

impl<F: Fn(f64) -> f64 + Sync> FdProfile<F> {
    pub fn new(f: F, h: f64, n: u32, p: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::domain(format!("difference step must be positive, got {h}")));
        }
        Ok(FdProfile { f, h, n, p })
    }
}

impl<F: Fn(f64) -> f64 + Sync> RadialProfile for FdProfile<F> {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        let h = self.h;
        let g = |x: f64| (self.f)(x.abs());
        let (um, u0, up) = (g(r - h), g(r), g(r + h));
        (u0, (up - um) / (2.0 * h), (up - 2.0 * u0 + um) / (h * h))
    }

    fn n(&self) -> u32 {
        self.n
    }

    fn p(&self) -> f64 {
        self.p
    }
}

pub fn talenti_value(r: f64) -> f64 {
    Talenti.eval(r).0
}

/// `u'' + (n−1)u'/r + u^p` at each radius, with `n·u''` at r = 0.
pub fn static_residual<P: RadialProfile + ?Sized>(profile: &P, radii: &[f64]) -> Result<Vec<f64>> {
    let nf = f64::from(profile.n());
    let p = profile.p();
    radii
        .par_iter()
        .map(|&r| {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::domain(format!("radius must be nonnegative, got {r}")));
            }
            let (u, du, ddu) = profile.eval(r);
            if !(u > 0.0) {
                return Err(Error::domain(format!("profile is not positive at r={r} (u={u})")));
            }
            let lap = if r == 0.0 { nf * ddu } else { ddu + (nf - 1.0) * du / r };
            Ok(lap + u.powf(p))
        })
        .collect()
}

/// Samples a profile at the nodes of a radial Euclidean grid of matching dimension.
pub fn seed_from_profile<P: RadialProfile + ?Sized>(profile: &P, geom: &Geometry) -> Result<Vec<f64>> {
    if geom.kind() != GeometryKind::RadialEuclidean {
        return Err(Error::Dimension(format!(
            "profiles seed radial Euclidean grids only, got {:?}",
            geom.kind()
        )));
    }
    if geom.n() != profile.n() {
        return Err(Error::Dimension(format!(
            "profile lives in dimension {}, grid in dimension {}",
            profile.n(),
            geom.n()
        )));
    }
    let u: Vec<f64> = geom.coords().iter().map(|&r| profile.eval(r).0).collect();
    if let Some((i, v)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::domain(format!("profile is not positive at node {i} (u={v})")));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn talenti_origin() {
        let (u, du, ddu) = Talenti.eval(0.0);
        assert_eq!((u, du, ddu), (24.0, 0.0, -96.0));
        assert_eq!(static_residual(&Talenti, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn talenti_sample_radii() {
        let radii = [0.5, 1.0, 2.0, 5.0, 10.0];
        let res = static_residual(&Talenti, &radii).unwrap();
        for (r, v) in radii.iter().zip(res) {
            let u = talenti_value(*r);
            assert!(v.abs() <= 1e-10 * u * u, "r={r}: {v}");
        }
    }

    #[test]
    fn fd_profile_truncation() {
        let fd = FdProfile::new(talenti_value, 1e-3, 6, 2.0).unwrap();
        let res = static_residual(&fd, &[0.0, 0.5, 1.0, 2.0, 5.0, 10.0]).unwrap();
        assert!(res.iter().all(|v| v.abs() <= 1e-3), "{res:?}");
    }

    #[test]
    fn seeds() {
        let g = Geometry::radial_euclidean(6, 31, 3.0).unwrap();
        let u = seed_from_profile(&Talenti, &g).unwrap();
        assert_eq!(u[0], 24.0);
        assert_eq!(u[10], 6.0);
        assert!((u[30] - 0.24).abs() < 1e-15);
        let g5 = Geometry::radial_euclidean(5, 31, 3.0).unwrap();
        assert!(matches!(seed_from_profile(&Talenti, &g5), Err(Error::Dimension(_))));
        let torus = Geometry::flat_torus(32, 1.0).unwrap();
        assert!(matches!(seed_from_profile(&Talenti, &torus), Err(Error::Dimension(_))));
    }

    #[test]
    fn negative_profile_rejected() {
        let fd = FdProfile::new(|r: f64| 1.0 - r, 1e-3, 3, 2.0).unwrap();
        assert!(static_residual(&fd, &[2.0]).is_err());
        assert!(static_residual(&Talenti, &[-1.0]).is_err());
    }
}
