//! The 6D -> 4D reduction `(p_z, theta, x*, y*)`, its discretization and
//! the recovery of world base positions from canonical ones.
//!
//! A TCP pose relative to the base is reduced by (1) dropping the roll about
//! the approach vector, (2) translating the TCP onto the vertical axis, which
//! moves the base to `(-p_x, -p_y)`, and (3) yawing everything so that the
//! approach vector lies in the `x+ z` half-plane. The resulting base position
//! is the same for every base yaw, so one 4D cell stands for a whole circle of
//! 6D poses.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pose::TcpPose;

const DEGENERATE_AZIMUTH: f64 = 1e-12;

/// Reduced pose coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical4 {
    pub p_z: f64,
    /// Angle between approach vector and world up, in `[0, pi]`.
    pub theta: f64,
    pub x_star: f64,
    pub y_star: f64,
}

/// Discretization parameters `(r_xy, r_z, l_c, delta_theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub r_xy: f64,
    pub r_z: f64,
    pub l_c: f64,
    pub delta_theta: f64,
}

/// Number of bins of width `step` needed to cover `extent`, tolerant to
/// float noise in the ratio.
pub(crate) fn bin_count(extent: f64, step: f64) -> usize {
    ((extent / step) - 1e-9).ceil().max(1.0) as usize
}

/// Half-open binning with the top boundary clamped into the last bin.
#[inline]
pub(crate) fn bin_index(v: f64, min: f64, step: f64, n: usize) -> usize {
    let i = ((v - min) / step).floor();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

impl GridParams {
    pub fn new(r_xy: f64, r_z: f64, l_c: f64, delta_theta: f64) -> Result<Self> {
        let p = Self {
            r_xy,
            r_z,
            l_c,
            delta_theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor with the angular step in degrees.
    pub fn with_degrees(r_xy: f64, r_z: f64, l_c: f64, delta_theta_deg: f64) -> Result<Self> {
        Self::new(r_xy, r_z, l_c, delta_theta_deg.to_radians())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_xy", self.r_xy),
            ("r_z", self.r_z),
            ("l_c", self.l_c),
            ("delta_theta", self.delta_theta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        if self.delta_theta > PI + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "delta_theta = {} exceeds pi",
                self.delta_theta
            )));
        }
        Ok(())
    }

    pub fn n_xy(&self) -> usize {
        bin_count(2.0 * self.r_xy, self.l_c)
    }

    pub fn n_z(&self) -> usize {
        bin_count(self.r_z, self.l_c)
    }

    pub fn n_theta(&self) -> usize {
        bin_count(PI, self.delta_theta)
    }

    /// Total 4D cell count `n_z * n_theta * n_xy^2`.
    pub fn cell_count(&self) -> u64 {
        let n_xy = self.n_xy() as u64;
        self.n_z() as u64 * self.n_theta() as u64 * n_xy * n_xy
    }
}

/// 4D cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapIndex4 {
    pub i_pz: usize,
    pub i_theta: usize,
    pub i_x: usize,
    pub i_y: usize,
}

/// Heading `psi = atan2(r_z.y, r_z.x)` of the approach vector; zero for a
/// vertical approach.
pub fn azimuth(tcp: &TcpPose) -> f64 {
    let a = tcp.approach();
    if a.x.abs() < DEGENERATE_AZIMUTH && a.y.abs() < DEGENERATE_AZIMUTH {
        0.0
    } else {
        a.y.atan2(a.x)
    }
}

/// Polar angle between approach vector and world up.
#[inline]
pub fn polar_angle(tcp: &TcpPose) -> f64 {
    tcp.approach().z.clamp(-1.0, 1.0).acos()
}

/// Reduces a base-relative TCP pose to its canonical coordinates.
pub fn canonicalize(tcp: &TcpPose) -> Canonical4 {
    let psi = azimuth(tcp);
    let (s, c) = psi.sin_cos();
    let (px, py) = (tcp.position.x, tcp.position.y);
    Canonical4 {
        p_z: tcp.position.z,
        theta: polar_angle(tcp),
        x_star: -c * px - s * py,
        y_star: s * px - c * py,
    }
}

fn check_range(what: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value, min, max })
    }
}

/// Index of `p_z` along the vertical axis.
pub fn discretize_pz(p_z: f64, params: &GridParams) -> Result<usize> {
    check_range("p_z", p_z, 0.0, params.r_z)?;
    Ok(bin_index(p_z, 0.0, params.l_c, params.n_z()))
}

/// Index of `theta` along the polar axis.
pub fn discretize_theta(theta: f64, params: &GridParams) -> Result<usize> {
    check_range("theta", theta, 0.0, PI)?;
    Ok(bin_index(theta, 0.0, params.delta_theta, params.n_theta()))
}

/// Index of a horizontal coordinate in `[-r_xy, r_xy]`.
pub fn discretize_xy(v: f64, params: &GridParams) -> Result<usize> {
    check_range("xy", v, -params.r_xy, params.r_xy)?;
    Ok(bin_index(v, -params.r_xy, params.l_c, params.n_xy()))
}

pub fn discretize(c: &Canonical4, params: &GridParams) -> Result<MapIndex4> {
    Ok(MapIndex4 {
        i_pz: discretize_pz(c.p_z, params)?,
        i_theta: discretize_theta(c.theta, params)?,
        i_x: discretize_xy(c.x_star, params)?,
        i_y: discretize_xy(c.y_star, params)?,
    })
}

/// Cell-center canonical base position for horizontal indices.
pub fn undiscretize(i_x: usize, i_y: usize, params: &GridParams) -> Result<(f64, f64)> {
    let n = params.n_xy();
    for i in [i_x, i_y] {
        if i >= n {
            return Err(Error::IndexOutOfBounds { index: i, size: n });
        }
    }
    Ok((cell_center(i_x, params), cell_center(i_y, params)))
}

#[inline]
pub(crate) fn cell_center(i: usize, params: &GridParams) -> f64 {
    -params.r_xy + (i as f64 + 0.5) * params.l_c
}

/// World base position from a canonical one, given the world TCP pose:
/// rotate forward by the TCP's azimuth and add its horizontal position.
pub fn recover_base(x_star: f64, y_star: f64, tcp_world: &TcpPose) -> (f64, f64) {
    let (s, c) = azimuth(tcp_world).sin_cos();
    (
        c * x_star - s * y_star + tcp_world.position.x,
        s * x_star + c * y_star + tcp_world.position.y,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn franka_like() -> GridParams {
        GridParams::with_degrees(1.05, 1.35, 0.05, 5.0).unwrap()
    }

    #[test]
    fn azimuth_cases() {
        let pose = |a: Vector3<f64>| TcpPose::from_approach(a, Vector3::zeros());
        assert_eq!(azimuth(&pose(Vector3::x())), 0.0);
        assert!((azimuth(&pose(Vector3::y())) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(azimuth(&pose(Vector3::z())), 0.0);
        assert_eq!(azimuth(&pose(-Vector3::z())), 0.0);
    }

    #[test]
    fn canonicalize_cases() {
        let c = canonicalize(&TcpPose::identity());
        assert_eq!((c.p_z, c.theta), (0.0, 0.0));
        assert!(c.x_star.abs() < 1e-15 && c.y_star.abs() < 1e-15);

        let a = canonicalize(&TcpPose::from_approach(Vector3::x(), Vector3::new(1.0, 0.0, 0.5)));
        assert!((a.p_z - 0.5).abs() < 1e-15);
        assert!((a.theta - FRAC_PI_2).abs() < 1e-15);
        assert!((a.x_star + 1.0).abs() < 1e-15 && a.y_star.abs() < 1e-15);

        let b = canonicalize(&TcpPose::from_approach(Vector3::y(), Vector3::new(0.0, 1.0, 0.5)));
        assert!((b.x_star + 1.0).abs() < 1e-15 && b.y_star.abs() < 1e-15);
        assert!((b.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn grid_dimensions() {
        let p = franka_like();
        assert_eq!((p.n_xy(), p.n_z(), p.n_theta()), (42, 27, 36));
        assert_eq!(p.cell_count(), 1_714_608);

        let tiny = GridParams::new(1.0, 1.0, 1.0, PI).unwrap();
        assert_eq!((tiny.n_xy(), tiny.n_z(), tiny.n_theta()), (2, 1, 1));
        assert_eq!(tiny.cell_count(), 4);

        assert!(GridParams::new(0.0, 1.0, 1.0, 0.1).is_err());
        assert!(GridParams::new(1.0, 1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn discretize_example() {
        let p = franka_like();
        let c = Canonical4 {
            p_z: 0.12,
            theta: 5f64.to_radians(),
            x_star: -p.r_xy,
            y_star: 0.0,
        };
        let i = discretize(&c, &p).unwrap();
        assert_eq!(
            i,
            MapIndex4 {
                i_pz: 2,
                i_theta: 1,
                i_x: 0,
                i_y: 21
            }
        );
    }

    #[test]
    fn top_boundaries_clamp() {
        let p = franka_like();
        assert_eq!(discretize_theta(PI, &p).unwrap(), p.n_theta() - 1);
        assert_eq!(discretize_xy(p.r_xy, &p).unwrap(), p.n_xy() - 1);
        assert_eq!(discretize_pz(p.r_z, &p).unwrap(), p.n_z() - 1);
    }

    #[test]
    fn out_of_range_errors() {
        let p = franka_like();
        assert!(discretize_pz(-0.01, &p).is_err());
        assert!(discretize_pz(p.r_z + 0.01, &p).is_err());
        assert!(discretize_xy(-p.r_xy - 1e-6, &p).is_err());
        assert!(discretize_theta(f64::NAN, &p).is_err());
    }

    #[test]
    fn undiscretize_centers() {
        let p = franka_like();
        let (x0, _) = undiscretize(0, 0, &p).unwrap();
        assert!((x0 + 1.025).abs() < 1e-12);
        let (x21, _) = undiscretize(21, 0, &p).unwrap();
        assert!((x21 - 0.025).abs() < 1e-12);
        assert!(undiscretize(42, 0, &p).is_err());
        for i in 0..p.n_xy() {
            let (x, y) = undiscretize(i, p.n_xy() - 1 - i, &p).unwrap();
            assert_eq!(discretize_xy(x, &p).unwrap(), i);
            assert_eq!(discretize_xy(y, &p).unwrap(), p.n_xy() - 1 - i);
        }
    }

    #[test]
    fn random_discretization_in_bounds_and_center_stable() {
        let p = franka_like();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let c = Canonical4 {
                p_z: rng.random_range(0.0..=p.r_z),
                theta: rng.random_range(0.0..=PI),
                x_star: rng.random_range(-p.r_xy..=p.r_xy),
                y_star: rng.random_range(-p.r_xy..=p.r_xy),
            };
            let i = discretize(&c, &p).unwrap();
            assert!(i.i_pz < p.n_z() && i.i_theta < p.n_theta());
            assert!(i.i_x < p.n_xy() && i.i_y < p.n_xy());
            let center = Canonical4 {
                p_z: (i.i_pz as f64 + 0.5) * p.l_c,
                theta: (i.i_theta as f64 + 0.5) * p.delta_theta,
                x_star: cell_center(i.i_x, &p),
                y_star: cell_center(i.i_y, &p),
            };
            assert_eq!(discretize(&center, &p).unwrap(), i);
        }
    }

    #[test]
    fn recover_base_cases() {
        let tcp = TcpPose::from_approach(Vector3::x(), Vector3::new(1.0, 0.0, 0.3));
        let (x, y) = recover_base(-1.0, 0.0, &tcp);
        assert!(x.abs() < 1e-15 && y.abs() < 1e-15);

        let tcp = TcpPose::from_approach(Vector3::new(0.2, -0.7, 0.1), Vector3::new(0.4, -0.3, 0.3));
        let (x, y) = recover_base(0.0, 0.0, &tcp);
        assert_eq!((x, y), (0.4, -0.3));
    }

    #[test]
    fn recover_inverts_canonicalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let a = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if a.norm() < 1e-3 {
                continue;
            }
            let p = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..1.0),
            );
            let tcp = TcpPose::from_approach(a, p);
            let c = canonicalize(&tcp);
            let (x, y) = recover_base(c.x_star, c.y_star, &tcp);
            assert!(x.abs() < 1e-12 && y.abs() < 1e-12, "{x} {y}");
        }
    }
}
