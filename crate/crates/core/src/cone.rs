//! Closed cones with vertex at the origin and lattice windows inside them.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{angle, dot, dot_lattice, lattice_norm, norm};

/// Inner-product slack for membership; only irrational normals need it.
pub const MEMBERSHIP_TOL: f64 = 1e-12;
pub const DEFAULT_WINDOW_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", try_from = "RawCone")]
pub enum Cone {
    /// `{x : x . gamma >= 0}`.
    HalfSpace { gamma: Vec<f64> },
    /// Intersection of the half-spaces `{x : x . n >= 0}`.
    Polyhedral { normals: Vec<Vec<f64>> },
    /// Vectors within angle `theta` of the unit axis.
    Circular { axis: Vec<f64>, theta: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
enum RawCone {
    HalfSpace { gamma: Vec<f64> },
    Polyhedral { normals: Vec<Vec<f64>> },
    Circular { axis: Vec<f64>, theta: f64 },
}

impl TryFrom<RawCone> for Cone {
    type Error = Error;
    fn try_from(raw: RawCone) -> Result<Self> {
        match raw {
            RawCone::HalfSpace { gamma } => Cone::half_space(gamma),
            RawCone::Polyhedral { normals } => Cone::polyhedral(normals),
            RawCone::Circular { axis, theta } => Cone::circular(axis, theta),
        }
    }
}

impl Cone {
    pub fn half_space(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || norm(&gamma) == 0.0 || gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCone(
                "half-space normal must be non-zero".into(),
            ));
        }
        Ok(Cone::HalfSpace { gamma })
    }

    pub fn polyhedral(normals: Vec<Vec<f64>>) -> Result<Self> {
        let d = normals
            .first()
            .map(|n| n.len())
            .ok_or_else(|| Error::InvalidCone("no normals".into()))?;
        if d == 0 {
            return Err(Error::InvalidCone("zero-dimensional normal".into()));
        }
        for n in &normals {
            if n.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: n.len(),
                });
            }
            if norm(n) == 0.0 || n.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCone(
                    "polyhedral normals must be non-zero".into(),
                ));
            }
        }
        Ok(Cone::Polyhedral { normals })
    }

    pub fn circular(axis: Vec<f64>, theta: f64) -> Result<Self> {
        if axis.is_empty() || (norm(&axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCone(
                "circular axis must be a unit vector".into(),
            ));
        }
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::InvalidCone("half-angle must lie in (0, pi)".into()));
        }
        Ok(Cone::Circular { axis, theta })
    }

    /// `[0, inf)` in one dimension.
    pub fn half_line() -> Self {
        Cone::HalfSpace { gamma: vec![1.0] }
    }

    /// The closed positive quadrant of the plane.
    pub fn quadrant() -> Self {
        Cone::Polyhedral {
            normals: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// The closed positive orthant of `R^d`.
    pub fn orthant(d: usize) -> Self {
        Cone::Polyhedral {
            normals: (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cone::HalfSpace { gamma } => gamma.len(),
            Cone::Polyhedral { normals } => normals[0].len(),
            Cone::Circular { axis, .. } => axis.len(),
        }
    }

    /// Circular cones wider than a half-space are not convex.
    pub fn is_convex(&self) -> bool {
        match self {
            Cone::Circular { theta, .. } => *theta <= PI / 2.0,
            _ => true,
        }
    }

    /// Unit inward normals of the faces, when the cone is polyhedral.
    pub fn unit_normals(&self) -> Option<Vec<Vec<f64>>> {
        let unit = |n: &Vec<f64>| {
            let l = norm(n);
            n.iter().map(|v| v / l).collect::<Vec<f64>>()
        };
        match self {
            Cone::HalfSpace { gamma } => Some(vec![unit(gamma)]),
            Cone::Polyhedral { normals } => Some(normals.iter().map(unit).collect()),
            Cone::Circular { .. } => None,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self.contains_unchecked(x))
    }

    fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Cone::HalfSpace { gamma } => dot(x, gamma) >= -MEMBERSHIP_TOL,
            Cone::Polyhedral { normals } => normals.iter().all(|n| dot(x, n) >= -MEMBERSHIP_TOL),
            Cone::Circular { axis, theta } => {
                let r = norm(x);
                dot(x, axis) >= r * theta.cos() - MEMBERSHIP_TOL * (1.0 + r)
            }
        }
    }

    /// Membership of a lattice point; the hot path of every simulation.
    #[inline]
    pub fn contains_lattice(&self, x: &[i64]) -> bool {
        match self {
            Cone::HalfSpace { gamma } => dot_lattice(gamma, x) >= -MEMBERSHIP_TOL,
            Cone::Polyhedral { normals } => {
                normals.iter().all(|n| dot_lattice(n, x) >= -MEMBERSHIP_TOL)
            }
            Cone::Circular { axis, theta } => {
                let r = lattice_norm(x);
                dot_lattice(axis, x) >= r * theta.cos() - MEMBERSHIP_TOL * (1.0 + r)
            }
        }
    }

    /// Distance from a member point to the cone boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x)? {
            return Err(Error::Outside);
        }
        Ok(match self {
            Cone::HalfSpace { gamma } => (dot(x, gamma) / norm(gamma)).max(0.0),
            Cone::Polyhedral { normals } => normals
                .iter()
                .map(|n| dot(x, n) / norm(n))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Cone::Circular { axis, theta } => {
                let r = norm(x);
                if r == 0.0 {
                    return Ok(0.0);
                }
                let gap = theta - angle(x, axis);
                if gap >= PI / 2.0 {
                    r
                } else {
                    (r * gap.sin()).max(0.0)
                }
            }
        })
    }

    /// Nearest cone lattice point to `target`, ties broken lexicographically.
    ///
    /// Fails when no cone lattice point lies within `sqrt(d)` of the target.
    pub fn snap(&self, target: &[f64]) -> Result<Vec<i64>> {
        self.check_dim(target.len())?;
        let d = target.len();
        let reach = (d as f64).sqrt();
        let lo: Vec<i64> = target.iter().map(|v| (v - reach).floor() as i64).collect();
        let hi: Vec<i64> = target.iter().map(|v| (v + reach).ceil() as i64).collect();
        let mut best: Option<(f64, Vec<i64>)> = None;
        for_each_in_box(&lo, &hi, |p| {
            if !self.contains_lattice(p) {
                return;
            }
            let dist: f64 = p
                .iter()
                .zip(target)
                .map(|(&a, b)| (a as f64 - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist > reach + 1e-12 {
                return;
            }
            let better = match &best {
                None => true,
                Some((bd, bp)) => {
                    dist < bd - 1e-12 || ((dist - bd).abs() <= 1e-12 && p < bp.as_slice())
                }
            };
            if better {
                best = Some((dist, p.to_vec()));
            }
        });
        best.map(|(_, p)| p).ok_or(Error::NoLatticePoint)
    }
}

/// Visits every lattice point of the box `[lo, hi]` in lexicographic order.
pub(crate) fn for_each_in_box(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut p = lo.to_vec();
    loop {
        f(&p);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if p[k] < hi[k] {
                p[k] += 1;
                p[k + 1..d].copy_from_slice(&lo[k + 1..d]);
                break;
            }
        }
    }
}

/// The cone lattice points inside a centred ball, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWindow {
    radius: f64,
    points: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl LatticeWindow {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index.contains_key(x)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

pub fn lattice_window(cone: &Cone, radius: f64) -> Result<LatticeWindow> {
    lattice_window_capped(cone, radius, DEFAULT_WINDOW_CAP)
}

pub fn lattice_window_capped(cone: &Cone, radius: f64, cap: usize) -> Result<LatticeWindow> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("window radius {radius}")));
    }
    let d = cone.dim();
    let r = radius.ceil() as i64;
    let side = (2 * r + 1) as f64;
    if side.powi(d as i32) > 50.0 * cap as f64 {
        return Err(Error::WindowTooLarge {
            points: side.powi(d as i32) as usize,
            cap,
        });
    }
    let lo = vec![-r; d];
    let hi = vec![r; d];
    let mut points = Vec::new();
    let mut too_many = false;
    for_each_in_box(&lo, &hi, |p| {
        if too_many {
            return;
        }
        if lattice_norm(p) <= radius + 1e-9 && cone.contains_lattice(p) {
            points.push(p.to_vec());
            if points.len() > cap {
                too_many = true;
            }
        }
    });
    if too_many {
        return Err(Error::WindowTooLarge {
            points: points.len(),
            cap,
        });
    }
    let index = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    Ok(LatticeWindow {
        radius,
        points,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_f64;
    use proptest::prelude::*;

    fn irrational_half_plane() -> Cone {
        Cone::half_space(vec![1.0, 2f64.sqrt()]).unwrap()
    }

    fn diagonal_quarter() -> Cone {
        Cone::circular(vec![1.0, 0.0], PI / 4.0).unwrap()
    }

    #[test]
    fn membership_examples() {
        for cone in [
            Cone::quadrant(),
            irrational_half_plane(),
            diagonal_quarter(),
        ] {
            assert!(cone.contains(&[0.0, 0.0]).unwrap());
        }
        assert!(irrational_half_plane().contains(&[-2.0, 2.0]).unwrap());
        assert!(!irrational_half_plane().contains(&[-2.0, 1.0]).unwrap());
        let c3 = Cone::circular(vec![1.0, 0.0, 0.0], PI / 4.0).unwrap();
        assert!(c3.contains(&[1.0, 1.0, 0.0]).unwrap());
        assert!(!c3.contains(&[1.0, 1.01, 0.0]).unwrap());
        assert!(matches!(
            Cone::quadrant().contains(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(Cone::half_space(vec![0.0, 0.0]).is_err());
        assert!(Cone::polyhedral(vec![vec![1.0, 0.0], vec![0.0]]).is_err());
        assert!(Cone::circular(vec![1.0, 1.0], 0.5).is_err());
        assert!(Cone::circular(vec![1.0, 0.0], PI).is_err());
        assert!(!Cone::circular(vec![1.0, 0.0], 2.0).unwrap().is_convex());
    }

    #[test]
    fn json_forms() {
        let c: Cone = serde_json::from_str(r#"{"variant":"halfspace","gamma":[1,1.5]}"#).unwrap();
        assert_eq!(
            c,
            Cone::HalfSpace {
                gamma: vec![1.0, 1.5]
            }
        );
        let c: Cone =
            serde_json::from_str(r#"{"variant":"polyhedral","normals":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(c, Cone::quadrant());
        let c: Cone =
            serde_json::from_str(r#"{"variant":"circular","axis":[0,1],"theta":1.0}"#).unwrap();
        assert_eq!(c.dim(), 2);
        assert!(
            serde_json::from_str::<Cone>(r#"{"variant":"circular","axis":[0,2],"theta":1.0}"#)
                .is_err()
        );
        let text = serde_json::to_string(&Cone::quadrant()).unwrap();
        assert_eq!(
            text,
            r#"{"variant":"polyhedral","normals":[[1.0,0.0],[0.0,1.0]]}"#
        );
    }

    #[test]
    fn window_examples() {
        let w = lattice_window(&Cone::half_line(), 3.0).unwrap();
        assert_eq!(w.points(), &[vec![0], vec![1], vec![2], vec![3]]);

        let w = lattice_window(&Cone::quadrant(), 2.0).unwrap();
        let expected: Vec<Vec<i64>> = vec![
            vec![0, 0],
            vec![0, 1],
            vec![0, 2],
            vec![1, 0],
            vec![1, 1],
            vec![2, 0],
        ];
        assert_eq!(w.points(), expected.as_slice());

        let w = lattice_window(&Cone::half_space(vec![0.0, 1.0]).unwrap(), 1.0).unwrap();
        let mut got = w.points().to_vec();
        got.sort();
        assert_eq!(got, vec![vec![-1, 0], vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(w.index_of(&[0, 1]), Some(2));

        assert!(matches!(
            lattice_window_capped(&Cone::quadrant(), 100.0, 1000),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn boundary_distance_examples() {
        assert_eq!(
            Cone::quadrant().boundary_distance(&[0.0, 0.0]).unwrap(),
            0.0
        );
        let h = Cone::half_space(vec![0.0, 1.0]).unwrap();
        assert!((h.boundary_distance(&[5.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        let c = diagonal_quarter();
        let d = c.boundary_distance(&[1.0, 0.0]).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(h.boundary_distance(&[0.0, -1.0]), Err(Error::Outside));
    }

    #[test]
    fn snapping_prefers_lexicographic_ties() {
        let q = Cone::quadrant();
        assert_eq!(q.snap(&[2.5, 2.5]).unwrap(), vec![2, 2]);
        assert_eq!(q.snap(&[3.2, 0.1]).unwrap(), vec![3, 0]);
        let ray = Cone::circular(vec![1.0, 0.0], 1e-6).unwrap();
        assert_eq!(ray.snap(&[5.0, 0.0]).unwrap(), vec![5, 0]);
        let a = vec![1.0 / 3f64.sqrt(), (2.0 / 3.0f64).sqrt()];
        let target: Vec<f64> = a.iter().map(|v| 10.0 * v).collect();
        let thin = Cone::circular(a, 1e-9).unwrap();
        assert_eq!(thin.snap(&target), Err(Error::NoLatticePoint));
    }

    #[test]
    fn windows_are_closed_under_addition_for_convex_cones() {
        for cone in [
            Cone::quadrant(),
            irrational_half_plane(),
            diagonal_quarter(),
        ] {
            let w = lattice_window(&cone, 8.0).unwrap();
            for x in w.points() {
                for y in w.points() {
                    let s: Vec<i64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                    assert!(cone.contains_lattice(&s), "{cone:?} {x:?} {y:?}");
                }
            }
        }
    }

    #[test]
    fn convexity_witness_with_margin_guard() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for cone in [
            Cone::quadrant(),
            irrational_half_plane(),
            diagonal_quarter(),
        ] {
            let w = lattice_window(&cone, 12.0).unwrap();
            let d = cone.dim() as f64;
            for _ in 0..1000 {
                let x = to_f64(&w.points()[rng.random_range(0..w.len())]);
                let y = to_f64(&w.points()[rng.random_range(0..w.len())]);
                for lambda in [0.25, 0.5, 0.75] {
                    let z: Vec<f64> = x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                        .collect();
                    assert!(cone.contains(&z).unwrap());
                    if cone.boundary_distance(&z).unwrap() > d.sqrt() {
                        let r: Vec<i64> = z.iter().map(|v| v.round() as i64).collect();
                        assert!(cone.contains_lattice(&r));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn cone_property_under_scaling(x in -20i64..20, y in -20i64..20) {
            for cone in [Cone::quadrant(), irrational_half_plane(), diagonal_quarter()] {
                if cone.contains_lattice(&[x, y]) {
                    for c in [2, 3, 7] {
                        prop_assert!(cone.contains_lattice(&[c * x, c * y]));
                    }
                }
            }
        }
    }
}
