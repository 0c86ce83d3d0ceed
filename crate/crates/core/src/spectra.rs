//! Frequency-set enumeration: lattice points on circles (arithmetic
//! random waves), annulus shells for band-limited torus windows, and
//! spherical degrees, plus the mode-count normalizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyKind {
    /// Lattice points with |mu|^2 = n on the standard 2d lattice.
    Arw { n: u64 },
    /// Lattice points with T - rho < |k| <= T in dimension 1, 2 or 3.
    TorusWindow { dim: usize, t: f64, rho: f64 },
    /// Spherical harmonics of degree ell (2 ell + 1 modes, no lattice).
    Sphere { ell: u32 },
}

/// An explicit set of frequencies. Lattice points are stored padded to
/// three components; trailing components are zero below the set's
/// dimension. The sphere kind stores no points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub kind: FrequencyKind,
    pub points: Vec<[i64; 3]>,
    pub count: usize,
}

impl FrequencySet {
    pub fn dim(&self) -> usize {
        match self.kind {
            FrequencyKind::Arw { .. } => 2,
            FrequencyKind::TorusWindow { dim, .. } => dim,
            FrequencyKind::Sphere { .. } => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Lattice points as 2d vectors (valid for arw and dim-2 windows).
    pub fn points2(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        self.points.iter().map(|p| [p[0], p[1]])
    }

    /// One representative per antipodal pair, the lexicographically
    /// positive one: `k1 > 0`, or `k1 = 0` and `k2 > 0` (2d sets).
    pub fn half_lattice_representatives(&self) -> Vec<[i64; 2]> {
        let mut reps: Vec<[i64; 2]> = self
            .points2()
            .filter(|p| p[0] > 0 || (p[0] == 0 && p[1] > 0))
            .collect();
        reps.sort_unstable();
        reps
    }
}

/// All lattice points mu with |mu|^2 = n, by scanning |mu_1| <= sqrt(n).
/// Returns the empty set when n is not a sum of two squares.
pub fn circle_points(n: u64) -> FrequencySet {
    let mut points = Vec::new();
    let bound = (n as f64).sqrt() as i64 + 1;
    for a in -bound..=bound {
        let a2 = (a * a) as u64;
        if a2 > n {
            continue;
        }
        let rem = n - a2;
        let b = (rem as f64).sqrt().round() as i64;
        if (b * b) as u64 == rem {
            if b == 0 {
                points.push([a, 0, 0]);
            } else {
                points.push([a, b, 0]);
                points.push([a, -b, 0]);
            }
        }
    }
    points.sort_unstable();
    points.dedup();
    let count = points.len();
    FrequencySet { kind: FrequencyKind::Arw { n }, points, count }
}

/// The number of representations of n as a sum of two squares.
pub fn r2(n: u64) -> usize {
    circle_points(n).count
}

/// All k in Z^dim with T - rho < |k| <= T. A window containing no
/// lattice points is a valid (flagged-empty) result; synthesis rejects
/// it downstream.
pub fn annulus_points(dim: usize, t: f64, rho: f64) -> Result<FrequencySet> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("annulus dimension must be 1-3, got {dim}")));
    }
    if !(rho > 0.0 && rho <= t) {
        return Err(Error::Domain(format!(
            "window must satisfy 0 < rho <= T, got T={t}, rho={rho}"
        )));
    }
    let hi2 = t * t;
    let lo = (t - rho).max(0.0);
    let lo2 = lo * lo;
    let bound = t.floor() as i64;
    let mut points = Vec::new();
    let mut push = |p: [i64; 3]| {
        let q = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) as f64;
        if q > lo2 && q <= hi2 {
            points.push(p);
        }
    };
    match dim {
        1 => {
            for a in -bound..=bound {
                push([a, 0, 0]);
            }
        }
        2 => {
            for a in -bound..=bound {
                for b in -bound..=bound {
                    push([a, b, 0]);
                }
            }
        }
        _ => {
            for a in -bound..=bound {
                for b in -bound..=bound {
                    for c in -bound..=bound {
                        push([a, b, c]);
                    }
                }
            }
        }
    }
    points.sort_unstable();
    let count = points.len();
    Ok(FrequencySet { kind: FrequencyKind::TorusWindow { dim, t, rho }, points, count })
}

/// Degree-ell spherical frequency set (2 ell + 1 modes).
pub fn sphere_degree(ell: u32) -> FrequencySet {
    FrequencySet {
        kind: FrequencyKind::Sphere { ell },
        points: Vec::new(),
        count: 2 * ell as usize + 1,
    }
}

/// The exact mode count used to normalize a field to unit pointwise
/// variance. The exact count is used rather than the asymptotic window
/// estimate; compare with [`annulus_volume_estimate`] for diagnostics.
pub fn mode_count_normalizer(fs: &FrequencySet) -> Result<f64> {
    if fs.is_empty() {
        return Err(Error::EmptyFrequencySet(format!("{:?}", fs.kind)));
    }
    Ok(fs.count as f64)
}

/// Volume of the annulus T - rho < |x| <= T in R^dim: the asymptotic
/// lattice-count heuristic (pi (T^2 - (T-rho)^2) in 2d).
pub fn annulus_volume_estimate(dim: usize, t: f64, rho: f64) -> f64 {
    let lo = (t - rho).max(0.0);
    match dim {
        1 => 2.0 * (t - lo),
        2 => std::f64::consts::PI * (t * t - lo * lo),
        3 => 4.0 / 3.0 * std::f64::consts::PI * (t.powi(3) - lo.powi(3)),
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn as_set(fs: &FrequencySet) -> HashSet<(i64, i64)> {
        fs.points2().map(|p| (p[0], p[1])).collect()
    }

    #[test]
    fn circle_points_n5() {
        let fs = circle_points(5);
        assert_eq!(fs.count, 8);
        let expected: HashSet<(i64, i64)> = [
            (1, 2), (1, -2), (-1, 2), (-1, -2),
            (2, 1), (2, -1), (-2, 1), (-2, -1),
        ]
        .into_iter()
        .collect();
        assert_eq!(as_set(&fs), expected);
    }

    #[test]
    fn circle_points_n3_empty() {
        let fs = circle_points(3);
        assert!(fs.is_empty());
        assert!(mode_count_normalizer(&fs).is_err());
    }

    #[test]
    fn circle_points_n25() {
        let fs = circle_points(25);
        assert_eq!(fs.count, 12);
        let set = as_set(&fs);
        for p in [(5, 0), (0, 5), (-5, 0), (0, -5), (3, 4), (4, 3), (-3, -4), (-4, 3)] {
            assert!(set.contains(&p), "missing {p:?}");
        }
    }

    #[test]
    fn r2_matches_divisor_formula_up_to_500() {
        // r2(n) = 4 (d_1(n) - d_3(n)) with d_j the count of divisors
        // congruent to j mod 4
        for n in 1..=500u64 {
            let mut d1 = 0i64;
            let mut d3 = 0i64;
            for d in 1..=n {
                if n % d == 0 {
                    match d % 4 {
                        1 => d1 += 1,
                        3 => d3 += 1,
                        _ => {}
                    }
                }
            }
            assert_eq!(r2(n) as i64, 4 * (d1 - d3), "n = {n}");
        }
    }

    #[test]
    fn arw_count_divisible_by_four_for_nonsquares() {
        for n in 1..=200u64 {
            let root = (n as f64).sqrt().round() as u64;
            if root * root == n {
                continue;
            }
            let c = r2(n);
            assert_eq!(c % 4, 0, "n = {n}, count = {c}");
        }
    }

    #[test]
    fn annulus_dim2_full_disk() {
        let fs = annulus_points(2, 5.0, 5.0).unwrap();
        assert_eq!(fs.count, 80);
        assert!(fs.points2().all(|p| p != [0, 0]));
    }

    #[test]
    fn annulus_dim1_single_pair() {
        let fs = annulus_points(1, 3.5, 1.0).unwrap();
        assert_eq!(fs.count, 2);
        let set = as_set(&fs);
        assert!(set.contains(&(3, 0)) && set.contains(&(-3, 0)));
    }

    #[test]
    fn annulus_count_near_area_heuristic() {
        let t = 30.0_f64;
        let rho = t / t.ln();
        let fs = annulus_points(2, t, rho).unwrap();
        let estimate = annulus_volume_estimate(2, t, rho);
        let rel = (fs.count as f64 - estimate).abs() / estimate;
        assert!(rel < 0.2, "count {} vs estimate {estimate}", fs.count);
    }

    #[test]
    fn annulus_rejects_bad_window() {
        assert!(annulus_points(2, 5.0, 0.0).is_err());
        assert!(annulus_points(2, 5.0, 6.0).is_err());
        assert!(annulus_points(4, 5.0, 1.0).is_err());
    }

    #[test]
    fn antipodal_closure() {
        for n in [1u64, 2, 5, 25, 65, 325] {
            let set = as_set(&circle_points(n));
            for &(a, b) in &set {
                assert!(set.contains(&(-a, -b)));
            }
        }
        let set = as_set(&annulus_points(2, 7.3, 2.0).unwrap());
        for &(a, b) in &set {
            assert!(set.contains(&(-a, -b)));
        }
    }

    #[test]
    fn half_lattice_representatives_cover_pairs_once() {
        let fs = circle_points(65);
        let reps = fs.half_lattice_representatives();
        assert_eq!(reps.len() * 2, fs.count);
        let set = as_set(&fs);
        for r in &reps {
            assert!(set.contains(&(r[0], r[1])));
            assert!(r[0] > 0 || (r[0] == 0 && r[1] > 0));
        }
    }

    #[test]
    fn mode_counts() {
        assert_eq!(mode_count_normalizer(&circle_points(5)).unwrap(), 8.0);
        assert_eq!(mode_count_normalizer(&sphere_degree(20)).unwrap(), 41.0);
        assert_eq!(
            mode_count_normalizer(&annulus_points(2, 5.0, 5.0).unwrap()).unwrap(),
            80.0
        );
    }
}
