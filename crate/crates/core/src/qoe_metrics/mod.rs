//! Point clouds and the symmetric point-to-point Chamfer distance.
//!
//! The distance is the sum, over both clouds, of the **squared** Euclidean
//! distance from each point to its nearest neighbour in the other cloud:
//!
//! ```text
//! CD_sym(D, D') = sum_{d in D} min_{d' in D'} |d - d'|^2
//!               + sum_{d' in D'} min_{d in D} |d - d'|^2
//! ```
//!
//! No square root is taken. Many point-cloud libraries report the
//! root-mean-square variant instead; values from those are not comparable.
//!
//! Two implementations share the [`ChamferMethod`] trait: a brute-force
//! double loop and a k-d tree search. Both accumulate in the iteration order
//! of the source cloud, so they agree to the last bit.

mod kdtree;

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub use kdtree::KdTree;

pub type Point3 = [f64; 3];

/// An ordered list of 3-D points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates. Empty clouds are
    /// allowed here; the distance functions reject them.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some((i, p)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::Domain(format!(
                "point {i} has a non-finite coordinate: {p:?}"
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses the plain-text format: one point per line, three
    /// whitespace-separated decimals. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Domain(format!(
                    "line {}: expected 3 coordinates, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let mut p = [0.0; 3];
            for (slot, field) in p.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|e| {
                    Error::Domain(format!("line {}: bad coordinate {field:?}: {e}", lineno + 1))
                })?;
            }
            points.push(p);
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn push(&mut self, p: Point3) -> Result<()> {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate: {p:?}")));
        }
        self.points.push(p);
        Ok(())
    }
}

impl From<PointCloud> for Vec<Point3> {
    fn from(cloud: PointCloud) -> Self {
        cloud.points
    }
}

#[inline]
pub(crate) fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn check_non_empty(reference: &PointCloud, candidate: &PointCloud) -> Result<()> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(Error::Domain(
            "Chamfer distance needs two non-empty clouds".into(),
        ));
    }
    Ok(())
}

/// Symmetric Chamfer distance by exhaustive search, O(|A|·|B|).
pub fn chamfer_sym(reference: &PointCloud, candidate: &PointCloud) -> Result<f64> {
    check_non_empty(reference, candidate)?;
    let one_way = |from: &[Point3], to: &[Point3]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| squared_distance(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    Ok(one_way(reference.points(), candidate.points())
        + one_way(candidate.points(), reference.points()))
}

/// Symmetric Chamfer distance using a k-d tree over each cloud.
pub fn chamfer_sym_accelerated(reference: &PointCloud, candidate: &PointCloud) -> Result<f64> {
    check_non_empty(reference, candidate)?;
    let ref_tree = KdTree::build(reference.points());
    let cand_tree = KdTree::build(candidate.points());
    let forward: f64 = reference
        .points()
        .iter()
        .map(|p| cand_tree.nearest_squared(p))
        .sum();
    let backward: f64 = candidate
        .points()
        .iter()
        .map(|p| ref_tree.nearest_squared(p))
        .sum();
    Ok(forward + backward)
}

/// A named Chamfer distance implementation.
pub trait ChamferMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn distance(&self, reference: &PointCloud, candidate: &PointCloud) -> Result<f64>;
}

impl fmt::Debug for dyn ChamferMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChamferMethod({})", self.name())
    }
}

pub struct BruteForce;

impl ChamferMethod for BruteForce {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn distance(&self, reference: &PointCloud, candidate: &PointCloud) -> Result<f64> {
        chamfer_sym(reference, candidate)
    }
}

pub struct KdTreeSearch;

impl ChamferMethod for KdTreeSearch {
    fn name(&self) -> &'static str {
        "kdtree"
    }

    fn distance(&self, reference: &PointCloud, candidate: &PointCloud) -> Result<f64> {
        chamfer_sym_accelerated(reference, candidate)
    }
}

/// All built-in implementations, in registration order.
pub fn chamfer_methods() -> Vec<Box<dyn ChamferMethod>> {
    vec![Box::new(BruteForce), Box::new(KdTreeSearch)]
}

pub fn chamfer_method(name: &str) -> Result<Box<dyn ChamferMethod>> {
    chamfer_methods()
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| {
            let known: Vec<_> = chamfer_methods().iter().map(|m| m.name()).collect();
            Error::Config(format!(
                "unknown Chamfer method {name:?} (known: {})",
                known.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: &[Point3]) -> PointCloud {
        PointCloud::new(points.to_vec()).unwrap()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        cloud(
            &(0..n)
                .map(|_| {
                    [
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect::<Vec<_>>(),
        )
    }

    // Oracle written against the formula directly, with explicit index loops.
    fn oracle(a: &PointCloud, b: &PointCloud) -> f64 {
        let (a, b) = (a.points(), b.points());
        let mut total = 0.0;
        for i in 0..a.len() {
            let mut best = f64::MAX;
            for j in 0..b.len() {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (a[i][k] - b[j][k]).powi(2);
                }
                if s < best {
                    best = s;
                }
            }
            total += best;
        }
        for j in 0..b.len() {
            let mut best = f64::MAX;
            for i in 0..a.len() {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (a[i][k] - b[j][k]).powi(2);
                }
                if s < best {
                    best = s;
                }
            }
            total += best;
        }
        total
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_cloud(&mut rng, 50);
        assert_eq!(chamfer_sym(&d, &d).unwrap(), 0.0);
        assert_eq!(chamfer_sym_accelerated(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_pair() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_sym(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer_sym_accelerated(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn distances_are_squared_not_rooted() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[3.0, 4.0, 0.0]]);
        assert_eq!(chamfer_sym(&a, &b).unwrap(), 50.0);
    }

    #[test]
    fn small_random_clouds_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let na = rng.random_range(1..=10);
            let nb = rng.random_range(1..=10);
            let a = random_cloud(&mut rng, na);
            let b = random_cloud(&mut rng, nb);
            let expected = oracle(&a, &b);
            let got = chamfer_sym(&a, &b).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn duplicate_points_are_allowed() {
        let a = cloud(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
        let b = cloud(&[[1.0, 2.0, 3.0]]);
        assert_eq!(chamfer_sym(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn subset_is_not_enough_for_zero() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(chamfer_sym(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn empty_cloud_is_domain_error() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let empty = PointCloud::default();
        assert!(matches!(chamfer_sym(&a, &empty), Err(Error::Domain(_))));
        assert!(matches!(
            chamfer_sym_accelerated(&empty, &a),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn non_finite_coordinate_is_domain_error() {
        assert!(matches!(
            PointCloud::new(vec![[0.0, f64::NAN, 0.0]]),
            Err(Error::Domain(_))
        ));
        assert!(PointCloud::parse("0 0 inf\n").is_err());
    }

    #[test]
    fn parse_text_format() {
        let c = PointCloud::parse("# header\n1 2 3\n\n  -0.5\t0 1e-3 \n").unwrap();
        assert_eq!(c.points(), &[[1.0, 2.0, 3.0], [-0.5, 0.0, 1e-3]]);
        assert!(PointCloud::parse("1 2\n").is_err());
        assert!(PointCloud::parse("1 2 x\n").is_err());
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(chamfer_method("naive").unwrap().name(), "naive");
        assert_eq!(chamfer_method("kdtree").unwrap().name(), "kdtree");
        assert!(chamfer_method("octree").is_err());
    }

    #[test]
    fn large_identical_cloud_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_cloud(&mut rng, 120_000);
        assert_eq!(chamfer_sym_accelerated(&d, &d).unwrap(), 0.0);
    }

    fn arb_cloud(max: usize) -> impl Strategy<Value = Vec<Point3>> {
        prop::collection::vec(
            prop::array::uniform3(-100.0f64..100.0),
            1..max,
        )
    }

    proptest! {
        #[test]
        fn symmetric(a in arb_cloud(40), b in arb_cloud(40)) {
            let (a, b) = (cloud(&a), cloud(&b));
            prop_assert_eq!(chamfer_sym(&a, &b).unwrap(), chamfer_sym(&b, &a).unwrap());
        }

        #[test]
        fn accelerated_matches_naive(a in arb_cloud(300), b in arb_cloud(300)) {
            let (a, b) = (cloud(&a), cloud(&b));
            let naive = chamfer_sym(&a, &b).unwrap();
            let fast = chamfer_sym_accelerated(&a, &b).unwrap();
            prop_assert!((naive - fast).abs() <= 1e-9 * naive.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn far_outlier_never_decreases(a in arb_cloud(30), b in arb_cloud(30), dir in prop::array::uniform3(-1.0f64..1.0)) {
            let (a, mut bc) = (cloud(&a), cloud(&b));
            let before = chamfer_sym(&a, &bc).unwrap();
            // Any point at distance > 400 from the origin box is farther from A
            // than every point of B.
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt().max(1e-3);
            let far = [dir[0] / norm * 1e3, dir[1] / norm * 1e3, dir[2] / norm * 1e3];
            bc.push(far).unwrap();
            prop_assert!(chamfer_sym(&a, &bc).unwrap() >= before);
        }
    }
}
