//! Position estimation from anchor measurements.
//!
//! Range-based estimates minimize `sum_i (|p - a_i| - d_i)^2` with a
//! Levenberg-damped Gauss-Newton iteration started from a linearized
//! closed-form guess. With (near-)coplanar anchors the problem has a mirror
//! solution across the anchor plane; the estimate on the deployment side
//! (`z >= 0`) is kept.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ranging::Bearing;
use crate::topology::Position3;

pub const MIN_TRILATERATION_ANCHORS: usize = 4;
pub const MIN_TRIANGULATION_ANCHORS: usize = 2;

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-12;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizationError {
    #[error("need at least {need} usable measurements, got {got}")]
    TooFewMeasurements { got: usize, need: usize },
    #[error("{measurements} measurements for {anchors} anchors")]
    LengthMismatch { measurements: usize, anchors: usize },
    #[error("range {0} m is not a positive finite distance")]
    BadRange(f64),
    #[error("anchor geometry is singular")]
    SingularGeometry,
}

/// Anchor positions as they are (used to generate measurements) and as the
/// solver believes them to be.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub positions: Vec<Position3>,
    pub reported_positions: Vec<Position3>,
}

impl AnchorSet {
    /// Anchors whose positions are known without error.
    pub fn exact(positions: Vec<Position3>) -> Self {
        Self { reported_positions: positions.clone(), positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationEstimate {
    pub position: Position3,
    pub residual_rms: f64,
    pub converged: bool,
}

/// Adds i.i.d. `Normal(0, sigma)` errors per axis to the reported positions.
pub fn inject_anchor_error<R: Rng + ?Sized>(anchors: &AnchorSet, sigma_per_axis: f64, rng: &mut R) -> AnchorSet {
    let reported_positions = match Normal::new(0.0, sigma_per_axis) {
        Ok(noise) if sigma_per_axis > 0.0 => {
            anchors.positions.iter().map(|a| a + Vector3::from_fn(|_, _| noise.sample(rng))).collect()
        }
        _ => anchors.positions.clone(),
    };
    AnchorSet { positions: anchors.positions.clone(), reported_positions }
}

/// Euclidean distance between truth and estimate.
pub fn localization_error(true_pos: &Position3, estimate: &LocationEstimate) -> f64 {
    (true_pos - estimate.position).norm()
}

/// Sum of squared range residuals at `p`.
pub fn range_objective(anchors: &[Position3], ranges: &[f64], p: &Position3) -> f64 {
    anchors.iter().zip(ranges).map(|(a, d)| ((p - a).norm() - d).powi(2)).sum()
}

/// Best-fit plane through the anchors: centroid, unit normal oriented toward
/// `+z`, and the ratio of the smallest to the largest spread.
struct AnchorPlane {
    centroid: Position3,
    normal: Vector3<f64>,
    in_plane: [Vector3<f64>; 2],
    flatness: f64,
}

impl AnchorPlane {
    fn fit(anchors: &[Position3]) -> Self {
        let centroid = anchors.iter().sum::<Position3>() / anchors.len() as f64;
        let scatter = anchors.iter().map(|a| (a - centroid) * (a - centroid).transpose()).sum::<Matrix3<f64>>();
        let eig = SymmetricEigen::new(scatter);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
        if normal.z < 0.0 || (normal.z == 0.0 && normal.x < 0.0) {
            normal = -normal;
        }
        let largest = eig.eigenvalues[order[2]].max(0.0);
        let smallest = eig.eigenvalues[order[0]].max(0.0);
        let flatness = if largest > 0.0 { (smallest / largest).sqrt() } else { 1.0 };
        let e1: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
        let e2 = normal.cross(&e1);
        Self { centroid, normal, in_plane: [e1, e2], flatness }
    }

    fn height(&self, p: &Position3) -> f64 {
        (p - self.centroid).dot(&self.normal)
    }

    fn reflect(&self, p: &Position3) -> Position3 {
        p - 2.0 * self.height(p) * self.normal
    }
}

/// Linearized least squares: subtracting the first range equation from the
/// others leaves `2 (a_i - a_0) . p = d_0^2 - d_i^2 + |a_i|^2 - |a_0|^2`.
fn linear_guess(anchors: &[Position3], ranges: &[f64]) -> Option<Position3> {
    let (a0, d0) = (anchors[0], ranges[0]);
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (a, d) in anchors.iter().zip(ranges).skip(1) {
        let row = 2.0 * (a - a0);
        let b = d0 * d0 - d * d + a.norm_squared() - a0.norm_squared();
        normal += row * row.transpose();
        rhs += row * b;
    }
    let eig = SymmetricEigen::new(normal);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return None;
    }
    normal.cholesky().map(|c| c.solve(&rhs))
}

/// Closed-form guess for (near-)coplanar anchors: linearized solve inside the
/// plane, then the height that best matches the ranges, on the `+z` side.
fn planar_guess(plane: &AnchorPlane, anchors: &[Position3], ranges: &[f64]) -> Position3 {
    let [e1, e2] = plane.in_plane;
    let project = |a: &Position3| Vector2::new((a - plane.centroid).dot(&e1), (a - plane.centroid).dot(&e2));
    let flat: Vec<Vector2<f64>> = anchors.iter().map(project).collect();
    let spread = flat.iter().map(|q| q.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let (q0, d0) = (flat[0], ranges[0]);
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for (q, d) in flat.iter().zip(ranges).skip(1) {
        let row = 2.0 * (q - q0);
        let b = d0 * d0 - d * d + q.norm_squared() - q0.norm_squared();
        normal += row * row.transpose();
        rhs += row * b;
    }
    let uv = normal.cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(Vector2::zeros);
    let h2 = flat.iter().zip(ranges).map(|(q, d)| d * d - (uv - q).norm_squared()).sum::<f64>() / ranges.len() as f64;
    // starting exactly on the plane is a saddle of the objective
    let h = h2.max(0.0).sqrt().max(1e-2 * spread);
    plane.centroid + uv.x * e1 + uv.y * e2 + h * plane.normal
}

/// Levenberg-damped Gauss-Newton on the range residuals.
fn refine(anchors: &[Position3], ranges: &[f64], start: Position3) -> LocationEstimate {
    let mut p = start;
    let mut cost = range_objective(anchors, ranges, &p);
    let mut lambda = INITIAL_DAMPING;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (a, d) in anchors.iter().zip(ranges) {
            let diff = p - a;
            let dist = diff.norm();
            let row = if dist > 0.0 { diff / dist } else { Vector3::zeros() };
            jtj += row * row.transpose();
            jtr += row * (dist - d);
        }
        let damped = jtj + Matrix3::identity() * lambda;
        let Some(step) = damped.cholesky().map(|c| -c.solve(&jtr)) else {
            lambda *= 10.0;
            continue;
        };
        let candidate = p + step;
        let candidate_cost = range_objective(anchors, ranges, &candidate);
        if candidate_cost < cost {
            p = candidate;
            cost = candidate_cost;
            lambda = (lambda / 10.0).max(1e-12);
        } else {
            lambda *= 10.0;
        }
        if step.norm() < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    LocationEstimate { position: p, residual_rms: (cost / ranges.len() as f64).sqrt(), converged }
}

fn check_ranges(anchors: &[Position3], ranges: &[f64], need: usize) -> Result<(), LocalizationError> {
    if anchors.len() != ranges.len() {
        return Err(LocalizationError::LengthMismatch { measurements: ranges.len(), anchors: anchors.len() });
    }
    if ranges.len() < need {
        return Err(LocalizationError::TooFewMeasurements { got: ranges.len(), need });
    }
    if let Some(&bad) = ranges.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(LocalizationError::BadRange(bad));
    }
    Ok(())
}

/// Range-only position fix against explicit anchor coordinates.
pub fn trilaterate_points(anchors: &[Position3], ranges: &[f64]) -> Result<LocationEstimate, LocalizationError> {
    check_ranges(anchors, ranges, MIN_TRILATERATION_ANCHORS)?;
    let plane = AnchorPlane::fit(anchors);
    let start = linear_guess(anchors, ranges).unwrap_or_else(|| planar_guess(&plane, anchors, ranges));
    let mut best = refine(anchors, ranges, start);

    // anchors spanning little height leave a near-mirror solution below the plane
    if plane.flatness < 1e-2 && plane.height(&best.position) < 0.0 {
        let mirrored = refine(anchors, ranges, plane.reflect(&best.position));
        if plane.height(&mirrored.position) >= 0.0 {
            best = mirrored;
        } else {
            best.position = plane.reflect(&best.position);
            best.residual_rms = (range_objective(anchors, ranges, &best.position) / ranges.len() as f64).sqrt();
        }
    }
    Ok(best)
}

/// Two-way ToF trilateration against the reported anchor positions.
pub fn trilaterate(anchors: &AnchorSet, distances: &[f64]) -> Result<LocationEstimate, LocalizationError> {
    trilaterate_points(&anchors.reported_positions, distances)
}

/// RSS trilateration; same solver, ranges come from received-power inversion.
pub fn rss_trilaterate(anchors: &AnchorSet, rss_distances: &[f64]) -> Result<LocationEstimate, LocalizationError> {
    trilaterate_points(&anchors.reported_positions, rss_distances)
}

/// Least-squares intersection of bearing rays cast from the reported anchors.
pub fn aoa_triangulate(anchors: &AnchorSet, bearings: &[Bearing]) -> Result<LocationEstimate, LocalizationError> {
    let origins = &anchors.reported_positions;
    if origins.len() != bearings.len() {
        return Err(LocalizationError::LengthMismatch { measurements: bearings.len(), anchors: origins.len() });
    }
    if bearings.len() < MIN_TRIANGULATION_ANCHORS {
        return Err(LocalizationError::TooFewMeasurements { got: bearings.len(), need: MIN_TRIANGULATION_ANCHORS });
    }
    let projectors: Vec<Matrix3<f64>> = bearings
        .iter()
        .map(|b| {
            let u = b.unit_vector();
            Matrix3::identity() - u * u.transpose()
        })
        .collect();
    let system: Matrix3<f64> = projectors.iter().sum();
    let rhs: Vector3<f64> = projectors.iter().zip(origins).map(|(m, a)| m * a).sum();
    let eig = SymmetricEigen::new(system);
    if !(eig.eigenvalues.min() > 1e-12 * eig.eigenvalues.max()) {
        return Err(LocalizationError::SingularGeometry);
    }
    let position = system.cholesky().ok_or(LocalizationError::SingularGeometry)?.solve(&rhs);
    let sq: f64 = projectors.iter().zip(origins).map(|(m, a)| (m * (position - a)).norm_squared()).sum();
    Ok(LocationEstimate { position, residual_rms: (sq / bearings.len() as f64).sqrt(), converged: true })
}
