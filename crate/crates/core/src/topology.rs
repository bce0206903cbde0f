//! Nanonode grid, controller anchors and per-iteration mobility.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the deployment frame, in meters. The grid lies on `z = 0` and
/// nanonodes occupy the half-space `z >= 0`.
pub type Position3 = Vector3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("grid needs at least one row and one column (got {rows}x{cols})")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("spacing must be positive and finite (got {0})")]
    BadSpacing(f64),
    #[error("trilateration in 3D needs at least 4 anchors (got {0})")]
    TooFewAnchors(usize),
    #[error("anchor scheme {scheme:?} supports at most {max} anchors (got {count})")]
    TooManyAnchors { scheme: AnchorScheme, count: usize, max: usize },
    #[error("mobility pattern {0:?} needs a grid with non-zero extent")]
    DegenerateExtent(MobilityPattern),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorScheme {
    /// Four grid corners first, then symmetric additions: center for 5,
    /// two opposite edge midpoints for 6, those plus the center for 7,
    /// all four edge midpoints for 8, and all of them plus the center for 9.
    Corners,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityPattern {
    None,
    RandomBox,
    HalfSphere,
    HalfCylinder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub rows: usize,
    pub cols: usize,
    pub node_positions: Vec<Position3>,
    pub anchor_positions: Vec<Position3>,
    pub spacing: f64,
    /// Distance between two controllers on the same edge.
    pub extent_d: f64,
}

impl Topology {
    /// Upper corner of the deployment box `[0,d] x [0,d] x [0,d/2]`.
    pub fn box_upper(&self) -> Position3 {
        Position3::new(self.extent_d, self.extent_d, self.extent_d / 2.0)
    }

    /// Center of the deployment box.
    pub fn box_center(&self) -> Position3 {
        self.box_upper() / 2.0
    }

    /// Largest distance between any anchor and any point of the deployment box.
    pub fn max_anchor_distance(&self) -> f64 {
        let upper = self.box_upper();
        let corners = (0..8).map(|i| {
            Position3::new(
                if i & 1 == 0 { 0.0 } else { upper.x },
                if i & 2 == 0 { 0.0 } else { upper.y },
                if i & 4 == 0 { 0.0 } else { upper.z },
            )
        });
        corners.flat_map(|c| self.anchor_positions.iter().map(move |a| (c - a).norm())).fold(0.0, f64::max)
    }
}

/// Lays out `rows x cols` nanonodes on the `z = 0` plane, starting at the origin.
/// Rows advance along y, columns along x.
pub fn build_grid(rows: usize, cols: usize, spacing: f64) -> Result<Topology, TopologyError> {
    if rows == 0 || cols == 0 {
        return Err(TopologyError::EmptyGrid { rows, cols });
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(TopologyError::BadSpacing(spacing));
    }
    let node_positions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Position3::new(c as f64 * spacing, r as f64 * spacing, 0.0)))
        .collect();
    Ok(Topology {
        rows,
        cols,
        node_positions,
        anchor_positions: Vec::new(),
        spacing,
        extent_d: (cols - 1) as f64 * spacing,
    })
}

/// Places `count` controllers on the mounting plane.
pub fn place_anchors(mut topology: Topology, count: usize, scheme: AnchorScheme) -> Result<Topology, TopologyError> {
    if count < 4 {
        return Err(TopologyError::TooFewAnchors(count));
    }
    let AnchorScheme::Corners = scheme;
    if count > 9 {
        return Err(TopologyError::TooManyAnchors { scheme, count, max: 9 });
    }
    let w = (topology.cols - 1) as f64 * topology.spacing;
    let h = (topology.rows - 1) as f64 * topology.spacing;
    let p = |x: f64, y: f64| Position3::new(x, y, 0.0);

    let mut anchors = vec![p(0.0, 0.0), p(w, 0.0), p(0.0, h), p(w, h)];
    let center = p(w / 2.0, h / 2.0);
    let opposite_pair = [p(w / 2.0, 0.0), p(w / 2.0, h)];
    let other_pair = [p(0.0, h / 2.0), p(w, h / 2.0)];
    match count {
        4 => {}
        5 => anchors.push(center),
        6 => anchors.extend(opposite_pair),
        7 => {
            anchors.extend(opposite_pair);
            anchors.push(center);
        }
        8 => {
            anchors.extend(opposite_pair);
            anchors.extend(other_pair);
        }
        _ => {
            anchors.extend(opposite_pair);
            anchors.extend(other_pair);
            anchors.push(center);
        }
    }
    topology.anchor_positions = anchors;
    Ok(topology)
}

/// Maps a node's resting grid coordinates to a point of the deformed surface.
fn surface_point(rest: &Position3, d: f64, pattern: MobilityPattern) -> Position3 {
    let u = (2.0 * rest.x / d - 1.0).clamp(-1.0, 1.0);
    let v = (2.0 * rest.y / d - 1.0).clamp(-1.0, 1.0);
    let h = match pattern {
        MobilityPattern::HalfSphere => (1.0 - u * u - v * v).max(0.0).sqrt(),
        MobilityPattern::HalfCylinder => (1.0 - u * u).max(0.0).sqrt(),
        MobilityPattern::None | MobilityPattern::RandomBox => 0.0,
    };
    Position3::new(rest.x.clamp(0.0, d), rest.y.clamp(0.0, d), 0.5 * d * h)
}

/// Position of a single node for one iteration.
pub fn displace_node<R: Rng + ?Sized>(
    rest: &Position3,
    extent_d: f64,
    pattern: MobilityPattern,
    rng: &mut R,
) -> Position3 {
    match pattern {
        MobilityPattern::None => *rest,
        MobilityPattern::RandomBox => Position3::new(
            rng.gen_range(0.0..=extent_d),
            rng.gen_range(0.0..=extent_d),
            rng.gen_range(0.0..=extent_d / 2.0),
        ),
        MobilityPattern::HalfSphere | MobilityPattern::HalfCylinder => surface_point(rest, extent_d, pattern),
    }
}

/// Displaced positions for every node of the topology. Anchors are not touched.
pub fn apply_mobility<R: Rng + ?Sized>(
    topology: &Topology,
    pattern: MobilityPattern,
    rng: &mut R,
) -> Result<Vec<Position3>, TopologyError> {
    if pattern != MobilityPattern::None && !(topology.extent_d > 0.0) {
        return Err(TopologyError::DegenerateExtent(pattern));
    }
    Ok(topology.node_positions.iter().map(|rest| displace_node(rest, topology.extent_d, pattern, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn default_topology() -> Topology {
        place_anchors(build_grid(25, 25, 0.009).unwrap(), 4, AnchorScheme::Corners).unwrap()
    }

    fn in_box(p: &Position3, d: f64) -> bool {
        (0.0..=d).contains(&p.x) && (0.0..=d).contains(&p.y) && (0.0..=d / 2.0).contains(&p.z)
    }

    #[test]
    fn default_grid_extent() {
        let t = build_grid(25, 25, 0.009).unwrap();
        assert_eq!(t.node_positions.len(), 625);
        assert_abs_diff_eq!(t.extent_d, 0.216, epsilon = 1e-12);
        assert!(t.node_positions.iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn single_node_grid() {
        let t = build_grid(1, 1, 0.009).unwrap();
        assert_eq!(t.node_positions, vec![Position3::zeros()]);
        assert_eq!(t.extent_d, 0.0);
    }

    #[test]
    fn unit_square_grid() {
        let t = build_grid(2, 2, 1.0).unwrap();
        let expect = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        for (p, (x, y)) in t.node_positions.iter().zip(expect) {
            assert_eq!(*p, Position3::new(x, y, 0.0));
        }
    }

    #[test]
    fn rejects_bad_grid() {
        assert_eq!(build_grid(25, 25, 0.0), Err(TopologyError::BadSpacing(0.0)));
        assert_eq!(build_grid(25, 25, -1.0), Err(TopologyError::BadSpacing(-1.0)));
        assert!(matches!(build_grid(0, 3, 1.0), Err(TopologyError::EmptyGrid { .. })));
    }

    #[test]
    fn corner_anchors() {
        let t = default_topology();
        let d = 0.216;
        let expect = [(0.0, 0.0), (d, 0.0), (0.0, d), (d, d)];
        for (a, (x, y)) in t.anchor_positions.iter().zip(expect) {
            assert_abs_diff_eq!(*a, Position3::new(x, y, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_by_two_anchors_match_nodes() {
        let t = place_anchors(build_grid(2, 2, 1.0).unwrap(), 4, AnchorScheme::Corners).unwrap();
        assert_eq!(t.anchor_positions, t.node_positions);
    }

    #[test]
    fn eight_anchors_add_edge_midpoints() {
        let t = place_anchors(build_grid(25, 25, 0.009).unwrap(), 8, AnchorScheme::Corners).unwrap();
        let d = t.extent_d;
        let corners = &t.anchor_positions[..4];
        for extra in &t.anchor_positions[4..] {
            // midpoint of exactly one pair of corners sharing an edge
            let hits = corners
                .iter()
                .enumerate()
                .flat_map(|(i, a)| corners[i + 1..].iter().map(move |b| (a, b)))
                .filter(|(a, b)| ((*a - *b).norm() - d).abs() < 1e-12)
                .filter(|(a, b)| (((*a + *b) / 2.0) - extra).norm() < 1e-12)
                .count();
            assert_eq!(hits, 1, "{extra:?} is not an edge midpoint");
        }
    }

    #[test]
    fn five_anchors_add_center() {
        let t = place_anchors(build_grid(25, 25, 0.009).unwrap(), 5, AnchorScheme::Corners).unwrap();
        assert_abs_diff_eq!(t.anchor_positions[4], Position3::new(0.108, 0.108, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn anchor_count_bounds() {
        let g = build_grid(25, 25, 0.009).unwrap();
        assert_eq!(place_anchors(g.clone(), 3, AnchorScheme::Corners), Err(TopologyError::TooFewAnchors(3)));
        assert!(place_anchors(g.clone(), 10, AnchorScheme::Corners).is_err());
        for n in 4..=9 {
            assert_eq!(place_anchors(g.clone(), n, AnchorScheme::Corners).unwrap().anchor_positions.len(), n);
        }
    }

    #[test]
    fn no_mobility_is_identity() {
        let t = default_topology();
        let mut rng = substream(1, 0, 0, Purpose::Mobility);
        assert_eq!(apply_mobility(&t, MobilityPattern::None, &mut rng).unwrap(), t.node_positions);
    }

    #[test]
    fn hemisphere_apex_at_center() {
        let t = default_topology();
        let mut rng = substream(1, 0, 0, Purpose::Mobility);
        let moved = apply_mobility(&t, MobilityPattern::HalfSphere, &mut rng).unwrap();
        // node (12, 12) sits at the grid center
        let center = moved[12 * 25 + 12];
        assert_abs_diff_eq!(center, Position3::new(0.108, 0.108, 0.108), epsilon = 1e-12);
        // corners are on the rim
        assert_abs_diff_eq!(moved[0].z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cylinder_profile_depends_on_x_only() {
        let t = default_topology();
        let mut rng = substream(1, 0, 0, Purpose::Mobility);
        let moved = apply_mobility(&t, MobilityPattern::HalfCylinder, &mut rng).unwrap();
        for c in 0..25 {
            let z0 = moved[c].z;
            assert!((0..25).all(|r| (moved[r * 25 + c].z - z0).abs() < 1e-15));
        }
        assert_abs_diff_eq!(moved[12].z, 0.108, epsilon = 1e-12);
    }

    #[test]
    fn random_box_bounds_over_many_draws() {
        let d = 0.216;
        let mut rng = substream(3, 0, 0, Purpose::Mobility);
        let rest = Position3::zeros();
        for _ in 0..100_000 {
            let p = displace_node(&rest, d, MobilityPattern::RandomBox, &mut rng);
            assert!(in_box(&p, d), "{p:?}");
        }
    }

    /// Asymptotic Kolmogorov survival function.
    fn ks_p_value(stat: f64, n: usize) -> f64 {
        let sqrt_n = (n as f64).sqrt();
        let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * stat;
        let sum: f64 = (1..=100)
            .map(|j| {
                let j = j as f64;
                let sign = if j as i64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum();
        (2.0 * sum).clamp(0.0, 1.0)
    }

    fn ks_uniform(mut xs: Vec<f64>, hi: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let stat = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = x / hi;
                (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max);
        ks_p_value(stat, xs.len())
    }

    #[test]
    fn random_box_is_uniform_per_axis() {
        let d = 0.216;
        let mut rng = substream(5, 0, 0, Purpose::Mobility);
        let rest = Position3::zeros();
        let pts: Vec<_> = (0..100_000).map(|_| displace_node(&rest, d, MobilityPattern::RandomBox, &mut rng)).collect();
        for (axis, hi) in [(0, d), (1, d), (2, d / 2.0)] {
            let p = ks_uniform(pts.iter().map(|p| p[axis]).collect(), hi);
            assert!(p > 0.01, "axis {axis}: KS p = {p}");
        }
    }

    #[test]
    fn ks_helper_rejects_skewed_data() {
        let skewed: Vec<f64> = (0..10_000).map(|i| (i as f64 / 10_000.0).powi(2)).collect();
        assert!(ks_uniform(skewed, 1.0) < 1e-6);
    }

    #[test]
    fn degenerate_extent_rejected_for_motion() {
        let t = place_anchors(build_grid(1, 1, 0.009).unwrap(), 4, AnchorScheme::Corners).unwrap();
        let mut rng = substream(1, 0, 0, Purpose::Mobility);
        assert!(apply_mobility(&t, MobilityPattern::RandomBox, &mut rng).is_err());
        assert!(apply_mobility(&t, MobilityPattern::None, &mut rng).is_ok());
    }

    proptest! {
        #[test]
        fn every_pattern_stays_in_box(seed in any::<u64>(), iter in 0u64..1000, rows in 2usize..12, spacing in 0.001f64..0.05) {
            let t = place_anchors(build_grid(rows, rows, spacing).unwrap(), 4, AnchorScheme::Corners).unwrap();
            for pattern in [MobilityPattern::None, MobilityPattern::RandomBox, MobilityPattern::HalfSphere, MobilityPattern::HalfCylinder] {
                let mut rng = substream(seed, iter, 0, Purpose::Mobility);
                let anchors_before = t.anchor_positions.clone();
                let moved = apply_mobility(&t, pattern, &mut rng).unwrap();
                prop_assert_eq!(moved.len(), t.node_positions.len());
                for p in &moved {
                    prop_assert!(in_box(p, t.extent_d + 1e-12), "{:?} escaped for {:?}", p, pattern);
                }
                prop_assert_eq!(&t.anchor_positions, &anchors_before);
            }
        }

        #[test]
        fn mobility_deterministic_per_stream(seed in any::<u64>(), iter in 0u64..1000) {
            let t = default_topology();
            let a = apply_mobility(&t, MobilityPattern::RandomBox, &mut substream(seed, iter, 0, Purpose::Mobility)).unwrap();
            let b = apply_mobility(&t, MobilityPattern::RandomBox, &mut substream(seed, iter, 0, Purpose::Mobility)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
