//! Closed parameter loops: construction, orientation and arc-length coordinates.
//!
//! A loop is stored as `n_intervals + 1` points whose first and last entries
//! are identical. The arc coordinate `C_j` runs from 0 to 1 along the chord
//! polyline, with `dC_j = |Δp_j| / √ρ` and `ρ` the squared total chord length.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ParameterPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ccw,
    Cw,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Ccw => Direction::Cw,
            Direction::Cw => Direction::Ccw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Ccw => "ccw",
            Direction::Cw => "cw",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopKind {
    Circle,
    Ellipse,
    Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSpec {
    pub kind: LoopKind,
    pub center: ParameterPoint,
    /// Semi-axes `(a, b)` along x and y; a circle requires `a == b`.
    pub radii: (f64, f64),
    pub start_angle: f64,
    pub n_intervals: usize,
    /// Closed vertex list for `kind = polyline`.
    pub polyline: Option<Vec<ParameterPoint>>,
}

impl Default for LoopSpec {
    /// Unit circle about the exceptional point `(0, 1)`, starting at the
    /// origin on the real-spectrum axis, 100 intervals.
    fn default() -> Self {
        Self {
            kind: LoopKind::Circle,
            center: ParameterPoint::new(0.0, 1.0),
            radii: (1.0, 1.0),
            start_angle: -FRAC_PI_2,
            n_intervals: 100,
            polyline: None,
        }
    }
}

impl LoopSpec {
    pub fn circle(center: ParameterPoint, radius: f64, start_angle: f64, n_intervals: usize) -> Self {
        Self {
            kind: LoopKind::Circle,
            center,
            radii: (radius, radius),
            start_angle,
            n_intervals,
            polyline: None,
        }
    }

    pub fn polyline(vertices: Vec<ParameterPoint>, n_intervals: usize) -> Self {
        Self {
            kind: LoopKind::Polyline,
            polyline: Some(vertices),
            n_intervals,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLoop {
    points: Vec<ParameterPoint>,
    arc_coords: Vec<f64>,
    rho: f64,
}

impl ParameterLoop {
    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn arc_coords(&self) -> &[f64] {
        &self.arc_coords
    }

    /// Squared total chord length.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> ParameterPoint {
        self.points[0]
    }

    pub fn orient(&self, direction: Direction) -> OrientedLoop {
        let ccw = OrientedLoop {
            direction: Direction::Ccw,
            points: self.points.clone(),
            arc_coords: self.arc_coords.clone(),
        };
        match direction {
            Direction::Ccw => ccw,
            Direction::Cw => ccw.reversed(),
        }
    }
}

/// A loop traversed in a given direction, starting and ending at the start
/// point of the underlying [`ParameterLoop`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedLoop {
    direction: Direction,
    points: Vec<ParameterPoint>,
    arc_coords: Vec<f64>,
}

impl OrientedLoop {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn arc_coords(&self) -> &[f64] {
        &self.arc_coords
    }

    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }

    /// Same loop, opposite traversal. Index `j` maps to `n - j`.
    pub fn reversed(&self) -> OrientedLoop {
        let points: Vec<ParameterPoint> = self.points.iter().rev().copied().collect();
        let arc_coords: Vec<f64> = self.arc_coords.iter().rev().map(|c| 1.0 - c).collect();
        OrientedLoop {
            direction: self.direction.reversed(),
            points,
            arc_coords,
        }
    }
}

pub fn build_loop(spec: &LoopSpec) -> Result<ParameterLoop> {
    if spec.n_intervals < 2 {
        return Err(Error::invalid("n_intervals must be at least 2"));
    }
    if !spec.center.is_finite() || !spec.start_angle.is_finite() {
        return Err(Error::invalid("loop center and start angle must be finite"));
    }
    let n = spec.n_intervals;
    let mut points = match spec.kind {
        LoopKind::Circle | LoopKind::Ellipse => {
            let (a, b) = spec.radii;
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                return Err(Error::invalid("loop radii must be finite and positive"));
            }
            if spec.kind == LoopKind::Circle && a != b {
                return Err(Error::invalid("circle requires equal radii"));
            }
            (0..=n)
                .map(|j| {
                    let phi = spec.start_angle + TAU * j as f64 / n as f64;
                    ParameterPoint::new(spec.center.x + a * phi.cos(), spec.center.y + b * phi.sin())
                })
                .collect::<Vec<_>>()
        }
        LoopKind::Polyline => {
            let vertices = spec
                .polyline
                .as_ref()
                .ok_or_else(|| Error::invalid("polyline loop needs a vertex list"))?;
            resample_polyline(vertices, n)?
        }
    };
    points[n] = points[0];

    let chords: Vec<f64> = points.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let total: f64 = chords.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("loop has zero length"));
    }
    let mut arc_coords = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    arc_coords.push(0.0);
    for c in &chords {
        acc += c;
        arc_coords.push(acc / total);
    }
    arc_coords[n] = 1.0;

    Ok(ParameterLoop {
        points,
        arc_coords,
        rho: total * total,
    })
}

fn resample_polyline(vertices: &[ParameterPoint], n: usize) -> Result<Vec<ParameterPoint>> {
    if vertices.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("polyline vertices must be finite"));
    }
    if vertices.len() < 2 || vertices.first() != vertices.last() {
        return Err(Error::invalid("polyline must be closed (first vertex == last vertex)"));
    }
    let mut distinct: Vec<ParameterPoint> = Vec::new();
    for v in vertices {
        if !distinct.contains(v) {
            distinct.push(*v);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::invalid("polyline needs at least 3 distinct points"));
    }
    let mut cumulative = vec![0.0];
    for w in vertices.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + w[0].distance(&w[1]));
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::invalid("loop has zero length"));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    for j in 0..=n {
        let s = total * j as f64 / n as f64;
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] <= s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (p, q) = (vertices[seg], vertices[seg + 1]);
        out.push(if t == 0.0 {
            p
        } else {
            ParameterPoint::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
        });
    }
    Ok(out)
}

/// Smallest distance from any loop point to any of `eps`; `+∞` if `eps` is empty.
pub fn min_ep_distance(points: &[ParameterPoint], eps: &[ParameterPoint]) -> f64 {
    points
        .iter()
        .flat_map(|p| eps.iter().map(move |e| p.distance(e)))
        .fold(f64::INFINITY, f64::min)
}

/// Signed number of turns of the closed polyline `points` about `center`.
pub fn winding_number(points: &[ParameterPoint], center: ParameterPoint, ep_radius: f64) -> Result<i32> {
    if min_ep_distance(points, &[center]) < ep_radius {
        return Err(Error::invalid(format!("loop passes within {ep_radius:e} of {center}")));
    }
    let mut total = 0.0;
    for w in points.windows(2) {
        let a = (w[0].y - center.y).atan2(w[0].x - center.x);
        let b = (w[1].y - center.y).atan2(w[1].x - center.x);
        let mut d = b - a;
        while d > std::f64::consts::PI {
            d -= TAU;
        }
        while d < -std::f64::consts::PI {
            d += TAU;
        }
        total += d;
    }
    Ok((total / TAU).round() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Vec<ParameterPoint> {
        vec![
            ParameterPoint::new(0.0, 0.0),
            ParameterPoint::new(1.0, 0.0),
            ParameterPoint::new(1.0, 1.0),
            ParameterPoint::new(0.0, 1.0),
            ParameterPoint::new(0.0, 0.0),
        ]
    }

    #[test]
    fn default_loop_shape() {
        let lp = build_loop(&LoopSpec::default()).unwrap();
        assert_eq!(lp.points().len(), 101);
        assert_eq!(lp.points()[0], lp.points()[100]);
        assert!(lp.start().distance(&ParameterPoint::new(0.0, 0.0)) < 1e-15);
        assert!((lp.arc_coords()[50] - 0.5).abs() < 1e-12);
        assert_eq!(lp.arc_coords()[0], 0.0);
        assert_eq!(lp.arc_coords()[100], 1.0);
    }

    #[test]
    fn square_rho_is_squared_perimeter() {
        let lp = build_loop(&LoopSpec::polyline(square(), 100)).unwrap();
        assert!((lp.rho() - 16.0).abs() < 1e-12);
        assert!(lp.points()[25].distance(&ParameterPoint::new(1.0, 0.0)) < 1e-12);
        let lp4 = build_loop(&LoopSpec::polyline(square(), 4)).unwrap();
        assert_eq!(lp4.points(), &square()[..]);
        assert_eq!(lp4.rho(), 16.0);
    }

    #[test]
    fn invalid_specs() {
        let mut open = square();
        open.pop();
        assert!(build_loop(&LoopSpec::polyline(open, 10)).is_err());
        let line = vec![
            ParameterPoint::new(0.0, 0.0),
            ParameterPoint::new(1.0, 0.0),
            ParameterPoint::new(0.0, 0.0),
        ];
        assert!(build_loop(&LoopSpec::polyline(line, 10)).is_err());
        let mut spec = LoopSpec {
            radii: (0.0, 0.0),
            ..LoopSpec::default()
        };
        assert!(build_loop(&spec).is_err());
        spec.radii = (1.0, 2.0);
        assert!(build_loop(&spec).is_err());
        spec.kind = LoopKind::Ellipse;
        assert!(build_loop(&spec).is_ok());
        spec.n_intervals = 1;
        assert!(build_loop(&spec).is_err());
        let no_vertices = LoopSpec {
            kind: LoopKind::Polyline,
            ..LoopSpec::default()
        };
        assert!(build_loop(&no_vertices).is_err());
    }

    #[test]
    fn orientation() {
        let lp = build_loop(&LoopSpec::default()).unwrap();
        let ccw = lp.orient(Direction::Ccw);
        assert_eq!(ccw.points(), lp.points());
        let cw = lp.orient(Direction::Cw);
        for j in 0..=100 {
            assert_eq!(cw.points()[j], lp.points()[100 - j]);
        }
        assert_eq!(cw.points()[0], ccw.points()[0]);
        let back = cw.reversed();
        assert_eq!(back.points(), ccw.points());
        assert_eq!(back.direction(), Direction::Ccw);
        for (a, b) in back.arc_coords().iter().zip(ccw.arc_coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(cw.reversed().reversed().points(), cw.points());
        assert_eq!(cw.arc_coords()[0], 0.0);
        assert_eq!(cw.arc_coords()[100], 1.0);
    }

    #[test]
    fn ep_distance_and_winding() {
        let lp = build_loop(&LoopSpec::default()).unwrap();
        let ep = ParameterPoint::new(0.0, 1.0);
        assert!((min_ep_distance(lp.points(), &[ep]) - 1.0).abs() < 1e-12);
        assert_eq!(min_ep_distance(lp.points(), &[]), f64::INFINITY);
        assert!(min_ep_distance(lp.points(), &[ParameterPoint::new(50.0, 50.0)]) > 60.0);

        assert_eq!(winding_number(lp.orient(Direction::Ccw).points(), ep, 1e-6).unwrap(), 1);
        assert_eq!(winding_number(lp.orient(Direction::Cw).points(), ep, 1e-6).unwrap(), -1);
        let small = build_loop(&LoopSpec::circle(ParameterPoint::new(3.0, 0.0), 0.5, 0.0, 40)).unwrap();
        assert_eq!(winding_number(small.points(), ep, 1e-6).unwrap(), 0);
        assert!(winding_number(lp.points(), lp.points()[3], 1e-6).is_err());
    }

    proptest! {
        #[test]
        fn arc_coordinates_are_normalized(
            cx in -2.0..2.0f64, cy in -2.0..2.0f64,
            a in 0.1..3.0f64, b in 0.1..3.0f64,
            start in -3.0..3.0f64, n in 3usize..300,
        ) {
            let spec = LoopSpec {
                kind: LoopKind::Ellipse,
                center: ParameterPoint::new(cx, cy),
                radii: (a, b),
                start_angle: start,
                n_intervals: n,
                polyline: None,
            };
            let lp = build_loop(&spec).unwrap();
            prop_assert_eq!(lp.points()[0], lp.points()[n]);
            let sum: f64 = lp.arc_coords().windows(2).map(|w| w[1] - w[0]).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(lp.arc_coords().windows(2).all(|w| w[1] >= w[0]));
            // dC_j from the chord definition sums to one as well.
            let dc: f64 = lp.points().windows(2).map(|w| w[0].distance(&w[1]) / lp.rho().sqrt()).sum();
            prop_assert!((dc - 1.0).abs() < 1e-12);
            let center = ParameterPoint::new(cx, cy);
            let w = winding_number(lp.orient(Direction::Ccw).points(), center, 1e-6).unwrap();
            let wr = winding_number(lp.orient(Direction::Cw).points(), center, 1e-6).unwrap();
            prop_assert_eq!(w, -wr);
        }
    }
}
