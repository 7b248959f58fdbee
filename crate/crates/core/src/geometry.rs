//! Planar geometry: vectors, oriented rectangles and polylines.
//!
//! World frame is x east, y north, headings counter-clockwise from +x in
//! radians.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_heading(heading: f64) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Rotated by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-PI, PI]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading,
        }
    }

    /// Expresses a world point in this pose's body frame (x forward, y left).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotated(-self.heading)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.position + p.rotated(self.heading)
    }
}

/// Oriented rectangle given by center, half extents along its own axes, and
/// heading of its local x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Obb {
    pub center: Vec2,
    pub half_extents: Vec2,
    pub heading: f64,
}

impl Obb {
    pub fn new(center: Vec2, half_extents: Vec2, heading: f64) -> Self {
        Self {
            center,
            half_extents,
            heading,
        }
    }

    pub fn from_pose(pose: &Pose, half_extents: Vec2) -> Self {
        Self::new(pose.position, half_extents, pose.heading)
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_heading(self.heading);
        [u, u.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let a = u * self.half_extents.x;
        let b = v * self.half_extents.y;
        let c = self.center;
        [c + a + b, c - a + b, c - a - b, c + a - b]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let d = p - self.center;
        let [u, v] = self.axes();
        d.dot(u).abs() <= self.half_extents.x && d.dot(v).abs() <= self.half_extents.y
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let [u, v] = self.axes();
        let c = self.center.dot(axis);
        let r = self.half_extents.x * u.dot(axis).abs() + self.half_extents.y * v.dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis test. Touching rectangles count as overlapping.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let reach = self.bounding_radius() + other.bounding_radius();
        if (self.center - other.center).norm_sq() > reach * reach {
            return false;
        }
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        for axis in [a0, a1, b0, b1] {
            let (min_a, max_a) = self.project(axis);
            let (min_b, max_b) = other.project(axis);
            if max_a < min_b || max_b < min_a {
                return false;
            }
        }
        true
    }

    /// Euclidean distance between the two filled rectangles; zero if they
    /// overlap.
    pub fn distance(&self, other: &Obb) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let ca = self.corners();
        let cb = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (ca[i], ca[(i + 1) % 4]);
            let (b0, b1) = (cb[i], cb[(i + 1) % 4]);
            for p in cb {
                best = best.min(point_segment_distance(p, a0, a1));
            }
            for p in ca {
                best = best.min(point_segment_distance(p, b0, b1));
            }
        }
        best
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(a + ab * t)
}

/// Proper or touching intersection of segments `p0-p1` and `q0-q1`.
pub fn segments_intersect(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    let d1 = (q1 - q0).cross(p0 - q0);
    let d2 = (q1 - q0).cross(p1 - q0);
    let d3 = (p1 - p0).cross(q0 - p0);
    let d4 = (p1 - p0).cross(q1 - p0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Vec2, b: Vec2, p: Vec2, d: f64| {
        d == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    on(q0, q1, p0, d1) || on(q0, q1, p1, d2) || on(p0, p1, q0, d3) || on(p0, p1, q1, d4)
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point.
    pub s: f64,
    /// Signed lateral offset, positive to the left of travel direction.
    pub lateral: f64,
    pub distance: f64,
    pub segment: usize,
}

/// Piecewise-linear curve with cached cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
    /// Bounding boxes of runs of `CHUNK` segments, for pruning projections.
    chunks: Vec<(Vec2, Vec2)>,
}

const CHUNK: usize = 16;

fn box_distance((lo, hi): (Vec2, Vec2), p: Vec2) -> f64 {
    let dx = (lo.x - p.x).max(p.x - hi.x).max(0.0);
    let dy = (lo.y - p.y).max(p.y - hi.y).max(0.0);
    dx.hypot(dy)
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.dist(points[i - 1]);
            }
            cumulative.push(acc);
        }
        let chunks = (0..points.len().saturating_sub(1))
            .step_by(CHUNK)
            .map(|first| {
                let run = &points[first..(first + CHUNK + 1).min(points.len())];
                run.iter().fold((run[0], run[0]), |(lo, hi), q| {
                    (
                        Vec2::new(lo.x.min(q.x), lo.y.min(q.y)),
                        Vec2::new(hi.x.max(q.x), hi.y.max(q.y)),
                    )
                })
            })
            .collect();
        Self {
            points,
            cumulative,
            chunks,
        }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().expect("polyline has points")
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        if self.points.len() < 2 {
            return self.points[0];
        }
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg_len > 0.0 {
            (s - self.cumulative[i]) / seg_len
        } else {
            0.0
        };
        self.points[i].lerp(self.points[i + 1], t)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let i = self.segment_at(s.clamp(0.0, self.length()));
        (self.points[i + 1] - self.points[i]).angle()
    }

    pub fn pose_at(&self, s: f64) -> Pose {
        let p = self.point_at(s);
        Pose {
            position: p,
            heading: self.heading_at(s),
        }
    }

    pub fn project(&self, p: Vec2) -> Projection {
        self.project_range(p, 0, self.points.len().saturating_sub(1))
    }

    /// Projection restricted to segments `first..last` (exclusive of `last`).
    pub fn project_range(&self, p: Vec2, first: usize, last: usize) -> Projection {
        let mut best = Projection {
            s: 0.0,
            lateral: 0.0,
            distance: f64::INFINITY,
            segment: 0,
        };
        if self.points.len() < 2 {
            let d = p.dist(self.points[0]);
            best.distance = d;
            return best;
        }
        let last = last.min(self.points.len() - 1);
        if first >= last {
            return best;
        }
        let scan = |i: usize, best: &mut Projection| {
            let a = self.points[i];
            let ab = self.points[i + 1] - a;
            let len_sq = ab.norm_sq();
            let t = if len_sq > 0.0 {
                ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = p.dist(a + ab * t);
            // Ties go to the lowest segment whatever the visiting order.
            if d < best.distance || (d == best.distance && i < best.segment) {
                let len = len_sq.sqrt();
                *best = Projection {
                    s: self.cumulative[i] + t * len,
                    lateral: if len > 0.0 {
                        ab.cross(p - a) / len
                    } else {
                        0.0
                    },
                    distance: d,
                    segment: i,
                };
            }
        };
        // Nearest chunk first so the rest can mostly be pruned.
        let chunk_ids = first / CHUNK..(last - 1) / CHUNK + 1;
        let dists: Vec<f64> = chunk_ids
            .clone()
            .map(|c| box_distance(self.chunks[c], p))
            .collect();
        let nearest = chunk_ids.start
            + dists
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map_or(0, |(k, _)| k);
        let segs = |c: usize| first.max(c * CHUNK)..last.min((c + 1) * CHUNK);
        for i in segs(nearest) {
            scan(i, &mut best);
        }
        for (c, &bd) in chunk_ids.zip(&dists) {
            if c != nearest && bd <= best.distance + 1e-9 {
                for i in segs(c) {
                    scan(i, &mut best);
                }
            }
        }
        best
    }

    /// Whether some point of the curve lies within `r` of `p`; agrees with
    /// `project(p).distance <= r`.
    pub fn within(&self, p: Vec2, r: f64) -> bool {
        if self.points.len() < 2 {
            return p.dist(self.points[0]) <= r;
        }
        let n = self.points.len() - 1;
        (0..self.chunks.len()).any(|c| {
            box_distance(self.chunks[c], p) <= r + 1e-9
                && (c * CHUNK..((c + 1) * CHUNK).min(n)).any(|i| {
                    let a = self.points[i];
                    let ab = self.points[i + 1] - a;
                    let len_sq = ab.norm_sq();
                    let t = if len_sq > 0.0 {
                        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    p.dist(a + ab * t) <= r
                })
        })
    }

    /// Signed curvature estimate at arc length `s` from the heading change
    /// over a window of `window` meters.
    pub fn curvature_at(&self, s: f64, window: f64) -> f64 {
        let s0 = (s - window * 0.5).max(0.0);
        let s1 = (s + window * 0.5).min(self.length());
        if s1 - s0 < 1e-6 {
            return 0.0;
        }
        wrap_angle(self.heading_at(s1) - self.heading_at(s0)) / (s1 - s0)
    }

    /// Resamples at uniform spacing no larger than `spacing`.
    pub fn resampled(&self, spacing: f64) -> Polyline {
        let len = self.length();
        let n = ((len / spacing).ceil() as usize).max(1);
        let pts = (0..=n)
            .map(|i| self.point_at(len * i as f64 / n as f64))
            .collect();
        Polyline::new(pts)
    }

    /// Offsets every vertex along the local left normal.
    pub fn offset(&self, lateral: f64) -> Polyline {
        let n = self.points.len();
        let pts = (0..n)
            .map(|i| {
                let dir = if n < 2 {
                    Vec2::new(1.0, 0.0)
                } else if i == 0 {
                    (self.points[1] - self.points[0]).normalized()
                } else if i == n - 1 {
                    (self.points[n - 1] - self.points[n - 2]).normalized()
                } else {
                    ((self.points[i] - self.points[i - 1]).normalized()
                        + (self.points[i + 1] - self.points[i]).normalized())
                    .normalized()
                };
                self.points[i] + dir.perp() * lateral
            })
            .collect();
        Polyline::new(pts)
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline::new(pts)
    }
}

impl Serialize for Polyline {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.points.serialize(serializer)
    }
}

impl JsonSchema for Polyline {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Polyline".into()
    }

    fn json_schema(g: &mut schemars::SchemaGenerator) -> schemars::Schema {
        let mut s = g.subschema_for::<Vec<Vec2>>();
        s.insert("minItems".into(), 1.into());
        s
    }
}

impl<'de> Deserialize<'de> for Polyline {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let points = Vec::<Vec2>::deserialize(deserializer)?;
        if points.is_empty() {
            return Err(serde::de::Error::custom(
                "polyline needs at least one point",
            ));
        }
        Ok(Polyline::new(points))
    }
}

/// Cubic Bezier from `p0` heading `h0` to `p3` heading `h3`, sampled into a
/// polyline. Control arms are a fraction of the chord length.
pub fn bezier_connector(p0: Vec2, h0: f64, p3: Vec2, h3: f64, spacing: f64) -> Polyline {
    let chord = p0.dist(p3);
    let arm = chord * 0.45;
    let p1 = p0 + Vec2::from_heading(h0) * arm;
    let p2 = p3 - Vec2::from_heading(h3) * arm;
    let n = ((chord / spacing).ceil() as usize).clamp(4, 400) * 2;
    let pts = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let u = 1.0 - t;
            p0 * (u * u * u) + p1 * (3.0 * u * u * t) + p2 * (3.0 * u * t * t) + p3 * (t * t * t)
        })
        .collect();
    Polyline::new(pts).resampled(spacing)
}

/// Circular arc around `center` from angle `a0` to `a1` (radians, CCW if
/// `a1 > a0`).
pub fn arc(center: Vec2, radius: f64, a0: f64, a1: f64, spacing: f64) -> Polyline {
    let len = (a1 - a0).abs() * radius;
    let n = ((len / spacing).ceil() as usize).max(2);
    let pts = (0..=n)
        .map(|i| {
            let a = a0 + (a1 - a0) * i as f64 / n as f64;
            center + Vec2::from_heading(a) * radius
        })
        .collect();
    Polyline::new(pts)
}

/// Polyline through `corners` with every interior corner replaced by a
/// circular fillet of `radius` (shrunk when segments are too short).
pub fn filleted_path(corners: &[Vec2], radius: f64, spacing: f64) -> Polyline {
    if corners.len() < 3 {
        return Polyline::new(corners.to_vec()).resampled(spacing);
    }
    let mut pts = vec![corners[0]];
    for i in 1..corners.len() - 1 {
        let prev = corners[i - 1];
        let cur = corners[i];
        let next = corners[i + 1];
        let d_in = (cur - prev).normalized();
        let d_out = (next - cur).normalized();
        let turn = wrap_angle(d_out.angle() - d_in.angle());
        if turn.abs() < 1e-9 {
            pts.push(cur);
            continue;
        }
        let max_tangent = 0.5 * cur.dist(prev).min(cur.dist(next));
        let mut tangent = radius * (turn.abs() / 2.0).tan();
        let mut r = radius;
        if tangent > max_tangent {
            tangent = max_tangent;
            r = tangent / (turn.abs() / 2.0).tan();
        }
        let start = cur - d_in * tangent;
        let center = start + d_in.perp() * (r * turn.signum());
        let a0 = (start - center).angle();
        let a1 = a0 + turn;
        let n = ((r * turn.abs() / spacing).ceil() as usize).max(2);
        for k in 0..=n {
            let a = a0 + (a1 - a0) * k as f64 / n as f64;
            pts.push(center + Vec2::from_heading(a) * r);
        }
    }
    pts.push(*corners.last().unwrap());
    Polyline::new(pts).resampled(spacing)
}
