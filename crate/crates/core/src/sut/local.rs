use super::planner::Route;
use super::SutConfig;
use crate::geometry::{Obb, Vec2};
use crate::scenario::map::LightPhase;
use crate::scenario::LaneMap;
use crate::sim::{Entity, ObjectKind, Observation, PerceivedObject};

const PREDICTION_STEP: f64 = 0.25;

/// Output of the local planner for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPlan {
    pub target_point: Vec2,
    pub target_speed: f64,
    /// Route point closest to the ego.
    pub progress: usize,
    /// Arc length of the ego along the route.
    pub s: f64,
    /// Object that bounds the target speed, if any.
    pub blocking: Option<Entity>,
}

/// Distance from `p` to the footprint of `o` (zero inside).
fn point_obb_distance(o: &Obb, p: Vec2) -> f64 {
    let d = (p - o.center).rotated(-o.heading);
    let dx = (d.x.abs() - o.half_extents.x).max(0.0);
    let dy = (d.y.abs() - o.half_extents.y).max(0.0);
    dx.hypot(dy)
}

struct Threat {
    gap: f64,
    lead_speed: f64,
}

struct PathView<'a> {
    route: &'a Route,
    from: usize,
    s_ego: f64,
    preview: f64,
}

impl PathView<'_> {
    /// Route distance ahead of the ego center where `fp` first comes within
    /// `half_width` of the path.
    fn first_hit(&self, fp: &Obb, half_width: f64) -> Option<(f64, usize)> {
        let reach = half_width + fp.bounding_radius();
        for (k, p) in self.route.points[self.from..].iter().enumerate() {
            let d = p.s - self.s_ego;
            if d > self.preview {
                break;
            }
            if p.position.dist(fp.center) > reach {
                continue;
            }
            if point_obb_distance(fp, p.position) <= half_width {
                return Some((d, self.from + k));
            }
        }
        None
    }
}

fn assess(
    obj: &PerceivedObject,
    obs: &Observation,
    view: &PathView<'_>,
    map: &LaneMap,
    cfg: &SutConfig,
    half: Vec2,
) -> Option<Threat> {
    let defects = cfg.defects;
    let ego = &obs.ego;
    let fp = Obb::new(obj.pose.position, obj.half_extents, obj.pose.heading);
    if fp.center.dist(ego.position) > view.preview + fp.bounding_radius() + half.x {
        return None;
    }
    if defects.same_lane_only {
        let on_lane = obs
            .lane
            .is_some_and(|ctx| map.lane(ctx.lane).contains(fp.center));
        if !on_lane {
            return None;
        }
    }
    let (half_width, front) = if defects.point_vehicle {
        (0.0, 0.0)
    } else {
        (half.y + cfg.params.corridor_margin, half.x)
    };
    if let Some((d, k)) = view.first_hit(&fp, half_width) {
        let gap = if defects.point_vehicle {
            fp.center.dist(ego.position)
        } else {
            d - front
        };
        let dir = view.route.line.pose_at(view.route.points[k].s).heading;
        let lead_speed = obj.velocity.dot(Vec2::from_heading(dir)).max(0.0);
        return Some(Threat { gap, lead_speed });
    }
    if defects.no_cut_in_prediction || obj.kind == ObjectKind::Static || obj.velocity.norm() < 0.3 {
        return None;
    }
    // Objects currently beside or ahead of the ego that will move into the
    // path before the ego has passed.
    let local = ego.pose().to_local(fp.center);
    if local.x < -half.x {
        return None;
    }
    let v_ego = ego.v_x.max(1.0);
    let steps = (cfg.params.prediction_horizon / PREDICTION_STEP).round() as usize;
    for i in 1..=steps {
        let t = i as f64 * PREDICTION_STEP;
        let moved = Obb::new(fp.center + obj.velocity * t, fp.half_extents, fp.heading);
        if let Some((d, _)) = view.first_hit(&moved, half_width) {
            let arrival = (d - front).max(0.0) / v_ego;
            if t <= arrival + 1.0 {
                return Some(Threat {
                    gap: d - front,
                    lead_speed: 0.0,
                });
            }
        }
    }
    None
}

/// Picks the pursuit point and target speed from the route, lane limits,
/// curvature, perceived objects and the light ahead.
pub fn plan_local(
    route: &Route,
    obs: &Observation,
    progress: usize,
    map: &LaneMap,
    cfg: &SutConfig,
    half: Vec2,
    lookahead_min: f64,
) -> LocalPlan {
    let p = &cfg.params;
    let faults = &cfg.faults;
    let ego = &obs.ego;
    let pts = &route.points;

    let lo = progress.saturating_sub(5);
    let hi = (progress + 80).min(pts.len());
    let idx = (lo..hi)
        .min_by(|&a, &b| {
            pts[a]
                .position
                .dist(ego.position)
                .total_cmp(&pts[b].position.dist(ego.position))
                .then(a.cmp(&b))
        })
        .unwrap_or(progress);
    let s_ego = route
        .line
        .project_range(
            ego.position,
            idx.saturating_sub(1),
            (idx + 1).min(pts.len() - 1),
        )
        .s;

    let speed_scale = if faults.target_speed_above_limit {
        1.5
    } else {
        1.0
    };
    let limit_at = |k: usize| {
        if faults.target_speed_above_limit {
            pts[k].speed_limit * speed_scale
        } else {
            (pts[k].speed_limit - p.limit_margin).min(p.cruise_speed)
        }
    };
    let v_now = ego.v_x;
    let mut v = limit_at(idx);

    let preview = 20.0 + v_now * v_now / (2.0 * p.comfort_decel);
    for (k, pt) in pts.iter().enumerate().skip(idx) {
        let d = pt.s - s_ego;
        if d > preview {
            break;
        }
        let d = d.max(0.0);
        let kappa = pt.curvature.abs();
        if kappa > 1e-4 {
            let vc = (p.max_lateral_accel / kappa).sqrt();
            v = v.min((vc * vc + 2.0 * p.comfort_decel * d).sqrt());
        }
        let lim = limit_at(k);
        v = v.min((lim * lim + 2.0 * p.comfort_decel * d).sqrt());
    }

    let to_goal = route.length() - s_ego;
    v = v.min((2.0 * p.comfort_decel * (to_goal - 0.5).max(0.0)).sqrt());

    let mut blocking = None;
    if !faults.disable_obstacle_stop {
        let view = PathView {
            route,
            from: idx,
            s_ego,
            preview: 30.0 + v_now * v_now / (2.0 * p.obstacle_decel),
        };
        for obj in &obs.objects {
            if let Some(t) = assess(obj, obs, &view, map, cfg, half) {
                let room = (t.gap - p.stop_margin).max(0.0);
                let allowed = (t.lead_speed * t.lead_speed + 2.0 * p.obstacle_decel * room).sqrt();
                let allowed = if room <= 0.0 { 0.0 } else { allowed };
                if allowed < v {
                    v = allowed;
                    blocking = Some(obj.entity);
                }
            }
        }
    }

    if !faults.disable_traffic_light_detection {
        if let Some(light) = obs.light {
            let d = light.distance_to_stop_line - half.x;
            let stop = match light.phase {
                LightPhase::Red => d > 0.0,
                LightPhase::Yellow => d > v_now * v_now / (2.0 * p.comfort_decel) + 1.0,
                LightPhase::Green => false,
            };
            if stop {
                v = v.min((2.0 * p.obstacle_decel * (d - 2.0).max(0.0)).sqrt());
            }
        }
    }

    let ld = lookahead_min.max(p.lookahead_gain * v_now);
    let s_target = s_ego + ld;
    let target_point = if s_target <= route.length() {
        route.line.point_at(s_target)
    } else {
        let end = route.line.pose_at(route.length());
        end.position + Vec2::from_heading(end.heading) * (s_target - route.length())
    };

    LocalPlan {
        target_point,
        target_speed: v.max(0.0),
        progress: idx,
        s: s_ego,
        blocking,
    }
}
