use crate::geometry::{wrap_angle, Pose};
use crate::scenario::{LaneId, LaneMap};

/// Heading mismatch beyond which a lane is not considered the one being
/// driven, radians.
const MAX_HEADING_ERROR: f64 = 1.0;

/// Tracks which lane a vehicle is on, preferring continuity with the lane
/// it was on before so overlapping junction connectors do not flicker.
#[derive(Debug, Clone, Default)]
pub struct LaneTracker {
    current: Option<LaneId>,
}

impl LaneTracker {
    pub fn current(&self) -> Option<LaneId> {
        self.current
    }

    fn fit(map: &LaneMap, id: LaneId, pose: &Pose) -> Option<f64> {
        let lane = map.lane(id);
        let proj = lane.project(pose.position);
        if proj.distance > lane.width * 0.5 {
            return None;
        }
        let dh = wrap_angle(pose.heading - lane.centerline.heading_at(proj.s)).abs();
        (dh <= MAX_HEADING_ERROR).then_some(proj.distance + 2.0 * dh)
    }

    pub fn update(&mut self, map: &LaneMap, pose: &Pose) -> Option<LaneId> {
        if let Some(c) = self.current {
            let lane = map.lane(c);
            let at_end = lane.project(pose.position).s >= lane.length() - 0.05;
            if !at_end && Self::fit(map, c, pose).is_some() {
                return self.current;
            }
            let mut candidates: Vec<LaneId> = Vec::new();
            for &s in &lane.successors {
                candidates.push(s);
                candidates.extend_from_slice(&map.lane(s).successors);
            }
            candidates.extend(lane.adjacent_left);
            candidates.extend(lane.adjacent_right);
            candidates.extend_from_slice(&lane.predecessors);
            if at_end {
                candidates.push(c);
            }
            let best = candidates
                .iter()
                .filter_map(|&id| Self::fit(map, id, pose).map(|cost| (cost, id)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, id)) = best {
                self.current = Some(id);
                return self.current;
            }
        }
        self.current = map
            .lanes_near(pose.position, 0.0)
            .filter_map(|l| Self::fit(map, l.id, pose).map(|cost| (cost, l.id)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id);
        self.current
    }
}
