use super::SutParams;
use crate::geometry::Vec2;
use crate::scenario::VehicleState;
use crate::sim::{ControlCommand, VehicleParams};

/// Pure-pursuit steering toward `target`, measured from the rear axle.
/// Returns the normalized steer command (positive right).
pub fn pure_pursuit(state: &VehicleState, target: Vec2, vehicle: &VehicleParams) -> f64 {
    let rear = state.position - Vec2::from_heading(state.heading) * vehicle.cg_to_rear();
    let local = (target - rear).rotated(-state.heading);
    let ld2 = local.norm_sq().max(1e-6);
    let curvature = 2.0 * local.y / ld2;
    let delta = (curvature * vehicle.wheelbase).atan();
    let swa = delta.to_degrees() * vehicle.steer_ratio;
    (-swa / vehicle.swa_max_deg).clamp(-1.0, 1.0)
}

/// PID speed tracking split into throttle and brake.
#[derive(Debug, Clone, Default)]
pub struct SpeedController {
    integral: f64,
    prev_error: Option<f64>,
}

impl SpeedController {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Returns `(throttle, brake)`.
    pub fn update(&mut self, target: f64, speed: f64, dt: f64, p: &SutParams) -> (f64, f64) {
        if target < 0.05 && speed < 0.5 {
            self.reset();
            return (0.0, 1.0);
        }
        let e = target - speed;
        let de = match self.prev_error {
            Some(prev) if dt > 0.0 => (e - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(e);
        if e > -0.5 {
            self.integral = (self.integral + e * dt).clamp(-2.0, 5.0);
        } else {
            self.integral = self.integral.min(0.0);
        }
        let u = p.kp * e + p.ki * self.integral + p.kd * de;
        if u >= 0.0 {
            (u.min(1.0), 0.0)
        } else if e < -0.3 {
            (0.0, (-e * p.kb).clamp(0.0, 1.0))
        } else {
            (0.0, 0.0)
        }
    }
}

/// One control step: steering from pure pursuit, pedals from the PID.
pub fn control(
    target_point: Vec2,
    target_speed: f64,
    state: &VehicleState,
    pid: &mut SpeedController,
    dt: f64,
    params: &SutParams,
    vehicle: &VehicleParams,
) -> ControlCommand {
    let steer = pure_pursuit(state, target_point, vehicle);
    let (throttle, brake) = pid.update(target_speed, state.v_x, dt, params);
    ControlCommand {
        steer,
        throttle,
        brake,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throttle_from_rest() {
        let mut pid = SpeedController::default();
        let (t, b) = pid.update(10.0, 0.0, 0.05, &SutParams::default());
        assert!(t > 0.0);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn brakes_when_too_fast() {
        let mut pid = SpeedController::default();
        let (t, b) = pid.update(5.0, 10.0, 0.05, &SutParams::default());
        assert_eq!(t, 0.0);
        assert!(b > 0.0);
    }

    #[test]
    fn steer_toward_left_target_is_negative() {
        let s = VehicleState::default();
        let v = VehicleParams::default();
        assert!(pure_pursuit(&s, Vec2::new(10.0, 2.0), &v) < 0.0);
        assert!(pure_pursuit(&s, Vec2::new(10.0, -2.0), &v) > 0.0);
        assert!(pure_pursuit(&s, Vec2::new(10.0, 0.0), &v).abs() < 1e-12);
    }
}
