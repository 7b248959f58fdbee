//! Ego plant: single-track dynamic bicycle model with per-axle friction
//! limits, blended into the kinematic model at walking speeds where the
//! slip-angle equations become singular.

use super::config::{SimConfig, GRAVITY};
use super::ControlCommand;
use crate::geometry::{wrap_angle, Vec2};
use crate::scenario::{PuddleSpec, VehicleState, Weather};

/// Road friction at `p`: weather scales the dry value down, puddles cap it.
pub fn effective_friction(
    p: Vec2,
    puddles: &[PuddleSpec],
    weather: &Weather,
    cfg: &SimConfig,
) -> f64 {
    let dry = cfg.dry_friction;
    let mut mu =
        dry * (1.0 - cfg.k_wet * weather.wetness - cfg.k_ground_water * weather.ground_water);
    for puddle in puddles {
        if puddle.area().contains(p) {
            mu = mu.min(puddle.friction);
        }
    }
    mu.clamp(0.05, dry)
}

/// Friction seen by the front and rear axles in the last substep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxleFriction {
    pub front: f64,
    pub rear: f64,
}

/// Advances the ego by one frame under `cmd`.
pub fn step_ego(
    s: &VehicleState,
    cmd: &ControlCommand,
    cfg: &SimConfig,
    friction: &dyn Fn(Vec2) -> f64,
) -> (VehicleState, AxleFriction) {
    let v = &cfg.vehicle;
    let cmd = cmd.clamped();
    let n = cfg.substeps.max(1);
    let h = cfg.dt / n as f64;
    let m = v.mass;
    let l = v.wheelbase;
    let a = v.cg_to_front;
    let b = v.cg_to_rear();

    let target_swa = -cmd.steer * v.swa_max_deg;
    let mut pos = s.position;
    let mut psi = s.heading;
    let mut vx = s.v_x;
    let mut vy = s.v_y;
    let mut r = s.yaw_rate;
    let mut swa = s.swa_deg;
    let mut ax_prev = s.a_x;
    let mut sum_ax = 0.0;
    let mut sum_ay = 0.0;
    let mut axle = AxleFriction::default();

    let drive = cmd.throttle * v.max_engine_force;
    let brake_force = cmd.brake * v.max_brake_force;

    for _ in 0..n {
        let max_d = v.swa_rate_deg * h;
        swa += (target_swa - swa).clamp(-max_d, max_d);
        swa = swa.clamp(-v.swa_max_deg, v.swa_max_deg);
        let delta = (swa / v.steer_ratio).to_radians();
        let (sd, cd) = delta.sin_cos();

        let fwd = Vec2::from_heading(psi);
        let mu_f = friction(pos + fwd * a);
        let mu_r = friction(pos - fwd * b);
        axle = AxleFriction {
            front: mu_f,
            rear: mu_r,
        };

        let moving = vx > 1e-3;
        let rolling = v.rolling_resistance * m * GRAVITY;
        if !moving && drive <= brake_force + rolling {
            vx = 0.0;
            vy = 0.0;
            r = 0.0;
            ax_prev = 0.0;
            continue;
        }

        let shift = m * ax_prev * v.cg_height / l;
        let fz_f = (m * GRAVITY * b / l - shift).max(0.05 * m * GRAVITY);
        let fz_r = (m * GRAVITY * a / l + shift).max(0.05 * m * GRAVITY);

        let (brake_f, brake_r) = if moving {
            (
                brake_force * v.brake_front_share,
                brake_force * (1.0 - v.brake_front_share),
            )
        } else {
            (0.0, 0.0)
        };
        let fx_f = (-brake_f).clamp(-mu_f * fz_f, mu_f * fz_f);
        let fx_r = (drive - brake_r).clamp(-mu_r * fz_r, mu_r * fz_r);
        let resist = if moving {
            rolling + v.drag * vx * vx
        } else {
            0.0
        };

        let w = ((vx - cfg.kinematic_below) / (cfg.dynamic_above - cfg.kinematic_below))
            .clamp(0.0, 1.0);

        let (mut vx_n, mut vy_n, mut r_n) = (0.0, 0.0, 0.0);
        if w > 0.0 {
            let vxs = vx.max(1.0);
            let alpha_f = delta - ((vy + a * r) / vxs).atan();
            let alpha_r = -((vy - b * r) / vxs).atan();
            let cap_f = ((mu_f * fz_f).powi(2) - fx_f * fx_f).max(0.0).sqrt();
            let cap_r = ((mu_r * fz_r).powi(2) - fx_r * fx_r).max(0.0).sqrt();
            let fy_f = (v.cornering_front * alpha_f).clamp(-cap_f, cap_f);
            let fy_r = (v.cornering_rear * alpha_r).clamp(-cap_r, cap_r);
            let fx_body = fx_r + fx_f * cd - fy_f * sd - resist;
            let fy_body = fy_r + fy_f * cd + fx_f * sd;
            let mz = a * (fy_f * cd + fx_f * sd) - b * fy_r;
            vx_n += w * (vx + h * (fx_body / m + vy * r));
            vy_n += w * (vy + h * (fy_body / m - vx * r));
            r_n += w * (r + h * mz / v.yaw_inertia);
        }
        if w < 1.0 {
            let vx_k = (vx + h * (fx_r + fx_f * cd - resist) / m).max(0.0);
            let r_k = vx_k * delta.tan() / l;
            vx_n += (1.0 - w) * vx_k;
            vy_n += (1.0 - w) * r_k * b;
            r_n += (1.0 - w) * r_k;
        }
        vx_n = vx_n.max(0.0);

        let ax = (vx_n - vx) / h - vy * r;
        let ay = (vy_n - vy) / h + vx * r;
        sum_ax += ax;
        sum_ay += ay;
        ax_prev = ax;

        let vel = Vec2::new(vx_n, vy_n).rotated(psi);
        pos += vel * h;
        psi += r_n * h;
        vx = vx_n;
        vy = vy_n;
        r = r_n;
    }

    let next = VehicleState {
        position: pos,
        heading: wrap_angle(psi),
        v_x: vx,
        v_y: vy,
        yaw_rate: r,
        a_x: sum_ax / n as f64,
        a_y_g: sum_ay / n as f64 / GRAVITY,
        swa_deg: swa,
        throttle: cmd.throttle,
        brake: cmd.brake,
        frame_index: s.frame_index + 1,
        sim_time: (s.frame_index + 1) as f64 * cfg.dt,
    };
    (next, axle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dry(cfg: &SimConfig) -> impl Fn(Vec2) -> f64 + '_ {
        move |_| cfg.dry_friction
    }

    fn drive(
        cfg: &SimConfig,
        mut s: VehicleState,
        cmd: ControlCommand,
        frames: usize,
    ) -> Vec<VehicleState> {
        let f = dry(cfg);
        let mut out = Vec::with_capacity(frames);
        for _ in 0..frames {
            s = step_ego(&s, &cmd, cfg, &f).0;
            out.push(s);
        }
        out
    }

    #[test]
    fn friction_cases() {
        let cfg = SimConfig::default();
        let sunny = Weather::sunny();
        assert_eq!(effective_friction(Vec2::ZERO, &[], &sunny, &cfg), 0.9);
        let puddle = PuddleSpec {
            center: Vec2::ZERO,
            half_extents: Vec2::new(2.0, 2.0),
            heading: 0.0,
            friction: 0.2,
        };
        assert_eq!(effective_friction(Vec2::ZERO, &[puddle], &sunny, &cfg), 0.2);
        let wet = Weather {
            wetness: 1.0,
            ..sunny
        };
        assert!((effective_friction(Vec2::ZERO, &[], &wet, &cfg) - 0.63).abs() < 1e-12);
    }

    #[test]
    fn zero_command_from_rest_stays_put() {
        let cfg = SimConfig::default();
        let states = drive(&cfg, VehicleState::default(), ControlCommand::ZERO, 100);
        let last = states.last().unwrap();
        assert!(last.position.norm() < 1e-9);
        assert_eq!(last.v_x, 0.0);
    }

    #[test]
    fn full_throttle_accelerates_for_five_seconds() {
        let cfg = SimConfig::default();
        let cmd = ControlCommand {
            steer: 0.0,
            throttle: 1.0,
            brake: 0.0,
        };
        let states = drive(&cfg, VehicleState::default(), cmd, 100);
        for w in states.windows(2) {
            assert!(w[1].v_x > w[0].v_x);
        }
    }

    #[test]
    fn sim_time_tracks_frame_index() {
        let cfg = SimConfig::default();
        let cmd = ControlCommand {
            steer: 0.2,
            throttle: 0.5,
            brake: 0.0,
        };
        for s in drive(&cfg, VehicleState::default(), cmd, 50) {
            assert_eq!(s.sim_time, s.frame_index as f64 * cfg.dt);
            assert!(s.swa_deg.abs() <= cfg.vehicle.swa_max_deg);
        }
    }

    #[test]
    fn steering_sign_convention() {
        let cfg = SimConfig::default();
        let start = VehicleState {
            v_x: 8.0,
            ..Default::default()
        };
        let left = ControlCommand {
            steer: -0.2,
            throttle: 0.2,
            brake: 0.0,
        };
        let s = drive(&cfg, start, left, 40);
        assert!(s.last().unwrap().heading > 0.1, "negative steer turns left");
        assert!(s.last().unwrap().swa_deg > 0.0);
    }
}
