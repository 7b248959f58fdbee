use super::control::{control, SpeedController};
use super::local::plan_local;
use super::planner::{plan_global, Route};
use super::{Sut, SutConfig};
use crate::error::PlanError;
use crate::scenario::{LaneMap, Mission};
use crate::sim::{ControlCommand, Observation, VehicleParams};
use std::sync::Arc;

/// Reference driving stack: global route, rule-based local planner,
/// pure-pursuit steering and PID speed control.
pub struct ReferenceSut {
    cfg: SutConfig,
    vehicle: VehicleParams,
    map: Option<Arc<LaneMap>>,
    route: Option<Route>,
    progress: usize,
    pid: SpeedController,
    last_time: Option<f64>,
}

impl ReferenceSut {
    pub fn new(cfg: SutConfig) -> Self {
        Self {
            cfg,
            vehicle: VehicleParams::default(),
            map: None,
            route: None,
            progress: 0,
            pid: SpeedController::default(),
            last_time: None,
        }
    }

    pub fn with_vehicle(mut self, vehicle: VehicleParams) -> Self {
        self.vehicle = vehicle;
        self
    }

    pub fn config(&self) -> &SutConfig {
        &self.cfg
    }

    pub fn route(&self) -> Option<&Route> {
        self.route.as_ref()
    }

    fn lookahead_min(&self) -> f64 {
        if self.cfg.defects.long_lookahead {
            self.cfg.params.lookahead_min_defective
        } else {
            self.cfg.params.lookahead_min
        }
    }
}

impl Sut for ReferenceSut {
    fn init(&mut self, map: Arc<LaneMap>, mission: &Mission) -> Result<(), PlanError> {
        self.reset();
        self.route = Some(plan_global(&map, mission)?);
        self.map = Some(map);
        Ok(())
    }

    fn decide(&mut self, obs: &Observation) -> ControlCommand {
        if self.cfg.faults.disable_control {
            return ControlCommand::ZERO;
        }
        let (Some(route), Some(map)) = (&self.route, &self.map) else {
            return ControlCommand {
                steer: 0.0,
                throttle: 0.0,
                brake: 1.0,
            };
        };
        let dt = match self.last_time {
            Some(t) if obs.sim_time > t => obs.sim_time - t,
            _ => 0.05,
        };
        self.last_time = Some(obs.sim_time);
        let plan = plan_local(
            route,
            obs,
            self.progress,
            map,
            &self.cfg,
            self.vehicle.half_extents,
            self.lookahead_min(),
        );
        self.progress = plan.progress;
        let mut cmd = control(
            plan.target_point,
            plan.target_speed,
            &obs.ego,
            &mut self.pid,
            dt,
            &self.cfg.params,
            &self.vehicle,
        );
        if self.cfg.faults.force_steer_left {
            cmd.steer = -1.0;
        }
        cmd
    }

    fn reset(&mut self) {
        self.route = None;
        self.map = None;
        self.progress = 0;
        self.pid.reset();
        self.last_time = None;
    }
}
