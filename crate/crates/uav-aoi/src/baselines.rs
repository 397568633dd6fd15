//! Non-learning reference policies.
//!
//! Two handcrafted decision rules bracket the learned agents:
//!
//! - [`GreedyPolicy`] always chases the stalest task, sensing it from
//!   the nearest feasible point, so it spends as little time flying as
//!   the task choice allows.
//! - [`ShortestRoutePolicy`] ignores staleness entirely and circles the
//!   tasks along a precomputed minimal closed tour, choosing where to
//!   sense each task so the tour itself is as short as possible.
//!
//! The tour comes from an exact bitmask dynamic program over the task
//! targets ([`held_karp_order`]) alternated with projected gradient
//! descent over the sensing points within their feasibility disks
//! ([`refine_locations`]), a small instance of touring disk
//! neighborhoods.

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::agents::{AgentError, Policy};
use crate::config::ScenarioConfig;
use crate::env::{Action, EnvState, TaskId};
use crate::geometry::Vec3;
use crate::sensing::{sensing_radius, SensingParams};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("point count {0} outside the exact-solver range 2..=20")]
    PointCountOutOfRange(usize),
}

/// Always sense the task whose information is stalest.
///
/// Ties go to the lowest task id. The sensing location is the point of
/// the chosen task's feasibility disk nearest the UAV's current
/// position (the disk center when the UAV is directly above it), which
/// minimizes the flight leg for that choice.
pub struct GreedyPolicy {
    uav: usize,
    cfg: ScenarioConfig,
}

impl GreedyPolicy {
    pub fn for_uav(uav: usize, cfg: &ScenarioConfig) -> Self {
        GreedyPolicy { uav, cfg: cfg.clone() }
    }
}

/// Nearest point of the disk (center, radius) to `from`, all in the
/// horizontal plane at altitude `z`.
fn nearest_disk_point(center: Vec3, radius: f64, from: Vec3, z: f64) -> Vec3 {
    let dx = from.x - center.x;
    let dy = from.y - center.y;
    let rho = (dx * dx + dy * dy).sqrt();
    if rho < 1e-12 {
        return Vec3::new(center.x, center.y, z);
    }
    let reach = rho.min(radius);
    Vec3::new(center.x + reach * dx / rho, center.y + reach * dy / rho, z)
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn select(
        &mut self,
        state: &EnvState,
        admissible: &[TaskId],
        _explore: bool,
        _rng: &mut dyn RngCore,
    ) -> Result<Action, AgentError> {
        if admissible.is_empty() {
            return Err(AgentError::NoAdmissibleTask);
        }
        let mut task = admissible[0];
        for &j in &admissible[1..] {
            if state.aoi_cycles[j - 1] > state.aoi_cycles[task - 1] {
                task = j;
            }
        }
        let params = SensingParams::from_config(&self.cfg);
        let h = self.cfg.uav_altitude;
        let location = nearest_disk_point(
            self.cfg.target_of(task),
            sensing_radius(h, &params),
            state.uavs[self.uav].position,
            h,
        );
        Ok(Action { task, location })
    }
}

/// A closed sensing tour: the visiting order over task ids and one
/// sensing point per task (indexed by task id minus one), each inside
/// its task's feasibility disk at flight altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub order: Vec<TaskId>,
    pub points: Vec<Vec3>,
    pub length: f64,
}

fn horizontal(a: Vec3, b: Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

fn tour_length(order: &[usize], points: &[Vec3]) -> f64 {
    let n = order.len();
    (0..n).map(|k| horizontal(points[order[k]], points[order[(k + 1) % n]])).sum()
}

/// Exact minimal closed tour over the given points by the bitmask
/// dynamic program, O(2^n * n^2). Returns the visiting order as indices
/// into `points` (starting at 0) and the tour length. Among equally
/// short tours the lexicographically smallest order wins.
pub fn held_karp_order(points: &[Vec3]) -> Result<(Vec<usize>, f64), RouteError> {
    let n = points.len();
    if !(2..=20).contains(&n) {
        return Err(RouteError::PointCountOutOfRange(n));
    }
    let dist: Vec<f64> =
        (0..n * n).map(|k| horizontal(points[k / n], points[k % n])).collect();
    let full: usize = (1 << n) - 1;

    // best[mask * n + last]: cost to visit everything outside `mask`
    // from `last` and return to 0. Filled from full mask downward so a
    // forward greedy walk can pick the smallest next index among the
    // optimal continuations, which yields the lexicographic minimum.
    let mut best = vec![f64::INFINITY; (full + 1) * n];
    for last in 0..n {
        best[full * n + last] = dist[last * n];
    }
    for mask in (1..full).rev() {
        if mask & 1 == 0 {
            continue;
        }
        for last in 0..n {
            if mask & (1 << last) == 0 {
                continue;
            }
            let mut acc = f64::INFINITY;
            for next in 1..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let cand = dist[last * n + next] + best[(mask | (1 << next)) * n + next];
                if cand < acc {
                    acc = cand;
                }
            }
            best[mask * n + last] = acc;
        }
    }

    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut mask = 1usize;
    let mut last = 0usize;
    while mask != full {
        let target = best[mask * n + last];
        let mut chosen = None;
        for next in 1..n {
            if mask & (1 << next) != 0 {
                continue;
            }
            let cand = dist[last * n + next] + best[(mask | (1 << next)) * n + next];
            if cand == target {
                chosen = Some(next);
                break;
            }
        }
        let next = chosen.expect("an optimal continuation always exists");
        order.push(next);
        mask |= 1 << next;
        last = next;
    }
    Ok((order, best[n]))
}

/// Shrink a closed tour by sliding each sensing point inside its
/// feasibility disk: projected gradient descent on the tour length with
/// a full sweep per iteration, reverting and halving the step when a
/// sweep fails to improve. Points start at the disk centers, so the
/// result never exceeds the center tour. `order` holds 0-based indices
/// into `targets`.
pub fn refine_locations(
    order: &[usize],
    targets: &[Vec3],
    r_s: f64,
    altitude: f64,
    max_sweeps: usize,
) -> RoutePlan {
    assert!(r_s >= 0.0, "disk radius must be non-negative");
    let n = order.len();
    assert!(n >= 2 && targets.len() == n, "order and targets must cover the same tasks");

    let mut points: Vec<Vec3> = targets.iter().map(|t| Vec3::new(t.x, t.y, altitude)).collect();
    let mut length = tour_length(order, &points);
    let mut step = r_s / 10.0;

    for _ in 0..max_sweeps {
        if step <= 0.0 {
            break;
        }
        let mut trial = points.clone();
        for k in 0..n {
            let i = order[k];
            let prev = trial[order[(k + n - 1) % n]];
            let next = trial[order[(k + 1) % n]];
            let p = trial[i];
            // Gradient of |p - prev| + |p - next| in the plane; a
            // coincident neighbor contributes nothing.
            let mut gx = 0.0;
            let mut gy = 0.0;
            for nb in [prev, next] {
                let d = horizontal(p, nb);
                if d > 1e-12 {
                    gx += (p.x - nb.x) / d;
                    gy += (p.y - nb.y) / d;
                }
            }
            let mut cand =
                Vec3::new(p.x - step * gx, p.y - step * gy, altitude);
            // Project back onto the task's disk.
            let t = targets[i];
            let rho = horizontal(cand, t);
            if rho > r_s {
                let shrink = r_s / rho;
                cand = Vec3::new(
                    t.x + (cand.x - t.x) * shrink,
                    t.y + (cand.y - t.y) * shrink,
                    altitude,
                );
            }
            trial[i] = cand;
        }
        let trial_length = tour_length(order, &trial);
        if trial_length < length {
            let improvement = (length - trial_length) / length.max(f64::MIN_POSITIVE);
            points = trial;
            length = trial_length;
            if improvement < 1e-8 {
                break;
            }
        } else {
            step *= 0.5;
        }
    }

    RoutePlan { order: order.iter().map(|&i| i + 1).collect(), points, length }
}

/// Build the shortest-route plan for a scenario: exact order over the
/// task targets, descent over the sensing points, then one alternation
/// (re-solve the order on the refined points and refine again), keeping
/// the shorter outcome.
pub fn build_route_plan(cfg: &ScenarioConfig) -> Result<RoutePlan, RouteError> {
    let targets: Vec<Vec3> = (1..=cfg.num_tasks).map(|j| cfg.target_of(j)).collect();
    let params = SensingParams::from_config(cfg);
    let r_s = sensing_radius(cfg.uav_altitude, &params);
    let sweeps = 10_000;

    let (order, _) = held_karp_order(&targets)?;
    let first = refine_locations(&order, &targets, r_s, cfg.uav_altitude, sweeps);
    let (order2, _) = held_karp_order(&first.points)?;
    let second = refine_locations(&order2, &targets, r_s, cfg.uav_altitude, sweeps);
    Ok(if second.length <= first.length { second } else { first })
}

/// Circle the tasks along a fixed minimal tour, starting each episode
/// at a random tour position. Staleness is ignored; coverage comes from
/// the rotation. Inadmissible tasks are skipped cyclically.
pub struct ShortestRoutePolicy {
    plan: RoutePlan,
    start: usize,
    cursor: Option<usize>,
}

impl ShortestRoutePolicy {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, RouteError> {
        Ok(ShortestRoutePolicy { plan: build_route_plan(cfg)?, start: 0, cursor: None })
    }

    pub fn with_plan(plan: RoutePlan) -> Self {
        ShortestRoutePolicy { plan, start: 0, cursor: None }
    }

    pub fn plan(&self) -> &RoutePlan {
        &self.plan
    }
}

impl Policy for ShortestRoutePolicy {
    fn name(&self) -> &'static str {
        "shortest-route"
    }

    fn select(
        &mut self,
        state: &EnvState,
        admissible: &[TaskId],
        _explore: bool,
        _rng: &mut dyn RngCore,
    ) -> Result<Action, AgentError> {
        if admissible.is_empty() {
            return Err(AgentError::NoAdmissibleTask);
        }
        let n = self.plan.order.len();
        // The opening commitment (and its fleet-wide re-issue at cycle
        // 2) starts at the rolled position; afterwards every decision
        // means the previous task executed, so the tour advances.
        let from = match self.cursor {
            Some(k) if state.cycle_index > 2 => (k + 1) % n,
            _ => self.start,
        };
        for ahead in 0..n {
            let pos = (from + ahead) % n;
            let task = self.plan.order[pos];
            if admissible.contains(&task) {
                self.cursor = Some(pos);
                return Ok(Action { task, location: self.plan.points[task - 1] });
            }
        }
        Err(AgentError::NoAdmissibleTask)
    }

    fn begin_episode(&mut self, _episode: usize, rng: &mut dyn RngCore) {
        self.start = rng.gen_range(0..self.plan.order.len());
        self.cursor = None;
    }
}
