//! Hand-designed policies: shortest-path instruction execution (ignoring
//! enemies) and a near-optimal variant that detours to transform enemies
//! when they come close. Both double as distillation teachers.

use std::collections::{BTreeMap, VecDeque};

use gridworld::{Action, Cell, Dir, Goal, GridState, Instruction, InstructionKind, ObjectTypeId, TaskAction, ACTION_COUNT, DIRS};
use task_space::Group;

/// BFS over non-block cells, expanding N, S, W, E (lexicographic
/// tie-break). Returns per-cell distance and predecessor direction.
fn bfs(state: &GridState, start: (usize, usize)) -> (Vec<Option<u32>>, Vec<Option<Dir>>) {
    let (h, w) = (state.height(), state.width());
    let mut dist: Vec<Option<u32>> = vec![None; h * w];
    let mut first_step: Vec<Option<Dir>> = vec![None; h * w];
    let mut queue = VecDeque::new();
    dist[start.0 * w + start.1] = Some(0);
    queue.push_back(start);
    while let Some((r, c)) = queue.pop_front() {
        let base = dist[r * w + c].expect("queued cells have distances");
        for dir in DIRS {
            let (dr, dc) = dir.delta();
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if !state.in_bounds(nr, nc) {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            let idx = nr * w + nc;
            if dist[idx].is_some() || state.cell((nr, nc)) == Cell::Block {
                continue;
            }
            dist[idx] = Some(base + 1);
            first_step[idx] = first_step[r * w + c].or(Some(dir));
            queue.push_back((nr, nc));
        }
    }
    (dist, first_step)
}

fn interaction_action(action: TaskAction, dir: Dir, group: Option<Group>) -> Action {
    match action {
        TaskAction::PickUp => Action::PickUp(dir),
        TaskAction::Transform => Action::Transform(dir),
        TaskAction::InteractWith => match group {
            Some(Group::A) => Action::PickUp(dir),
            Some(Group::B) | None => Action::Transform(dir),
        },
        TaskAction::Visit => Action::NoOp,
    }
}

/// One shortest-path step toward completing `goal`. `None` when no target
/// remains or none is reachable (callers fall back to no-op).
pub fn plan_goal_step(
    state: &GridState,
    goal: Goal,
    groups: Option<&BTreeMap<ObjectTypeId, Group>>,
) -> Option<Action> {
    let targets = state.object_cells(goal.object);
    if targets.is_empty() {
        return None;
    }
    let agent = state.agent();
    let w = state.width();

    if goal.action == TaskAction::Visit {
        if state.cell(agent) == Cell::Object(goal.object) {
            return Some(Action::NoOp);
        }
        let (dist, first) = bfs(state, agent);
        let best = targets
            .iter()
            .filter_map(|&(r, c)| dist[r * w + c].map(|d| (d, r, c)))
            .min()?;
        return first[best.1 * w + best.2].map(Action::Move);
    }

    let group = groups.and_then(|m| m.get(&goal.object).copied());
    // Already adjacent to a target: interact, preferring N, S, W, E.
    for dir in DIRS {
        let (dr, dc) = dir.delta();
        let (nr, nc) = (agent.0 as isize + dr, agent.1 as isize + dc);
        if state.in_bounds(nr, nc) && state.cell((nr as usize, nc as usize)) == Cell::Object(goal.object) {
            return Some(interaction_action(goal.action, dir, group));
        }
    }
    // Otherwise walk toward the nearest cell adjacent to a target.
    let (dist, first) = bfs(state, agent);
    let mut best: Option<(u32, usize, usize)> = None;
    for &(r, c) in &targets {
        for dir in DIRS {
            let (dr, dc) = dir.delta();
            let (ar, ac) = (r as isize + dr, c as isize + dc);
            if !state.in_bounds(ar, ac) {
                continue;
            }
            let (ar, ac) = (ar as usize, ac as usize);
            if state.cell((ar, ac)) == Cell::Block {
                continue;
            }
            if let Some(d) = dist[ar * w + ac] {
                let cand = (d, ar, ac);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
        }
    }
    let (_, br, bc) = best?;
    first[br * w + bc].map(Action::Move)
}

fn current_goal(state: &GridState) -> Option<(Goal, InstructionKind)> {
    state
        .current_instruction()
        .map(|ins: &Instruction| (ins.goal(), ins.kind))
}

/// Executes instructions optimally along BFS shortest paths; never targets
/// enemies. Unreachable targets degrade to no-op.
pub fn shortest_path_policy(state: &GridState) -> Action {
    match current_goal(state) {
        Some((goal, _)) => plan_goal_step(state, goal, None).unwrap_or(Action::NoOp),
        None => Action::NoOp,
    }
}

/// Like the shortest-path policy, but when an enemy sits within
/// `engage_radius` (Manhattan), detour to transform it first.
pub fn near_optimal_policy(state: &GridState, engage_radius: u32) -> Action {
    if let Some(enemy) = state.enemy() {
        let agent = state.agent();
        let manhattan = agent.0.abs_diff(enemy.pos.0) + agent.1.abs_diff(enemy.pos.1);
        if manhattan as u32 <= engage_radius {
            if manhattan == 1 {
                let dir = if enemy.pos.0 < agent.0 {
                    Dir::North
                } else if enemy.pos.0 > agent.0 {
                    Dir::South
                } else if enemy.pos.1 < agent.1 {
                    Dir::West
                } else {
                    Dir::East
                };
                return Action::Transform(dir);
            }
            // Step toward the nearest passable cell adjacent to the enemy.
            let w = state.width();
            let (dist, first) = bfs(state, agent);
            let mut best: Option<(u32, usize, usize)> = None;
            for dir in DIRS {
                let (dr, dc) = dir.delta();
                let (ar, ac) = (enemy.pos.0 as isize + dr, enemy.pos.1 as isize + dc);
                if !state.in_bounds(ar, ac) {
                    continue;
                }
                let (ar, ac) = (ar as usize, ac as usize);
                if state.cell((ar, ac)) == Cell::Block {
                    continue;
                }
                if let Some(d) = dist[ar * w + ac] {
                    let cand = (d, ar, ac);
                    if best.map_or(true, |b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            if let Some((_, br, bc)) = best {
                if let Some(step) = first[br * w + bc] {
                    return Action::Move(step);
                }
            }
        }
    }
    shortest_path_policy(state)
}

/// Scripted per-task expert used as the distillation teacher: a one-hot
/// distribution over the shortest-path action for the goal.
pub struct ScriptedTeacher {
    pub groups: Option<BTreeMap<ObjectTypeId, Group>>,
}

impl rl_train::TeacherPolicy for ScriptedTeacher {
    fn action_dist(
        &self,
        state: &GridState,
        goal: Goal,
    ) -> Result<[f64; ACTION_COUNT], rl_train::TrainError> {
        let action = plan_goal_step(state, goal, self.groups.as_ref()).unwrap_or(Action::NoOp);
        let mut dist = [0.0; ACTION_COUNT];
        dist[action.code() as usize] = 1.0;
        Ok(dist)
    }
}

/// Independent reference distances for the admissibility check.
pub fn bfs_distance_to_cell(state: &GridState, target: (usize, usize)) -> Option<u32> {
    let (dist, _) = bfs(state, state.agent());
    dist[target.0 * state.width() + target.1]
}
