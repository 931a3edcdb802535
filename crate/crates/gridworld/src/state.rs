//! World state, generation, and the step dynamics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::WorldConfig;
use crate::tables::{Tables, TransformOutcome};
use crate::types::{Action, Cell, Dir, Enemy, Goal, Instruction, InstructionKind, ObjectTypeId, TaskAction, DIRS};
use crate::GridError;

pub const TIME_PENALTY: f64 = -0.1;
pub const WATER_PENALTY: f64 = -0.3;
pub const ENEMY_REWARD: f64 = 0.9;
pub const SUCCESS_REWARD: f64 = 1.0;

const GENERATION_ATTEMPTS: usize = 100;

/// Binary observation tensor: (3 + object types) x height x width.
/// Channel 0 is the agent, 1 blocks, 2 water, then one channel per object
/// type in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

/// Complete, cloneable environment state. Cloning snapshots the RNG, so a
/// clone replays identically under the same actions.
#[derive(Debug, Clone)]
pub struct GridState {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    agent: (usize, usize),
    enemy: Option<Enemy>,
    step_count: u32,
    episode_limit: u32,
    enemy_spawn_prob: f64,
    enemy_lifetime: u32,
    object_type_count: usize,
    outcomes: Vec<TransformOutcome>,
    instructions: Vec<Instruction>,
    completed: usize,
    done: bool,
    rng: ChaCha8Rng,
    // Cumulative interaction events since reset, plus segment bases so both
    // instruction progress and subtask oracles can ask "since when?".
    picked_cum: Vec<u32>,
    transformed_cum: Vec<u32>,
    instr_base_picked: Vec<u32>,
    instr_base_transformed: Vec<u32>,
    subtask_base_picked: Vec<u32>,
    subtask_base_transformed: Vec<u32>,
}

/// Extra per-step facts beyond the reward.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub moved: bool,
    pub entered_water: bool,
    pub enemy_transformed: bool,
    pub instruction_completed: bool,
    pub all_instructions_done: bool,
}

/// How many of each object type the instruction list needs available, in
/// order, assuming earlier consuming instructions remove their targets.
fn required_counts(instructions: &[Instruction], n_types: usize) -> Vec<usize> {
    let mut consumed = vec![0usize; n_types];
    let mut required = vec![0usize; n_types];
    for ins in instructions {
        let t = ins.object.index();
        if t >= n_types {
            continue;
        }
        required[t] = required[t].max(consumed[t] + 1);
        match ins.kind {
            InstructionKind::Visit => {}
            InstructionKind::PickUp | InstructionKind::Transform | InstructionKind::InteractWith => {
                consumed[t] += 1;
            }
            InstructionKind::PickUpAll | InstructionKind::TransformAll => {
                // Clears the type; later instructions on it are unsatisfiable
                // and the sampler never emits them.
                consumed[t] = usize::MAX / 2;
            }
        }
    }
    required
}

impl GridState {
    /// Generate a world from the config seed alone. The same arguments
    /// produce an identical state.
    pub fn reset(
        config: &WorldConfig,
        instructions: &[Instruction],
        tables: &Tables,
    ) -> Result<(GridState, Observation), GridError> {
        config.validate(tables.object_count())?;
        if instructions.is_empty() {
            return Err(GridError::EmptyInstructions);
        }
        let n_types = tables.object_count();
        for ins in instructions {
            if ins.object.index() >= n_types {
                return Err(GridError::UnknownObjectId(ins.object.0));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let required = required_counts(instructions, n_types);
        let placeable = config.placeable(n_types);

        for _ in 0..GENERATION_ATTEMPTS {
            if let Some(state) = Self::try_generate(config, instructions, tables, &required, &placeable, &mut rng) {
                let obs = state.observe();
                return Ok((state, obs));
            }
        }
        Err(GridError::Generation {
            attempts: GENERATION_ATTEMPTS,
        })
    }

    fn try_generate(
        config: &WorldConfig,
        instructions: &[Instruction],
        tables: &Tables,
        required: &[usize],
        placeable: &[ObjectTypeId],
        rng: &mut ChaCha8Rng,
    ) -> Option<GridState> {
        let (h, w) = (config.height, config.width);
        let mut cells = vec![Cell::Empty; h * w];
        for cell in cells.iter_mut() {
            if rng.gen::<f64>() < config.wall_density {
                *cell = if rng.gen_bool(0.5) { Cell::Block } else { Cell::Water };
            }
        }

        let mut free: Vec<usize> = (0..h * w).filter(|&i| cells[i] == Cell::Empty).collect();
        free.shuffle(rng);

        let required_total: usize = required.iter().sum();
        // One cell stays free for the agent.
        if free.len() < required_total + 1 {
            return None;
        }

        let place = |cells: &mut Vec<Cell>, free: &mut Vec<usize>, t: ObjectTypeId| -> bool {
            match free.pop() {
                Some(idx) => {
                    cells[idx] = Cell::Object(t);
                    true
                }
                None => false,
            }
        };

        for (t, &count) in required.iter().enumerate() {
            for _ in 0..count {
                if !place(&mut cells, &mut free, ObjectTypeId(t as u8)) {
                    return None;
                }
            }
        }

        // Fillers up to the density target.
        let target = ((free.len() + required_total) as f64 * config.object_density).round() as usize;
        let fillers = target.saturating_sub(required_total);
        for _ in 0..fillers {
            if free.len() <= 1 || placeable.is_empty() {
                break;
            }
            let t = placeable[rng.gen_range(0..placeable.len())];
            place(&mut cells, &mut free, t);
        }

        let agent_idx = free.pop()?;
        let agent = (agent_idx / w, agent_idx % w);

        let state = GridState {
            height: h,
            width: w,
            cells,
            agent,
            enemy: None,
            step_count: 0,
            episode_limit: config.episode_limit,
            enemy_spawn_prob: config.enemy_spawn_prob,
            enemy_lifetime: config.enemy_lifetime,
            object_type_count: n_types_of(tables),
            outcomes: (0..tables.object_count())
                .map(|i| tables.outcome(ObjectTypeId(i as u8)).expect("id in range"))
                .collect(),
            instructions: instructions.to_vec(),
            completed: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(rng.gen()),
            picked_cum: vec![0; n_types_of(tables)],
            transformed_cum: vec![0; n_types_of(tables)],
            instr_base_picked: vec![0; n_types_of(tables)],
            instr_base_transformed: vec![0; n_types_of(tables)],
            subtask_base_picked: vec![0; n_types_of(tables)],
            subtask_base_transformed: vec![0; n_types_of(tables)],
        };

        if !state.all_objects_reachable() {
            return None;
        }
        Some(state)
    }

    fn all_objects_reachable(&self) -> bool {
        let mut visited = vec![false; self.cells.len()];
        let mut queue = std::collections::VecDeque::new();
        let start = self.agent.0 * self.width + self.agent.1;
        visited[start] = true;
        queue.push_back(self.agent);
        while let Some((r, c)) = queue.pop_front() {
            for d in DIRS {
                let (dr, dc) = d.delta();
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
                    continue;
                }
                let idx = nr as usize * self.width + nc as usize;
                if visited[idx] || self.cells[idx] == Cell::Block {
                    continue;
                }
                visited[idx] = true;
                queue.push_back((nr as usize, nc as usize));
            }
        }
        self.cells
            .iter()
            .enumerate()
            .all(|(i, c)| !matches!(c, Cell::Object(_)) || visited[i])
    }

    // ---- accessors ----

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn agent(&self) -> (usize, usize) {
        self.agent
    }

    pub fn enemy(&self) -> Option<Enemy> {
        self.enemy
    }

    pub fn cell(&self, pos: (usize, usize)) -> Cell {
        self.cells[pos.0 * self.width + pos.1]
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn episode_limit(&self) -> u32 {
        self.episode_limit
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn current_instruction(&self) -> Option<&Instruction> {
        self.instructions.get(self.completed)
    }

    pub fn object_type_count(&self) -> usize {
        self.object_type_count
    }

    pub fn count_objects(&self, t: ObjectTypeId) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Object(t)).count()
    }

    pub fn total_objects(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c, Cell::Object(_)))
            .count()
    }

    pub fn object_cells(&self, t: ObjectTypeId) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == Cell::Object(t))
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    pub fn in_bounds(&self, r: isize, c: isize) -> bool {
        r >= 0 && c >= 0 && r < self.height as isize && c < self.width as isize
    }

    fn neighbor(&self, pos: (usize, usize), dir: Dir) -> Option<(usize, usize)> {
        let (dr, dc) = dir.delta();
        let nr = pos.0 as isize + dr;
        let nc = pos.1 as isize + dc;
        if self.in_bounds(nr, nc) {
            Some((nr as usize, nc as usize))
        } else {
            None
        }
    }

    fn set_cell(&mut self, pos: (usize, usize), cell: Cell) {
        self.cells[pos.0 * self.width + pos.1] = cell;
    }

    // ---- dynamics ----

    /// Advance one step. Agent action first, then instruction progress,
    /// then enemy spawn/move/expiry, then the step counter and time limit.
    pub fn step(&mut self, action: Action) -> Result<(f64, bool, StepInfo), GridError> {
        if self.done {
            return Err(GridError::EpisodeDone);
        }
        let mut reward = TIME_PENALTY;
        let mut info = StepInfo::default();

        match action {
            Action::NoOp => {}
            Action::Move(dir) => {
                if let Some(next) = self.neighbor(self.agent, dir) {
                    match self.cell(next) {
                        Cell::Block => {}
                        Cell::Water => {
                            self.agent = next;
                            info.moved = true;
                            info.entered_water = true;
                            reward += WATER_PENALTY;
                        }
                        _ => {
                            self.agent = next;
                            info.moved = true;
                        }
                    }
                }
            }
            Action::PickUp(dir) => {
                if let Some(target) = self.neighbor(self.agent, dir) {
                    if let Cell::Object(t) = self.cell(target) {
                        self.set_cell(target, Cell::Empty);
                        self.picked_cum[t.index()] += 1;
                    }
                }
            }
            Action::Transform(dir) => {
                if let Some(target) = self.neighbor(self.agent, dir) {
                    if self.enemy.map(|e| e.pos) == Some(target) {
                        self.enemy = None;
                        reward += ENEMY_REWARD;
                        info.enemy_transformed = true;
                    } else if let Cell::Object(t) = self.cell(target) {
                        match self.outcomes[t.index()] {
                            TransformOutcome::Removed => self.set_cell(target, Cell::Empty),
                            TransformOutcome::Becomes(u) => self.set_cell(target, Cell::Object(u)),
                        }
                        self.transformed_cum[t.index()] += 1;
                    }
                }
            }
        }

        // Instruction progress; consecutive instructions may complete in one
        // step only when the later predicate holds in the fresh segment.
        while let Some(ins) = self.instructions.get(self.completed) {
            if !self.instruction_complete(ins) {
                break;
            }
            self.completed += 1;
            info.instruction_completed = true;
            self.instr_base_picked.copy_from_slice(&self.picked_cum);
            self.instr_base_transformed.copy_from_slice(&self.transformed_cum);
            if self.completed == self.instructions.len() {
                reward += SUCCESS_REWARD;
                info.all_instructions_done = true;
                self.done = true;
            }
        }

        self.enemy_phase();

        self.step_count += 1;
        if !self.done && self.step_count >= self.episode_limit {
            self.done = true;
        }
        Ok((reward, self.done, info))
    }

    fn enemy_phase(&mut self) {
        match self.enemy {
            Some(mut enemy) => {
                enemy.lifetime -= 1;
                if enemy.lifetime == 0 {
                    self.enemy = None;
                    return;
                }
                let mut moves: Vec<(usize, usize)> = Vec::with_capacity(4);
                for d in DIRS {
                    if let Some(next) = self.neighbor(enemy.pos, d) {
                        if self.cell(next) != Cell::Block {
                            moves.push(next);
                        }
                    }
                }
                if !moves.is_empty() {
                    enemy.pos = moves[self.rng.gen_range(0..moves.len())];
                }
                self.enemy = Some(enemy);
            }
            None => {
                if self.enemy_spawn_prob > 0.0 && self.rng.gen::<f64>() < self.enemy_spawn_prob {
                    let candidates: Vec<usize> = (0..self.cells.len())
                        .filter(|&i| {
                            self.cells[i] != Cell::Block
                                && (i / self.width, i % self.width) != self.agent
                        })
                        .collect();
                    if !candidates.is_empty() {
                        let idx = candidates[self.rng.gen_range(0..candidates.len())];
                        self.enemy = Some(Enemy {
                            pos: (idx / self.width, idx % self.width),
                            lifetime: self.enemy_lifetime,
                        });
                    }
                }
            }
        }
    }

    fn instruction_complete(&self, ins: &Instruction) -> bool {
        let t = ins.object.index();
        match ins.kind {
            InstructionKind::Visit => self.cell(self.agent) == Cell::Object(ins.object),
            InstructionKind::PickUp => self.picked_cum[t] > self.instr_base_picked[t],
            InstructionKind::Transform => self.transformed_cum[t] > self.instr_base_transformed[t],
            InstructionKind::PickUpAll | InstructionKind::TransformAll => {
                self.count_objects(ins.object) == 0
            }
            InstructionKind::InteractWith => {
                self.picked_cum[t] > self.instr_base_picked[t]
                    || self.transformed_cum[t] > self.instr_base_transformed[t]
            }
        }
    }

    /// Mark the start of a subtask segment for [`GridState::subtask_status`].
    pub fn begin_subtask_segment(&mut self) {
        self.subtask_base_picked.copy_from_slice(&self.picked_cum);
        self.subtask_base_transformed.copy_from_slice(&self.transformed_cum);
    }

    /// Oracle completion predicate for a subtask, relative to the last
    /// `begin_subtask_segment` call (or reset).
    pub fn subtask_status(&self, goal: Goal) -> bool {
        let t = goal.object.index();
        if t >= self.object_type_count {
            return false;
        }
        match goal.action {
            TaskAction::Visit => self.cell(self.agent) == Cell::Object(goal.object),
            TaskAction::PickUp => self.picked_cum[t] > self.subtask_base_picked[t],
            TaskAction::Transform => self.transformed_cum[t] > self.subtask_base_transformed[t],
            TaskAction::InteractWith => {
                self.picked_cum[t] > self.subtask_base_picked[t]
                    || self.transformed_cum[t] > self.subtask_base_transformed[t]
            }
        }
    }

    /// Binary observation per the channel layout on [`Observation`]. A pure
    /// function of the state.
    pub fn observe(&self) -> Observation {
        let channels = 3 + self.object_type_count;
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; channels * h * w];
        data[self.agent.0 * w + self.agent.1] = 1.0;
        for (i, cell) in self.cells.iter().enumerate() {
            match cell {
                Cell::Empty => {}
                Cell::Block => data[h * w + i] = 1.0,
                Cell::Water => data[2 * h * w + i] = 1.0,
                Cell::Object(t) => data[(3 + t.index()) * h * w + i] = 1.0,
            }
        }
        Observation {
            channels,
            height: h,
            width: w,
            data,
        }
    }
}

fn n_types_of(tables: &Tables) -> usize {
    tables.object_count()
}

/// Hand-placed world for tests and enumerable brute-force checks.
pub struct WorldBuilder {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    agent: (usize, usize),
    enemy: Option<Enemy>,
    episode_limit: u32,
    enemy_spawn_prob: f64,
    enemy_lifetime: u32,
    seed: u64,
}

impl WorldBuilder {
    pub fn new(height: usize, width: usize) -> Self {
        WorldBuilder {
            height,
            width,
            cells: vec![Cell::Empty; height * width],
            agent: (0, 0),
            enemy: None,
            episode_limit: 80,
            enemy_spawn_prob: 0.0,
            enemy_lifetime: 10,
            seed: 0,
        }
    }

    pub fn cell(mut self, pos: (usize, usize), cell: Cell) -> Self {
        self.cells[pos.0 * self.width + pos.1] = cell;
        self
    }

    pub fn agent(mut self, pos: (usize, usize)) -> Self {
        self.agent = pos;
        self
    }

    pub fn enemy(mut self, pos: (usize, usize), lifetime: u32) -> Self {
        self.enemy = Some(Enemy { pos, lifetime });
        self
    }

    pub fn episode_limit(mut self, limit: u32) -> Self {
        self.episode_limit = limit;
        self
    }

    pub fn enemy_dynamics(mut self, spawn_prob: f64, lifetime: u32) -> Self {
        self.enemy_spawn_prob = spawn_prob;
        self.enemy_lifetime = lifetime;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(
        self,
        instructions: &[Instruction],
        tables: &Tables,
    ) -> Result<GridState, GridError> {
        if instructions.is_empty() {
            return Err(GridError::EmptyInstructions);
        }
        if self.cells[self.agent.0 * self.width + self.agent.1] == Cell::Block {
            return Err(GridError::BadConfig("agent placed on a block".to_string()));
        }
        let n = tables.object_count();
        Ok(GridState {
            height: self.height,
            width: self.width,
            cells: self.cells,
            agent: self.agent,
            enemy: self.enemy,
            step_count: 0,
            episode_limit: self.episode_limit,
            enemy_spawn_prob: self.enemy_spawn_prob,
            enemy_lifetime: self.enemy_lifetime,
            object_type_count: n,
            outcomes: (0..n)
                .map(|i| tables.outcome(ObjectTypeId(i as u8)).expect("id in range"))
                .collect(),
            instructions: instructions.to_vec(),
            completed: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            picked_cum: vec![0; n],
            transformed_cum: vec![0; n],
            instr_base_picked: vec![0; n],
            instr_base_transformed: vec![0; n],
            subtask_base_picked: vec![0; n],
            subtask_base_transformed: vec![0; n],
        })
    }
}
