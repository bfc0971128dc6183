// SPDX-License-Identifier: Apache-2.0

//! The simulation engine: instance state, the command queue, the dataflow
//! scheduler, and the evaluation context handed to dialect evaluators.

pub mod plan;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::rc::Rc;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{Bit4, BitVec4};
use crate::dialect::{self, seq::SeqState, sv::SvState};
use crate::error::{Error, SimError};
use crate::mlir::ast::{ModPort, TypeExpr};
use crate::mlir::state::{CanonOp, MlirState, Phase};
use crate::mlir::{parse, type_str};
use crate::value::{bit_width, TypedValue};

use plan::{Plan, TaskKind};

/// Hierarchy depth at which instantiation stops.
pub const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    /// Upper bound on task evaluations within one cycle.
    pub max_eval_steps: u64,
    /// When set, ready tasks are picked at random from a seeded generator
    /// instead of in source order.
    pub seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_eval_steps: 1_000_000,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    /// Fetch a module definition by symbol.
    CRop(String),
    /// Stop simulation with a message.
    Debug(String),
    /// A top-level operation handled by its dialect before simulation.
    DialectCmd(CanonOp),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub cycle: u64,
    pub path: String,
    pub op: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct InstanceState {
    /// Instance path from the top module.
    pub cid: Vec<String>,
    /// Parent instance index.
    pub pa: Option<usize>,
    /// Pending task indices into the module plan.
    pub exec: Vec<usize>,
    pub last: HashMap<String, TypedValue>,
    pub curr: HashMap<String, TypedValue>,
    pub module: String,
    /// Output port name to the id carrying its value this cycle.
    pub out: IndexMap<String, String>,
    /// Register symbol to value id.
    pub reg: BTreeMap<String, String>,
    /// Wire symbol to value id.
    pub wire: BTreeMap<String, String>,
    pub children: BTreeMap<String, usize>,
    pub(crate) plan: Option<Rc<Plan>>,
    pub(crate) done: Vec<bool>,
}

impl InstanceState {
    pub fn path(&self) -> String {
        self.cid.join(".")
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_deref()
    }
}

#[derive(Clone, Debug, Default)]
pub struct HwState {
    /// Hierarchical path symbols to their instance name paths.
    pub hier: BTreeMap<String, Vec<String>>,
    /// Dotted instance path to instance index.
    pub h2inst: BTreeMap<String, usize>,
}

pub struct Simulator {
    pub mlir: MlirState,
    pub top: String,
    pub instances: Vec<InstanceState>,
    pub commands: VecDeque<Command>,
    pub hw: HwState,
    pub seq: SeqState,
    pub sv: SvState,
    pub diagnostics: Vec<Diagnostic>,
    pub config: SimConfig,
    pub cycle: u64,
    coverage: BTreeMap<&'static str, u64>,
    rng: Option<ChaCha8Rng>,
    plans: HashMap<String, Rc<Plan>>,
    steps: u64,
}

/// Local values of a procedural region.
#[derive(Clone, Debug, Default)]
pub struct Frame {
    pub env: HashMap<String, TypedValue>,
    /// Edge-triggered bodies observe values from before the edge.
    pub outside_from_last: bool,
}

/// Evaluation context for one operation.
pub struct Ctx<'a> {
    pub sim: &'a mut Simulator,
    pub inst: usize,
    pub frame: Option<Frame>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
    Any,
}

impl Edge {
    pub fn parse(s: &str) -> Option<Edge> {
        match s {
            "posedge" => Some(Edge::Pos),
            "negedge" => Some(Edge::Neg),
            "edge" | "both" => Some(Edge::Any),
            _ => None,
        }
    }

    /// Level at which a reset sensitive to this edge is asserted.
    pub fn active_level(self) -> Bit4 {
        match self {
            Edge::Neg => Bit4::B0,
            _ => Bit4::B1,
        }
    }
}

fn type_mismatch(op: &str, expected: &TypeExpr, found: &TypeExpr) -> SimError {
    SimError::TypeMismatch {
        op: op.to_string(),
        expected: type_str(expected),
        found: type_str(found),
    }
}

impl<'a> Ctx<'a> {
    pub fn new(sim: &'a mut Simulator, inst: usize) -> Self {
        Ctx { sim, inst, frame: None }
    }

    pub fn state(&self) -> &InstanceState {
        &self.sim.instances[self.inst]
    }

    pub fn path(&self) -> String {
        self.state().path()
    }

    /// Reads a value visible at this point: procedural locals first, then
    /// the instance's current or previous cycle.
    pub fn read(&self, id: &str, ty: &TypeExpr) -> Result<TypedValue, SimError> {
        if let Some(f) = &self.frame {
            if let Some(v) = f.env.get(id) {
                return Ok(v.clone());
            }
            if f.outside_from_last && !matches!(ty, TypeExpr::InOut(_)) {
                return self.sim.read_last(self.inst, id, ty);
            }
        }
        self.sim.read_curr(self.inst, id)
    }

    pub fn read_last(&self, id: &str, ty: &TypeExpr) -> Result<TypedValue, SimError> {
        self.sim.read_last(self.inst, id, ty)
    }

    pub fn operand(&self, op: &CanonOp, i: usize) -> Result<TypedValue, SimError> {
        let (id, ty) = op
            .operands
            .get(i)
            .zip(op.operand_types.get(i))
            .ok_or_else(|| SimError::ArityMismatch {
                op: op.name.clone(),
                expected: i + 1,
                found: op.operands.len(),
            })?;
        let v = self.read(id, ty)?;
        if v.ty != *ty && !(compatible(&v.ty, ty)) {
            return Err(type_mismatch(&op.name, ty, &v.ty));
        }
        Ok(v)
    }

    /// Previous-cycle value of operand `i`.
    pub fn operand_last(&self, op: &CanonOp, i: usize) -> Result<TypedValue, SimError> {
        let (id, ty) = op
            .operands
            .get(i)
            .zip(op.operand_types.get(i))
            .ok_or_else(|| SimError::ArityMismatch {
                op: op.name.clone(),
                expected: i + 1,
                found: op.operands.len(),
            })?;
        self.read_last(id, ty)
    }

    pub fn operands(&self, op: &CanonOp) -> Result<Vec<TypedValue>, SimError> {
        (0..op.operands.len()).map(|i| self.operand(op, i)).collect()
    }

    /// Operands as bit vectors, with Z read as X.
    pub fn operand_bits(&self, op: &CanonOp) -> Result<Vec<BitVec4>, SimError> {
        self.operands(op)?.iter().map(|v| self.bits_of(op, v)).collect()
    }

    pub fn bits_of(&self, op: &CanonOp, v: &TypedValue) -> Result<BitVec4, SimError> {
        v.flatten().map(|b| b.z_as_x()).ok_or_else(|| SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "integer".into(),
            found: type_str(&v.ty),
        })
    }

    pub fn single_result_type(&self, op: &CanonOp) -> Result<TypeExpr, SimError> {
        match op.result_types.as_slice() {
            [t] => Ok(t.clone()),
            ts => Err(SimError::ArityMismatch {
                op: op.name.clone(),
                expected: 1,
                found: ts.len(),
            }),
        }
    }

    pub fn result_width(&self, op: &CanonOp) -> Result<usize, SimError> {
        let t = self.single_result_type(op)?;
        bit_width(&t).ok_or_else(|| SimError::TypeMismatch {
            op: op.name.clone(),
            expected: "integer".into(),
            found: type_str(&t),
        })
    }

    pub fn expect_arity<T>(&self, op: &CanonOp, args: &[T], n: usize) -> Result<(), SimError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(SimError::ArityMismatch {
                op: op.name.clone(),
                expected: n,
                found: args.len(),
            })
        }
    }

    pub fn diagnostic(&mut self, op: &CanonOp, message: impl Into<String>) {
        let path = self.path();
        let cycle = self.sim.cycle;
        self.sim.diagnostics.push(Diagnostic {
            cycle,
            path,
            op: op.name.clone(),
            message: message.into(),
        });
    }

    /// True when operand `i` made the given transition between the previous
    /// and the current cycle. Unknown levels never count as an edge.
    pub fn edge(&self, op: &CanonOp, i: usize, edge: Edge) -> Result<bool, SimError> {
        let id = op
            .operands
            .get(i)
            .ok_or_else(|| SimError::MissingEvent(op.name.clone()))?;
        let st = self.state();
        let level = |v: Option<&TypedValue>| v.and_then(|v| v.as_bits()).map(|b| b.bit(0));
        let now = match self.frame.as_ref().and_then(|f| f.env.get(id)) {
            Some(v) => level(Some(v)),
            None => level(st.curr.get(id)),
        };
        let before = level(st.last.get(id));
        Ok(match (before, now) {
            (Some(Bit4::B0), Some(Bit4::B1)) => edge != Edge::Neg,
            (Some(Bit4::B1), Some(Bit4::B0)) => edge != Edge::Pos,
            _ => false,
        })
    }
}

/// Clock values and `i1` are interchangeable at operand boundaries.
fn compatible(a: &TypeExpr, b: &TypeExpr) -> bool {
    matches!(
        (a, b),
        (TypeExpr::Clock, TypeExpr::Int(1)) | (TypeExpr::Int(1), TypeExpr::Clock)
    )
}

fn coerce(v: TypedValue, ty: &TypeExpr) -> TypedValue {
    if compatible(&v.ty, ty) {
        TypedValue {
            ty: ty.clone(),
            val: v.val,
        }
    } else {
        v
    }
}

impl Simulator {
    /// Prepares a simulator for module `top` of an already preprocessed
    /// program. Unsymboled top-level operations are dispatched to their
    /// dialects before the first cycle.
    pub fn new(mlir: MlirState, top: &str, config: SimConfig) -> Result<Self, SimError> {
        let rng = config.seed.map(ChaCha8Rng::seed_from_u64);
        let top = top.strip_prefix('@').unwrap_or(top).to_string();
        let mut sim = Simulator {
            mlir,
            top: top.clone(),
            instances: Vec::new(),
            commands: VecDeque::new(),
            hw: HwState::default(),
            seq: SeqState::default(),
            sv: SvState::default(),
            diagnostics: Vec::new(),
            config,
            cycle: 0,
            coverage: BTreeMap::new(),
            rng,
            plans: HashMap::new(),
            steps: 0,
        };
        for op in std::mem::take(&mut sim.mlir.unsymboled) {
            sim.move_op(op);
        }
        let pre: Vec<CanonOp> = sim
            .mlir
            .table
            .values()
            .filter(|op| dialect::lookup(&op.name).is_some_and(|d| d.pre.is_some()))
            .cloned()
            .collect();
        for op in pre {
            sim.move_op(op);
        }
        while let Some(cmd) = sim.commands.pop_front() {
            sim.exec_command(cmd)?;
        }
        sim.commands.push_back(Command::CRop(top.clone()));
        sim.drain()?;
        let plan = sim.plan_for(&top)?;
        sim.hw.h2inst.insert(top.clone(), 0);
        sim.instances.push(InstanceState {
            cid: vec![top.clone()],
            module: top,
            done: vec![false; plan.tasks.len()],
            plan: Some(plan),
            ..InstanceState::default()
        });
        Ok(sim)
    }

    /// Parses, preprocesses and prepares `source` for simulation.
    pub fn from_source(source: &str, top: &str, config: SimConfig) -> Result<Self, Error> {
        let file = parse(source)?;
        let mlir = crate::mlir::state::preprocess(file)?;
        Ok(Simulator::new(mlir, top, config)?)
    }

    pub fn top_plan(&self) -> &Plan {
        self.instances[0].plan.as_deref().expect("top plan")
    }

    /// Input and inout ports of the top module, in order.
    pub fn input_ports(&self) -> &[ModPort] {
        &self.top_plan().inputs
    }

    pub fn output_ports(&self) -> &[ModPort] {
        &self.top_plan().outputs
    }

    /// How many times each operation kind has been evaluated.
    pub fn coverage(&self) -> &BTreeMap<&'static str, u64> {
        &self.coverage
    }

    pub(crate) fn cover(&mut self, name: &'static str) {
        *self.coverage.entry(name).or_insert(0) += 1;
    }

    pub fn diagnostic(&mut self, inst: usize, op: &str, message: impl Into<String>) {
        let path = self.instances.get(inst).map(|i| i.path()).unwrap_or_default();
        self.diagnostics.push(Diagnostic {
            cycle: self.cycle,
            path,
            op: op.to_string(),
            message: message.into(),
        });
    }

    // ---- command queue -------------------------------------------------

    pub fn move_op(&mut self, op: CanonOp) {
        self.commands.push_back(Command::DialectCmd(op));
    }

    /// Executes one command.
    pub fn exec_command(&mut self, cmd: Command) -> Result<(), SimError> {
        if self.mlir.phase == Phase::Debug {
            let msg = self.mlir.debug_message.clone().unwrap_or_default();
            return Err(SimError::Debug(msg));
        }
        match cmd {
            Command::CRop(sym) => match self.mlir.rop(&sym) {
                Ok(op) if op.name == "hw.module" => Ok(()),
                Ok(op) => {
                    let msg = format!("`@{sym}` is a `{}`, not a module", op.name);
                    self.exec_command(Command::Debug(msg))
                }
                Err(e) => self.exec_command(Command::Debug(e.to_string())),
            },
            Command::Debug(msg) => {
                self.mlir.enter_debug(msg.clone());
                Err(SimError::Debug(msg))
            }
            Command::DialectCmd(op) => match dialect::lookup(&op.name).and_then(|d| d.pre.map(|p| (d.name, p))) {
                Some((name, pre)) => {
                    self.cover(name);
                    pre(self, &op)
                }
                None => {
                    let msg = format!("unexpected top-level operation `{}`", op.name);
                    self.exec_command(Command::Debug(msg))
                }
            },
        }
    }

    fn drain(&mut self) -> Result<(), SimError> {
        while let Some(cmd) = self.commands.pop_front() {
            self.exec_command(cmd)?;
        }
        Ok(())
    }

    // ---- plans ----------------------------------------------------------

    /// Keeps only the attributes an operation's evaluator consults.
    pub fn canonicalize_hw(&self, op: &CanonOp) -> CanonOp {
        let mut op = op.clone();
        if let Some(allowed) = dialect::lookup(&op.name).and_then(|d| d.attrs) {
            op.attrs.retain(|k, _| allowed.contains(&k.as_str()));
        }
        op
    }

    /// The operations of a single-block region.
    pub fn split_region<'o>(&self, op: &'o CanonOp, region: usize) -> Result<&'o [CanonOp], SimError> {
        match op.regions.get(region) {
            None => Ok(&[]),
            Some(r) if r.blocks.len() > 1 => Err(SimError::MultiBlockRegion(op.name.clone())),
            Some(r) => Ok(r.blocks.first().map(|b| b.ops.as_slice()).unwrap_or(&[])),
        }
    }

    fn flatten_body(&mut self, ops: &[CanonOp], out: &mut Vec<Rc<CanonOp>>) -> Result<(), SimError> {
        for op in ops {
            if op.name == "sv.ifdef" {
                self.cover("sv.ifdef");
                let region = if dialect::sv::ifdef_taken(self, op)? { 0 } else { 1 };
                let body = self.split_region(op, region)?.to_vec();
                self.flatten_body(&body, out)?;
            } else {
                out.push(Rc::new(self.canonicalize_hw(op)));
            }
        }
        Ok(())
    }

    pub(crate) fn plan_for(&mut self, module: &str) -> Result<Rc<Plan>, SimError> {
        if let Some(p) = self.plans.get(module) {
            return Ok(p.clone());
        }
        let op = self.mlir.rop(module)?.clone();
        let body = self.split_region(&op, 0)?.to_vec();
        let mut flat = Vec::new();
        self.flatten_body(&body, &mut flat)?;
        let plan = Rc::new(plan::build(&op, flat)?);
        self.plans.insert(module.to_string(), plan.clone());
        Ok(plan)
    }

    /// Prepares instance `inst` to evaluate `module` this cycle, binding
    /// `inputs` to its block arguments when given.
    pub(crate) fn eval_module(
        &mut self,
        inst: usize,
        module: &str,
        inputs: Option<Vec<TypedValue>>,
    ) -> Result<(), SimError> {
        self.commands.push_back(Command::CRop(module.to_string()));
        self.drain()?;
        let plan = self.plan_for(module)?;
        self.cover("hw.module");
        if let Some(vals) = inputs {
            self.write_args(inst, &plan.args, vals)?;
        }
        let st = &mut self.instances[inst];
        st.module = module.to_string();
        st.done = vec![false; plan.tasks.len()];
        st.plan = Some(plan.clone());
        self.parallelize(inst, plan.tasks.len());
        Ok(())
    }

    pub fn parallelize(&mut self, inst: usize, n: usize) {
        self.instances[inst].exec = (0..n).collect();
    }

    // ---- value stores ----------------------------------------------------

    pub fn write_args(
        &mut self,
        inst: usize,
        args: &[(String, TypeExpr)],
        vals: Vec<TypedValue>,
    ) -> Result<(), SimError> {
        if args.len() != vals.len() {
            return Err(SimError::ArityMismatch {
                op: "hw.module".into(),
                expected: args.len(),
                found: vals.len(),
            });
        }
        for ((id, ty), v) in args.iter().zip(vals) {
            if v.ty != *ty && !compatible(&v.ty, ty) {
                return Err(type_mismatch("hw.module", ty, &v.ty));
            }
            self.write_curr(inst, id, coerce(v, ty))?;
        }
        Ok(())
    }

    pub fn read_curr(&self, inst: usize, id: &str) -> Result<TypedValue, SimError> {
        self.instances[inst]
            .curr
            .get(id)
            .cloned()
            .ok_or_else(|| SimError::NotReady(id.to_string()))
    }

    pub fn write_curr(&mut self, inst: usize, id: &str, v: TypedValue) -> Result<(), SimError> {
        let curr = &mut self.instances[inst].curr;
        if curr.contains_key(id) {
            return Err(SimError::DoubleWrite(id.to_string()));
        }
        curr.insert(id.to_string(), v);
        Ok(())
    }

    /// Value from the previous cycle, or all X before the first one.
    pub fn read_last(&self, inst: usize, id: &str, ty: &TypeExpr) -> Result<TypedValue, SimError> {
        match self.instances[inst].last.get(id) {
            Some(v) => Ok(v.clone()),
            None => TypedValue::all_x(ty).ok_or_else(|| SimError::NotReady(id.to_string())),
        }
    }

    fn register(map: &mut BTreeMap<String, String>, name: &str, id: &str) -> Result<(), SimError> {
        match map.get(name) {
            Some(existing) if existing != id => Err(SimError::DuplicateName(name.to_string())),
            Some(_) => Ok(()),
            None => {
                map.insert(name.to_string(), id.to_string());
                Ok(())
            }
        }
    }

    pub fn write_reg(&mut self, inst: usize, name: &str, id: &str) -> Result<(), SimError> {
        Self::register(&mut self.instances[inst].reg, name, id)
    }

    pub fn write_wire(&mut self, inst: usize, name: &str, id: &str) -> Result<(), SimError> {
        Self::register(&mut self.instances[inst].wire, name, id)
    }

    pub fn read_reg(&self, inst: usize, name: &str) -> Result<&str, SimError> {
        self.instances[inst]
            .reg
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| SimError::UnknownName(name.to_string()))
    }

    pub fn read_wire(&self, inst: usize, name: &str) -> Result<&str, SimError> {
        self.instances[inst]
            .wire
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| SimError::UnknownName(name.to_string()))
    }

    pub fn write_out(&mut self, inst: usize, port: &str, id: &str) -> Result<(), SimError> {
        let out = &mut self.instances[inst].out;
        if out.contains_key(port) {
            return Err(SimError::DuplicateName(port.to_string()));
        }
        out.insert(port.to_string(), id.to_string());
        Ok(())
    }

    pub fn write_results(&mut self, inst: usize, op: &CanonOp, vals: Vec<TypedValue>) -> Result<(), SimError> {
        if vals.len() != op.result_ids.len() {
            return Err(SimError::ArityMismatch {
                op: op.name.clone(),
                expected: op.result_ids.len(),
                found: vals.len(),
            });
        }
        for ((id, ty), v) in op.result_ids.iter().zip(&op.result_types).zip(vals) {
            if v.ty != *ty && !compatible(&v.ty, ty) {
                return Err(type_mismatch(&op.name, ty, &v.ty));
            }
            self.write_curr(inst, id, coerce(v, ty))?;
        }
        Ok(())
    }

    // ---- scheduling ------------------------------------------------------

    /// Starts a cycle of the top module with the given input values.
    pub fn stimulate(&mut self, inputs: Vec<TypedValue>) -> Result<(), SimError> {
        let top = self.top.clone();
        self.eval_module(0, &top, Some(inputs))
    }

    fn ready(&self, inst: usize, t: usize) -> bool {
        let st = &self.instances[inst];
        let Some(plan) = st.plan.as_deref() else {
            return false;
        };
        let task = &plan.tasks[t];
        if !task.deps.iter().all(|d| st.curr.contains_key(d)) || !task.after.iter().all(|&a| st.done[a]) {
            return false;
        }
        match &task.kind {
            TaskKind::InstRes { instance, index, .. } => st
                .children
                .get(instance)
                .map(|&c| &self.instances[c])
                .and_then(|c| Some((c, c.plan.as_deref()?.output_ids.get(*index)?)))
                .is_some_and(|(c, id)| c.curr.contains_key(id)),
            _ => true,
        }
    }

    fn run_task(&mut self, inst: usize, t: usize) -> Result<(), SimError> {
        self.steps += 1;
        if self.steps > self.config.max_eval_steps {
            return Err(SimError::StepLimit(self.config.max_eval_steps));
        }
        let plan = self.instances[inst].plan.clone().expect("plan");
        match &plan.tasks[t].kind {
            TaskKind::Op(op) => self.eval_graph_op(inst, op)?,
            TaskKind::Instance(op) => dialect::hw::instantiate(self, inst, op)?,
            TaskKind::InstArg { instance, index, value } => {
                let child = self.instances[inst].children[instance];
                let cplan = self.instances[child].plan.clone().expect("child plan");
                let (arg, ty) = &cplan.args[*index];
                let v = self.read_curr(inst, value)?;
                if v.ty != *ty && !compatible(&v.ty, ty) {
                    return Err(type_mismatch("hw.instance", ty, &v.ty));
                }
                self.write_curr(child, arg, coerce(v, ty))?;
            }
            TaskKind::InstRes {
                instance,
                index,
                result,
            } => {
                let child = self.instances[inst].children[instance];
                let cplan = self.instances[child].plan.clone().expect("child plan");
                let v = self.read_curr(child, &cplan.output_ids[*index])?;
                self.write_curr(inst, result, v)?;
            }
            TaskKind::Flush => dialect::sv::flush(self, Some(inst))?,
        }
        self.instances[inst].done[t] = true;
        Ok(())
    }

    pub(crate) fn eval_graph_op(&mut self, inst: usize, op: &CanonOp) -> Result<(), SimError> {
        let def = dialect::lookup(&op.name).ok_or_else(|| SimError::UnknownOperation(op.name.clone()))?;
        let eval = def.eval.ok_or_else(|| SimError::UnknownOperation(op.name.clone()))?;
        self.cover(def.name);
        let vals = eval(&mut Ctx::new(self, inst), op)?;
        self.write_results(inst, op, vals)
    }

    fn deadlock(&self) -> SimError {
        let mut stuck = Vec::new();
        let mut missing = Vec::new();
        let mut path = String::new();
        for st in &self.instances {
            let Some(plan) = st.plan.as_deref() else { continue };
            if st.exec.is_empty() {
                continue;
            }
            if path.is_empty() {
                path = st.path();
            }
            let prefix = if st.pa.is_some() {
                format!("{}: ", st.path())
            } else {
                String::new()
            };
            for &t in &st.exec {
                let task = &plan.tasks[t];
                stuck.push(format!("{prefix}{}", task.label));
                for d in &task.deps {
                    let m = format!("{prefix}%{d}");
                    if !st.curr.contains_key(d) && !missing.contains(&m) {
                        missing.push(m);
                    }
                }
            }
        }
        SimError::Deadlock { path, stuck, missing }
    }

    /// Runs pending tasks until every instance is idle.
    pub fn settle(&mut self) -> Result<(), SimError> {
        self.steps = 0;
        loop {
            if self.rng.is_some() {
                let mut ready = Vec::new();
                for i in 0..self.instances.len() {
                    for (k, &t) in self.instances[i].exec.iter().enumerate() {
                        if self.ready(i, t) {
                            ready.push((i, k, t));
                        }
                    }
                }
                if ready.is_empty() {
                    break;
                }
                let pick = self.rng.as_mut().expect("rng").gen_range(0..ready.len());
                let (i, k, t) = ready[pick];
                self.instances[i].exec.remove(k);
                self.run_task(i, t)?;
            } else {
                let mut progress = false;
                let mut i = 0;
                while i < self.instances.len() {
                    let mut k = 0;
                    while k < self.instances[i].exec.len() {
                        let t = self.instances[i].exec[k];
                        if self.ready(i, t) {
                            self.instances[i].exec.remove(k);
                            self.run_task(i, t)?;
                            progress = true;
                        } else {
                            k += 1;
                        }
                    }
                    i += 1;
                }
                if !progress {
                    break;
                }
            }
        }
        if self.instances.iter().any(|s| !s.exec.is_empty()) {
            return Err(self.deadlock());
        }
        Ok(())
    }

    /// Ends the cycle: current values become the previous cycle's, and
    /// per-cycle maps are cleared.
    pub fn finish(&mut self) -> Result<(), SimError> {
        if let Some(st) = self.instances.iter().find(|s| !s.exec.is_empty()) {
            return Err(SimError::PrematureFinish(st.path()));
        }
        for st in &mut self.instances {
            st.last = std::mem::take(&mut st.curr);
            st.out.clear();
            st.done.iter_mut().for_each(|d| *d = false);
        }
        self.cycle += 1;
        Ok(())
    }

    /// Output values of the top module for the cycle in progress.
    pub fn outputs(&self) -> Result<IndexMap<String, TypedValue>, SimError> {
        let root = &self.instances[0];
        root.out
            .iter()
            .map(|(p, id)| Ok((p.clone(), self.read_curr(0, id)?)))
            .collect()
    }

    /// Simulates one cycle and returns the top module's outputs.
    pub fn run_cycle(&mut self, inputs: Vec<TypedValue>) -> Result<IndexMap<String, TypedValue>, SimError> {
        self.run_cycle_observed(inputs, |_| {})
    }

    /// Like [`Simulator::run_cycle`], calling `observe` once the cycle has
    /// settled and before its values move into the previous-cycle store.
    pub fn run_cycle_observed(
        &mut self,
        inputs: Vec<TypedValue>,
        observe: impl FnOnce(&Simulator),
    ) -> Result<IndexMap<String, TypedValue>, SimError> {
        if self.mlir.phase == Phase::Debug {
            return Err(SimError::Debug(self.mlir.debug_message.clone().unwrap_or_default()));
        }
        self.stimulate(inputs)?;
        self.settle()?;
        dialect::sv::flush(self, None)?;
        let outs = self.outputs()?;
        observe(self);
        self.finish()?;
        Ok(outs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = r#"
hw.module @Counter(in %clk : !seq.clock, in %rst : i1, out count : i8) {
  %c0 = hw.constant 0 : i8
  %c1 = hw.constant 1 : i8
  %next = comb.add %r, %c1 : i8
  %r = seq.firreg %next clock %clk reset sync %rst, %c0 preset 0 : i8
  hw.output %r : i8
}
"#;

    fn clk(v: bool) -> TypedValue {
        TypedValue::bits(TypeExpr::Clock, BitVec4::from_bool(v))
    }

    #[test]
    fn counter_counts_after_reset() {
        let mut sim = Simulator::from_source(COUNTER, "Counter", SimConfig::default()).unwrap();
        let mut seen = Vec::new();
        for c in 0..12u64 {
            let out = sim.run_cycle(vec![clk(c % 2 == 1), TypedValue::bool(c < 2)]).unwrap();
            seen.push(out["count"].as_bits().unwrap().to_u64().unwrap());
        }
        assert_eq!(seen, vec![0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5]);
    }

    #[test]
    fn seeded_order_matches_source_order() {
        let mut a = Simulator::from_source(COUNTER, "Counter", SimConfig::default()).unwrap();
        let cfg = SimConfig {
            seed: Some(7),
            ..SimConfig::default()
        };
        let mut b = Simulator::from_source(COUNTER, "Counter", cfg).unwrap();
        for c in 0..8u64 {
            let i = vec![clk(c % 2 == 1), TypedValue::bool(c == 0)];
            assert_eq!(a.run_cycle(i.clone()).unwrap(), b.run_cycle(i).unwrap());
        }
    }

    #[test]
    fn combinational_loop_deadlocks() {
        let src = r#"
hw.module @Loop(out o : i1) {
  %a = comb.xor %b, %b : i1
  %b = comb.and %a, %a : i1
  hw.output %a : i1
}
"#;
        let mut sim = Simulator::from_source(src, "Loop", SimConfig::default()).unwrap();
        match sim.run_cycle(vec![]) {
            Err(SimError::Deadlock { stuck, missing, .. }) => {
                assert_eq!(stuck.len(), 3);
                assert!(missing.contains(&"%a".to_string()));
            }
            other => panic!("expected deadlock, got {other:?}"),
        }
    }

    #[test]
    fn unknown_top_enters_debug() {
        let r = Simulator::from_source(COUNTER, "Nope", SimConfig::default());
        assert!(matches!(r, Err(Error::Sim(SimError::Debug(_)))));
    }
}
