// SPDX-License-Identifier: Apache-2.0

//! Per-module evaluation plans.
//!
//! A plan turns a module body into schedulable tasks. Each task lists the
//! value ids it needs in the current cycle (`deps`) and the tasks that must
//! finish before it (`after`). Ordering edges encode storage and memory
//! visibility: readers of a storage cell wait for its writers, memory reads
//! with latency 0 wait for the write ports, and write ports wait for
//! latency-1 reads so those observe the pre-write contents.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::error::SimError;
use crate::mlir::ast::{ModPort, PortDir, TypeExpr};
use crate::mlir::state::CanonOp;

#[derive(Clone, Debug)]
pub enum TaskKind {
    Op(Rc<CanonOp>),
    /// Instantiates (on first use) and stimulates a child instance.
    Instance(Rc<CanonOp>),
    /// Binds parent value `value` to input `index` of child `instance`.
    InstArg {
        instance: String,
        index: usize,
        value: String,
    },
    /// Copies output `index` of child `instance` into parent id `result`.
    InstRes {
        instance: String,
        index: usize,
        result: String,
    },
    /// Applies the nonblocking assignments queued by this instance.
    Flush,
}

#[derive(Clone, Debug)]
pub struct Task {
    pub kind: TaskKind,
    pub deps: Vec<String>,
    pub after: Vec<usize>,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub module: String,
    pub args: Vec<(String, TypeExpr)>,
    pub inputs: Vec<ModPort>,
    pub outputs: Vec<ModPort>,
    /// Ids handed to `hw.output`, one per output port.
    pub output_ids: Vec<String>,
    pub tasks: Vec<Task>,
    /// Declared type of every id in the module, nested regions included.
    pub types: HashMap<String, TypeExpr>,
}

pub const EDGE_BLOCKS: &[&str] = &["sv.alwaysff", "sv.always"];
const STORAGE_DECLS: &[&str] = &["sv.reg", "sv.logic", "sv.wire"];
const CELL_WRITERS: &[&str] = &["sv.assign", "sv.bpassign", "sv.passign", "sv.force", "sv.release"];

/// Ids used inside an op's regions but defined outside them, with the type
/// at the point of use, in first-use order.
pub fn free_vars(op: &CanonOp) -> Vec<(String, TypeExpr)> {
    let mut defined = BTreeSet::new();
    let mut used: Vec<(String, TypeExpr)> = Vec::new();
    fn walk(op: &CanonOp, defined: &mut BTreeSet<String>, used: &mut Vec<(String, TypeExpr)>) {
        for r in &op.regions {
            for b in &r.blocks {
                for (a, _) in &b.args {
                    defined.insert(a.clone());
                }
                for inner in &b.ops {
                    for (i, id) in inner.operands.iter().enumerate() {
                        let ty = inner.operand_types.get(i).cloned().unwrap_or(TypeExpr::None);
                        used.push((id.clone(), ty));
                    }
                    for r in &inner.result_ids {
                        defined.insert(r.clone());
                    }
                    walk(inner, defined, used);
                }
            }
        }
    }
    walk(op, &mut defined, &mut used);
    let mut seen = BTreeSet::new();
    used.into_iter()
        .filter(|(id, _)| !defined.contains(id) && seen.insert(id.clone()))
        .collect()
}

/// Storage cells an op's regions read and write, through `cell_of`.
fn region_cells(op: &CanonOp, cell_of: &HashMap<String, String>) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    op.walk(&mut |inner| {
        let target = inner.operands.first().map(|r| cell(cell_of, r));
        if inner.name == "sv.read_inout" {
            reads.extend(target);
        } else if CELL_WRITERS.contains(&inner.name.as_str()) {
            writes.extend(target);
        }
    });
    (reads, writes)
}

fn cell(cell_of: &HashMap<String, String>, id: &str) -> String {
    cell_of.get(id).cloned().unwrap_or_else(|| id.to_string())
}

fn collect_types(op: &CanonOp, types: &mut HashMap<String, TypeExpr>) {
    for (id, ty) in op.result_ids.iter().zip(&op.result_types) {
        types.insert(id.clone(), ty.clone());
    }
    for r in &op.regions {
        for b in &r.blocks {
            for (a, t) in &b.args {
                types.insert(a.clone(), t.clone());
            }
            for inner in &b.ops {
                collect_types(inner, types);
            }
        }
    }
}

fn collect_cells(op: &CanonOp, cell_of: &mut HashMap<String, String>) {
    if STORAGE_DECLS.contains(&op.name.as_str()) {
        if let Some(r) = op.result_ids.first() {
            cell_of.insert(r.clone(), r.clone());
        }
    } else if op.name == "sv.array_index_inout" {
        if let (Some(r), Some(base)) = (op.result_ids.first(), op.operands.first()) {
            let c = cell(cell_of, base);
            cell_of.insert(r.clone(), c);
        }
    }
    for r in &op.regions {
        for b in &r.blocks {
            for inner in &b.ops {
                collect_cells(inner, cell_of);
            }
        }
    }
}

fn firmem_read_latency(mem_ops: &HashMap<String, Rc<CanonOp>>, mem: &str) -> u64 {
    mem_ops.get(mem).and_then(|m| m.attr_u64("readLatency")).unwrap_or(0)
}

fn label(op: &CanonOp) -> String {
    match op.result_ids.first() {
        Some(r) => format!("{} (%{r})", op.name),
        None => op.name.clone(),
    }
}

/// Module interface from the `module_type` attribute.
pub fn module_ports(op: &CanonOp) -> Result<Vec<ModPort>, SimError> {
    match op.attr("module_type") {
        Some(crate::mlir::ast::AttrExpr::Type(TypeExpr::ModTy(ports))) => Ok(ports.clone()),
        None => Ok(Vec::new()),
        _ => Err(SimError::MalformedAttribute {
            op: op.name.clone(),
            attr: "module_type".into(),
        }),
    }
}

/// Builds the plan for `module`. `body` is the flattened list of graph-level
/// operations (static `sv.ifdef` already expanded).
pub fn build(module: &CanonOp, body: Vec<Rc<CanonOp>>) -> Result<Plan, SimError> {
    let sym = module.sym_name().unwrap_or_default().to_string();
    let ports = module_ports(module)?;
    let inputs: Vec<ModPort> = ports.iter().filter(|p| p.dir != PortDir::Output).cloned().collect();
    let outputs: Vec<ModPort> = ports.iter().filter(|p| p.dir == PortDir::Output).cloned().collect();
    let region = module.regions.first();
    if region.is_some_and(|r| r.blocks.len() > 1) {
        return Err(SimError::MultiBlockRegion(format!("hw.module @{sym}")));
    }
    let args = region
        .and_then(|r| r.blocks.first())
        .map(|b| b.args.clone())
        .unwrap_or_default();
    if args.len() != inputs.len() {
        return Err(SimError::PortMismatch {
            module: sym,
            detail: format!("{} input ports but {} block arguments", inputs.len(), args.len()),
        });
    }

    let mut types = HashMap::new();
    for (a, t) in &args {
        types.insert(a.clone(), t.clone());
    }
    let mut cell_of = HashMap::new();
    for (a, t) in &args {
        if matches!(t, TypeExpr::InOut(_)) {
            cell_of.insert(a.clone(), a.clone());
        }
    }
    let mut mem_ops = HashMap::new();
    for op in &body {
        collect_types(op, &mut types);
        collect_cells(op, &mut cell_of);
        if op.name == "seq.firmem" {
            if let Some(r) = op.result_ids.first() {
                mem_ops.insert(r.clone(), op.clone());
            }
        }
        op.walk(&mut |inner| {
            if inner.name == "sv.array_index_inout" || STORAGE_DECLS.contains(&inner.name.as_str()) {
                // already covered by collect_cells
            }
        });
    }

    let mut tasks: Vec<Task> = Vec::new();
    let mut output_ids = Vec::new();
    // Indices into `tasks` by role.
    let mut edge_blocks = Vec::new();
    let mut init_blocks = Vec::new();
    let mut comb_blocks = Vec::new();
    let mut graph_writers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut direct_drivers: BTreeMap<String, usize> = BTreeMap::new();
    let mut graph_readers: Vec<(usize, String)> = Vec::new();
    let mut graph_nba = Vec::new();
    let mut mem_writers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut mem_sync_readers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut mem_comb_readers: BTreeMap<String, Vec<usize>> = BTreeMap::new();

    for op in &body {
        if op.operands.len() != op.operand_types.len() {
            return Err(SimError::ArityMismatch {
                op: op.name.clone(),
                expected: op.operand_types.len(),
                found: op.operands.len(),
            });
        }
        let name = op.name.as_str();
        let idx = tasks.len();
        match name {
            "hw.instance" => {
                let inst_name = op
                    .attr_str("instanceName")
                    .ok_or_else(|| SimError::MalformedAttribute {
                        op: name.into(),
                        attr: "instanceName".into(),
                    })?
                    .to_string();
                tasks.push(Task {
                    kind: TaskKind::Instance(op.clone()),
                    deps: Vec::new(),
                    after: Vec::new(),
                    label: format!("hw.instance \"{inst_name}\""),
                });
                for (i, v) in op.operands.iter().enumerate() {
                    tasks.push(Task {
                        kind: TaskKind::InstArg {
                            instance: inst_name.clone(),
                            index: i,
                            value: v.clone(),
                        },
                        deps: vec![v.clone()],
                        after: vec![idx],
                        label: format!("hw.instance \"{inst_name}\" input {i}"),
                    });
                }
                for (j, r) in op.result_ids.iter().enumerate() {
                    tasks.push(Task {
                        kind: TaskKind::InstRes {
                            instance: inst_name.clone(),
                            index: j,
                            result: r.clone(),
                        },
                        deps: Vec::new(),
                        after: vec![idx],
                        label: format!("hw.instance \"{inst_name}\" output {j} (%{r})"),
                    });
                }
                continue;
            }
            "hw.output" => output_ids = op.operands.clone(),
            _ => {}
        }

        let mut deps: Vec<String> = match name {
            "seq.firreg" => {
                let mut d: Vec<String> = op.operands.iter().skip(1).take(1).cloned().collect();
                if op.has_attr("isAsync") {
                    d.extend(op.operands.iter().skip(2).cloned());
                }
                d
            }
            "seq.firmem.read_port" | "seq.firmem.read_write_port" | "seq.firmem.write_port" => {
                let mem = op.operands.first().cloned().unwrap_or_default();
                let lat = firmem_read_latency(&mem_ops, &mem);
                let clk_at = match name {
                    "seq.firmem.read_port" => 2,
                    "seq.firmem.write_port" => 3,
                    _ => 4,
                };
                if name != "seq.firmem.write_port" && lat == 0 {
                    op.operands.clone()
                } else {
                    op.operands
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i == 0 || *i == clk_at)
                        .map(|(_, v)| v.clone())
                        .collect()
                }
            }
            n if EDGE_BLOCKS.contains(&n) => {
                let mut d = op.operands.clone();
                d.extend(
                    free_vars(op)
                        .into_iter()
                        .filter(|(_, t)| matches!(t, TypeExpr::InOut(_)))
                        .map(|(id, _)| id),
                );
                d
            }
            _ if !op.regions.is_empty() => {
                let mut d = op.operands.clone();
                d.extend(free_vars(op).into_iter().map(|(id, _)| id));
                d
            }
            _ => op.operands.clone(),
        };
        let mut seen = BTreeSet::new();
        deps.retain(|d| seen.insert(d.clone()));

        match name {
            n if EDGE_BLOCKS.contains(&n) => edge_blocks.push(idx),
            "sv.initial" => init_blocks.push(idx),
            _ if !op.regions.is_empty() => comb_blocks.push(idx),
            "sv.read_inout" => {
                if let Some(r) = op.operands.first() {
                    graph_readers.push((idx, cell(&cell_of, r)));
                }
            }
            n if CELL_WRITERS.contains(&n) => {
                if let Some(r) = op.operands.first() {
                    let c = cell(&cell_of, r);
                    if n == "sv.assign" && cell_of.get(r) == Some(r) && direct_drivers.insert(c.clone(), idx).is_some()
                    {
                        return Err(SimError::DuplicateDriver(c));
                    }
                    if n == "sv.passign" {
                        graph_nba.push(idx);
                    }
                    graph_writers.entry(c).or_default().push(idx);
                }
            }
            "seq.firmem.read_port" | "seq.firmem.write_port" | "seq.firmem.read_write_port" => {
                let mem = op.operands.first().cloned().unwrap_or_default();
                if mem_ops
                    .get(&mem)
                    .is_some_and(|m| matches!(m.result_types.first(), Some(TypeExpr::FirMem { mask: Some(_), .. })))
                    || (name == "seq.firmem.write_port" && op.operands.len() > 5)
                {
                    return Err(SimError::MaskUnsupported(name.into()));
                }
                let lat = firmem_read_latency(&mem_ops, &mem);
                if name != "seq.firmem.read_port" {
                    mem_writers.entry(mem.clone()).or_default().push(idx);
                }
                if name != "seq.firmem.write_port" {
                    if lat == 0 {
                        mem_comb_readers.entry(mem).or_default().push(idx);
                    } else {
                        mem_sync_readers.entry(mem).or_default().push(idx);
                    }
                }
            }
            _ => {}
        }
        tasks.push(Task {
            kind: TaskKind::Op(op.clone()),
            deps,
            after: Vec::new(),
            label: label(op),
        });
    }

    // Procedural writers per cell.
    let mut proc_writers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut block_reads: HashMap<usize, BTreeSet<String>> = HashMap::new();
    for &b in edge_blocks.iter().chain(&init_blocks).chain(&comb_blocks) {
        let TaskKind::Op(op) = &tasks[b].kind else {
            continue;
        };
        let (reads, writes) = region_cells(op, &cell_of);
        for c in writes {
            proc_writers.entry(c).or_default().push(b);
        }
        block_reads.insert(b, reads);
    }

    let flush = if edge_blocks.is_empty() && init_blocks.is_empty() && graph_nba.is_empty() {
        None
    } else {
        let idx = tasks.len();
        tasks.push(Task {
            kind: TaskKind::Flush,
            deps: Vec::new(),
            after: edge_blocks
                .iter()
                .chain(&init_blocks)
                .chain(&graph_nba)
                .copied()
                .collect(),
            label: "nonblocking assignment flush".into(),
        });
        Some(idx)
    };

    let empty = Vec::new();
    for (r, c) in graph_readers {
        let mut after: Vec<usize> = graph_writers.get(&c).unwrap_or(&empty).clone();
        let pw = proc_writers.get(&c).unwrap_or(&empty);
        after.extend(pw.iter().copied());
        if let Some(f) = flush {
            if !pw.is_empty() || !graph_nba.is_empty() {
                after.push(f);
            }
        }
        tasks[r].after.extend(after);
    }
    for &b in edge_blocks.iter().chain(&init_blocks) {
        for c in block_reads.get(&b).into_iter().flatten() {
            let ws = graph_writers.get(c).unwrap_or(&empty).clone();
            tasks[b].after.extend(ws);
        }
    }
    for &b in &comb_blocks {
        if let Some(f) = flush {
            tasks[b].after.push(f);
        }
        for c in block_reads.get(&b).cloned().into_iter().flatten() {
            let mut ws = graph_writers.get(&c).unwrap_or(&empty).clone();
            ws.extend(
                proc_writers
                    .get(&c)
                    .unwrap_or(&empty)
                    .iter()
                    .filter(|w| comb_blocks.contains(w) && **w != b),
            );
            tasks[b].after.extend(ws);
        }
    }
    for (mem, writers) in &mem_writers {
        for &w in writers {
            let rs: Vec<usize> = mem_sync_readers
                .get(mem)
                .unwrap_or(&empty)
                .iter()
                .copied()
                .filter(|r| *r != w)
                .collect();
            tasks[w].after.extend(rs);
        }
        for &r in mem_comb_readers.get(mem).unwrap_or(&empty) {
            let ws: Vec<usize> = writers.iter().copied().filter(|w| *w != r).collect();
            tasks[r].after.extend(ws);
        }
    }
    for t in &mut tasks {
        let mut seen = BTreeSet::new();
        t.after.retain(|a| seen.insert(*a));
    }

    Ok(Plan {
        module: sym,
        args,
        inputs,
        outputs,
        output_ids,
        tasks,
        types,
    })
}
