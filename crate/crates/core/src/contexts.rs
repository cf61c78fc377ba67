//! Initial distributed contexts: which location instances exist and which
//! tasks sit in their queues when exploration starts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::absdom::AbstractTask;
use crate::error::{Error, Result};
use crate::interfering::TaskCardinality;
use crate::syntax::{Ident, Program};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationInstance {
    pub class_name: Ident,
    /// 1-based ordinal within the class.
    pub id: u32,
}

impl LocationInstance {
    pub fn new(class_name: impl Into<Ident>, id: u32) -> Self {
        Self {
            class_name: class_name.into(),
            id,
        }
    }

    /// Short class prefix: its capitals lowercased (`DB` -> `db`,
    /// `Worker` -> `w`), or the lowercased name if it has none.
    pub fn prefix(class_name: &str) -> String {
        let caps: String = class_name.chars().filter(char::is_ascii_uppercase).collect();
        if caps.is_empty() {
            class_name.to_lowercase()
        } else {
            caps.to_lowercase()
        }
    }
}

impl fmt::Display for LocationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", Self::prefix(&self.class_name), self.id)
    }
}

impl Serialize for LocationInstance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskInstance {
    pub task: AbstractTask,
    /// Reference parameters; primitive ones take their default value.
    pub args: BTreeMap<Ident, LocationInstance>,
}

impl TaskInstance {
    pub fn new(task: AbstractTask) -> Self {
        Self {
            task,
            args: BTreeMap::new(),
        }
    }
}

impl Serialize for TaskInstance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TaskInstance", 2)?;
        st.serialize_field("method", &self.task.method_name)?;
        st.serialize_field("args", &self.args)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlacedLocation {
    pub instance: LocationInstance,
    /// Reference constructor fields.
    pub fields: BTreeMap<Ident, LocationInstance>,
    pub tasks: Vec<TaskInstance>,
}

impl Serialize for PlacedLocation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("PlacedLocation", 4)?;
        st.serialize_field("id", &self.instance)?;
        st.serialize_field("class", &self.instance.class_name)?;
        st.serialize_field("fields", &self.fields)?;
        st.serialize_field("tasks", &self.tasks)?;
        st.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InitialContext {
    pub locations: Vec<PlacedLocation>,
}

impl InitialContext {
    pub fn location(&self, inst: &LocationInstance) -> Option<&PlacedLocation> {
        self.locations.iter().find(|l| &l.instance == inst)
    }

    pub fn task_count(&self, task: &AbstractTask) -> usize {
        self.locations
            .iter()
            .flat_map(|l| &l.tasks)
            .filter(|t| &t.task == task)
            .count()
    }

    /// Reference wiring, e.g. `w1.db=db1 db1.register(w=w1)`.
    pub fn wiring(&self) -> String {
        let mut parts = Vec::new();
        for l in &self.locations {
            for (f, v) in &l.fields {
                parts.push(format!("{}.{f}={v}", l.instance));
            }
            for t in l.tasks.iter().filter(|t| !t.args.is_empty()) {
                let args: Vec<String> = t.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
                parts.push(format!("{}.{}({})", l.instance, t.task.method_name, args.join(",")));
            }
        }
        parts.join(" ")
    }
}

impl fmt::Display for InitialContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let groups: Vec<String> = self
            .locations
            .iter()
            .map(|l| {
                let names: Vec<&str> = l.tasks.iter().map(|t| t.task.method_name.as_str()).collect();
                format!("[{}]_{}", names.join(","), l.instance)
            })
            .collect();
        write!(f, "{{{}}}", groups.join(", "))
    }
}

fn method_index(p: &Program, t: &AbstractTask) -> usize {
    t.order_key(p).1
}

fn group_key(p: &Program, l: &PlacedLocation) -> (bool, Vec<usize>) {
    let mut ms: Vec<usize> = l.tasks.iter().map(|t| method_index(p, &t.task)).collect();
    ms.sort();
    (l.tasks.is_empty(), ms)
}

fn check(p: &Program, c: &InitialContext) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in &c.locations {
        if p.class(&l.instance.class_name).is_none() {
            return Err(Error::InvalidContext(format!("unknown class {}", l.instance.class_name)));
        }
        if !seen.insert(&l.instance) {
            return Err(Error::InvalidContext(format!("{} appears twice", l.instance)));
        }
        for t in &l.tasks {
            if t.task.class_name != l.instance.class_name || p.method(&t.task.class_name, &t.task.method_name).is_none() {
                return Err(Error::InvalidContext(format!("{} cannot run on {}", t.task, l.instance)));
            }
        }
    }
    let known: BTreeSet<&LocationInstance> = c.locations.iter().map(|l| &l.instance).collect();
    for l in &c.locations {
        let refs = l.fields.values().chain(l.tasks.iter().flat_map(|t| t.args.values()));
        for r in refs {
            if !known.contains(r) {
                return Err(Error::InvalidContext(format!("{} refers to missing {r}", l.instance)));
            }
        }
    }
    Ok(())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

/// Relabel location instances: classes in declaration order, groups within
/// a class by the declaration order of the methods they hold (empty groups
/// last), tasks within a group likewise. Groups holding the same methods are
/// ordered to minimize the result.
pub fn canonicalize(p: &Program, c: &InitialContext) -> Result<InitialContext> {
    check(p, c)?;
    // locations grouped by class, sorted by key, then split into runs of
    // equal key
    let mut classes: Vec<Vec<&PlacedLocation>> = vec![Vec::new(); p.classes.len()];
    for l in &c.locations {
        classes[p.class_index(&l.instance.class_name).expect("checked")].push(l);
    }
    let mut runs: Vec<Vec<&PlacedLocation>> = Vec::new();
    for locs in &mut classes {
        locs.sort_by_key(|l| group_key(p, l));
        for l in locs.iter() {
            match runs.last_mut() {
                Some(run)
                    if run[0].instance.class_name == l.instance.class_name
                        && group_key(p, run[0]) == group_key(p, l) =>
                {
                    run.push(l)
                }
                _ => runs.push(vec![*l]),
            }
        }
    }

    let perms: Vec<Vec<Vec<usize>>> = runs.iter().map(|r| permutations(r.len())).collect();
    let mut choice = vec![0usize; runs.len()];
    let mut best: Option<InitialContext> = None;
    loop {
        let order: Vec<&PlacedLocation> = runs
            .iter()
            .zip(&choice)
            .zip(&perms)
            .flat_map(|((run, &ci), ps)| ps[ci].iter().map(move |&i| run[i]))
            .collect();
        let mut rename: BTreeMap<&LocationInstance, LocationInstance> = BTreeMap::new();
        let mut next_id: BTreeMap<&str, u32> = BTreeMap::new();
        for l in &order {
            let id = next_id.entry(&l.instance.class_name).or_insert(0);
            *id += 1;
            rename.insert(&l.instance, LocationInstance::new(&l.instance.class_name, *id));
        }
        let candidate = InitialContext {
            locations: order
                .iter()
                .map(|l| {
                    let mut tasks: Vec<TaskInstance> = l
                        .tasks
                        .iter()
                        .map(|t| TaskInstance {
                            task: t.task.clone(),
                            args: t.args.iter().map(|(k, v)| (k.clone(), rename[v].clone())).collect(),
                        })
                        .collect();
                    tasks.sort_by(|a, b| (method_index(p, &a.task), &a.args).cmp(&(method_index(p, &b.task), &b.args)));
                    PlacedLocation {
                        instance: rename[&l.instance].clone(),
                        fields: l.fields.iter().map(|(k, v)| (k.clone(), rename[v].clone())).collect(),
                        tasks,
                    }
                })
                .collect(),
        };
        if best.as_ref().is_none_or(|b| &candidate < b) {
            best = Some(candidate);
        }
        // advance the odometer over tie permutations
        let mut k = 0;
        while k < runs.len() {
            choice[k] += 1;
            if choice[k] < perms[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
        if k == runs.len() {
            break;
        }
    }
    Ok(best.unwrap_or_default())
}

/// All set partitions of `0..n`, as lists of blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            go(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone)]
enum Slot {
    Field { loc: usize, name: Ident },
    Arg { loc: usize, task: usize, name: Ident },
}

/// Add auxiliary locations until every reference slot has a candidate,
/// then wire each slot to its first candidate, or to every candidate when
/// `expand` is set.
fn wire(p: &Program, mut c: InitialContext, expand: bool) -> Vec<InitialContext> {
    let needs = |c: &InitialContext| -> Vec<(usize, Slot, Ident)> {
        let mut out = Vec::new();
        for (li, l) in c.locations.iter().enumerate() {
            let class = p.class(&l.instance.class_name).expect("checked");
            for param in &class.ctor_params {
                if let Some(target) = param.ty.class_name() {
                    out.push((li, Slot::Field { loc: li, name: param.name.clone() }, target.to_string()));
                }
            }
            for (ti, t) in l.tasks.iter().enumerate() {
                let m = p.method(&t.task.class_name, &t.task.method_name).expect("checked");
                for param in &m.params {
                    if let Some(target) = param.ty.class_name() {
                        out.push((
                            li,
                            Slot::Arg {
                                loc: li,
                                task: ti,
                                name: param.name.clone(),
                            },
                            target.to_string(),
                        ));
                    }
                }
            }
        }
        out
    };
    loop {
        let present: BTreeSet<&str> = c.locations.iter().map(|l| l.instance.class_name.as_str()).collect();
        let missing: Option<Ident> = needs(&c)
            .into_iter()
            .map(|(_, _, t)| t)
            .find(|t| !present.contains(t.as_str()));
        match missing {
            Some(class) => c.locations.push(PlacedLocation {
                instance: LocationInstance::new(class, 1),
                fields: BTreeMap::new(),
                tasks: Vec::new(),
            }),
            None => break,
        }
    }

    let slots = needs(&c);
    let candidates: Vec<Vec<LocationInstance>> = slots
        .iter()
        .map(|(_, _, target)| {
            let all = c.locations.iter().filter(|l| &l.instance.class_name == target).map(|l| l.instance.clone());
            if expand {
                all.collect()
            } else {
                all.take(1).collect()
            }
        })
        .collect();

    let mut out = Vec::new();
    let mut choice = vec![0usize; slots.len()];
    loop {
        let mut w = c.clone();
        for ((_, slot, _), (cands, &ci)) in slots.iter().zip(candidates.iter().zip(&choice)) {
            let v = cands[ci].clone();
            match slot {
                Slot::Field { loc, name } => {
                    w.locations[*loc].fields.insert(name.clone(), v);
                }
                Slot::Arg { loc, task, name } => {
                    w.locations[*loc].tasks[*task].args.insert(name.clone(), v);
                }
            }
        }
        out.push(w);
        let mut k = 0;
        while k < slots.len() {
            choice[k] += 1;
            if choice[k] < candidates[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
        if k == slots.len() {
            break;
        }
    }
    out
}

/// Every initial context for `t_ini`, canonical and pairwise distinct,
/// smallest first.
pub fn generate_contexts(p: &Program, t_ini: &[TaskCardinality], expand_wiring: bool) -> Result<Vec<InitialContext>> {
    for tc in t_ini {
        if tc.task.is_main() || p.method(&tc.task.class_name, &tc.task.method_name).is_none() {
            return Err(Error::UnknownTask(tc.task.to_string()));
        }
        if tc.min == 0 || tc.min > tc.max {
            return Err(Error::InvalidContext(format!("bad cardinality for {}", tc.task)));
        }
    }
    let mut tasks: Vec<&TaskCardinality> = t_ini.iter().collect();
    tasks.sort_by_key(|tc| tc.task.order_key(p));

    let mut found: BTreeSet<InitialContext> = BTreeSet::new();
    let mut counts: Vec<u32> = tasks.iter().map(|tc| tc.min).collect();
    loop {
        // task instances per class, in declaration order
        let mut per_class: Vec<Vec<AbstractTask>> = vec![Vec::new(); p.classes.len()];
        for (tc, &k) in tasks.iter().zip(&counts) {
            let ci = p.class_index(&tc.task.class_name).expect("checked");
            per_class[ci].extend(std::iter::repeat_n(tc.task.clone(), k as usize));
        }
        let partitions: Vec<Vec<Vec<Vec<usize>>>> = per_class.iter().map(|ts| set_partitions(ts.len())).collect();
        let mut choice = vec![0usize; partitions.len()];
        loop {
            let mut ctx = InitialContext::default();
            for (ci, (parts, &pi)) in partitions.iter().zip(&choice).enumerate() {
                for (bi, block) in parts[pi].iter().enumerate() {
                    ctx.locations.push(PlacedLocation {
                        instance: LocationInstance::new(&p.classes[ci].name, bi as u32 + 1),
                        fields: BTreeMap::new(),
                        tasks: block.iter().map(|&i| TaskInstance::new(per_class[ci][i].clone())).collect(),
                    });
                }
            }
            let ctx = canonicalize(p, &ctx)?;
            for w in wire(p, ctx, expand_wiring) {
                found.insert(canonicalize(p, &w)?);
            }
            let mut k = 0;
            while k < partitions.len() {
                choice[k] += 1;
                if choice[k] < partitions[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == partitions.len() {
                break;
            }
        }

        let mut k = 0;
        while k < tasks.len() {
            counts[k] += 1;
            if counts[k] <= tasks[k].max {
                break;
            }
            counts[k] = tasks[k].min;
            k += 1;
        }
        if k == tasks.len() {
            break;
        }
    }
    let mut out: Vec<InitialContext> = found.into_iter().collect();
    out.sort_by(|a, b| (a.locations.len(), a).cmp(&(b.locations.len(), b)));
    Ok(out)
}
