//! Capability semantics of well-defined systems and the explicit transition
//! systems built from it, plus the fast/slow views used by the equivalences.
//!
//! A well-defined model differs from its derivatives only in species levels,
//! so states are level vectors laid out in composition-leaf order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{sync_set, CompositionTree, EquivConfig, Level, Prefix, Role, Speed, SystemDef};

/// Default bound on the number of states explored by [`build_lts`].
pub const DEFAULT_MAX_STATES: usize = 1_000_000;

/// One participant of a reaction instance: `species:op(level, stoich)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelEntry {
    pub species: String,
    pub role: Role,
    /// Level of the species in the source state.
    pub level: Level,
    pub stoich: u32,
}

impl fmt::Display for LabelEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}({},{})",
            self.species, self.role, self.level, self.stoich
        )
    }
}

/// `(action, w)`. The entry list is kept sorted, so equality is set equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CapabilityLabel {
    pub action: String,
    entries: Vec<LabelEntry>,
}

impl CapabilityLabel {
    pub fn new(action: impl Into<String>, mut entries: Vec<LabelEntry>) -> Self {
        entries.sort();
        entries.dedup();
        Self {
            action: action.into(),
            entries,
        }
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    /// `w₁ :: w₂` on the entry sets. The action of `self` is kept.
    pub fn concat(&self, other: &CapabilityLabel) -> CapabilityLabel {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        CapabilityLabel::new(self.action.clone(), entries)
    }
}

impl fmt::Display for CapabilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {{", self.action)?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("})")
    }
}

/// A level vector, or any coordinate vector after a change of variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State<V = Level>(pub Vec<V>);

impl<V: fmt::Display> fmt::Display for State<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub src: usize,
    pub label: CapabilityLabel,
    pub dst: usize,
}

/// Explicit labelled transition system over the derivative set of a model.
///
/// Transitions are sorted by source state, so the outgoing transitions of a
/// state are a contiguous slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lts<V = Level> {
    /// Name of each state coordinate.
    pub species: Vec<String>,
    pub states: Vec<State<V>>,
    pub initial: usize,
    transitions: Vec<Transition>,
    offsets: Vec<usize>,
}

impl<V: Clone + Ord> Lts<V> {
    pub fn new(
        species: Vec<String>,
        states: Vec<State<V>>,
        initial: usize,
        mut transitions: Vec<Transition>,
    ) -> Self {
        let n = states.len();
        assert!(initial < n.max(1), "initial state out of range");
        assert!(
            transitions.iter().all(|t| t.src < n && t.dst < n),
            "transition endpoint out of range"
        );
        transitions.sort_by(|a, b| (a.src, &a.label, a.dst).cmp(&(b.src, &b.label, b.dst)));
        let mut offsets = vec![0; n + 1];
        for t in &transitions {
            offsets[t.src + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            species,
            states,
            initial,
            transitions,
            offsets,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, state: usize) -> &[Transition] {
        &self.transitions[self.offsets[state]..self.offsets[state + 1]]
    }

    pub fn index_of(&self, state: &State<V>) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Map from state vector to index.
    pub fn state_index(&self) -> HashMap<&State<V>, usize>
    where
        V: std::hash::Hash,
    {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect()
    }

    pub fn actions(&self) -> BTreeSet<&str> {
        self.transitions
            .iter()
            .map(|t| t.label.action.as_str())
            .collect()
    }

    /// Same transitions over a different state space of equal size.
    pub fn with_states<W: Clone + Ord>(
        &self,
        species: Vec<String>,
        states: Vec<State<W>>,
    ) -> Lts<W> {
        assert_eq!(states.len(), self.states.len());
        Lts {
            species,
            states,
            initial: self.initial,
            transitions: self.transitions.clone(),
            offsets: self.offsets.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("state space exceeds the limit of {0} states")]
    StateSpaceLimitExceeded(usize),
    #[error("action {0} is neither fast nor slow")]
    UnpartitionedAction(String),
}

enum Node {
    Leaf {
        index: usize,
        name: String,
        max: Level,
        prefixes: Vec<Prefix>,
    },
    Coop {
        left: Box<Node>,
        sync: BTreeSet<String>,
        right: Box<Node>,
    },
}

/// One derivable capability step before it is applied to the state.
struct Move {
    action: String,
    entries: Vec<LabelEntry>,
    updates: Vec<(usize, Level)>,
}

/// Composition tree with species resolved to state indices and
/// cooperation sets made explicit.
pub struct CompiledSystem {
    species: Vec<String>,
    initial: Vec<Level>,
    root: Node,
}

impl CompiledSystem {
    /// Panics on undefined species; callers pass validated systems.
    pub fn new(sys: &SystemDef) -> Self {
        let species = sys.species_order();
        let max = sys.max_levels();
        let mut next = 0;
        let root = compile(sys, &sys.tree, &max, &mut next);
        Self {
            species,
            initial: sys.initial_levels(),
            root,
        }
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn initial_state(&self) -> State {
        State(self.initial.clone())
    }

    /// All capability transitions enabled in `state`.
    pub fn step(&self, state: &State) -> Vec<(CapabilityLabel, State)> {
        let mut out: Vec<(CapabilityLabel, State)> = moves(&self.root, &state.0)
            .into_iter()
            .map(|m| {
                let mut next = state.0.clone();
                for (i, l) in m.updates {
                    next[i] = l;
                }
                (CapabilityLabel::new(m.action, m.entries), State(next))
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn compile(sys: &SystemDef, tree: &CompositionTree, max: &[Level], next: &mut usize) -> Node {
    match tree {
        CompositionTree::Leaf { species, .. } => {
            let def = sys.species_def(species).expect("undefined species");
            let index = *next;
            *next += 1;
            Node::Leaf {
                index,
                name: species.clone(),
                max: max[index],
                prefixes: def.prefixes.clone(),
            }
        }
        CompositionTree::Node { left, coop, right } => Node::Coop {
            sync: sync_set(sys, left, coop, right),
            left: Box::new(compile(sys, left, max, next)),
            right: Box::new(compile(sys, right, max, next)),
        },
    }
}

/// Side conditions of the prefix rules; returns the level after the move.
fn fire(prefix: &Prefix, level: Level, max: Level) -> Option<Level> {
    let k = prefix.stoich;
    match prefix.role {
        Role::Reactant => (k <= level && level <= max).then(|| level - k),
        Role::Product => (max >= k && level <= max - k).then(|| level + k),
        Role::Activator => (k <= level && level <= max).then_some(level),
        Role::Inhibitor | Role::GenericModifier => (level <= max).then_some(level),
    }
}

fn moves(node: &Node, levels: &[Level]) -> Vec<Move> {
    match node {
        Node::Leaf {
            index,
            name,
            max,
            prefixes,
        } => {
            let level = levels[*index];
            prefixes
                .iter()
                .filter_map(|p| {
                    fire(p, level, *max).map(|next| Move {
                        action: p.action.clone(),
                        entries: vec![LabelEntry {
                            species: name.clone(),
                            role: p.role,
                            level,
                            stoich: p.stoich,
                        }],
                        updates: vec![(*index, next)],
                    })
                })
                .collect()
        }
        Node::Coop { left, sync, right } => {
            let lm = moves(left, levels);
            let rm = moves(right, levels);
            let mut out = Vec::new();
            for m in &lm {
                if sync.contains(&m.action) {
                    for r in rm.iter().filter(|r| r.action == m.action) {
                        let mut entries = m.entries.clone();
                        entries.extend(r.entries.iter().cloned());
                        let mut updates = m.updates.clone();
                        updates.extend(r.updates.iter().cloned());
                        out.push(Move {
                            action: m.action.clone(),
                            entries,
                            updates,
                        });
                    }
                }
            }
            out.extend(lm.into_iter().filter(|m| !sync.contains(&m.action)));
            out.extend(rm.into_iter().filter(|m| !sync.contains(&m.action)));
            out
        }
    }
}

/// Capability transitions of `sys` from `state`.
pub fn step(sys: &SystemDef, state: &State) -> Vec<(CapabilityLabel, State)> {
    CompiledSystem::new(sys).step(state)
}

/// Explores the derivative set of the initial state breadth first.
///
/// Each newly discovered layer is numbered in lexicographic order, so the
/// indexing depends only on the model.
pub fn build_lts(sys: &SystemDef, max_states: usize) -> Result<Lts, SemanticsError> {
    let compiled = CompiledSystem::new(sys);
    let init = compiled.initial_state();
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states = vec![init.clone()];
    index.insert(init, 0);
    if max_states == 0 {
        return Err(SemanticsError::StateSpaceLimitExceeded(max_states));
    }
    let mut frontier = vec![0usize];
    let mut pending: Vec<(usize, CapabilityLabel, State)> = Vec::new();
    let mut transitions = Vec::new();
    while !frontier.is_empty() {
        let mut discovered = BTreeSet::new();
        for &s in &frontier {
            for (label, target) in compiled.step(&states[s]) {
                if !index.contains_key(&target) {
                    discovered.insert(target.clone());
                }
                pending.push((s, label, target));
            }
        }
        let mut next = Vec::with_capacity(discovered.len());
        for st in discovered {
            if states.len() >= max_states {
                return Err(SemanticsError::StateSpaceLimitExceeded(max_states));
            }
            index.insert(st.clone(), states.len());
            next.push(states.len());
            states.push(st);
        }
        for (src, label, target) in pending.drain(..) {
            transitions.push(Transition {
                src,
                label,
                dst: index[&target],
            });
        }
        frontier = next;
    }
    Ok(Lts::new(compiled.species, states, 0, transitions))
}

/// `w_Δ`: keeps the entries whose species, after aliasing, is in Δ, and
/// renames them to the canonical name.
pub fn filter_label(label: &CapabilityLabel, cfg: &EquivConfig) -> CapabilityLabel {
    let entries = label
        .entries
        .iter()
        .filter_map(|e| {
            let name = cfg.canonical(&e.species);
            cfg.delta.contains(name).then(|| LabelEntry {
                species: name.to_string(),
                ..e.clone()
            })
        })
        .collect();
    CapabilityLabel::new(label.action.clone(), entries)
}

pub type LabelId = usize;

/// Interns filtered slow labels so both sides of a comparison share ids.
#[derive(Debug, Default)]
pub struct LabelTable {
    ids: HashMap<CapabilityLabel, LabelId>,
    labels: Vec<CapabilityLabel>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: CapabilityLabel) -> LabelId {
        if let Some(&id) = self.ids.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.ids.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    pub fn get(&self, id: LabelId) -> &CapabilityLabel {
        &self.labels[id]
    }
}

/// Fast and slow views of one transition system.
///
/// - `↠`: fast successors, unlabelled, one edge per state pair
/// - `⤇`: reflexive-transitive closure of `↠`
/// - `→α,w_Δ`: slow transitions with filtered labels
/// - `⤇α,w_Δ = ⤇ ∘ →α,w_Δ ∘ ⤇`
///
/// Closures and weak slow successors are computed on first use and memoised.
pub struct WeakViews {
    fast: Vec<Vec<usize>>,
    fast_actions: BTreeMap<(usize, usize), BTreeSet<String>>,
    slow: Vec<Vec<(LabelId, usize)>>,
    closure: Vec<OnceLock<Vec<usize>>>,
    weak_slow: Vec<OnceLock<BTreeMap<LabelId, Vec<usize>>>>,
}

impl WeakViews {
    pub fn new<V: Clone + Ord>(
        lts: &Lts<V>,
        cfg: &EquivConfig,
        table: &mut LabelTable,
    ) -> Result<Self, SemanticsError> {
        let n = lts.num_states();
        let mut fast: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut fast_actions: BTreeMap<(usize, usize), BTreeSet<String>> = BTreeMap::new();
        let mut slow: Vec<Vec<(LabelId, usize)>> = vec![Vec::new(); n];
        for t in lts.transitions() {
            match cfg.partition.speed(&t.label.action) {
                Some(Speed::Fast) => {
                    fast[t.src].insert(t.dst);
                    fast_actions
                        .entry((t.src, t.dst))
                        .or_default()
                        .insert(t.label.action.clone());
                }
                Some(Speed::Slow) => {
                    let id = table.intern(filter_label(&t.label, cfg));
                    slow[t.src].push((id, t.dst));
                }
                None => return Err(SemanticsError::UnpartitionedAction(t.label.action.clone())),
            }
        }
        for s in &mut slow {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Self {
            fast: fast.into_iter().map(|s| s.into_iter().collect()).collect(),
            fast_actions,
            slow,
            closure: (0..n).map(|_| OnceLock::new()).collect(),
            weak_slow: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.fast.len()
    }

    /// `s ↠ t`
    pub fn fast_successors(&self, s: usize) -> &[usize] {
        &self.fast[s]
    }

    /// Fast actions underlying the `↠` edge from `s` to `t`, for diagnostics.
    pub fn fast_actions(&self, s: usize, t: usize) -> Option<&BTreeSet<String>> {
        self.fast_actions.get(&(s, t))
    }

    /// `s →α,w_Δ t`
    pub fn slow_transitions(&self, s: usize) -> &[(LabelId, usize)] {
        &self.slow[s]
    }

    /// `{t | s ⤇ t}`, sorted, always containing `s`.
    pub fn closure(&self, s: usize) -> &[usize] {
        self.closure[s].get_or_init(|| {
            let mut seen = BTreeSet::from([s]);
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &y in &self.fast[x] {
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().collect()
        })
    }

    /// Weak slow successors of `s`, grouped by filtered label.
    pub fn weak_slow(&self, s: usize) -> &BTreeMap<LabelId, Vec<usize>> {
        self.weak_slow[s].get_or_init(|| {
            let mut out: BTreeMap<LabelId, BTreeSet<usize>> = BTreeMap::new();
            for &mid in self.closure(s) {
                for &(label, after) in &self.slow[mid] {
                    out.entry(label)
                        .or_default()
                        .extend(self.closure(after).iter().copied());
                }
            }
            out.into_iter()
                .map(|(l, set)| (l, set.into_iter().collect()))
                .collect()
        })
    }

    /// `{t | s ⤇α,w_Δ t}` for one filtered label.
    pub fn weak_slow_targets(&self, s: usize, label: LabelId) -> &[usize] {
        self.weak_slow(s)
            .get(&label)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Builds the weak views of `lts`; fails if an action is left unpartitioned.
pub fn weak_views<V: Clone + Ord>(
    lts: &Lts<V>,
    cfg: &EquivConfig,
    table: &mut LabelTable,
) -> Result<WeakViews, SemanticsError> {
    WeakViews::new(lts, cfg, table)
}
