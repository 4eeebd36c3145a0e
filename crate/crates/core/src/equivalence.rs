//! Fast-slow and slow bisimulation between two transition systems.
//!
//! Relations are sets of cross pairs `(p, q)` with `p` a state of the first
//! system and `q` one of the second; each pair is checked in both directions,
//! which is the symmetric closure of the relation. The largest bisimulation is
//! the greatest fixpoint of pair deletion, starting from all cross pairs.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::{compose, EquivConfig, SystemDef, ValidationError};
use crate::semantics::{
    build_lts, CapabilityLabel, LabelId, LabelTable, Lts, SemanticsError, State, WeakViews,
};

/// Default cap on witness trace length.
pub const WITNESS_STEPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Slow transitions matched weakly, fast steps matched by `⤇`.
    FastSlow,
    /// Only slow transitions are matched.
    Slow,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairRelation {
    pub pairs: BTreeSet<(usize, usize)>,
}

impl PairRelation {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn contains(&self, p: usize, q: usize) -> bool {
        self.pairs.contains(&(p, q))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_subset(&self, other: &PairRelation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// The same relation read from the second system to the first.
    pub fn inverse(&self) -> Self {
        Self::new(self.pairs.iter().map(|&(p, q)| (q, p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    RelationNotABisimulation,
}

impl Verdict {
    pub fn is_positive(self) -> bool {
        self == Verdict::Equivalent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A move of the challenger that the defender cannot answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Challenge {
    Slow {
        label: CapabilityLabel,
        target: usize,
    },
    Fast {
        actions: BTreeSet<String>,
        target: usize,
    },
}

impl Challenge {
    pub fn target(&self) -> usize {
        match self {
            Challenge::Slow { target, .. } | Challenge::Fast { target, .. } => *target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    /// `(state of first system, state of second system)`
    pub pair: (usize, usize),
    pub challenger: Side,
    pub challenge: Challenge,
}

/// Counterexample: the first step is the pair at which the check fails;
/// later steps explain why every defender answer was itself rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub steps: Vec<WitnessStep>,
    pub truncated: bool,
}

impl Witness {
    /// Human-readable rendering against the two systems.
    pub fn describe<V: fmt::Display, W: fmt::Display>(
        &self,
        a: &Lts<V>,
        b: &Lts<W>,
    ) -> Vec<String> {
        let mut lines = Vec::new();
        for step in &self.steps {
            let (p, q) = step.pair;
            let (from, target) = match step.challenger {
                Side::Left => (
                    a.states[p].to_string(),
                    a.states[step.challenge.target()].to_string(),
                ),
                Side::Right => (
                    b.states[q].to_string(),
                    b.states[step.challenge.target()].to_string(),
                ),
            };
            let side = match step.challenger {
                Side::Left => "left",
                Side::Right => "right",
            };
            let mv = match &step.challenge {
                Challenge::Slow { label, .. } => format!("--{label}-->"),
                Challenge::Fast { actions, .. } => format!(
                    "->> ({})",
                    actions.iter().cloned().collect::<Vec<_>>().join("|")
                ),
            };
            lines.push(format!(
                "at ({}, {}): {side} {from} {mv} {target} has no matching answer",
                a.states[p], b.states[q]
            ));
        }
        if self.truncated {
            lines.push("...".to_string());
        }
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl CheckOutcome {
    fn equivalent() -> Self {
        Self {
            verdict: Verdict::Equivalent,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("state index {index} out of range for the {side:?} system")]
    IndexOutOfRange { side: Side, index: usize },
    #[error("relation is empty")]
    EmptyRelation,
    #[error("cannot compose: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Compose(Vec<ValidationError>),
}

struct Game {
    left: WeakViews,
    right: WeakViews,
    table: LabelTable,
    mode: Mode,
    nb: usize,
}

impl Game {
    fn new<V: Clone + Ord, W: Clone + Ord>(
        a: &Lts<V>,
        b: &Lts<W>,
        cfg: &EquivConfig,
        mode: Mode,
    ) -> Result<Self, EquivError> {
        let mut table = LabelTable::new();
        let left = WeakViews::new(a, cfg, &mut table)?;
        let right = WeakViews::new(b, cfg, &mut table)?;
        Ok(Self {
            left,
            right,
            table,
            mode,
            nb: b.num_states(),
        })
    }

    /// First unanswered challenge at `(p, q)`: slow challenges before fast
    /// ones, left before right, lowest label and target first.
    fn violation(&self, rel: &[bool], p: usize, q: usize) -> Option<(Side, Challenge)> {
        let nb = self.nb;
        let in_rel = |x: usize, y: usize| rel[x * nb + y];
        let sides = [
            (Side::Left, &self.left, &self.right, p, q),
            (Side::Right, &self.right, &self.left, q, p),
        ];
        let oriented = |side: Side, c2: usize, d2: usize| match side {
            Side::Left => in_rel(c2, d2),
            Side::Right => in_rel(d2, c2),
        };
        for &(side, chal, def, c, d) in &sides {
            for &(label, c2) in chal.slow_transitions(c) {
                if !def
                    .weak_slow_targets(d, label)
                    .iter()
                    .any(|&d2| oriented(side, c2, d2))
                {
                    return Some((side, self.slow_challenge(label, c2)));
                }
            }
        }
        if self.mode == Mode::FastSlow {
            for &(side, chal, def, c, d) in &sides {
                for &c2 in chal.fast_successors(c) {
                    if !def.closure(d).iter().any(|&d2| oriented(side, c2, d2)) {
                        let actions = chal.fast_actions(c, c2).cloned().unwrap_or_default();
                        return Some((
                            side,
                            Challenge::Fast {
                                actions,
                                target: c2,
                            },
                        ));
                    }
                }
            }
        }
        None
    }

    fn slow_challenge(&self, label: LabelId, target: usize) -> Challenge {
        Challenge::Slow {
            label: self.table.get(label).clone(),
            target,
        }
    }

    /// Defender answers to a recorded challenge, oriented as `(first, second)` pairs.
    fn answers(&self, step: &WitnessStep) -> Vec<(usize, usize)> {
        let (p, q) = step.pair;
        let (def, d) = match step.challenger {
            Side::Left => (&self.right, q),
            Side::Right => (&self.left, p),
        };
        let targets: Vec<usize> = match &step.challenge {
            Challenge::Slow { label, .. } => {
                // labels of recorded challenges are always interned
                let id = (0..)
                    .find(|&i| self.table.get(i) == label)
                    .expect("challenge label was interned");
                def.weak_slow_targets(d, id).to_vec()
            }
            Challenge::Fast { .. } => def.closure(d).to_vec(),
        };
        let c2 = step.challenge.target();
        targets
            .into_iter()
            .map(|d2| match step.challenger {
                Side::Left => (c2, d2),
                Side::Right => (d2, c2),
            })
            .collect()
    }
}

fn check_indices<V, W>(r: &PairRelation, a: &Lts<V>, b: &Lts<W>) -> Result<(), EquivError> {
    if r.is_empty() {
        return Err(EquivError::EmptyRelation);
    }
    for &(p, q) in &r.pairs {
        if p >= a.states.len() {
            return Err(EquivError::IndexOutOfRange {
                side: Side::Left,
                index: p,
            });
        }
        if q >= b.states.len() {
            return Err(EquivError::IndexOutOfRange {
                side: Side::Right,
                index: q,
            });
        }
    }
    Ok(())
}

fn check_relation<V: Clone + Ord, W: Clone + Ord>(
    r: &PairRelation,
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
    mode: Mode,
) -> Result<CheckOutcome, EquivError> {
    check_indices(r, a, b)?;
    let game = Game::new(a, b, cfg, mode)?;
    let nb = b.num_states();
    let mut rel = vec![false; a.num_states() * nb];
    for &(p, q) in &r.pairs {
        rel[p * nb + q] = true;
    }
    for &(p, q) in &r.pairs {
        if let Some((challenger, challenge)) = game.violation(&rel, p, q) {
            return Ok(CheckOutcome {
                verdict: Verdict::RelationNotABisimulation,
                witness: Some(Witness {
                    steps: vec![WitnessStep {
                        pair: (p, q),
                        challenger,
                        challenge,
                    }],
                    truncated: false,
                }),
            });
        }
    }
    Ok(CheckOutcome::equivalent())
}

/// Checks that `r` is a fast-slow bisimulation.
pub fn check_fast_slow_relation<V: Clone + Ord, W: Clone + Ord>(
    r: &PairRelation,
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
) -> Result<CheckOutcome, EquivError> {
    check_relation(r, a, b, cfg, Mode::FastSlow)
}

/// Checks that `r` is a slow bisimulation.
pub fn check_slow_relation<V: Clone + Ord, W: Clone + Ord>(
    r: &PairRelation,
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
) -> Result<CheckOutcome, EquivError> {
    check_relation(r, a, b, cfg, Mode::Slow)
}

/// Greatest fixpoint of pair deletion.
///
/// Each sweep checks every surviving pair against the relation as it stood at
/// the start of the sweep, then removes all failures at once.
pub fn largest<V: Clone + Ord, W: Clone + Ord>(
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
    mode: Mode,
    witness_steps: usize,
) -> Result<(PairRelation, CheckOutcome), EquivError> {
    let game = Game::new(a, b, cfg, mode)?;
    let (na, nb) = (a.num_states(), b.num_states());
    let mut rel = vec![true; na * nb];
    let mut deleted: Vec<Option<WitnessStep>> = vec![None; na * nb];
    loop {
        let mut failed = Vec::new();
        for p in 0..na {
            for q in 0..nb {
                if !rel[p * nb + q] {
                    continue;
                }
                if let Some((challenger, challenge)) = game.violation(&rel, p, q) {
                    failed.push(WitnessStep {
                        pair: (p, q),
                        challenger,
                        challenge,
                    });
                }
            }
        }
        if failed.is_empty() {
            break;
        }
        for step in failed {
            let (p, q) = step.pair;
            rel[p * nb + q] = false;
            deleted[p * nb + q] = Some(step);
        }
    }

    let relation = PairRelation::new(
        (0..na)
            .flat_map(|p| (0..nb).map(move |q| (p, q)))
            .filter(|&(p, q)| rel[p * nb + q]),
    );
    let (ia, ib) = (a.initial, b.initial);
    if rel[ia * nb + ib] {
        return Ok((relation, CheckOutcome::equivalent()));
    }

    // Walk back through deletion records; each answer was deleted in an
    // earlier sweep, so the chain is finite.
    let mut steps = Vec::new();
    let mut current = (ia, ib);
    let mut truncated = false;
    while let Some(step) = deleted[current.0 * nb + current.1].clone() {
        if steps.len() == witness_steps {
            truncated = true;
            break;
        }
        let next = game.answers(&step).into_iter().next();
        steps.push(step);
        match next {
            Some(pair) => current = pair,
            None => break,
        }
    }
    Ok((
        relation,
        CheckOutcome {
            verdict: Verdict::NotEquivalent,
            witness: Some(Witness { steps, truncated }),
        },
    ))
}

/// Largest fast-slow bisimulation and the verdict for the initial states.
pub fn largest_fast_slow<V: Clone + Ord, W: Clone + Ord>(
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
) -> Result<(PairRelation, CheckOutcome), EquivError> {
    largest(a, b, cfg, Mode::FastSlow, WITNESS_STEPS)
}

/// Largest slow bisimulation and the verdict for the initial states.
pub fn largest_slow<V: Clone + Ord, W: Clone + Ord>(
    a: &Lts<V>,
    b: &Lts<W>,
    cfg: &EquivConfig,
) -> Result<(PairRelation, CheckOutcome), EquivError> {
    largest(a, b, cfg, Mode::Slow, WITNESS_STEPS)
}

/// Fast actions occurring in both systems. Empty means cooperation over
/// `p <*> q` cannot break fast-slow bisimilarity.
pub fn shared_fast_actions(p: &SystemDef, q: &SystemDef, cfg: &EquivConfig) -> BTreeSet<String> {
    let pa = p.actions();
    let qa = q.actions();
    cfg.partition
        .fast()
        .iter()
        .filter(|a| pa.contains(*a) && qa.contains(*a))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruenceReport {
    pub shared_with_first: BTreeSet<String>,
    pub shared_with_second: BTreeSet<String>,
    pub components: CheckOutcome,
    pub composed: CheckOutcome,
    /// Transition systems of `p1 <*> q` and `p2 <*> q`, for rendering witnesses.
    pub composed_systems: (Lts, Lts),
}

impl CongruenceReport {
    pub fn side_condition_holds(&self) -> bool {
        self.shared_with_first.is_empty() && self.shared_with_second.is_empty()
    }
}

/// Compares `p1` with `p2`, then `p1 <*> q` with `p2 <*> q`.
pub fn congruence_probe(
    p1: &SystemDef,
    p2: &SystemDef,
    q: &SystemDef,
    cfg: &EquivConfig,
    max_states: usize,
) -> Result<CongruenceReport, EquivError> {
    let shared_with_first = shared_fast_actions(p1, q, cfg);
    let shared_with_second = shared_fast_actions(p2, q, cfg);
    let l1 = build_lts(p1, max_states)?;
    let l2 = build_lts(p2, max_states)?;
    let (_, components) = largest_fast_slow(&l1, &l2, cfg)?;
    let c1 = compose(p1, q).map_err(EquivError::Compose)?;
    let c2 = compose(p2, q).map_err(EquivError::Compose)?;
    let composed_systems = (build_lts(&c1, max_states)?, build_lts(&c2, max_states)?);
    let (_, composed) = largest_fast_slow(&composed_systems.0, &composed_systems.1, cfg)?;
    Ok(CongruenceReport {
        shared_with_first,
        shared_with_second,
        components,
        composed,
        composed_systems,
    })
}

#[derive(Debug, Error)]
pub enum RelationIoError {
    #[error("malformed relation file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pair {index}: state {state} is not a state of the {side:?} system")]
    UnknownState {
        index: usize,
        side: Side,
        state: String,
    },
}

/// Relation as level-vector pairs.
pub type VectorPairs<V, W> = Vec<(Vec<V>, Vec<W>)>;

/// Reads a JSON array of `[first-vector, second-vector]` pairs.
pub fn parse_vector_pairs<V: DeserializeOwned, W: DeserializeOwned>(
    text: &str,
) -> Result<VectorPairs<V, W>, RelationIoError> {
    Ok(serde_json::from_str(text)?)
}

/// Maps level-vector pairs to state-index pairs.
pub fn resolve_pairs<V, W>(
    raw: VectorPairs<V, W>,
    a: &Lts<V>,
    b: &Lts<W>,
) -> Result<PairRelation, RelationIoError>
where
    V: Clone + Ord + std::hash::Hash + fmt::Debug,
    W: Clone + Ord + std::hash::Hash + fmt::Debug,
{
    let ia = a.state_index();
    let ib = b.state_index();
    let mut pairs = BTreeSet::new();
    for (index, (x, y)) in raw.into_iter().enumerate() {
        let sx = State(x);
        let p = *ia.get(&sx).ok_or_else(|| RelationIoError::UnknownState {
            index,
            side: Side::Left,
            state: format!("{:?}", sx.0),
        })?;
        let sy = State(y);
        let q = *ib.get(&sy).ok_or_else(|| RelationIoError::UnknownState {
            index,
            side: Side::Right,
            state: format!("{:?}", sy.0),
        })?;
        pairs.insert((p, q));
    }
    Ok(PairRelation { pairs })
}

/// Resolves a relation file against the two systems.
pub fn parse_relation<V, W>(
    text: &str,
    a: &Lts<V>,
    b: &Lts<W>,
) -> Result<PairRelation, RelationIoError>
where
    V: Clone + Ord + std::hash::Hash + DeserializeOwned + fmt::Debug,
    W: Clone + Ord + std::hash::Hash + DeserializeOwned + fmt::Debug,
{
    resolve_pairs(parse_vector_pairs(text)?, a, b)
}

/// Writes a relation as state-vector pairs, in index order.
pub fn render_relation<V: Serialize, W: Serialize>(
    r: &PairRelation,
    a: &Lts<V>,
    b: &Lts<W>,
) -> String {
    let pairs: Vec<(&Vec<V>, &Vec<W>)> = r
        .pairs
        .iter()
        .map(|&(p, q)| (&a.states[p].0, &b.states[q].0))
        .collect();
    serde_json::to_string(&pairs).expect("relation serialises")
}
