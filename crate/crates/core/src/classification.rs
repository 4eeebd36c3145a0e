//! Conserved, slow and fast variables from the stoichiometry matrix.
//!
//! All null-space work is done over exact rationals; vectors are reported as
//! primitive integer vectors indexed by the matrix's species order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::equivalence::{
    check_fast_slow_relation, check_slow_relation, resolve_pairs, CheckOutcome, EquivError,
    PairRelation, RelationIoError,
};
use crate::linalg::{canonical_span_basis, rank_of};
use crate::model::{EquivConfig, Speed, SystemDef};
use crate::scalar::primitive_integer_vector;
use crate::semantics::{build_lts, Lts, SemanticsError, State};
use crate::{Rational, RationalMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoichMatrix {
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    /// `entries[i][j]`: net change of species `i` in reaction `j`.
    pub entries: Vec<Vec<i64>>,
}

impl StoichMatrix {
    pub fn rows(&self) -> usize {
        self.species.len()
    }

    pub fn cols(&self) -> usize {
        self.reactions.len()
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        self.entries.iter().map(|r| r[j]).collect()
    }

    pub fn to_rational(&self) -> RationalMatrix {
        RationalMatrix::from_i64_rows(&self.entries, self.cols())
    }

    /// Submatrix keeping the reactions accepted by `keep`.
    pub fn select_columns(&self, keep: impl Fn(&str) -> bool) -> StoichMatrix {
        let cols: Vec<usize> = (0..self.cols())
            .filter(|&j| keep(&self.reactions[j]))
            .collect();
        StoichMatrix {
            species: self.species.clone(),
            reactions: cols.iter().map(|&j| self.reactions[j].clone()).collect(),
            entries: self
                .entries
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }

    /// Reorders rows and columns. Both arguments must be permutations.
    pub fn permuted(&self, species: &[usize], reactions: &[usize]) -> StoichMatrix {
        assert!(
            is_permutation(species, self.rows()),
            "not a species permutation"
        );
        assert!(
            is_permutation(reactions, self.cols()),
            "not a reaction permutation"
        );
        StoichMatrix {
            species: species.iter().map(|&i| self.species[i].clone()).collect(),
            reactions: reactions
                .iter()
                .map(|&j| self.reactions[j].clone())
                .collect(),
            entries: species
                .iter()
                .map(|&i| reactions.iter().map(|&j| self.entries[i][j]).collect())
                .collect(),
        }
    }
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    p.len() == n && p.iter().collect::<BTreeSet<_>>().len() == n && p.iter().all(|&i| i < n)
}

/// Rows follow the state-vector order, columns the first appearance of each
/// action in the species definitions taken in that order.
pub fn stoich_matrix(sys: &SystemDef) -> StoichMatrix {
    let species = sys.species_order();
    let mut reactions: Vec<String> = Vec::new();
    for name in &species {
        if let Some(def) = sys.species_def(name) {
            for p in &def.prefixes {
                if !reactions.contains(&p.action) {
                    reactions.push(p.action.clone());
                }
            }
        }
    }
    let entries = species
        .iter()
        .map(|name| {
            let def = sys.species_def(name);
            reactions
                .iter()
                .map(|a| {
                    def.and_then(|d| d.prefix(a))
                        .map_or(0, |p| p.role.level_delta(p.stoich))
                })
                .collect()
        })
        .collect();
    StoichMatrix {
        species,
        reactions,
        entries,
    }
}

fn to_rational_vectors(vs: &[Vec<i64>]) -> Vec<Vec<Rational>> {
    vs.iter()
        .map(|v| {
            v.iter()
                .map(|&x| Rational::from_integer(x.into()))
                .collect()
        })
        .collect()
}

fn unit(n: usize, i: usize) -> Vec<i64> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// Index of the single nonzero entry when `v` is a unit vector.
pub fn unit_index(v: &[i64]) -> Option<usize> {
    let mut nz = v.iter().enumerate().filter(|(_, &x)| x != 0);
    match (nz.next(), nz.next()) {
        (Some((i, &1)), None) => Some(i),
        _ => None,
    }
}

fn independent(family: &[Vec<i64>], v: &[i64]) -> bool {
    let dim = v.len();
    let mut with = family.to_vec();
    with.push(v.to_vec());
    rank_of(&to_rational_vectors(&with), dim) == family.len() + 1
}

fn primitive_basis(vectors: Vec<Vec<Rational>>, dim: usize) -> Vec<Vec<i64>> {
    canonical_span_basis(&vectors, dim)
        .iter()
        .map(|v| primitive_integer_vector(v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservedBasis {
    pub vectors: Vec<Vec<i64>>,
    /// Some vector still has a negative entry after the non-negative repair.
    pub has_negative: bool,
}

/// Basis of `{y | yᵀS = 0}`: the reduced echelon basis of the left null
/// space, with negative rows repaired by adding other rows where possible.
pub fn conserved_basis(m: &StoichMatrix) -> ConservedBasis {
    let n = m.rows();
    let mut vectors = primitive_basis(m.to_rational().left_null_space(), n);
    for i in 0..vectors.len() {
        if vectors[i].iter().all(|&x| x >= 0) {
            continue;
        }
        let worst = vectors[i].iter().map(|&x| -x).max().unwrap_or(0);
        'repair: for j in 0..vectors.len() {
            if j == i || vectors[j].iter().any(|&x| x < 0) {
                continue;
            }
            for k in 1..=worst {
                let cand: Vec<i64> = vectors[i]
                    .iter()
                    .zip(&vectors[j])
                    .map(|(a, b)| a + k * b)
                    .collect();
                if cand.iter().all(|&x| x >= 0) {
                    vectors[i] = cand;
                    break 'repair;
                }
            }
        }
    }
    let has_negative = vectors.iter().any(|v| v.iter().any(|&x| x < 0));
    ConservedBasis {
        vectors,
        has_negative,
    }
}

fn preferred_order(m: &StoichMatrix, cfg: &EquivConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.rows()).collect();
    order.sort_by_key(|&i| !cfg.delta.contains(cfg.canonical(&m.species[i])));
    order
}

/// Slow variables: invariants of the fast reactions modulo the conserved span.
///
/// Unit vectors are tried first, species observed in Δ (after aliasing)
/// ahead of the rest, then declaration order; echelon rows of the fast
/// invariant space fill any remaining gap.
pub fn slow_basis(m: &StoichMatrix, cfg: &EquivConfig, conserved: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = m.rows();
    let fast = m.select_columns(|a| cfg.partition.speed(a) == Some(Speed::Fast));
    let invariant = primitive_basis(fast.to_rational().left_null_space(), n);
    let target = invariant.len().saturating_sub(conserved.len());
    let inv_q = to_rational_vectors(&invariant);

    let mut stack = conserved.to_vec();
    let mut slow = Vec::new();
    let candidates = preferred_order(m, cfg)
        .into_iter()
        .map(|i| unit(n, i))
        .filter(|u| {
            crate::linalg::in_span(&inv_q, &to_rational_vectors(std::slice::from_ref(u))[0])
        })
        .chain(invariant.iter().cloned());
    for v in candidates {
        if slow.len() == target {
            break;
        }
        if independent(&stack, &v) {
            stack.push(v.clone());
            slow.push(v);
        }
    }
    slow
}

/// Completes conserved and slow vectors to a basis with unit vectors.
///
/// Species that occur in more conserved vectors are tried first, then
/// declaration order; such species are the complexes that fast reactions
/// form and break. Unit vectors always suffice to complete a basis.
pub fn complete_fast(m: &StoichMatrix, conserved: &[Vec<i64>], slow: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = m.rows();
    let mut stack: Vec<Vec<i64>> = conserved.iter().chain(slow).cloned().collect();
    let target = n.saturating_sub(stack.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(conserved.iter().filter(|v| v[i] != 0).count()));
    let mut fast = Vec::new();
    for i in order {
        if fast.len() == target {
            break;
        }
        let u = unit(n, i);
        if independent(&stack, &u) {
            stack.push(u.clone());
            fast.push(u);
        }
    }
    fast
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableClassification {
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    pub conserved: Vec<Vec<i64>>,
    /// Value of each conserved vector at the initial state.
    pub constants: Vec<i64>,
    pub slow: Vec<Vec<i64>>,
    pub fast: Vec<Vec<i64>>,
    pub conserved_has_negative: bool,
    pub block_shape_verified: bool,
}

impl VariableClassification {
    /// `(n_c, n_s, n_f)`
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.conserved.len(), self.slow.len(), self.fast.len())
    }

    pub fn stacked(&self) -> Vec<Vec<i64>> {
        self.conserved
            .iter()
            .chain(&self.slow)
            .chain(&self.fast)
            .cloned()
            .collect()
    }

    pub fn slow_species(&self) -> Option<Vec<&str>> {
        self.slow
            .iter()
            .map(|v| unit_index(v).map(|i| self.species[i].as_str()))
            .collect()
    }

    pub fn vector_name(&self, v: &[i64]) -> String {
        vector_name(v, &self.species)
    }
}

/// `S+SE+P`, `2*A-B`, or `0` for the zero vector.
pub fn vector_name(v: &[i64], species: &[String]) -> String {
    let mut out = String::new();
    for (x, name) in v.iter().zip(species) {
        match *x {
            0 => continue,
            1 if out.is_empty() => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            k if k > 0 && !out.is_empty() => out.push_str(&format!("+{k}*")),
            k => out.push_str(&format!("{k}*")),
        }
        out.push_str(name);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassificationError {
    #[error("action {0} is neither fast nor slow")]
    UnpartitionedAction(String),
    #[error("transition system lacks species {0}")]
    MissingSpecies(String),
    #[error("states {0} and {1} map to the same coordinates")]
    StateCollision(String, String),
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conserved rows of `Q·S` vanish and slow rows vanish on fast columns.
pub fn block_shape(
    m: &StoichMatrix,
    cfg: &EquivConfig,
    conserved: &[Vec<i64>],
    slow: &[Vec<i64>],
) -> bool {
    (0..m.cols()).all(|j| {
        let col = m.column(j);
        let fast = cfg.partition.speed(&m.reactions[j]) == Some(Speed::Fast);
        conserved.iter().all(|y| dot(y, &col) == 0)
            && (!fast || slow.iter().all(|y| dot(y, &col) == 0))
    })
}

/// Classifies the variables of a given matrix; `initial` is indexed like its rows.
pub fn classify_matrix(
    m: &StoichMatrix,
    cfg: &EquivConfig,
    initial: &[i64],
) -> Result<VariableClassification, ClassificationError> {
    if let Some(a) = m
        .reactions
        .iter()
        .find(|a| cfg.partition.speed(a).is_none())
    {
        return Err(ClassificationError::UnpartitionedAction(a.clone()));
    }
    let c = conserved_basis(m);
    let slow = slow_basis(m, cfg, &c.vectors);
    let fast = complete_fast(m, &c.vectors, &slow);
    Ok(VariableClassification {
        species: m.species.clone(),
        reactions: m.reactions.clone(),
        constants: c.vectors.iter().map(|y| dot(y, initial)).collect(),
        block_shape_verified: block_shape(m, cfg, &c.vectors, &slow),
        conserved: c.vectors,
        conserved_has_negative: c.has_negative,
        slow,
        fast,
    })
}

pub fn classify(
    sys: &SystemDef,
    cfg: &EquivConfig,
) -> Result<VariableClassification, ClassificationError> {
    let initial: Vec<i64> = sys.initial_levels().into_iter().map(i64::from).collect();
    classify_matrix(&stoich_matrix(sys), cfg, &initial)
}

/// Same classification with species and reactions visited in another order.
pub fn classify_permuted(
    sys: &SystemDef,
    cfg: &EquivConfig,
    species: &[usize],
    reactions: &[usize],
) -> Result<VariableClassification, ClassificationError> {
    let initial: Vec<i64> = sys.initial_levels().into_iter().map(i64::from).collect();
    let permuted_initial: Vec<i64> = species.iter().map(|&i| initial[i]).collect();
    classify_matrix(
        &stoich_matrix(sys).permuted(species, reactions),
        cfg,
        &permuted_initial,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservedEntry {
    pub vector: Vec<i64>,
    pub constant: i64,
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableEntry {
    pub vector: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassificationReport {
    pub species: Vec<String>,
    pub reactions: Vec<String>,
    pub conserved: Vec<ConservedEntry>,
    pub slow: Vec<VariableEntry>,
    pub fast: Vec<VariableEntry>,
    pub block_shape_verified: bool,
    pub warnings: Vec<String>,
}

impl From<&VariableClassification> for ClassificationReport {
    fn from(cls: &VariableClassification) -> Self {
        let entry = |v: &Vec<i64>| VariableEntry {
            vector: v.clone(),
            species: unit_index(v).map(|i| cls.species[i].clone()),
            name: cls.vector_name(v),
        };
        let mut warnings = Vec::new();
        if cls.conserved_has_negative {
            warnings.push("conserved vector with negative entries".to_string());
        }
        if cls.slow.is_empty() {
            warnings.push("no slow variables".to_string());
        }
        ClassificationReport {
            species: cls.species.clone(),
            reactions: cls.reactions.clone(),
            conserved: cls
                .conserved
                .iter()
                .zip(&cls.constants)
                .map(|(v, &constant)| ConservedEntry {
                    vector: v.clone(),
                    constant,
                    name: cls.vector_name(v),
                })
                .collect(),
            slow: cls.slow.iter().map(entry).collect(),
            fast: cls.fast.iter().map(entry).collect(),
            block_shape_verified: cls.block_shape_verified,
            warnings,
        }
    }
}

impl fmt::Display for VariableClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |vs: &[Vec<i64>]| {
            vs.iter()
                .map(|v| self.vector_name(v))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "species:   {}", self.species.join(", "))?;
        let conserved: Vec<String> = self
            .conserved
            .iter()
            .zip(&self.constants)
            .map(|(v, c)| format!("{} = {c}", self.vector_name(v)))
            .collect();
        writeln!(f, "conserved: {}", conserved.join(", "))?;
        writeln!(f, "slow:      {}", names(&self.slow))?;
        writeln!(f, "fast:      {}", names(&self.fast))?;
        write!(f, "block shape verified: {}", self.block_shape_verified)
    }
}

/// States in `(slow, fast)` coordinates; conserved values are dropped.
pub fn transform_lts<V>(
    lts: &Lts<V>,
    cls: &VariableClassification,
) -> Result<Lts<i64>, ClassificationError>
where
    V: Clone + Ord + Into<i64> + fmt::Display,
{
    let pos: Vec<usize> = cls
        .species
        .iter()
        .map(|s| {
            lts.species
                .iter()
                .position(|t| t == s)
                .ok_or_else(|| ClassificationError::MissingSpecies(s.clone()))
        })
        .collect::<Result<_, _>>()?;
    let coords: Vec<&Vec<i64>> = cls.slow.iter().chain(&cls.fast).collect();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut states = Vec::with_capacity(lts.num_states());
    for (idx, s) in lts.states.iter().enumerate() {
        let levels: Vec<i64> = pos.iter().map(|&p| s.0[p].clone().into()).collect();
        let x: Vec<i64> = coords.iter().map(|y| dot(y, &levels)).collect();
        if let Some(&other) = seen.get(&x) {
            return Err(ClassificationError::StateCollision(
                lts.states[other].to_string(),
                lts.states[idx].to_string(),
            ));
        }
        seen.insert(x.clone(), idx);
        states.push(State(x));
    }
    let names = coords.iter().map(|v| cls.vector_name(v)).collect();
    Ok(lts.with_states(names, states))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sufficiency {
    pub reasons: Vec<String>,
}

impl Sufficiency {
    pub fn applicable(&self) -> bool {
        self.reasons.is_empty()
    }
}

/// Preconditions for deciding fast-slow bisimilarity through a slow
/// bisimulation in transformed coordinates.
pub fn slow_sufficiency(
    a: &VariableClassification,
    b: &VariableClassification,
    cfg: &EquivConfig,
) -> Sufficiency {
    let mut reasons = Vec::new();
    if !b.fast.is_empty() {
        reasons.push("second model has fast variables".to_string());
    }
    if a.slow.is_empty() || b.slow.is_empty() {
        reasons.push("no slow variables".to_string());
    }
    for cls in [a, b] {
        for v in &cls.slow {
            if unit_index(v).is_none() {
                reasons.push(format!(
                    "slow variable not an individual species: {}",
                    cls.vector_name(v)
                ));
            }
        }
    }
    if let (Some(sa), Some(sb)) = (a.slow_species(), b.slow_species()) {
        let ca: BTreeSet<&str> = sa.iter().map(|s| cfg.canonical(s)).collect();
        let cb: BTreeSet<&str> = sb.iter().map(|s| cfg.canonical(s)).collect();
        if ca != cb {
            reasons.push(format!(
                "slow species differ: {{{}}} vs {{{}}}",
                sa.join(", "),
                sb.join(", ")
            ));
        }
    }
    Sufficiency { reasons }
}

#[derive(Debug, Error)]
pub enum ShortcutError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Classification(#[from] ClassificationError),
    #[error(transparent)]
    Equivalence(#[from] EquivError),
    #[error("shortcut not applicable: {}", .0.join("; "))]
    Inapplicable(Vec<String>),
    #[error("pair {0}: slow coordinates differ, the pairs must agree on every slow variable")]
    UnequalSlowCoordinates(usize),
    #[error("pair {index}: wrong number of coordinates")]
    Arity { index: usize },
    #[error("relation does not lift: {0}")]
    LiftAmbiguity(#[from] RelationIoError),
}

#[derive(Debug, Clone)]
pub struct ShortcutOutcome {
    pub first: VariableClassification,
    pub second: VariableClassification,
    /// Outcome of the slow check in transformed coordinates.
    pub slow: CheckOutcome,
    /// The lifted relation over original state indices.
    pub lifted: PairRelation,
    /// Direct fast-slow check of the lifted relation, run when the slow check passes.
    pub cross_validation: Option<CheckOutcome>,
}

impl ShortcutOutcome {
    pub fn certified(&self) -> bool {
        self.slow.verdict.is_positive()
            && self
                .cross_validation
                .as_ref()
                .is_some_and(|c| c.verdict.is_positive())
    }
}

/// Decides fast-slow bisimilarity of `a` and `b` from a relation given in
/// transformed coordinates: `(slow, fast)` of `a` against `(slow)` of `b`.
pub fn shortcut_check(
    a: &SystemDef,
    b: &SystemDef,
    cfg: &EquivConfig,
    relation: &[(Vec<i64>, Vec<i64>)],
    max_states: usize,
) -> Result<ShortcutOutcome, ShortcutError> {
    let first = classify(a, cfg)?;
    let mut second = classify(b, cfg)?;
    let report = slow_sufficiency(&first, &second, cfg);
    if !report.applicable() {
        return Err(ShortcutError::Inapplicable(report.reasons));
    }
    // align the second model's slow coordinates with the first's
    let order = first.slow_species().expect("checked above");
    let by_name: HashMap<String, Vec<i64>> = second
        .slow
        .iter()
        .map(|v| {
            (
                cfg.canonical(&second.species[unit_index(v).unwrap()])
                    .to_string(),
                v.clone(),
            )
        })
        .collect();
    second.slow = order
        .iter()
        .map(|s| by_name[cfg.canonical(s)].clone())
        .collect();

    let ns = first.slow.len();
    let wa = ns + first.fast.len();
    for (index, (x, y)) in relation.iter().enumerate() {
        if x.len() != wa || y.len() != ns {
            return Err(ShortcutError::Arity { index });
        }
        if x[..ns] != y[..] {
            return Err(ShortcutError::UnequalSlowCoordinates(index));
        }
    }

    let la = build_lts(a, max_states)?;
    let lb = build_lts(b, max_states)?;
    let ta = transform_lts(&la, &first)?;
    let tb = transform_lts(&lb, &second)?;
    let lifted = resolve_pairs(relation.to_vec(), &ta, &tb)?;
    let slow = check_slow_relation(&lifted, &ta, &tb, cfg)?;
    let cross_validation = if slow.verdict.is_positive() {
        Some(check_fast_slow_relation(&lifted, &la, &lb, cfg)?)
    } else {
        None
    };
    Ok(ShortcutOutcome {
        first,
        second,
        slow,
        lifted,
        cross_validation,
    })
}
