//! Abstract syntax of Bio-PEPA with levels, well-definedness checks and the
//! species-extension and cooperation constructors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discretised abundance of a species.
pub type Level = u32;

/// The part a species plays in a reaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reactant,
    Product,
    Activator,
    Inhibitor,
    #[serde(rename = "modifier")]
    GenericModifier,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Reactant,
        Role::Product,
        Role::Activator,
        Role::Inhibitor,
        Role::GenericModifier,
    ];

    /// Reactants and products are the only roles that move the level.
    pub fn is_level_changing(self) -> bool {
        matches!(self, Role::Reactant | Role::Product)
    }

    /// Signed level change for stoichiometry `stoich`.
    pub fn level_delta(self, stoich: u32) -> i64 {
        match self {
            Role::Reactant => -i64::from(stoich),
            Role::Product => i64::from(stoich),
            _ => 0,
        }
    }

    /// Concrete operator spelling in model files.
    pub fn operator(self) -> &'static str {
        match self {
            Role::Reactant => "<<",
            Role::Product => ">>",
            Role::Activator => "(+)",
            Role::Inhibitor => "(-)",
            Role::GenericModifier => "(.)",
        }
    }

    pub fn from_operator(op: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.operator() == op)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.operator())
    }
}

/// `(action, stoich) op C`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Prefix {
    pub action: String,
    pub stoich: u32,
    pub role: Role,
}

impl Prefix {
    pub fn new(action: impl Into<String>, stoich: u32, role: Role) -> Self {
        Self {
            action: action.into(),
            stoich,
            role,
        }
    }
}

/// A sequential component `C = Σ (αᵢ, κᵢ) opᵢ C` together with its maximum count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeciesDef {
    pub name: String,
    pub prefixes: Vec<Prefix>,
    pub max_count: u32,
}

impl SpeciesDef {
    pub fn new(name: impl Into<String>, prefixes: Vec<Prefix>, max_count: u32) -> Self {
        Self {
            name: name.into(),
            prefixes,
            max_count,
        }
    }

    pub fn actions(&self) -> BTreeSet<&str> {
        self.prefixes.iter().map(|p| p.action.as_str()).collect()
    }

    pub fn prefix(&self, action: &str) -> Option<&Prefix> {
        self.prefixes.iter().find(|p| p.action == action)
    }
}

/// Synchronisation set of a cooperation node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cooperation {
    /// `P <a,b> Q`
    Explicit(BTreeSet<String>),
    /// `P <*> Q`: every action occurring on both sides.
    SharedAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CompositionTree {
    Leaf {
        species: String,
        level: Level,
    },
    Node {
        left: Box<CompositionTree>,
        coop: Cooperation,
        right: Box<CompositionTree>,
    },
}

impl CompositionTree {
    pub fn leaf(species: impl Into<String>, level: Level) -> Self {
        CompositionTree::Leaf {
            species: species.into(),
            level,
        }
    }

    pub fn node(left: CompositionTree, coop: Cooperation, right: CompositionTree) -> Self {
        CompositionTree::Node {
            left: Box::new(left),
            coop,
            right: Box::new(right),
        }
    }

    /// Leaves from left to right. This order fixes the state vector layout.
    pub fn leaves(&self) -> Vec<(&str, Level)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, Level)>) {
        match self {
            CompositionTree::Leaf { species, level } => out.push((species.as_str(), *level)),
            CompositionTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

/// A single-compartment Bio-PEPA system. Rates and parameters are kept as
/// uninterpreted source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDef {
    /// Species definitions in declaration order.
    pub species: Vec<SpeciesDef>,
    pub tree: CompositionTree,
    pub step_size: u32,
    pub params: BTreeMap<String, String>,
    pub rates: BTreeMap<String, String>,
}

impl SystemDef {
    pub fn species_def(&self, name: &str) -> Option<&SpeciesDef> {
        self.species.iter().find(|s| s.name == name)
    }

    /// Species names in state-vector order.
    pub fn species_order(&self) -> Vec<String> {
        self.tree
            .leaves()
            .into_iter()
            .map(|(s, _)| s.to_string())
            .collect()
    }

    pub fn initial_levels(&self) -> Vec<Level> {
        self.tree.leaves().into_iter().map(|(_, l)| l).collect()
    }

    /// Maximum level of each species in state-vector order.
    ///
    /// Panics if a leaf names an undeclared species; only call on validated systems.
    pub fn max_levels(&self) -> Vec<Level> {
        self.tree
            .leaves()
            .into_iter()
            .map(|(s, _)| {
                let def = self
                    .species_def(s)
                    .expect("leaf refers to undeclared species");
                max_level(def, self.step_size)
            })
            .collect()
    }

    /// All actions of the species that take part in the composition.
    pub fn actions(&self) -> BTreeSet<String> {
        tree_actions(self, &self.tree)
    }

    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let report = validate_system(self);
        if report.is_empty() {
            Ok(())
        } else {
            Err(report)
        }
    }
}

fn tree_actions(sys: &SystemDef, tree: &CompositionTree) -> BTreeSet<String> {
    match tree {
        CompositionTree::Leaf { species, .. } => sys
            .species_def(species)
            .map(|d| d.prefixes.iter().map(|p| p.action.clone()).collect())
            .unwrap_or_default(),
        CompositionTree::Node { left, right, .. } => {
            let mut a = tree_actions(sys, left);
            a.extend(tree_actions(sys, right));
            a
        }
    }
}

/// Actions synchronised on at a cooperation node.
pub fn sync_set(
    sys: &SystemDef,
    left: &CompositionTree,
    coop: &Cooperation,
    right: &CompositionTree,
) -> BTreeSet<String> {
    match coop {
        Cooperation::Explicit(set) => set.clone(),
        Cooperation::SharedAll => {
            let l = tree_actions(sys, left);
            let r = tree_actions(sys, right);
            l.intersection(&r).cloned().collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("species {species}: action {action} occurs in more than one summand")]
    DuplicateAction { species: String, action: String },
    #[error("species {0} has no summands")]
    EmptyDefinition(String),
    #[error("species {species}: stoichiometry of {action} must be at least 1")]
    ZeroStoichiometry { species: String, action: String },
    #[error("species {0} has a maximum count of 0")]
    ZeroMaxCount(String),
    #[error("step size must be at least 1")]
    ZeroStepSize,
    #[error("composed systems use different step sizes ({0} and {1})")]
    StepSizeMismatch(u32, u32),
    #[error("species {0} appears more than once in the composition")]
    RepeatedSpecies(String),
    #[error("species {0} is used in the composition but never defined")]
    UndefinedSpecies(String),
    #[error("species {0} is defined more than once")]
    DuplicateDefinition(String),
    #[error("cooperation action {0} does not occur on both sides")]
    DanglingCoopAction(String),
    #[error("species {species}: initial level {level} exceeds maximum level {max}")]
    LevelOutOfRange {
        species: String,
        level: Level,
        max: Level,
    },
    #[error("actions {} occur in both species", .0.iter().cloned().collect::<Vec<_>>().join(", "))]
    OverlappingActions(BTreeSet<String>),
}

/// Checks the choice form of a sequential component. Empty report means well-defined.
pub fn validate_species(def: &SpeciesDef) -> Vec<ValidationError> {
    let mut report = Vec::new();
    if def.prefixes.is_empty() {
        report.push(ValidationError::EmptyDefinition(def.name.clone()));
    }
    if def.max_count == 0 {
        report.push(ValidationError::ZeroMaxCount(def.name.clone()));
    }
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for p in &def.prefixes {
        if p.stoich == 0 {
            report.push(ValidationError::ZeroStoichiometry {
                species: def.name.clone(),
                action: p.action.clone(),
            });
        }
        if !seen.insert(p.action.as_str()) && reported.insert(p.action.as_str()) {
            report.push(ValidationError::DuplicateAction {
                species: def.name.clone(),
                action: p.action.clone(),
            });
        }
    }
    report
}

/// Checks a whole system: species, composition and initial levels.
pub fn validate_system(sys: &SystemDef) -> Vec<ValidationError> {
    let mut report = Vec::new();
    if sys.step_size == 0 {
        report.push(ValidationError::ZeroStepSize);
    }
    let mut defined = BTreeSet::new();
    for def in &sys.species {
        if !defined.insert(def.name.as_str()) {
            report.push(ValidationError::DuplicateDefinition(def.name.clone()));
        }
        report.extend(validate_species(def));
    }

    let mut used = BTreeSet::new();
    for (name, level) in sys.tree.leaves() {
        if !used.insert(name) {
            report.push(ValidationError::RepeatedSpecies(name.to_string()));
            continue;
        }
        match sys.species_def(name) {
            None => report.push(ValidationError::UndefinedSpecies(name.to_string())),
            Some(def) if sys.step_size > 0 => {
                let max = max_level(def, sys.step_size);
                if level > max {
                    report.push(ValidationError::LevelOutOfRange {
                        species: name.to_string(),
                        level,
                        max,
                    });
                }
            }
            Some(_) => {}
        }
    }

    check_coop_sets(sys, &sys.tree, &mut report);
    report
}

fn check_coop_sets(sys: &SystemDef, tree: &CompositionTree, report: &mut Vec<ValidationError>) {
    if let CompositionTree::Node { left, coop, right } = tree {
        if let Cooperation::Explicit(set) = coop {
            let l = tree_actions(sys, left);
            let r = tree_actions(sys, right);
            for a in set {
                if !(l.contains(a) && r.contains(a)) {
                    report.push(ValidationError::DanglingCoopAction(a.clone()));
                }
            }
        }
        check_coop_sets(sys, left, report);
        check_coop_sets(sys, right, report);
    }
}

/// `⌈M / H⌉`: the species then ranges over `0..=N`.
pub fn max_level(def: &SpeciesDef, step_size: u32) -> Level {
    assert!(step_size >= 1, "step size must be positive");
    def.max_count.div_ceil(step_size)
}

/// Name given to the extension of species `a` by species `b`.
pub fn extension_name(a: &str, b: &str) -> String {
    format!("{a}{{{b}}}")
}

/// `A{B}`: species `a` with the reaction capabilities of `b` appended.
pub fn extend_species(a: &SpeciesDef, b: &SpeciesDef) -> Result<SpeciesDef, ValidationError> {
    let overlap: BTreeSet<String> = a
        .actions()
        .intersection(&b.actions())
        .map(|s| s.to_string())
        .collect();
    if !overlap.is_empty() {
        return Err(ValidationError::OverlappingActions(overlap));
    }
    let mut prefixes = a.prefixes.clone();
    prefixes.extend(b.prefixes.iter().cloned());
    Ok(SpeciesDef::new(
        extension_name(&a.name, &b.name),
        prefixes,
        a.max_count,
    ))
}

/// `p <*> q`. Contexts are merged; `q`'s entries win on key clashes.
pub fn compose(p: &SystemDef, q: &SystemDef) -> Result<SystemDef, Vec<ValidationError>> {
    if p.step_size != q.step_size {
        return Err(vec![ValidationError::StepSizeMismatch(
            p.step_size,
            q.step_size,
        )]);
    }
    let mut species = p.species.clone();
    species.extend(
        q.species
            .iter()
            .filter(|d| p.species_def(&d.name).is_none())
            .cloned(),
    );
    let mut params = p.params.clone();
    params.extend(q.params.clone());
    let mut rates = p.rates.clone();
    rates.extend(q.rates.clone());
    let sys = SystemDef {
        species,
        tree: CompositionTree::node(p.tree.clone(), Cooperation::SharedAll, q.tree.clone()),
        step_size: p.step_size,
        params,
        rates,
    };
    sys.validate()?;
    Ok(sys)
}

/// Speed class of an action under a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speed {
    Fast,
    Slow,
}

/// Disjoint split of reaction names into fast and slow.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionPartition {
    fast: BTreeSet<String>,
    slow: BTreeSet<String>,
}

impl ActionPartition {
    pub fn new(fast: BTreeSet<String>, slow: BTreeSet<String>) -> Result<Self, ConfigError> {
        if let Some(a) = fast.intersection(&slow).next() {
            return Err(ConfigError::ActionInBothClasses(a.clone()));
        }
        Ok(Self { fast, slow })
    }

    pub fn fast(&self) -> &BTreeSet<String> {
        &self.fast
    }

    pub fn slow(&self) -> &BTreeSet<String> {
        &self.slow
    }

    pub fn speed(&self, action: &str) -> Option<Speed> {
        if self.fast.contains(action) {
            Some(Speed::Fast)
        } else if self.slow.contains(action) {
            Some(Speed::Slow)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("action {0} is declared both fast and slow")]
    ActionInBothClasses(String),
    #[error("species {0} in delta is unknown")]
    UnknownSpeciesInDelta(String),
    #[error("species {0} is aliased more than once")]
    DuplicateAlias(String),
}

/// Everything an equivalence check needs besides the two transition systems.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivConfig {
    pub partition: ActionPartition,
    /// Comparison species Δ, named as in the first model.
    pub delta: BTreeSet<String>,
    /// Species of the second model mapped onto species of the first.
    pub aliases: BTreeMap<String, String>,
}

impl EquivConfig {
    pub fn new(
        partition: ActionPartition,
        delta: BTreeSet<String>,
        aliases: BTreeMap<String, String>,
    ) -> Self {
        Self {
            partition,
            delta,
            aliases,
        }
    }

    /// Name a species is compared under.
    pub fn canonical<'a>(&'a self, species: &'a str) -> &'a str {
        self.aliases
            .get(species)
            .map(String::as_str)
            .unwrap_or(species)
    }

    /// Configuration for comparing the models in the other order: the alias
    /// map is inverted and Δ renamed into the new first model's vocabulary.
    pub fn swapped(&self) -> Self {
        let aliases: BTreeMap<String, String> = self
            .aliases
            .iter()
            .map(|(from, to)| (to.clone(), from.clone()))
            .collect();
        let delta = self
            .delta
            .iter()
            .map(|d| aliases.get(d).cloned().unwrap_or_else(|| d.clone()))
            .collect();
        Self {
            partition: self.partition.clone(),
            delta,
            aliases,
        }
    }

    /// Checks Δ against the species of the first model and, through the
    /// alias map, the second.
    pub fn check_delta(&self, first: &[String], second: &[String]) -> Result<(), ConfigError> {
        for d in &self.delta {
            let known =
                first.iter().any(|s| s == d) || second.iter().any(|s| self.canonical(s) == d);
            if !known {
                return Err(ConfigError::UnknownSpeciesInDelta(d.clone()));
            }
        }
        Ok(())
    }
}
