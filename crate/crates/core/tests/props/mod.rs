//! Property checks on small generated models, each against a direct oracle.
//!
//! Shared by the core property tests and the acceptance run.

use std::collections::{BTreeMap, BTreeSet};

use fastslow::classification::classify;
use fastslow::equivalence::{
    check_fast_slow_relation, check_slow_relation, largest, largest_fast_slow, largest_slow, Mode,
    PairRelation, WITNESS_STEPS,
};
use fastslow::model::{ActionPartition, EquivConfig, Speed};
use fastslow::parser::parse_model;
use fastslow::semantics::{build_lts, filter_label, LabelTable, WeakViews};
use fastslow::{CapabilityLabel, LabelEntry, Lts, Role, SystemDef};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

const ACTIONS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone)]
struct SpeciesSpec {
    prefixes: Vec<(usize, u32, Role)>,
    max: u32,
    level: u32,
}

#[derive(Debug, Clone)]
struct ModelSpec {
    species: Vec<SpeciesSpec>,
    /// Per cooperation node: `None` for `<*>`, otherwise an explicit action set.
    coops: Vec<Option<Vec<usize>>>,
}

fn arb_species() -> impl Strategy<Value = SpeciesSpec> {
    let roles = prop::sample::select(Role::ALL.to_vec());
    (
        prop::sample::subsequence((0..ACTIONS.len()).collect::<Vec<_>>(), 1..=3),
        prop::collection::vec((1u32..=2, roles), 3),
        1u32..=3,
        0u32..=3,
    )
        .prop_map(|(actions, extra, max, level)| SpeciesSpec {
            prefixes: actions
                .into_iter()
                .zip(extra)
                .map(|(a, (k, r))| (a, k, r))
                .collect(),
            max,
            level: level.min(max),
        })
}

fn arb_model(explicit_coops: bool) -> impl Strategy<Value = ModelSpec> {
    prop::collection::vec(arb_species(), 1..=3).prop_flat_map(move |species| {
        let n = species.len().saturating_sub(1);
        let coop = if explicit_coops {
            prop::option::of(prop::sample::subsequence(
                (0..ACTIONS.len()).collect::<Vec<_>>(),
                0..=2,
            ))
            .boxed()
        } else {
            Just(None).boxed()
        };
        (Just(species), prop::collection::vec(coop, n))
            .prop_map(|(species, coops)| ModelSpec { species, coops })
    })
}

fn model_text(spec: &ModelSpec, prefix: &str) -> String {
    let name = |i: usize| format!("{prefix}{i}");
    let mut out = String::new();
    for (i, s) in spec.species.iter().enumerate() {
        let terms: Vec<String> = s
            .prefixes
            .iter()
            .map(|(a, k, r)| format!("({},{k}) {} {}", ACTIONS[*a], r.operator(), name(i)))
            .collect();
        out += &format!(
            "max {} = {};\nspecies {} = {};\n",
            name(i),
            s.max,
            name(i),
            terms.join(" + ")
        );
    }
    let actions = |s: &SpeciesSpec| s.prefixes.iter().map(|p| p.0).collect::<BTreeSet<_>>();
    let mut system = format!("{}[{}]", name(0), spec.species[0].level);
    let mut left = actions(&spec.species[0]);
    for (i, coop) in spec.coops.iter().enumerate() {
        let right = actions(&spec.species[i + 1]);
        let op = match coop {
            None => "<*>".to_string(),
            Some(set) => {
                // an explicit set may only name actions of both sides
                let names: Vec<&str> = set
                    .iter()
                    .filter(|a| left.contains(a) && right.contains(a))
                    .map(|&a| ACTIONS[a])
                    .collect();
                format!("<{}>", names.join(","))
            }
        };
        left.extend(right);
        system = format!(
            "{system} {op} {}[{}]",
            name(i + 1),
            spec.species[i + 1].level
        );
    }
    out + &format!("system = {system};\n")
}

fn build(spec: &ModelSpec, prefix: &str) -> (SystemDef, Lts) {
    let sys = parse_model(&model_text(spec, prefix))
        .unwrap_or_else(|e| panic!("{e}\n{}", model_text(spec, prefix)));
    let lts = build_lts(&sys, 10_000).unwrap();
    (sys, lts)
}

fn partition(fast_mask: u8) -> ActionPartition {
    let (fast, slow): (Vec<&str>, Vec<&str>) =
        ACTIONS
            .iter()
            .enumerate()
            .fold((vec![], vec![]), |(mut f, mut s), (i, a)| {
                if fast_mask & (1 << i) != 0 {
                    f.push(*a)
                } else {
                    s.push(*a)
                }
                (f, s)
            });
    ActionPartition::new(
        fast.into_iter().map(String::from).collect(),
        slow.into_iter().map(String::from).collect(),
    )
    .unwrap()
}

fn config(fast_mask: u8, delta_mask: u8, alias_mask: u8, species: usize) -> EquivConfig {
    let delta = (0..species)
        .filter(|i| delta_mask & (1 << i) != 0)
        .map(|i| format!("A{i}"))
        .collect();
    let aliases = (0..species)
        .filter(|i| alias_mask & (1 << i) != 0)
        .map(|i| (format!("B{i}"), format!("A{i}")))
        .collect();
    EquivConfig::new(partition(fast_mask), delta, aliases)
}

fn dot(a: &[i64], b: &[u32]) -> i64 {
    a.iter().zip(b).map(|(x, &y)| x * i64::from(y)).sum()
}

/// Strong bisimilarity over full labels by naive refinement.
fn strong_oracle(a: &Lts, b: &Lts) -> BTreeSet<(usize, usize)> {
    let mut rel: BTreeSet<(usize, usize)> = (0..a.num_states())
        .flat_map(|p| (0..b.num_states()).map(move |q| (p, q)))
        .collect();
    loop {
        let keep: BTreeSet<(usize, usize)> = rel
            .iter()
            .copied()
            .filter(|&(p, q)| {
                let fwd = a.outgoing(p).iter().all(|t| {
                    b.outgoing(q)
                        .iter()
                        .any(|u| u.label == t.label && rel.contains(&(t.dst, u.dst)))
                });
                let bwd = b.outgoing(q).iter().all(|u| {
                    a.outgoing(p)
                        .iter()
                        .any(|t| t.label == u.label && rel.contains(&(t.dst, u.dst)))
                });
                fwd && bwd
            })
            .collect();
        if keep.len() == rel.len() {
            return rel;
        }
        rel = keep;
    }
}

type Outcome = Result<(), TestCaseError>;

fn level_changes_match_label_entries(spec: ModelSpec) -> Outcome {
    let (sys, lts) = build(&spec, "A");
    let max = sys.max_levels();
    for t in lts.transitions() {
        let src = &lts.states[t.src].0;
        let dst = &lts.states[t.dst].0;
        let mut expected: Vec<i64> = src.iter().map(|&l| i64::from(l)).collect();
        for e in t.label.entries() {
            let i = lts.species.iter().position(|s| *s == e.species).unwrap();
            prop_assert_eq!(e.level, src[i]);
            expected[i] += e.role.level_delta(e.stoich);
        }
        let got: Vec<i64> = dst.iter().map(|&l| i64::from(l)).collect();
        prop_assert_eq!(got, expected);
        prop_assert!(dst.iter().zip(&max).all(|(l, m)| l <= m));
    }
    Ok(())
}

fn conserved_quantities_are_constant((spec, fast_mask): (ModelSpec, u8)) -> Outcome {
    let (sys, lts) = build(&spec, "A");
    let cfg = config(fast_mask, 0, 0, spec.species.len());
    let cls = classify(&sys, &cfg).unwrap();
    for y in &cls.conserved {
        for t in lts.transitions() {
            prop_assert_eq!(dot(y, &lts.states[t.src].0), dot(y, &lts.states[t.dst].0));
        }
    }
    let (nc, ns, nf) = cls.counts();
    prop_assert_eq!(nc + ns + nf, spec.species.len());
    prop_assert!(cls.block_shape_verified);
    Ok(())
}

fn slow_variables_are_constant_along_fast_steps((spec, fast_mask): (ModelSpec, u8)) -> Outcome {
    let (sys, lts) = build(&spec, "A");
    let cfg = config(fast_mask, 0, 0, spec.species.len());
    let cls = classify(&sys, &cfg).unwrap();
    for t in lts.transitions() {
        if cfg.partition.speed(&t.label.action) == Some(Speed::Fast) {
            for y in &cls.slow {
                prop_assert_eq!(dot(y, &lts.states[t.src].0), dot(y, &lts.states[t.dst].0));
            }
        }
    }
    Ok(())
}

type RawLabel = Vec<(usize, u32, u32)>;

fn filtering_distributes_over_concatenation(
    (left, right, delta_mask, alias_mask): (RawLabel, RawLabel, u8, u8),
) -> Outcome {
    let label = |v: &[(usize, u32, u32)], side: &str| {
        let entries = v
            .iter()
            .map(|&(i, level, stoich)| LabelEntry {
                species: format!("{side}{i}"),
                role: Role::ALL[i % Role::ALL.len()],
                level,
                stoich,
            })
            .collect();
        CapabilityLabel::new("a", entries)
    };
    let cfg = config(0, delta_mask, alias_mask, 4);
    let (l1, l2) = (label(&left, "A"), label(&right, "B"));
    prop_assert_eq!(
        filter_label(&l1.concat(&l2), &cfg),
        filter_label(&l1, &cfg).concat(&filter_label(&l2, &cfg))
    );
    Ok(())
}

fn closure_matches_warshall((spec, fast_mask): (ModelSpec, u8)) -> Outcome {
    let (_, lts) = build(&spec, "A");
    prop_assume!(lts.num_states() < 50);
    let cfg = config(fast_mask, 0, 0, spec.species.len());
    let views = WeakViews::new(&lts, &cfg, &mut LabelTable::new()).unwrap();
    let n = lts.num_states();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for t in lts.transitions() {
        if cfg.partition.speed(&t.label.action) == Some(Speed::Fast) {
            reach[t.src][t.dst] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    for (s, row) in reach.iter().enumerate() {
        let expected: Vec<usize> = (0..n).filter(|&j| row[j]).collect();
        prop_assert_eq!(views.closure(s), expected.as_slice());
    }
    Ok(())
}

fn no_fast_actions_gives_strong_bisimilarity((a, b): (ModelSpec, ModelSpec)) -> Outcome {
    let (_, la) = build(&a, "A");
    let (_, lb) = build(&b, "A");
    prop_assume!(la.num_states() < 30 && lb.num_states() < 30);
    let species: BTreeSet<String> = la.species.iter().chain(&lb.species).cloned().collect();
    let cfg = EquivConfig::new(partition(0), species, BTreeMap::new());
    for (x, y) in [(&la, &la), (&la, &lb)] {
        let (rel, _) = largest_fast_slow(x, y, &cfg).unwrap();
        prop_assert_eq!(rel.pairs, strong_oracle(x, y));
    }
    Ok(())
}

type PairCase = (ModelSpec, ModelSpec, u8, u8, u8, Vec<prop::sample::Index>);

fn largest_relations_are_sound_maximal_and_nested(
    (a, b, fast_mask, delta_mask, alias_mask, samples): PairCase,
) -> Outcome {
    let (_, la) = build(&a, "A");
    let (_, lb) = build(&b, "B");
    let cfg = config(fast_mask, delta_mask, alias_mask, 3);
    let (fs, fs_out) = largest_fast_slow(&la, &lb, &cfg).unwrap();
    let (sl, sl_out) = largest_slow(&la, &lb, &cfg).unwrap();
    prop_assert!(fs.is_subset(&sl));
    prop_assert!(!fs_out.verdict.is_positive() || sl_out.verdict.is_positive());
    prop_assert_eq!(fs_out.witness.is_some(), !fs_out.verdict.is_positive());

    for (rel, mode) in [(&fs, Mode::FastSlow), (&sl, Mode::Slow)] {
        let check = |r: &PairRelation| match mode {
            Mode::FastSlow => check_fast_slow_relation(r, &la, &lb, &cfg).unwrap(),
            Mode::Slow => check_slow_relation(r, &la, &lb, &cfg).unwrap(),
        };
        if !rel.is_empty() {
            prop_assert!(check(rel).verdict.is_positive());
        }
        if la.num_states() < 50 && lb.num_states() < 50 {
            let deleted: Vec<(usize, usize)> = (0..la.num_states())
                .flat_map(|p| (0..lb.num_states()).map(move |q| (p, q)))
                .filter(|&(p, q)| !rel.contains(p, q))
                .collect();
            if !deleted.is_empty() {
                for ix in &samples {
                    let mut grown = rel.clone();
                    grown.pairs.insert(*ix.get(&deleted));
                    prop_assert!(!check(&grown).verdict.is_positive());
                }
            }
        }
    }

    // swapping the inputs and inverting the aliases keeps the verdict
    let (swapped, out) = largest(&lb, &la, &cfg.swapped(), Mode::FastSlow, WITNESS_STEPS).unwrap();
    prop_assert_eq!(out.verdict, fs_out.verdict);
    prop_assert_eq!(swapped.inverse(), fs);
    Ok(())
}

fn every_system_is_equivalent_to_itself(
    (spec, fast_mask, delta_mask): (ModelSpec, u8, u8),
) -> Outcome {
    let (_, lts) = build(&spec, "A");
    let cfg = config(fast_mask, delta_mask, 0, spec.species.len().min(3));
    let id = PairRelation::new((0..lts.num_states()).map(|i| (i, i)));
    prop_assert!(check_fast_slow_relation(&id, &lts, &lts, &cfg)
        .unwrap()
        .verdict
        .is_positive());
    prop_assert!(largest_fast_slow(&lts, &lts, &cfg)
        .unwrap()
        .1
        .verdict
        .is_positive());
    Ok(())
}

pub const PROPERTIES: [&str; 8] = [
    "level-delta soundness",
    "conserved constancy",
    "slow constancy along fast steps",
    "filter homomorphism",
    "fast closure vs Warshall",
    "degeneration to strong bisimilarity",
    "largest relations sound, maximal, nested, symmetric",
    "self-equivalence",
];

fn run_with<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Outcome,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// Runs one named property for `cases` generated inputs.
pub fn run_property(name: &str, cases: u32) -> Result<(), String> {
    let model = || arb_model(true);
    let plain = || arb_model(false);
    let raw = || prop::collection::vec((0usize..4, 0u32..4, 1u32..3), 0..4);
    match name {
        "level-delta soundness" => run_with(cases, model(), level_changes_match_label_entries),
        "conserved constancy" => {
            run_with(cases, (plain(), 0u8..16), conserved_quantities_are_constant)
        }
        "slow constancy along fast steps" => run_with(
            cases,
            (plain(), 0u8..16),
            slow_variables_are_constant_along_fast_steps,
        ),
        "filter homomorphism" => run_with(
            cases,
            (raw(), raw(), 0u8..16, 0u8..16),
            filtering_distributes_over_concatenation,
        ),
        "fast closure vs Warshall" => run_with(cases, (model(), 0u8..16), closure_matches_warshall),
        "degeneration to strong bisimilarity" => run_with(
            cases,
            (model(), model()),
            no_fast_actions_gives_strong_bisimilarity,
        ),
        "largest relations sound, maximal, nested, symmetric" => run_with(
            cases,
            (
                model(),
                model(),
                0u8..16,
                0u8..8,
                0u8..8,
                prop::collection::vec(any::<prop::sample::Index>(), 3),
            ),
            largest_relations_are_sound_maximal_and_nested,
        ),
        "self-equivalence" => run_with(
            cases,
            (model(), 0u8..16, 0u8..8),
            every_system_is_equivalent_to_itself,
        ),
        other => Err(format!("unknown property {other}")),
    }
}
