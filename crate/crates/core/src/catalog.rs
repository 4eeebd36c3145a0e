//! Generators for the competitive-inhibition model family.
//!
//! `inhibition(n, m, p)` has substrate, enzyme and inhibitor at levels
//! `n`, `m`, `p` with explicit complexes EI and SE; `inhibition_reduced`
//! replaces binding by a single slow reaction with the enzyme as activator
//! and the inhibitor as inhibitor.

/// Fast binding and unbinding, slow product formation, P observed under its
/// reduced-model alias.
pub const INHIBITION_CONFIG: &str = "\
fast: alpha1, alpha_1, beta1, beta_1
slow: gamma
delta: P
alias: P' = P
";

fn at_least_one(x: u32) -> u32 {
    x.max(1)
}

pub fn inhibition(n: u32, m: u32, p: u32) -> String {
    format!(
        "\
max S = {s};
species S = (beta1,1) << S + (beta_1,1) >> S;
max E = {e};
species E = (alpha1,1) >> E + (alpha_1,1) << E + (beta1,1) << E + (beta_1,1) >> E + (gamma,1) >> E;
max I = {i};
species I = (alpha1,1) >> I + (alpha_1,1) << I;
max P = {s};
species P = (gamma,1) >> P;
max EI = {ei};
species EI = (alpha1,1) << EI + (alpha_1,1) >> EI;
max SE = {se};
species SE = (beta1,1) >> SE + (beta_1,1) << SE + (gamma,1) << SE;
system = S[{n}] <*> E[{m}] <*> I[{p}] <*> P[0] <*> EI[0] <*> SE[0];
",
        s = at_least_one(n),
        e = at_least_one(m),
        i = at_least_one(p),
        ei = at_least_one(m.min(p)),
        se = at_least_one(m.min(n)),
    )
}

pub fn inhibition_reduced(n: u32, m: u32, p: u32) -> String {
    format!(
        "\
max S' = {s};
species S' = (gamma,1) << S';
max E' = {e};
species E' = (gamma,1) (+) E';
max I' = {i};
species I' = (gamma,1) (-) I';
max P' = {s};
species P' = (gamma,1) >> P';
system = S'[{n}] <*> E'[{m}] <*> I'[{p}] <*> P'[0];
",
        s = at_least_one(n),
        e = at_least_one(m),
        i = at_least_one(p),
    )
}
