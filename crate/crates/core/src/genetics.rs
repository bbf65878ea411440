//! Population initialization and variation operators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprtree::{ExprTree, Node, PrimitiveOp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub max_initial_depth: usize,
    pub max_depth: usize,
    pub elite_count: usize,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            crossover_rate: 0.90,
            mutation_rate: 0.10,
            max_initial_depth: 3,
            max_depth: 7,
            elite_count: 1,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.crossover_rate) || !rate_ok(self.mutation_rate) {
            return Err(Error::Config("variation rates must lie in [0, 1]".into()));
        }
        if self.crossover_rate + self.mutation_rate > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "crossover_rate + mutation_rate = {} exceeds 1",
                self.crossover_rate + self.mutation_rate
            )));
        }
        if self.max_initial_depth == 0 || self.max_initial_depth > self.max_depth {
            return Err(Error::Config(format!(
                "need 0 < max_initial_depth ({}) <= max_depth ({})",
                self.max_initial_depth, self.max_depth
            )));
        }
        Ok(())
    }
}

/// Terminals are the dataset's features plus one ERC slot; functions are the
/// eight protected primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveSet {
    pub n_features: usize,
}

impl PrimitiveSet {
    pub fn new(n_features: usize) -> Self {
        PrimitiveSet { n_features }
    }

    fn n_terminals(&self) -> usize {
        self.n_features + 1
    }

    /// Probability that `grow` stops early with a terminal.
    pub fn terminal_ratio(&self) -> f64 {
        self.n_terminals() as f64 / (self.n_terminals() + PrimitiveOp::ALL.len()) as f64
    }

    fn random_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        let pick = rng.random_range(0..self.n_terminals());
        if pick < self.n_features {
            Node::Var(pick)
        } else {
            Node::Const(rng.random_range(-1.0..=1.0))
        }
    }

    fn random_op<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        Node::Op(PrimitiveOp::ALL[rng.random_range(0..PrimitiveOp::ALL.len())])
    }
}

fn build<R: Rng + ?Sized>(
    pset: &PrimitiveSet,
    height: usize,
    full: bool,
    depth: usize,
    rng: &mut R,
    out: &mut Vec<Node>,
) {
    let leaf = depth == height || (!full && rng.random_bool(pset.terminal_ratio()));
    let node = if leaf {
        pset.random_terminal(rng)
    } else {
        pset.random_op(rng)
    };
    out.push(node);
    for _ in 0..node.arity() {
        build(pset, height, full, depth + 1, rng, out);
    }
}

/// Tree whose leaves all sit at depth `height`.
pub fn full_tree<R: Rng + ?Sized>(pset: &PrimitiveSet, height: usize, rng: &mut R) -> ExprTree {
    let mut nodes = Vec::new();
    build(pset, height, true, 0, rng, &mut nodes);
    ExprTree::from_prefix_unchecked(nodes)
}

/// Tree of depth at most `height`; each non-forced node is a terminal with
/// probability [`PrimitiveSet::terminal_ratio`].
pub fn grow_tree<R: Rng + ?Sized>(pset: &PrimitiveSet, height: usize, rng: &mut R) -> ExprTree {
    let mut nodes = Vec::new();
    build(pset, height, false, 0, rng, &mut nodes);
    ExprTree::from_prefix_unchecked(nodes)
}

/// Ramped half-and-half: tree `i` targets depth `1 + (i / 2) % max_initial_depth`
/// and is built with `full` when `i` is even, `grow` when odd.
pub fn init_population<R: Rng + ?Sized>(
    size: usize,
    config: &VariationConfig,
    pset: &PrimitiveSet,
    rng: &mut R,
) -> Vec<ExprTree> {
    let levels = config.max_initial_depth.max(1);
    (0..size)
        .map(|i| {
            let height = 1 + (i / 2) % levels;
            if i % 2 == 0 {
                full_tree(pset, height, rng)
            } else {
                grow_tree(pset, height, rng)
            }
        })
        .collect()
}

/// Swaps uniformly chosen subtrees of `a` and `b`. An offspring deeper than
/// `max_depth` is replaced by a copy of its own parent.
pub fn one_point_crossover<R: Rng + ?Sized>(
    a: &ExprTree,
    b: &ExprTree,
    config: &VariationConfig,
    rng: &mut R,
) -> (ExprTree, ExprTree) {
    let i = rng.random_range(0..a.len());
    let j = rng.random_range(0..b.len());
    let from_a = a.subtree(i);
    let from_b = b.subtree(j);
    let child_a = a.replace_subtree(i, &from_b);
    let child_b = b.replace_subtree(j, &from_a);
    let keep = |child: ExprTree, parent: &ExprTree| {
        if child.depth() <= config.max_depth {
            child
        } else {
            parent.clone()
        }
    };
    (keep(child_a, a), keep(child_b, b))
}

/// Replaces a uniformly chosen subtree with a fresh `grow` tree whose height
/// budget is `max_depth` minus the depth of the insertion point.
pub fn uniform_subtree_mutation<R: Rng + ?Sized>(
    a: &ExprTree,
    config: &VariationConfig,
    pset: &PrimitiveSet,
    rng: &mut R,
) -> ExprTree {
    let i = rng.random_range(0..a.len());
    let at_depth = a.node_depths()[i];
    let budget = config.max_depth.saturating_sub(at_depth);
    let replacement = grow_tree(pset, budget, rng);
    a.replace_subtree(i, &replacement)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationEvent {
    Crossover,
    Mutation,
    Reproduction,
}

/// One uniform draw decides the event: crossover below `crossover_rate`,
/// mutation below `crossover_rate + mutation_rate`, verbatim copy otherwise.
pub fn choose_event<R: Rng + ?Sized>(config: &VariationConfig, rng: &mut R) -> VariationEvent {
    let u: f64 = rng.random();
    if u < config.crossover_rate {
        VariationEvent::Crossover
    } else if u < config.crossover_rate + config.mutation_rate {
        VariationEvent::Mutation
    } else {
        VariationEvent::Reproduction
    }
}

/// Produces one offspring per parent, consuming parents pairwise.
///
/// With an odd count, the last parent is paired with the first; only the first
/// offspring of that event is kept.
pub fn make_offspring<R: Rng + ?Sized>(
    parents: &[ExprTree],
    config: &VariationConfig,
    pset: &PrimitiveSet,
    rng: &mut R,
) -> Vec<ExprTree> {
    let mut offspring = Vec::with_capacity(parents.len());
    let apply = |a: &ExprTree, b: &ExprTree, rng: &mut R| match choose_event(config, rng) {
        VariationEvent::Crossover => one_point_crossover(a, b, config, rng),
        VariationEvent::Mutation => (
            uniform_subtree_mutation(a, config, pset, rng),
            uniform_subtree_mutation(b, config, pset, rng),
        ),
        VariationEvent::Reproduction => (a.clone(), b.clone()),
    };
    for pair in parents.chunks(2) {
        match pair {
            [a, b] => {
                let (x, y) = apply(a, b, rng);
                offspring.push(x);
                offspring.push(y);
            }
            [a] => {
                let (x, _) = apply(a, &parents[0], rng);
                offspring.push(x);
            }
            _ => unreachable!(),
        }
    }
    offspring
}
