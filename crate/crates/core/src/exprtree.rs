//! Expression trees over the primitive set `{x_i, ERC, +, -, *, /, sin, cos, exp, log}`
//! and their protected evaluation.
//!
//! Trees are stored as a flat prefix-order node vector. Every subtree occupies a
//! contiguous slice, which makes uniform node selection and subtree exchange cheap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveOp {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
}

impl PrimitiveOp {
    pub const ALL: [PrimitiveOp; 8] = [
        PrimitiveOp::Add,
        PrimitiveOp::Sub,
        PrimitiveOp::Mul,
        PrimitiveOp::Div,
        PrimitiveOp::Sin,
        PrimitiveOp::Cos,
        PrimitiveOp::Exp,
        PrimitiveOp::Log,
    ];

    pub fn arity(self) -> usize {
        match self {
            PrimitiveOp::Add | PrimitiveOp::Sub | PrimitiveOp::Mul | PrimitiveOp::Div => 2,
            PrimitiveOp::Sin | PrimitiveOp::Cos | PrimitiveOp::Exp | PrimitiveOp::Log => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveOp::Add => "add",
            PrimitiveOp::Sub => "sub",
            PrimitiveOp::Mul => "mul",
            PrimitiveOp::Div => "div",
            PrimitiveOp::Sin => "sin",
            PrimitiveOp::Cos => "cos",
            PrimitiveOp::Exp => "exp",
            PrimitiveOp::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PrimitiveOp::ALL.into_iter().find(|op| op.name() == name)
    }
}

/// Value returned by every protected operator on failure.
pub const PROTECTED_FALLBACK: f64 = 1.0;

#[inline]
fn protect(value: f64) -> f64 {
    if value.is_finite() {
        value
    } else {
        PROTECTED_FALLBACK
    }
}

#[inline]
pub(crate) fn protected_unary(op: PrimitiveOp, x: f64) -> f64 {
    match op {
        PrimitiveOp::Sin => protect(x.sin()),
        PrimitiveOp::Cos => protect(x.cos()),
        PrimitiveOp::Exp => protect(x.exp()),
        PrimitiveOp::Log => {
            if x > 0.0 {
                protect(x.ln())
            } else {
                PROTECTED_FALLBACK
            }
        }
        _ => unreachable!("{} is binary", op.name()),
    }
}

#[inline]
pub(crate) fn protected_binary(op: PrimitiveOp, a: f64, b: f64) -> f64 {
    match op {
        PrimitiveOp::Add => protect(a + b),
        PrimitiveOp::Sub => protect(a - b),
        PrimitiveOp::Mul => protect(a * b),
        PrimitiveOp::Div => {
            if b == 0.0 {
                PROTECTED_FALLBACK
            } else {
                protect(a / b)
            }
        }
        _ => unreachable!("{} is unary", op.name()),
    }
}

/// Applies `op` to `args`, returning 1.0 whenever the input lies outside the
/// operator's domain or the result is not finite.
///
/// Panics if `args.len() != op.arity()`.
pub fn apply_protected(op: PrimitiveOp, args: &[f64]) -> f64 {
    assert_eq!(args.len(), op.arity(), "wrong argument count for {}", op.name());
    if args.iter().any(|a| !a.is_finite()) {
        return PROTECTED_FALLBACK;
    }
    match *args {
        [x] => protected_unary(op, x),
        [a, b] => protected_binary(op, a, b),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// 0-based feature index.
    Var(usize),
    /// Ephemeral random constant.
    Const(f64),
    Op(PrimitiveOp),
}

impl Node {
    pub fn arity(&self) -> usize {
        match self {
            Node::Op(op) => op.arity(),
            _ => 0,
        }
    }
}

/// A program individual in prefix order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    nodes: Vec<Node>,
}

impl ExprTree {
    /// Builds a tree from prefix-ordered nodes, checking that the arities close
    /// exactly one tree.
    pub fn from_prefix(nodes: Vec<Node>) -> Result<Self> {
        let mut open = 1usize;
        for (i, node) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::Parse(format!(
                    "trailing nodes after position {}",
                    i - 1
                )));
            }
            open = open - 1 + node.arity();
        }
        if open != 0 || nodes.is_empty() {
            return Err(Error::Parse("incomplete prefix expression".into()));
        }
        Ok(ExprTree { nodes })
    }

    pub(crate) fn from_prefix_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(ExprTree::from_prefix(nodes.clone()).is_ok());
        ExprTree { nodes }
    }

    pub fn var(index: usize) -> Self {
        ExprTree {
            nodes: vec![Node::Var(index)],
        }
    }

    pub fn constant(value: f64) -> Self {
        ExprTree {
            nodes: vec![Node::Const(value)],
        }
    }

    /// Panics if `children.len()` does not match the operator's arity.
    pub fn op(op: PrimitiveOp, children: Vec<ExprTree>) -> Self {
        assert_eq!(children.len(), op.arity(), "wrong child count for {}", op.name());
        let mut nodes = vec![Node::Op(op)];
        for child in children {
            nodes.extend(child.nodes);
        }
        ExprTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index one past the last node of the subtree rooted at `index`.
    pub fn subtree_end(&self, index: usize) -> usize {
        let mut open = 1usize;
        let mut end = index;
        while open > 0 {
            open = open - 1 + self.nodes[end].arity();
            end += 1;
        }
        end
    }

    pub fn subtree(&self, index: usize) -> ExprTree {
        let end = self.subtree_end(index);
        ExprTree {
            nodes: self.nodes[index..end].to_vec(),
        }
    }

    /// Returns a copy with the subtree rooted at `index` replaced by `replacement`.
    pub fn replace_subtree(&self, index: usize, replacement: &ExprTree) -> ExprTree {
        let end = self.subtree_end(index);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - index) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..index]);
        nodes.extend_from_slice(&replacement.nodes);
        nodes.extend_from_slice(&self.nodes[end..]);
        ExprTree { nodes }
    }

    /// Depth of every node (root = 0), in prefix order.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // remaining child slots for each open ancestor
        let mut stack: Vec<usize> = Vec::new();
        for node in &self.nodes {
            depths.push(stack.len());
            if let Some(top) = stack.last_mut() {
                *top -= 1;
            }
            if node.arity() > 0 {
                stack.push(node.arity());
            }
            while stack.last() == Some(&0) {
                stack.pop();
            }
        }
        depths
    }

    /// Depth of the tree; a single node has depth 0.
    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    pub fn max_var_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(*i),
                _ => None,
            })
            .max()
    }

    /// Case-major evaluation of a single input row by recursive walk.
    pub fn eval_row(&self, row: &[f64]) -> f64 {
        fn walk(nodes: &[Node], cursor: &mut usize, row: &[f64]) -> f64 {
            let node = nodes[*cursor];
            *cursor += 1;
            match node {
                Node::Var(i) => row[i],
                Node::Const(c) => c,
                Node::Op(op) if op.arity() == 1 => {
                    let x = walk(nodes, cursor, row);
                    protected_unary(op, x)
                }
                Node::Op(op) => {
                    let a = walk(nodes, cursor, row);
                    let b = walk(nodes, cursor, row);
                    protected_binary(op, a, b)
                }
            }
        }
        let mut cursor = 0;
        walk(&self.nodes, &mut cursor, row)
    }

    fn check_vars(&self, n_features: usize) -> Result<()> {
        match self.max_var_index() {
            Some(i) if i >= n_features => Err(Error::Config(format!(
                "tree references x{i} but the dataset has {n_features} features"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_node(nodes: &[Node], cursor: &mut usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let node = nodes[*cursor];
            *cursor += 1;
            match node {
                Node::Var(i) => write!(f, "x{i}"),
                Node::Const(c) => write!(f, "{c:?}"),
                Node::Op(op) => {
                    write!(f, "{}(", op.name())?;
                    for k in 0..op.arity() {
                        if k > 0 {
                            f.write_str(", ")?;
                        }
                        write_node(nodes, cursor, f)?;
                    }
                    f.write_str(")")
                }
            }
        }
        let mut cursor = 0;
        write_node(&self.nodes, &mut cursor, f)
    }
}

impl FromStr for ExprTree {
    type Err = Error;

    /// Parses the `op(arg, ...)` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parser = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let mut nodes = Vec::new();
        parser.expr(&mut nodes)?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(Error::Parse(format!("unexpected input at byte {}", parser.pos)));
        }
        Ok(ExprTree { nodes })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "expected '{}' at byte {}",
                byte as char, self.pos
            )))
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && !matches!(self.src[self.pos], b'(' | b')' | b',')
            && !self.src[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn expr(&mut self, nodes: &mut Vec<Node>) -> Result<()> {
        let start = self.pos;
        let token = self.token().to_owned();
        if token.is_empty() {
            return Err(Error::Parse(format!("expected expression at byte {start}")));
        }
        if let Some(op) = PrimitiveOp::from_name(&token) {
            nodes.push(Node::Op(op));
            self.expect(b'(')?;
            for k in 0..op.arity() {
                if k > 0 {
                    self.expect(b',')?;
                }
                self.expr(nodes)?;
            }
            return self.expect(b')');
        }
        if let Some(index) = token.strip_prefix('x') {
            let index = index
                .parse()
                .map_err(|_| Error::Parse(format!("bad variable '{token}'")))?;
            nodes.push(Node::Var(index));
            return Ok(());
        }
        let value: f64 = token
            .parse()
            .map_err(|_| Error::Parse(format!("bad token '{token}'")))?;
        nodes.push(Node::Const(value));
        Ok(())
    }
}

impl Serialize for ExprTree {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExprTree {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub predictions: Vec<f64>,
    /// Absolute error per case.
    pub case_errors: Vec<f64>,
    pub mae: f64,
}

impl EvalResult {
    fn from_predictions(predictions: Vec<f64>, targets: &[f64]) -> Self {
        let case_errors: Vec<f64> = predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t).abs().min(f64::MAX))
            .collect();
        let mae = mean(&case_errors);
        EvalResult {
            predictions,
            case_errors,
            mae,
        }
    }
}

/// Arithmetic mean of finite values that stays finite: when the plain sum
/// overflows, the values are scaled down before summing.
pub(crate) fn mean(values: &[f64]) -> f64 {
    mean_of(values.iter().copied(), values.len())
}

pub(crate) fn mean_of<I: Iterator<Item = f64> + Clone>(values: I, len: usize) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let n = len as f64;
    let sum: f64 = values.clone().sum();
    if sum.is_finite() {
        sum / n
    } else {
        values.map(|x| x / n).sum()
    }
}

/// Evaluates `tree` on every case of `data`, one recursive walk per case.
pub fn evaluate(tree: &ExprTree, data: &Dataset) -> Result<EvalResult> {
    tree.check_vars(data.n_features())?;
    let predictions = (0..data.n_cases())
        .map(|i| tree.eval_row(data.row(i)))
        .collect();
    Ok(EvalResult::from_predictions(predictions, data.targets()))
}

/// Column-major copy of a dataset for node-at-a-time evaluation.
///
/// Produces bit-identical results to [`evaluate`]: each case goes through the
/// same scalar operations in the same order, only the loop nesting differs.
#[derive(Debug, Clone)]
pub struct Evaluator {
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Evaluator {
    pub fn new(data: &Dataset) -> Self {
        let columns = (0..data.n_features())
            .map(|j| (0..data.n_cases()).map(|i| data.row(i)[j]).collect())
            .collect();
        Evaluator {
            columns,
            targets: data.targets().to_vec(),
        }
    }

    pub fn n_cases(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn evaluate(&self, tree: &ExprTree) -> Result<EvalResult> {
        tree.check_vars(self.n_features())?;
        Ok(EvalResult::from_predictions(
            self.predict(tree),
            &self.targets,
        ))
    }

    fn predict(&self, tree: &ExprTree) -> Vec<f64> {
        let n = self.n_cases();
        let mut stack: Vec<Operand<'_>> = Vec::new();
        let mut pool: Vec<Vec<f64>> = Vec::new();
        // Reverse prefix order: children are on the stack, first child on top.
        for node in tree.nodes.iter().rev() {
            let value = match *node {
                Node::Var(i) => Operand::Column(&self.columns[i]),
                Node::Const(c) => Operand::Scalar(c),
                Node::Op(op) if op.arity() == 1 => {
                    match stack.pop().expect("operand") {
                        Operand::Scalar(x) => Operand::Scalar(protected_unary(op, x)),
                        Operand::Column(col) => {
                            let mut buf = take_buffer(&mut pool, n);
                            buf.extend(col.iter().map(|&x| protected_unary(op, x)));
                            Operand::Owned(buf)
                        }
                        Operand::Owned(mut buf) => {
                            buf.iter_mut().for_each(|x| *x = protected_unary(op, *x));
                            Operand::Owned(buf)
                        }
                    }
                }
                Node::Op(op) => {
                    let first = stack.pop().expect("first operand");
                    let second = stack.pop().expect("second operand");
                    combine(op, first, second, &mut pool, n)
                }
            };
            stack.push(value);
        }
        match stack.pop().expect("tree result") {
            Operand::Scalar(c) => vec![c; n],
            Operand::Column(col) => col.to_vec(),
            Operand::Owned(buf) => buf,
        }
    }
}

/// Intermediate value of node-at-a-time evaluation. Feature columns are
/// borrowed and constant subtrees stay scalar until they meet a column.
enum Operand<'a> {
    Scalar(f64),
    Column(&'a [f64]),
    Owned(Vec<f64>),
}

fn take_buffer(pool: &mut Vec<Vec<f64>>, n: usize) -> Vec<f64> {
    let mut buf = pool.pop().unwrap_or_else(|| Vec::with_capacity(n));
    buf.clear();
    buf
}

trait Lane: Copy {
    fn at(self, i: usize) -> f64;
}

impl Lane for f64 {
    #[inline(always)]
    fn at(self, _: usize) -> f64 {
        self
    }
}

impl Lane for &[f64] {
    #[inline(always)]
    fn at(self, i: usize) -> f64 {
        self[i]
    }
}

fn fill_new<A: Lane, B: Lane>(op: PrimitiveOp, a: A, b: B, pool: &mut Vec<Vec<f64>>, n: usize) -> Vec<f64> {
    let mut buf = take_buffer(pool, n);
    buf.extend((0..n).map(|i| protected_binary(op, a.at(i), b.at(i))));
    buf
}

fn into_first<B: Lane>(op: PrimitiveOp, a: &mut [f64], b: B) {
    for (i, x) in a.iter_mut().enumerate() {
        *x = protected_binary(op, *x, b.at(i));
    }
}

fn into_second<A: Lane>(op: PrimitiveOp, a: A, b: &mut [f64]) {
    for (i, y) in b.iter_mut().enumerate() {
        *y = protected_binary(op, a.at(i), *y);
    }
}

fn combine<'a>(
    op: PrimitiveOp,
    first: Operand<'a>,
    second: Operand<'a>,
    pool: &mut Vec<Vec<f64>>,
    n: usize,
) -> Operand<'a> {
    use Operand::{Column, Owned, Scalar};
    match (first, second) {
        (Scalar(a), Scalar(b)) => Scalar(protected_binary(op, a, b)),
        (Owned(mut a), Owned(b)) => {
            into_first(op, &mut a, b.as_slice());
            pool.push(b);
            Owned(a)
        }
        (Owned(mut a), Column(b)) => {
            into_first(op, &mut a, b);
            Owned(a)
        }
        (Owned(mut a), Scalar(b)) => {
            into_first(op, &mut a, b);
            Owned(a)
        }
        (Column(a), Owned(mut b)) => {
            into_second(op, a, &mut b);
            Owned(b)
        }
        (Scalar(a), Owned(mut b)) => {
            into_second(op, a, &mut b);
            Owned(b)
        }
        (Column(a), Column(b)) => Owned(fill_new(op, a, b, pool, n)),
        (Column(a), Scalar(b)) => Owned(fill_new(op, a, b, pool, n)),
        (Scalar(a), Column(b)) => Owned(fill_new(op, a, b, pool, n)),
    }
}
