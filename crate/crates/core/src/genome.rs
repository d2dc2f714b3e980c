//! Postfix (RPN) tree genomes, random tree generation and structural metrics.
//!
//! A [`TreeGenome`] stores its tree as a flat postfix sequence of [`Node`]s
//! plus a per-genome constant pool. Every constructor checks that the code is
//! a well-formed postfix program, so the rest of the crate can rely on the
//! simulated stack never underflowing.

use std::fmt;
use std::ops::Range;

use rand::Rng;
use thiserror::Error;

/// Maximum number of nodes in a tree.
pub const MAX_TREE_SIZE: usize = 1000;
/// Maximum tree depth, a lone terminal having depth 1.
pub const MAX_TREE_DEPTH: usize = 50;
/// Default interpreter stack capacity.
pub const DEFAULT_STACK_CAPACITY: usize = 50;

/// Attempts made before `generate_tree` falls back to a shallower tree that
/// is guaranteed to respect [`MAX_TREE_SIZE`].
const GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("malformed postfix code at position {position}: {reason}")]
    Malformed { position: usize, reason: &'static str },
    #[error("constant index {index} at position {position} is outside a pool of {pool_len}")]
    ConstIndex {
        position: usize,
        index: usize,
        pool_len: usize,
    },
    #[error("cannot parse token `{0}`")]
    Token(String),
    #[error("invalid function set: {0}")]
    FunctionSet(&'static str),
}

/// Operator family. Every opcode belongs to exactly one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpClass {
    Arithmetic,
    Transcendental,
    Comparison,
    Logic,
    Conditional,
    BooleanBitwise,
}

/// GP function primitives.
///
/// `And`/`Or` are the real-valued logic connectives used by the
/// classification problems (truthiness is `v > 0`); the `Bool*` variants are
/// the bitwise boolean set used by the multiplexer problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpCode {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Log,
    Exp,
    Gt,
    Lt,
    Eq,
    And,
    Or,
    If,
    BoolAnd,
    BoolOr,
    BoolNand,
    BoolNor,
}

impl OpCode {
    pub const ALL: [OpCode; 18] = [
        OpCode::Add,
        OpCode::Sub,
        OpCode::Mul,
        OpCode::Div,
        OpCode::Sin,
        OpCode::Cos,
        OpCode::Log,
        OpCode::Exp,
        OpCode::Gt,
        OpCode::Lt,
        OpCode::Eq,
        OpCode::And,
        OpCode::Or,
        OpCode::If,
        OpCode::BoolAnd,
        OpCode::BoolOr,
        OpCode::BoolNand,
        OpCode::BoolNor,
    ];

    pub const fn arity(self) -> usize {
        match self {
            OpCode::Sin | OpCode::Cos | OpCode::Log | OpCode::Exp => 1,
            OpCode::If => 3,
            _ => 2,
        }
    }

    pub const fn class(self) -> OpClass {
        match self {
            OpCode::Add | OpCode::Sub | OpCode::Mul | OpCode::Div => OpClass::Arithmetic,
            OpCode::Sin | OpCode::Cos | OpCode::Log | OpCode::Exp => OpClass::Transcendental,
            OpCode::Gt | OpCode::Lt | OpCode::Eq => OpClass::Comparison,
            OpCode::And | OpCode::Or => OpClass::Logic,
            OpCode::If => OpClass::Conditional,
            OpCode::BoolAnd | OpCode::BoolOr | OpCode::BoolNand | OpCode::BoolNor => {
                OpClass::BooleanBitwise
            }
        }
    }

    /// Token used in the textual RPN / LGP notation.
    pub const fn symbol(self) -> &'static str {
        match self {
            OpCode::Add => "+",
            OpCode::Sub => "-",
            OpCode::Mul => "*",
            OpCode::Div => "/",
            OpCode::Sin => "sin",
            OpCode::Cos => "cos",
            OpCode::Log => "log",
            OpCode::Exp => "exp",
            OpCode::Gt => ">",
            OpCode::Lt => "<",
            OpCode::Eq => "==",
            OpCode::And => "&&",
            OpCode::Or => "||",
            OpCode::If => "if",
            OpCode::BoolAnd => "AND",
            OpCode::BoolOr => "OR",
            OpCode::BoolNand => "NAND",
            OpCode::BoolNor => "NOR",
        }
    }

    pub fn from_symbol(token: &str) -> Option<OpCode> {
        OpCode::ALL.into_iter().find(|op| {
            let sym = op.symbol();
            sym == token || (op.class() != OpClass::BooleanBitwise && sym.eq_ignore_ascii_case(token))
        })
    }
}

impl fmt::Display for OpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One postfix token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Func(OpCode),
    /// Index of an input variable.
    Input(u16),
    /// Index into the owning genome's constant pool.
    Const(u16),
}

impl Node {
    pub const fn arity(self) -> usize {
        match self {
            Node::Func(op) => op.arity(),
            _ => 0,
        }
    }

    pub const fn is_terminal(self) -> bool {
        !matches!(self, Node::Func(_))
    }
}

/// Primitives available to generation and variation.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSet {
    ops: Vec<OpCode>,
    num_inputs: usize,
    const_range: Option<(f64, f64)>,
}

impl FunctionSet {
    pub fn new(
        ops: Vec<OpCode>,
        num_inputs: usize,
        const_range: Option<(f64, f64)>,
    ) -> Result<Self, GenomeError> {
        if ops.is_empty() {
            return Err(GenomeError::FunctionSet("no operators"));
        }
        if num_inputs == 0 {
            return Err(GenomeError::FunctionSet("at least one input variable is required"));
        }
        if num_inputs > usize::from(u16::MAX) {
            return Err(GenomeError::FunctionSet("too many input variables"));
        }
        if let Some((lo, hi)) = const_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GenomeError::FunctionSet("constant range must satisfy lo < hi"));
            }
        }
        Ok(Self {
            ops,
            num_inputs,
            const_range,
        })
    }

    pub fn ops(&self) -> &[OpCode] {
        &self.ops
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn const_range(&self) -> Option<(f64, f64)> {
        self.const_range
    }

    pub fn max_arity(&self) -> usize {
        self.ops.iter().map(|op| op.arity()).max().unwrap_or(0)
    }

    /// Number of distinct terminal choices (inputs, plus one ERC slot).
    fn terminal_count(&self) -> usize {
        self.num_inputs + usize::from(self.const_range.is_some())
    }

    pub fn is_boolean(&self) -> bool {
        self.ops
            .iter()
            .all(|op| op.class() == OpClass::BooleanBitwise)
    }
}

/// Structural limits a genome must respect to be admitted for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_size: usize,
    pub max_depth: usize,
    pub stack_capacity: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_size: MAX_TREE_SIZE,
            max_depth: MAX_TREE_DEPTH,
            stack_capacity: DEFAULT_STACK_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Malformed { position: usize },
    ConstIndex { position: usize },
    Size { size: usize, max: usize },
    Depth { depth: usize, max: usize },
    Stack { depth: usize, capacity: usize },
}

/// Checks raw postfix code against the genome invariants and `limits`,
/// reporting every violation found.
pub fn validate_code(code: &[Node], pool_len: usize, limits: &Limits) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    for (position, node) in code.iter().enumerate() {
        if let Node::Const(idx) = node {
            if usize::from(*idx) >= pool_len {
                violations.push(Violation::ConstIndex { position });
            }
        }
    }
    match scan(code) {
        Ok(shape) => {
            if shape.depth > limits.max_depth {
                violations.push(Violation::Depth {
                    depth: shape.depth,
                    max: limits.max_depth,
                });
            }
            if shape.max_stack > limits.stack_capacity {
                violations.push(Violation::Stack {
                    depth: shape.max_stack,
                    capacity: limits.stack_capacity,
                });
            }
        }
        Err(GenomeError::Malformed { position, .. }) => {
            violations.push(Violation::Malformed { position })
        }
        Err(_) => unreachable!("scan only reports malformed code"),
    }
    if code.len() > limits.max_size {
        violations.push(Violation::Size {
            size: code.len(),
            max: limits.max_size,
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Checks a genome against `limits`.
pub fn validate(genome: &TreeGenome, limits: &Limits) -> Result<(), Vec<Violation>> {
    validate_code(&genome.code, genome.consts.len(), limits)
}

struct Shape {
    depth: usize,
    max_stack: usize,
}

/// Simulates the postfix stack, computing depth and peak stack height.
fn scan(code: &[Node]) -> Result<Shape, GenomeError> {
    if code.is_empty() {
        return Err(GenomeError::Malformed {
            position: 0,
            reason: "empty program",
        });
    }
    // Each stack entry carries the depth of the subtree it represents.
    let mut depths: Vec<usize> = Vec::with_capacity(code.len());
    let mut max_stack = 0;
    for (position, node) in code.iter().enumerate() {
        let arity = node.arity();
        if depths.len() < arity {
            return Err(GenomeError::Malformed {
                position,
                reason: "stack underflow",
            });
        }
        let child_depth = depths.drain(depths.len() - arity..).max().unwrap_or(0);
        depths.push(child_depth + 1);
        max_stack = max_stack.max(depths.len());
    }
    if depths.len() != 1 {
        return Err(GenomeError::Malformed {
            position: code.len(),
            reason: "program leaves more than one value",
        });
    }
    Ok(Shape {
        depth: depths[0],
        max_stack,
    })
}

/// A GP tree in postfix order with its constant pool.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeGenome {
    code: Vec<Node>,
    consts: Vec<f64>,
    depth: usize,
    max_stack: usize,
}

impl TreeGenome {
    pub fn new(code: Vec<Node>, consts: Vec<f64>) -> Result<Self, GenomeError> {
        for (position, node) in code.iter().enumerate() {
            if let Node::Const(idx) = node {
                if usize::from(*idx) >= consts.len() {
                    return Err(GenomeError::ConstIndex {
                        position,
                        index: usize::from(*idx),
                        pool_len: consts.len(),
                    });
                }
            }
        }
        let shape = scan(&code)?;
        Ok(Self {
            code,
            consts,
            depth: shape.depth,
            max_stack: shape.max_stack,
        })
    }

    /// Parses whitespace-separated RPN text.
    ///
    /// Terminals are `X` (variable 0), `X<n>`, a bare numeric literal or
    /// `C(<value>)`; functions use [`OpCode::symbol`]. Commas and parentheses
    /// around groups are ignored, so the grouped notation
    /// `((X,(X,X)+)*,X)-` parses as well.
    pub fn parse_rpn(text: &str) -> Result<Self, GenomeError> {
        let mut code = Vec::new();
        let mut consts = Vec::new();
        for token in tokenize(text) {
            code.push(parse_token(&token, &mut consts)?);
        }
        Self::new(code, consts)
    }

    pub fn code(&self) -> &[Node] {
        &self.code
    }

    pub fn consts(&self) -> &[f64] {
        &self.consts
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.code.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Peak stack height when the postfix code is executed directly.
    pub fn rpn_max_stack_depth(&self) -> usize {
        self.max_stack
    }

    /// Stack reads performed by a postfix interpreter: one per function
    /// argument.
    pub fn rpn_stack_fetch_count(&self) -> usize {
        self.code.iter().map(|n| n.arity()).sum()
    }

    pub fn function_count(&self) -> usize {
        self.code.iter().filter(|n| !n.is_terminal()).count()
    }

    /// Largest variable index referenced, if any.
    pub fn max_input_index(&self) -> Option<usize> {
        self.code
            .iter()
            .filter_map(|n| match n {
                Node::Input(v) => Some(usize::from(*v)),
                _ => None,
            })
            .max()
    }

    /// Span of the subtree rooted at `root` within the postfix code.
    pub fn subtree_range(&self, root: usize) -> Range<usize> {
        let mut pending = 1usize;
        let mut start = root + 1;
        while pending > 0 {
            start -= 1;
            pending = pending - 1 + self.code[start].arity();
        }
        start..root + 1
    }

    /// Builds a new genome with `range` replaced by the subtree `donor_range`
    /// of `donor`. The constant pool is rebuilt to hold only referenced values.
    pub fn replace_subtree(
        &self,
        range: Range<usize>,
        donor: &TreeGenome,
        donor_range: Range<usize>,
    ) -> TreeGenome {
        let mut builder = PoolBuilder::default();
        let mut code = Vec::with_capacity(self.code.len() - range.len() + donor_range.len());
        builder.extend(&mut code, &self.code[..range.start], &self.consts);
        builder.extend(&mut code, &donor.code[donor_range], &donor.consts);
        builder.extend(&mut code, &self.code[range.end..], &self.consts);
        TreeGenome::new(code, builder.pool).expect("splicing whole subtrees keeps code well formed")
    }

    /// Copy of the subtree rooted at `root` as a standalone genome.
    pub fn subtree(&self, root: usize) -> TreeGenome {
        let range = self.subtree_range(root);
        let mut builder = PoolBuilder::default();
        let mut code = Vec::with_capacity(range.len());
        builder.extend(&mut code, &self.code[range], &self.consts);
        TreeGenome::new(code, builder.pool).expect("subtree of a well-formed tree is well formed")
    }
}

impl fmt::Display for TreeGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.code.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match node {
                Node::Func(op) => write!(f, "{op}")?,
                Node::Input(v) => write!(f, "X{v}")?,
                Node::Const(c) => write!(f, "C({:?})", self.consts[usize::from(*c)])?,
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct PoolBuilder {
    pool: Vec<f64>,
}

impl PoolBuilder {
    fn extend(&mut self, out: &mut Vec<Node>, nodes: &[Node], consts: &[f64]) {
        out.extend(nodes.iter().map(|node| match *node {
            Node::Const(idx) => {
                self.pool.push(consts[usize::from(idx)]);
                Node::Const((self.pool.len() - 1) as u16)
            }
            other => other,
        }));
    }
}

fn tokenize(text: &str) -> Vec<String> {
    // `C(...)` keeps its parentheses; every other paren or comma separates.
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        if (ch == 'C' || ch == 'c') && current.is_empty() && chars.peek() == Some(&'(') {
            let mut literal = String::from("C");
            for inner in chars.by_ref() {
                literal.push(inner);
                if inner == ')' {
                    break;
                }
            }
            tokens.push(literal);
            continue;
        }
        if ch.is_whitespace() || ch == ',' || ch == '(' || ch == ')' {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else {
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    // A grouped string such as `(X,X)+` has the operator glued to nothing, but
    // `X)+` style input can glue operators to terminals: split those apart.
    tokens.into_iter().flat_map(split_glued).collect()
}

fn split_glued(token: String) -> Vec<String> {
    if OpCode::from_symbol(&token).is_some() || token.starts_with('C') {
        return vec![token];
    }
    let bytes = token.as_bytes();
    if bytes.first() == Some(&b'X') || bytes.first() == Some(&b'x') {
        let digits = token[1..].chars().take_while(|c| c.is_ascii_digit()).count();
        let (head, tail) = token.split_at(1 + digits);
        if !tail.is_empty() {
            let mut out = vec![head.to_string()];
            out.extend(split_glued(tail.to_string()));
            return out;
        }
    }
    vec![token]
}

fn parse_token(token: &str, consts: &mut Vec<f64>) -> Result<Node, GenomeError> {
    if let Some(op) = OpCode::from_symbol(token) {
        return Ok(Node::Func(op));
    }
    if let Some(rest) = token.strip_prefix(['X', 'x']) {
        if rest.is_empty() {
            return Ok(Node::Input(0));
        }
        return rest
            .parse::<u16>()
            .map(Node::Input)
            .map_err(|_| GenomeError::Token(token.to_string()));
    }
    let literal = token
        .strip_prefix(['C', 'c'])
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(token);
    let value: f64 = literal
        .parse()
        .map_err(|_| GenomeError::Token(token.to_string()))?;
    consts.push(value);
    Ok(Node::Const((consts.len() - 1) as u16))
}

/// Tree initialisation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    Full,
    Grow,
}

/// Generates a random tree of depth at most `depth_limit`.
///
/// `Full` places every leaf at exactly `depth_limit`. Trees larger than
/// [`MAX_TREE_SIZE`] are regenerated; if that keeps failing, the depth is
/// lowered to the deepest level at which any tree fits the size limit.
pub fn generate_tree<R: Rng + ?Sized>(
    rng: &mut R,
    fset: &FunctionSet,
    method: InitMethod,
    depth_limit: usize,
) -> TreeGenome {
    assert!(
        (1..=MAX_TREE_DEPTH).contains(&depth_limit),
        "depth limit {depth_limit} outside 1..={MAX_TREE_DEPTH}"
    );
    for _ in 0..GENERATION_ATTEMPTS {
        if let Some(tree) = try_generate(rng, fset, method, depth_limit, MAX_TREE_SIZE) {
            return tree;
        }
    }
    let safe_depth = size_safe_depth(fset.max_arity(), MAX_TREE_SIZE).min(depth_limit);
    try_generate(rng, fset, method, safe_depth, usize::MAX)
        .expect("a tree within the size-safe depth always fits")
}

/// Deepest depth at which every tree over arities ≤ `max_arity` has at most
/// `max_size` nodes.
fn size_safe_depth(max_arity: usize, max_size: usize) -> usize {
    let mut depth = 1;
    loop {
        let next = depth + 1;
        let nodes: usize = (0..next as u32).map(|l| max_arity.saturating_pow(l)).sum();
        if nodes > max_size {
            return depth;
        }
        depth = next;
    }
}

fn try_generate<R: Rng + ?Sized>(
    rng: &mut R,
    fset: &FunctionSet,
    method: InitMethod,
    depth_limit: usize,
    max_size: usize,
) -> Option<TreeGenome> {
    let mut code = Vec::new();
    let mut consts = Vec::new();
    if !grow_into(rng, fset, method, depth_limit, max_size, &mut code, &mut consts) {
        return None;
    }
    Some(TreeGenome::new(code, consts).expect("generated code is well formed"))
}

fn grow_into<R: Rng + ?Sized>(
    rng: &mut R,
    fset: &FunctionSet,
    method: InitMethod,
    depth_remaining: usize,
    max_size: usize,
    code: &mut Vec<Node>,
    consts: &mut Vec<f64>,
) -> bool {
    if code.len() >= max_size {
        return false;
    }
    let choose_function = depth_remaining > 1
        && match method {
            InitMethod::Full => true,
            InitMethod::Grow => {
                let nf = fset.ops.len();
                rng.random_range(0..nf + fset.terminal_count()) < nf
            }
        };
    if choose_function {
        let op = fset.ops[rng.random_range(0..fset.ops.len())];
        for _ in 0..op.arity() {
            if !grow_into(rng, fset, method, depth_remaining - 1, max_size, code, consts) {
                return false;
            }
        }
        code.push(Node::Func(op));
    } else {
        code.push(random_terminal(rng, fset, consts));
    }
    code.len() <= max_size
}

/// Draws a terminal; an ERC is one terminal choice among the inputs.
pub fn random_terminal<R: Rng + ?Sized>(
    rng: &mut R,
    fset: &FunctionSet,
    consts: &mut Vec<f64>,
) -> Node {
    let pick = rng.random_range(0..fset.terminal_count());
    if pick < fset.num_inputs {
        Node::Input(pick as u16)
    } else {
        let (lo, hi) = fset.const_range.expect("ERC slot implies a constant range");
        consts.push(rng.random_range(lo..hi));
        Node::Const((consts.len() - 1) as u16)
    }
}

/// The sextic solution tree from the worked example, `(x·(x+x) − x)²`
/// exactly as printed in postfix form.
pub fn sextic_worked_example() -> TreeGenome {
    TreeGenome::parse_rpn("(((X,(X,X)+)*,X)-,((X,(X,X)+)*,X)-)*")
        .expect("worked example is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sextic_fset() -> FunctionSet {
        use OpCode::*;
        FunctionSet::new(vec![Mul, Div, Add, Sub, Sin, Cos, Log, Exp], 1, None).unwrap()
    }

    fn binary_fset() -> FunctionSet {
        FunctionSet::new(vec![OpCode::Add, OpCode::Mul], 2, Some((-1.0, 1.0))).unwrap()
    }

    /// Depth by recursive descent over the postfix code, independent of `scan`.
    fn recursive_depth(code: &[Node], end: usize) -> (usize, usize) {
        let node = code[end];
        let mut cursor = end;
        let mut deepest = 0;
        for _ in 0..node.arity() {
            let (d, start) = recursive_depth(code, cursor - 1);
            deepest = deepest.max(d);
            cursor = start;
        }
        (deepest + 1, cursor)
    }

    #[test]
    fn worked_example_metrics() {
        let g = sextic_worked_example();
        assert_eq!(g.to_string(), "X0 X0 X0 + * X0 - X0 X0 X0 + * X0 - *");
        assert_eq!(g.size(), 15);
        assert_eq!(g.function_count(), 7);
        assert_eq!(g.rpn_max_stack_depth(), 4);
        assert_eq!(g.rpn_stack_fetch_count(), 14);
        let (oracle_depth, start) = recursive_depth(g.code(), g.size() - 1);
        assert_eq!(start, 0);
        assert_eq!(oracle_depth, 5);
        assert_eq!(g.depth(), 5);
    }

    #[test]
    fn lone_terminal() {
        let g = TreeGenome::parse_rpn("X3").unwrap();
        assert_eq!((g.size(), g.depth(), g.rpn_max_stack_depth()), (1, 1, 1));
    }

    #[test]
    fn full_binary_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for depth in 1..=6 {
            let g = generate_tree(&mut rng, &binary_fset(), InitMethod::Full, depth);
            assert_eq!(g.size(), (1 << depth) - 1);
            assert_eq!(g.depth(), depth);
        }
    }

    #[test]
    fn depth_one_is_a_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for method in [InitMethod::Full, InitMethod::Grow] {
            let g = generate_tree(&mut rng, &sextic_fset(), method, 1);
            assert_eq!(g.size(), 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_tree(&mut ChaCha8Rng::seed_from_u64(42), &sextic_fset(), InitMethod::Grow, 6);
        let b = generate_tree(&mut ChaCha8Rng::seed_from_u64(42), &sextic_fset(), InitMethod::Grow, 6);
        assert_eq!(a, b);
    }

    #[test]
    fn deep_full_trees_respect_size_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = generate_tree(&mut rng, &binary_fset(), InitMethod::Full, 30);
        assert!(g.size() <= MAX_TREE_SIZE);
        assert!(g.depth() <= 30);
    }

    #[test]
    fn left_comb_needs_two_slots() {
        // Brute force over comb lengths: X X + X + X + ...
        for n in 1..60 {
            let mut text = String::from("X");
            for _ in 0..n {
                text.push_str(" X +");
            }
            let g = TreeGenome::parse_rpn(&text).unwrap();
            let mut height: usize = 0;
            let mut peak = 0;
            for node in g.code() {
                height = height + 1 - node.arity();
                peak = peak.max(height);
            }
            assert_eq!(peak, 2);
            assert_eq!(g.rpn_max_stack_depth(), 2);
        }
    }

    #[test]
    fn validate_reports_violations() {
        let g = sextic_worked_example();
        assert_eq!(validate(&g, &Limits::default()), Ok(()));

        let mut text = String::from("X");
        for _ in 0..500 {
            text.push_str(" X +");
        }
        let big = TreeGenome::parse_rpn(&text).unwrap();
        assert_eq!(big.size(), 1001);
        let errs = validate(&big, &Limits::default()).unwrap_err();
        assert!(errs.contains(&Violation::Size { size: 1001, max: 1000 }));

        let underflow = [Node::Input(0), Node::Func(OpCode::Add)];
        let errs = validate_code(&underflow, 0, &Limits::default()).unwrap_err();
        assert_eq!(errs, vec![Violation::Malformed { position: 1 }]);
        assert!(TreeGenome::new(underflow.to_vec(), vec![]).is_err());

        let tight = Limits { stack_capacity: 3, ..Limits::default() };
        assert_eq!(
            validate(&g, &tight),
            Err(vec![Violation::Stack { depth: 4, capacity: 3 }])
        );
    }

    #[test]
    fn dangling_values_are_malformed() {
        assert!(matches!(
            TreeGenome::parse_rpn("X X"),
            Err(GenomeError::Malformed { .. })
        ));
        assert!(matches!(
            TreeGenome::new(vec![Node::Const(0)], vec![]),
            Err(GenomeError::ConstIndex { .. })
        ));
    }

    #[test]
    fn parse_and_display() {
        let g = TreeGenome::parse_rpn("C(2.0) C(3.0) +").unwrap();
        assert_eq!(g.consts(), &[2.0, 3.0]);
        assert_eq!(g.to_string(), "C(2.0) C(3.0) +");
        let h = TreeGenome::parse_rpn(&g.to_string()).unwrap();
        assert_eq!(g, h);
        let b = TreeGenome::parse_rpn("X0 X1 AND X2 NOR").unwrap();
        assert_eq!(b.code()[2], Node::Func(OpCode::BoolAnd));
        let l = TreeGenome::parse_rpn("X0 X1 && X2 X3 if").unwrap();
        assert_eq!(l.code()[2], Node::Func(OpCode::And));
        assert_eq!(l.depth(), 3);
    }

    #[test]
    fn subtree_ranges_and_splicing() {
        let g = sextic_worked_example();
        assert_eq!(g.subtree_range(14), 0..15);
        assert_eq!(g.subtree_range(6), 0..7);
        assert_eq!(g.subtree_range(3), 1..4);
        assert_eq!(g.subtree_range(5), 5..6);
        let donor = TreeGenome::parse_rpn("C(0.5) X0 /").unwrap();
        let spliced = g.replace_subtree(g.subtree_range(6), &donor, 0..3);
        assert_eq!(spliced.to_string(), "C(0.5) X0 / X0 X0 X0 + * X0 - *");
        assert_eq!(spliced.consts(), &[0.5]);
        assert_eq!(g.subtree(3).to_string(), "X0 X0 +");
    }

    #[test]
    fn opcode_table() {
        for op in OpCode::ALL {
            assert_eq!(OpCode::from_symbol(op.symbol()), Some(op));
            let expected = match op.class() {
                OpClass::Transcendental => 1,
                OpClass::Conditional => 3,
                _ => 2,
            };
            assert_eq!(op.arity(), expected);
        }
    }

    #[test]
    fn function_set_rejects_bad_ranges() {
        assert!(FunctionSet::new(vec![OpCode::Add], 0, None).is_err());
        assert!(FunctionSet::new(vec![OpCode::Add], 1, Some((1.0, 1.0))).is_err());
        assert!(FunctionSet::new(vec![], 1, None).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mixed_fset() -> FunctionSet {
            use OpCode::*;
            FunctionSet::new(vec![Add, Sub, Mul, Div, Sin, Log, Gt], 3, Some((-5.0, 5.0))).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(400))]

            #[test]
            fn generated_trees_are_well_formed(seed in any::<u64>(), depth in 1usize..=10, full in any::<bool>()) {
                let method = if full { InitMethod::Full } else { InitMethod::Grow };
                let g = generate_tree(&mut ChaCha8Rng::seed_from_u64(seed), &mixed_fset(), method, depth);
                prop_assert!(validate(&g, &Limits::default()).is_ok());
                prop_assert!(g.depth() <= depth);
                prop_assert_eq!(recursive_depth(g.code(), g.size() - 1), (g.depth(), 0));
                prop_assert!(g.rpn_max_stack_depth() <= g.depth());
                if full {
                    prop_assert_eq!(g.depth(), depth);
                }
            }
        }
    }
}
