//! Arc-hybrid transition system with an online SWAP transition.
//!
//! Words are numbered `1..=n`; the artificial root is node `n + 1` and sits
//! at the end of the buffer, so root attachments are made by LEFT_ARC.
//! SWAP moves the stack top back into the buffer behind the front word and
//! is only legal when the stack top precedes the buffer front in the
//! original sentence, which bounds the number of swaps by `n(n-1)/2`.
//!
//! Supervision is static for SWAP (forced whenever the projective order
//! demands it) and dynamic for the other transitions, using the arc-hybrid
//! arc-reachability costs.

use std::fmt;

use crate::conllu::{Sentence, Token};
use crate::error::{Error, Result};

/// Transition kinds, without labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    Shift,
    Swap,
    LeftArc,
    RightArc,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 4] = [
        TransitionKind::Shift,
        TransitionKind::Swap,
        TransitionKind::LeftArc,
        TransitionKind::RightArc,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    Shift,
    Swap,
    LeftArc(usize),
    RightArc(usize),
}

impl Transition {
    pub fn kind(self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::Swap => TransitionKind::Swap,
            Transition::LeftArc(_) => TransitionKind::LeftArc,
            Transition::RightArc(_) => TransitionKind::RightArc,
        }
    }

    pub fn label(self) -> Option<usize> {
        match self {
            Transition::LeftArc(l) | Transition::RightArc(l) => Some(l),
            _ => None,
        }
    }

    /// Position in the scorer output: SHIFT, SWAP, LEFT_ARC per label, then
    /// RIGHT_ARC per label.
    pub fn output_index(self, num_labels: usize) -> usize {
        match self {
            Transition::Shift => 0,
            Transition::Swap => 1,
            Transition::LeftArc(l) => 2 + l,
            Transition::RightArc(l) => 2 + num_labels + l,
        }
    }

    pub fn from_output_index(index: usize, num_labels: usize) -> Option<Self> {
        match index {
            0 => Some(Transition::Shift),
            1 => Some(Transition::Swap),
            i if i < 2 + num_labels => Some(Transition::LeftArc(i - 2)),
            i if i < 2 + 2 * num_labels => Some(Transition::RightArc(i - 2 - num_labels)),
            _ => None,
        }
    }

    /// Number of scorer outputs for a label vocabulary of this size.
    pub fn output_size(num_labels: usize) -> usize {
        2 + 2 * num_labels
    }

    /// All transitions of a kind, expanded over labels.
    pub fn expand(kind: TransitionKind, num_labels: usize) -> Vec<Transition> {
        match kind {
            TransitionKind::Shift => vec![Transition::Shift],
            TransitionKind::Swap => vec![Transition::Swap],
            TransitionKind::LeftArc => (0..num_labels).map(Transition::LeftArc).collect(),
            TransitionKind::RightArc => (0..num_labels).map(Transition::RightArc).collect(),
        }
    }

    pub fn display_with<'a>(self, labels: &'a [String]) -> impl fmt::Display + 'a {
        struct D<'a>(Transition, &'a [String]);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = |l: usize| self.1.get(l).map(String::as_str).unwrap_or("?");
                match self.0 {
                    Transition::Shift => write!(f, "SHIFT"),
                    Transition::Swap => write!(f, "SWAP"),
                    Transition::LeftArc(l) => write!(f, "LEFT_ARC({})", name(l)),
                    Transition::RightArc(l) => write!(f, "RIGHT_ARC({})", name(l)),
                }
            }
        }
        D(self, labels)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Shift => write!(f, "SHIFT"),
            Transition::Swap => write!(f, "SWAP"),
            Transition::LeftArc(l) => write!(f, "LEFT_ARC({l})"),
            Transition::RightArc(l) => write!(f, "RIGHT_ARC({l})"),
        }
    }
}

/// Set of legal transition kinds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Legal {
    pub shift: bool,
    pub swap: bool,
    pub left_arc: bool,
    pub right_arc: bool,
}

impl Legal {
    pub fn contains(&self, kind: TransitionKind) -> bool {
        match kind {
            TransitionKind::Shift => self.shift,
            TransitionKind::Swap => self.swap,
            TransitionKind::LeftArc => self.left_arc,
            TransitionKind::RightArc => self.right_arc,
        }
    }

    pub fn kinds(&self) -> Vec<TransitionKind> {
        TransitionKind::ALL
            .into_iter()
            .filter(|&k| self.contains(k))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.shift || self.swap || self.left_arc || self.right_arc)
    }
}

/// Parser state over one sentence of `n` words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    n: usize,
    /// Top is the last element.
    pub stack: Vec<usize>,
    /// Front is the first element.
    pub buffer: Vec<usize>,
    /// `heads[d]` holds `(head, label)` once `d` is attached; index 0 unused.
    heads: Vec<Option<(usize, usize)>>,
    attached: usize,
}

impl Configuration {
    /// Stack empty, buffer `[1, ..., n, ROOT]`.
    pub fn initial(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySentence);
        }
        Ok(Configuration {
            n,
            stack: Vec::new(),
            buffer: (1..=n + 1).collect(),
            heads: vec![None; n + 1],
            attached: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn root(&self) -> usize {
        self.n + 1
    }

    pub fn is_root(&self, node: usize) -> bool {
        node == self.n + 1
    }

    pub fn s0(&self) -> Option<usize> {
        self.stack.last().copied()
    }

    pub fn s1(&self) -> Option<usize> {
        self.stack.len().checked_sub(2).map(|i| self.stack[i])
    }

    pub fn b0(&self) -> Option<usize> {
        self.buffer.first().copied()
    }

    /// Head and label of word `d`, if attached. The head is a node index,
    /// so an attachment to the root reports `n + 1`.
    pub fn head_of(&self, d: usize) -> Option<(usize, usize)> {
        self.heads.get(d).copied().flatten()
    }

    /// Arcs as `(head, dependent, label)` triples, ordered by dependent.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.heads
            .iter()
            .enumerate()
            .filter_map(|(d, a)| a.map(|(h, l)| (h, d, l)))
    }

    pub fn num_arcs(&self) -> usize {
        self.attached
    }

    pub fn legal(&self) -> Legal {
        let front_is_word = matches!(self.b0(), Some(b) if !self.is_root(b));
        let swap = match (self.s0(), self.b0()) {
            (Some(s), Some(b)) => front_is_word && s < b,
            _ => false,
        };
        Legal {
            shift: front_is_word,
            swap,
            left_arc: !self.stack.is_empty() && !self.buffer.is_empty(),
            right_arc: self.stack.len() >= 2,
        }
    }

    pub fn is_legal(&self, t: Transition) -> bool {
        self.legal().contains(t.kind())
    }

    pub fn apply(&mut self, t: Transition) -> Result<()> {
        if !self.is_legal(t) {
            return Err(Error::IllegalTransition(format!(
                "{t} with stack {:?} buffer {:?}",
                self.stack, self.buffer
            )));
        }
        match t {
            Transition::Shift => {
                let b = self.buffer.remove(0);
                self.stack.push(b);
            }
            Transition::Swap => {
                let s = self.stack.pop().unwrap();
                self.buffer.insert(1, s);
            }
            Transition::LeftArc(l) => {
                let s = self.stack.pop().unwrap();
                self.attach(self.buffer[0], s, l);
            }
            Transition::RightArc(l) => {
                let s = self.stack.pop().unwrap();
                let h = *self.stack.last().unwrap();
                self.attach(h, s, l);
            }
        }
        Ok(())
    }

    /// Non-mutating variant of [`Configuration::apply`].
    pub fn applied(&self, t: Transition) -> Result<Self> {
        let mut next = self.clone();
        next.apply(t)?;
        Ok(next)
    }

    fn attach(&mut self, head: usize, dependent: usize, label: usize) {
        debug_assert!(self.heads[dependent].is_none());
        self.heads[dependent] = Some((head, label));
        self.attached += 1;
    }

    /// True once every word has a head.
    pub fn is_terminal(&self) -> bool {
        self.attached == self.n
    }

    /// Hard cap on derivation length: `n` shifts and `n` arcs, plus one
    /// SWAP and one extra SHIFT for each of at most `n(n-1)/2` inverted pairs.
    pub fn max_steps(n: usize) -> usize {
        2 * n + n * n.saturating_sub(1)
    }

    /// One line of the debug trace: step, transition, stack, buffer.
    pub fn trace_line(&self, step: usize, t: Transition, labels: &[String]) -> String {
        let node = |x: &usize| {
            if self.is_root(*x) {
                "ROOT".to_owned()
            } else {
                x.to_string()
            }
        };
        let stack: Vec<String> = self.stack.iter().map(node).collect();
        let buffer: Vec<String> = self.buffer.iter().map(node).collect();
        format!(
            "{step}\t{}\t[{}]\t[{}]",
            t.display_with(labels),
            stack.join(","),
            buffer.join(",")
        )
    }
}

/// Gold tree over words `1..=n`. Heads use 0 for the artificial root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldTree {
    /// `head[i]` is the head of word `i + 1`.
    pub head: Vec<usize>,
    pub label: Vec<usize>,
    /// `proj_order[i]` is the position of word `i + 1` in the projective order.
    pub proj_order: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl GoldTree {
    pub fn new(head: Vec<usize>, label: Vec<usize>) -> Result<Self> {
        let n = head.len();
        if n == 0 {
            return Err(Error::EmptySentence);
        }
        if label.len() != n {
            return Err(Error::InvalidTree("label count differs from head count".into()));
        }
        check_tree(&head)?;
        let mut children = vec![Vec::new(); n + 2];
        for (i, &h) in head.iter().enumerate() {
            let node = if h == 0 { n + 1 } else { h };
            children[node].push(i + 1);
        }
        let proj_order = projective_order(&head)?;
        Ok(GoldTree {
            head,
            label,
            proj_order,
            children,
        })
    }

    /// Builds a gold tree from a sentence, mapping deprels through `label_id`.
    pub fn from_sentence(
        sentence: &Sentence,
        mut label_id: impl FnMut(&str) -> Option<usize>,
    ) -> Result<Self> {
        let mut head = Vec::with_capacity(sentence.len());
        let mut label = Vec::with_capacity(sentence.len());
        for t in &sentence.tokens {
            let h = t
                .head
                .ok_or_else(|| Error::InvalidTree(format!("token {} has no head", t.id)))?;
            let rel = t
                .deprel
                .as_deref()
                .ok_or_else(|| Error::InvalidTree(format!("token {} has no deprel", t.id)))?;
            let l = label_id(rel)
                .ok_or_else(|| Error::InvalidTree(format!("unknown label {rel:?}")))?;
            head.push(h);
            label.push(l);
        }
        GoldTree::new(head, label)
    }

    pub fn len(&self) -> usize {
        self.head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_empty()
    }

    /// Gold head of word `d` as a node index (root is `n + 1`).
    pub fn head_node(&self, d: usize) -> usize {
        match self.head[d - 1] {
            0 => self.len() + 1,
            h => h,
        }
    }

    pub fn label_of(&self, d: usize) -> usize {
        self.label[d - 1]
    }

    /// Gold dependents of a node (including the root node `n + 1`).
    pub fn dependents(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    fn proj(&self, node: usize) -> usize {
        self.proj_order[node - 1]
    }

    /// True when the stack top must be swapped behind the buffer front.
    pub fn swap_mandated(&self, c: &Configuration) -> bool {
        match (c.s0(), c.b0()) {
            (Some(s), Some(b)) if c.legal().swap => self.proj(s) > self.proj(b),
            _ => false,
        }
    }

    fn complete(&self, c: &Configuration, node: usize) -> bool {
        self.children[node].iter().all(|&d| c.head_of(d).is_some())
    }

    pub fn is_projective(&self) -> bool {
        is_projective(&self.head)
    }
}

fn check_tree(head: &[usize]) -> Result<()> {
    let n = head.len();
    let roots = head.iter().filter(|&&h| h == 0).count();
    if roots != 1 {
        return Err(Error::InvalidTree(format!("{roots} roots")));
    }
    for (i, &h) in head.iter().enumerate() {
        if h > n || h == i + 1 {
            return Err(Error::InvalidTree(format!("bad head {h} for word {}", i + 1)));
        }
    }
    for start in 1..=n {
        let mut node = start;
        for _ in 0..=n {
            if node == 0 {
                break;
            }
            node = head[node - 1];
        }
        if node != 0 {
            return Err(Error::InvalidTree(format!("cycle through word {start}")));
        }
    }
    Ok(())
}

/// Positions of words in the in-order traversal of the tree: at each node,
/// left dependents (ascending), the node, then right dependents (ascending).
pub fn projective_order(head: &[usize]) -> Result<Vec<usize>> {
    check_tree(head)?;
    let n = head.len();
    let mut children = vec![Vec::new(); n + 1];
    for (i, &h) in head.iter().enumerate() {
        children[h].push(i + 1);
    }
    let mut order = vec![0; n];
    let mut next = 1;
    // Explicit stack of (node, expanded) to avoid deep recursion.
    let mut work: Vec<(usize, bool)> = children[0].iter().rev().map(|&c| (c, false)).collect();
    while let Some((node, expanded)) = work.pop() {
        if expanded {
            order[node - 1] = next;
            next += 1;
            continue;
        }
        for &c in children[node].iter().rev().filter(|&&c| c > node) {
            work.push((c, false));
        }
        work.push((node, true));
        for &c in children[node].iter().rev().filter(|&&c| c < node) {
            work.push((c, false));
        }
    }
    Ok(order)
}

/// Crossing-arcs projectivity test; the artificial root sits at position 0.
pub fn is_projective(head: &[usize]) -> bool {
    let arcs: Vec<(usize, usize)> = head
        .iter()
        .enumerate()
        .map(|(i, &h)| (h.min(i + 1), h.max(i + 1)))
        .collect();
    for (i, &(a, b)) in arcs.iter().enumerate() {
        for &(c, d) in &arcs[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                return false;
            }
        }
    }
    true
}

/// The canonical derivation of `g`: SWAP whenever the projective order
/// requires it, otherwise an arc whose dependent is complete, otherwise SHIFT.
pub fn static_oracle(g: &GoldTree) -> Result<Vec<Transition>> {
    let n = g.len();
    let mut c = Configuration::initial(n)?;
    let mut out = Vec::new();
    while !c.is_terminal() {
        if out.len() > Configuration::max_steps(n) {
            return Err(Error::OracleStuck(format!("exceeded step cap on {:?}", g.head)));
        }
        let t = static_choice(&c, g)
            .ok_or_else(|| Error::OracleStuck(format!("no move at {:?} / {:?}", c.stack, c.buffer)))?;
        c.apply(t)?;
        out.push(t);
    }
    Ok(out)
}

fn static_choice(c: &Configuration, g: &GoldTree) -> Option<Transition> {
    if g.swap_mandated(c) {
        return Some(Transition::Swap);
    }
    let legal = c.legal();
    if let Some(s0) = c.s0() {
        if g.complete(c, s0) {
            let head = g.head_node(s0);
            if legal.left_arc && c.b0() == Some(head) {
                return Some(Transition::LeftArc(g.label_of(s0)));
            }
            if legal.right_arc && c.s1() == Some(head) {
                return Some(Transition::RightArc(g.label_of(s0)));
            }
        }
    }
    legal.shift.then_some(Transition::Shift)
}

/// Per-kind costs at one configuration, plus the label of the gold arc an
/// arc transition would create, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Costs {
    pub shift: usize,
    pub swap: usize,
    pub left_arc: usize,
    pub right_arc: usize,
    /// Gold label when LEFT_ARC would build a gold arc.
    pub left_label: Option<usize>,
    /// Gold label when RIGHT_ARC would build a gold arc.
    pub right_label: Option<usize>,
    pub swap_mandated: bool,
    pub legal: Legal,
}

impl Costs {
    pub fn kind_cost(&self, kind: TransitionKind) -> usize {
        match kind {
            TransitionKind::Shift => self.shift,
            TransitionKind::Swap => self.swap,
            TransitionKind::LeftArc => self.left_arc,
            TransitionKind::RightArc => self.right_arc,
        }
    }

    /// Labeled cost: an arc transition that builds a gold arc with the wrong
    /// label loses that arc too.
    pub fn cost(&self, t: Transition) -> usize {
        let base = self.kind_cost(t.kind());
        let wrong_label = match t {
            Transition::LeftArc(l) => self.left_label.is_some_and(|g| g != l),
            Transition::RightArc(l) => self.right_label.is_some_and(|g| g != l),
            _ => false,
        };
        base + usize::from(wrong_label && !self.swap_mandated)
    }

    /// Legal transitions of minimal cost (the zero-cost set whenever the
    /// configuration can still reach every remaining gold arc).
    pub fn best_set(&self, num_labels: usize) -> Vec<Transition> {
        let all = self.legal_transitions(num_labels);
        let min = all.iter().map(|&t| self.cost(t)).min();
        match min {
            Some(m) => all.into_iter().filter(|&t| self.cost(t) == m).collect(),
            None => Vec::new(),
        }
    }

    pub fn legal_transitions(&self, num_labels: usize) -> Vec<Transition> {
        self.legal
            .kinds()
            .into_iter()
            .flat_map(|k| Transition::expand(k, num_labels))
            .collect()
    }
}

/// Number of gold arcs lost by each transition.
///
/// * LEFT_ARC(s0): open gold dependents of s0, plus one if the gold head of
///   s0 is still on the stack or in the buffer but is not the buffer front.
/// * RIGHT_ARC(s0): open gold dependents of s0, plus one if the gold head of
///   s0 is still on the stack or in the buffer but is not s1.
/// * SHIFT(b0): zero when a later buffer word precedes b0 in the projective
///   order (b0 will be swapped back). Otherwise gold dependents of b0 on the
///   stack, plus one if the gold head of b0 is on the stack below the top.
///
/// When SWAP is mandated by the projective order it is the only zero-cost
/// transition and every other legal transition costs at least one.
/// Unmandated SWAP costs one. Illegal transitions report `usize::MAX`.
/// The counts are exact for configurations reached by zero-cost moves.
pub fn dynamic_costs(c: &Configuration, g: &GoldTree) -> Costs {
    let legal = c.legal();
    let pending = |x: usize| c.stack.contains(&x) || c.buffer.contains(&x);
    let open_deps = |x: usize| g.dependents(x).iter().filter(|&&d| pending(d)).count();

    let mut costs = Costs {
        shift: usize::MAX,
        swap: usize::MAX,
        left_arc: usize::MAX,
        right_arc: usize::MAX,
        left_label: None,
        right_label: None,
        swap_mandated: false,
        legal,
    };

    if let Some(s0) = c.s0() {
        let head = g.head_node(s0);
        if legal.left_arc {
            costs.left_arc = open_deps(s0) + usize::from(pending(head) && c.b0() != Some(head));
            if c.b0() == Some(head) {
                costs.left_label = Some(g.label_of(s0));
            }
        }
        if legal.right_arc {
            costs.right_arc = open_deps(s0) + usize::from(pending(head) && c.s1() != Some(head));
            if c.s1() == Some(head) {
                costs.right_label = Some(g.label_of(s0));
            }
        }
    }

    if legal.shift {
        let b0 = c.b0().unwrap();
        let returns = c
            .buffer
            .iter()
            .any(|&x| !c.is_root(x) && x > b0 && g.proj(x) < g.proj(b0));
        costs.shift = if returns {
            0
        } else {
            let head = g.head_node(b0);
            let below_top = &c.stack[..c.stack.len().saturating_sub(1)];
            let stack_deps = g
                .dependents(b0)
                .iter()
                .filter(|d| c.stack.contains(d))
                .count();
            stack_deps + usize::from(below_top.contains(&head))
        };
    }

    if legal.swap {
        costs.swap = 1;
    }

    if g.swap_mandated(c) {
        costs.swap_mandated = true;
        costs.swap = 0;
        for cost in [&mut costs.shift, &mut costs.left_arc, &mut costs.right_arc] {
            if *cost == 0 {
                *cost = 1;
            }
        }
    }

    costs
}

/// Copies the arcs of `c` into a copy of `sentence`. Words without a head
/// are attached to the root with `fallback_label`.
pub fn arcs_to_sentence(
    c: &Configuration,
    sentence: &Sentence,
    labels: &[String],
    fallback_label: &str,
) -> Sentence {
    let n = sentence.len();
    let mut out = sentence.clone();
    for (i, token) in out.tokens.iter_mut().enumerate() {
        let (head, rel) = match c.head_of(i + 1) {
            Some((h, l)) => {
                let h = if h == n + 1 { 0 } else { h };
                let rel = labels
                    .get(l)
                    .cloned()
                    .unwrap_or_else(|| fallback_label.to_owned());
                (h, rel)
            }
            None => (0, fallback_label.to_owned()),
        };
        *token = Token {
            head: Some(head),
            deprel: Some(rel),
            ..token.clone()
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(head: &[usize]) -> GoldTree {
        let labels = (0..head.len()).map(|i| i % 2).collect();
        GoldTree::new(head.to_vec(), labels).unwrap()
    }

    fn config(n: usize, stack: &[usize], buffer: &[usize]) -> Configuration {
        let mut c = Configuration::initial(n).unwrap();
        c.stack = stack.to_vec();
        c.buffer = buffer.to_vec();
        c
    }

    #[test]
    fn initial_configuration() {
        let c = Configuration::initial(2).unwrap();
        assert!(c.stack.is_empty());
        assert_eq!(c.buffer, vec![1, 2, 3]);
        assert_eq!(c.num_arcs(), 0);
        assert_eq!(Configuration::initial(1).unwrap().buffer, vec![1, 2]);
        assert!(Configuration::initial(0).is_err());
        assert!(!Configuration::initial(1).unwrap().is_terminal());
    }

    #[test]
    fn legality() {
        let c = Configuration::initial(2).unwrap();
        assert_eq!(c.legal().kinds(), vec![TransitionKind::Shift]);

        let c = config(2, &[1], &[2, 3]);
        assert_eq!(
            c.legal().kinds(),
            vec![TransitionKind::Shift, TransitionKind::Swap, TransitionKind::LeftArc]
        );

        let c = config(2, &[1, 2], &[3]);
        assert_eq!(
            c.legal().kinds(),
            vec![TransitionKind::LeftArc, TransitionKind::RightArc]
        );

        // swap needs the stack top to precede the buffer front
        let c = config(3, &[2], &[1, 4]);
        assert!(!c.legal().swap);
    }

    #[test]
    fn apply_examples() {
        let mut c = config(2, &[1], &[2, 3]);
        c.apply(Transition::LeftArc(5)).unwrap();
        assert!(c.stack.is_empty());
        assert_eq!(c.buffer, vec![2, 3]);
        assert_eq!(c.arcs().collect::<Vec<_>>(), vec![(2, 1, 5)]);

        let mut c = config(3, &[1], &[2, 3, 4]);
        c.apply(Transition::Swap).unwrap();
        assert!(c.stack.is_empty());
        assert_eq!(c.buffer, vec![2, 1, 3, 4]);

        let mut c = config(2, &[1, 2], &[3]);
        c.apply(Transition::RightArc(7)).unwrap();
        assert_eq!(c.stack, vec![1]);
        assert_eq!(c.arcs().collect::<Vec<_>>(), vec![(1, 2, 7)]);

        let mut c = Configuration::initial(2).unwrap();
        assert!(matches!(
            c.apply(Transition::RightArc(0)),
            Err(Error::IllegalTransition(_))
        ));
    }

    #[test]
    fn projective_order_examples() {
        assert_eq!(projective_order(&[2, 0, 2]).unwrap(), vec![1, 2, 3]);
        // 2 -> 4 -> 3 nests inside the span of 2 -> 4: projective.
        assert_eq!(projective_order(&[2, 0, 4, 2]).unwrap(), vec![1, 2, 3, 4]);
        // 3 -> 1 crosses 4 -> 2; traversal visits 1, 3, 2, 4.
        assert_eq!(projective_order(&[3, 4, 0, 3]).unwrap(), vec![1, 3, 2, 4]);
        assert!(projective_order(&[2, 1]).is_err());
    }

    #[test]
    fn oracle_two_words() {
        let g = GoldTree::new(vec![2, 0], vec![0, 1]).unwrap();
        let seq = static_oracle(&g).unwrap();
        assert_eq!(
            seq,
            vec![
                Transition::Shift,
                Transition::LeftArc(0),
                Transition::Shift,
                Transition::LeftArc(1)
            ]
        );
    }

    #[test]
    fn oracle_non_projective() {
        let g = tree(&[3, 4, 0, 3]);
        assert!(!g.is_projective());
        let seq = static_oracle(&g).unwrap();
        assert!(seq.contains(&Transition::Swap));
        let mut c = Configuration::initial(4).unwrap();
        for t in seq {
            c.apply(t).unwrap();
        }
        assert!(c.is_terminal());
        for d in 1..=4 {
            assert_eq!(c.head_of(d), Some((g.head_node(d), g.label_of(d))));
        }
    }

    #[test]
    fn shift_cost_two_words() {
        let g = tree(&[2, 0]);
        let c = config(2, &[1], &[2, 3]);
        let costs = dynamic_costs(&c, &g);
        assert_eq!(costs.shift, 1);
        assert_eq!(costs.left_arc, 0);
        assert_eq!(costs.cost(Transition::LeftArc(1)), 1);
    }

    #[test]
    fn mandated_swap_is_only_zero_cost() {
        let g = tree(&[3, 4, 0, 3]);
        let c = config(4, &[1, 2], &[3, 4, 5]);
        let costs = dynamic_costs(&c, &g);
        assert!(costs.swap_mandated);
        assert_eq!(costs.best_set(2), vec![Transition::Swap]);
        assert!(costs.shift >= 1 && costs.left_arc >= 1 && costs.right_arc >= 1);
    }

    #[test]
    fn arcs_to_sentence_fallback() {
        let s = Sentence::new(vec![Token::new(1, "a"), Token::new(2, "b")]);
        let labels = vec!["x".to_owned()];
        let c = Configuration::initial(2).unwrap();
        let out = arcs_to_sentence(&c, &s, &labels, "root");
        assert!(out.tokens.iter().all(|t| t.head == Some(0)));
        assert!(out.tokens.iter().all(|t| t.deprel.as_deref() == Some("root")));

        let mut c = config(2, &[1], &[2, 3]);
        c.apply(Transition::LeftArc(0)).unwrap();
        let out = arcs_to_sentence(&c, &s, &labels, "root");
        assert_eq!(out.tokens[0].head, Some(2));
        assert_eq!(out.tokens[0].deprel.as_deref(), Some("x"));
        assert_eq!(out.tokens[1].head, Some(0));
    }

    #[test]
    fn output_index_round_trip() {
        for i in 0..Transition::output_size(3) {
            let t = Transition::from_output_index(i, 3).unwrap();
            assert_eq!(t.output_index(3), i);
        }
        assert!(Transition::from_output_index(8, 3).is_none());
    }

    #[test]
    fn trace_format() {
        let c = Configuration::initial(2).unwrap();
        let line = c.trace_line(0, Transition::Shift, &[]);
        assert_eq!(line, "0\tSHIFT\t[]\t[1,2,ROOT]");
    }
}
