//! Propositional layer: proposition sets, labels, conjunctions and DNF formulas.
//!
//! # Representation
//!
//! A [`PropositionSet`] is a sorted list of at most 64 names. A [`Label`] is a
//! bitmask over that list, and a [`Conjunction`] is a pair of masks holding
//! its positive and negative literals. A [`Dnf`] is either the distinguished
//! constant `true` or a (possibly empty) disjunction of satisfiable
//! conjunctions. The empty disjunction is `false`.
//!
//! # Canonical form
//!
//! Every [`Dnf`] built through this module is canonical:
//!
//! - a disjunct with no literals collapses the formula to `true`,
//! - contradictory disjuncts are dropped,
//! - duplicates and disjuncts whose literals are a superset of another
//!   disjunct's literals are removed,
//! - disjuncts are sorted by their literal sequence, where literals are
//!   ordered by proposition index with the positive literal first.
//!
//! # Text format
//!
//! `a&!b | c`, with the constants `true` and `false`. The parser also accepts
//! `∧`, `∨`, `¬`, `⊤` and `⊥`.

mod tree;

pub use tree::FormulaTree;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of proposition names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PropositionSet {
    names: Vec<String>,
}

impl PropositionSet {
    /// Builds a set from arbitrary names; the result is sorted.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        for w in names.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateProposition(w[0].clone()));
            }
        }
        if names.len() > 64 {
            return Err(Error::TooManyPropositions(names.len()));
        }
        for n in &names {
            if n.is_empty() || !n.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::FormulaParse(format!("invalid proposition name '{n}'")));
            }
            if matches!(n.as_str(), "true" | "false") {
                return Err(Error::FormulaParse(format!("reserved proposition name '{n}'")));
            }
        }
        Ok(Self { names })
    }

    /// Number of propositions.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Names in sorted order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of a proposition.
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .map_err(|_| Error::UnknownProposition(name.to_string()))
    }

    /// Mask with one bit per proposition.
    pub fn full_mask(&self) -> u64 {
        if self.names.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.names.len()) - 1
        }
    }

    /// Builds a label from proposition names.
    pub fn label<I, S>(&self, names: I) -> Result<Label>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut bits = 0u64;
        for n in names {
            bits |= 1 << self.index_of(n.as_ref())?;
        }
        Ok(Label(bits))
    }

    /// Names of the propositions in a label.
    pub fn label_names(&self, label: Label) -> Vec<&str> {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| label.contains(*i))
            .map(|(_, n)| n.as_str())
            .collect()
    }

    /// Human-readable `{a, b}` rendering of a label.
    pub fn format_label(&self, label: Label) -> String {
        format!("{{{}}}", self.label_names(label).join(", "))
    }

    /// Parses a DNF formula over this set.
    pub fn parse(&self, text: &str) -> Result<Dnf> {
        Dnf::parse(text, self)
    }

    /// Parses a formula that must be a single conjunction.
    pub fn parse_conjunction(&self, text: &str) -> Result<Conjunction> {
        match self.parse(text)? {
            Dnf::True => Ok(Conjunction::TRUE),
            Dnf::Or(d) if d.len() == 1 => Ok(d[0]),
            _ => Err(Error::FormulaParse(format!("'{text}' is not a single conjunction"))),
        }
    }

    /// Renders a formula over this set.
    pub fn format(&self, formula: &Dnf) -> String {
        formula.display(self).to_string()
    }
}

impl TryFrom<Vec<String>> for PropositionSet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PropositionSet> for Vec<String> {
    fn from(p: PropositionSet) -> Self {
        p.names
    }
}

/// Set of propositions observed at one step, as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Label(pub u64);

impl Label {
    /// The empty label.
    pub const EMPTY: Label = Label(0);

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Label containing a single proposition.
    pub fn singleton(index: usize) -> Label {
        Label(1 << index)
    }
}

/// Conjunction of literals, stored as positive and negative masks.
///
/// The conjunction with no literals is `true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Conjunction {
    pub pos: u64,
    pub neg: u64,
}

impl Conjunction {
    /// The empty conjunction.
    pub const TRUE: Conjunction = Conjunction { pos: 0, neg: 0 };

    pub fn new(pos: u64, neg: u64) -> Self {
        Self { pos, neg }
    }

    /// Conjunction that is satisfied exactly by `label` over `full` propositions.
    pub fn exact(label: Label, full: u64) -> Self {
        Self { pos: label.0, neg: full & !label.0 }
    }

    pub fn is_true(&self) -> bool {
        self.pos == 0 && self.neg == 0
    }

    pub fn is_satisfiable(&self) -> bool {
        self.pos & self.neg == 0
    }

    pub fn satisfied_by(&self, label: Label) -> bool {
        label.0 & self.pos == self.pos && label.0 & self.neg == 0
    }

    /// Conjunction of both, or `None` when contradictory.
    pub fn and(&self, other: &Conjunction) -> Option<Conjunction> {
        let c = Conjunction { pos: self.pos | other.pos, neg: self.neg | other.neg };
        c.is_satisfiable().then_some(c)
    }

    /// Whether every literal of `self` occurs in `other`.
    pub fn literals_subset_of(&self, other: &Conjunction) -> bool {
        self.pos & !other.pos == 0 && self.neg & !other.neg == 0
    }

    pub fn literal_count(&self) -> u32 {
        self.pos.count_ones() + self.neg.count_ones()
    }

    /// Literal keys `2 * index + negated`, ascending.
    fn literal_keys(&self) -> impl Iterator<Item = u32> + '_ {
        let all = self.pos | self.neg;
        (0..64u32)
            .filter(move |i| all >> i & 1 == 1)
            .flat_map(move |i| {
                let p = (self.pos >> i & 1 == 1).then_some(2 * i);
                let n = (self.neg >> i & 1 == 1).then_some(2 * i + 1);
                p.into_iter().chain(n)
            })
    }

    /// Literals as `(index, positive)` pairs in canonical order.
    pub fn literals(&self) -> Vec<(usize, bool)> {
        self.literal_keys().map(|k| ((k / 2) as usize, k % 2 == 0)).collect()
    }

    /// Renders the conjunction over `props`.
    pub fn display<'a>(&'a self, props: &'a PropositionSet) -> impl fmt::Display + 'a {
        ConjDisplay { conj: self, props }
    }
}

impl Ord for Conjunction {
    fn cmp(&self, other: &Self) -> Ordering {
        self.literal_keys().cmp(other.literal_keys())
    }
}

impl PartialOrd for Conjunction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct ConjDisplay<'a> {
    conj: &'a Conjunction,
    props: &'a PropositionSet,
}

impl fmt::Display for ConjDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conj.is_true() {
            return f.write_str("true");
        }
        for (k, (i, positive)) in self.conj.literals().into_iter().enumerate() {
            if k > 0 {
                f.write_str("&")?;
            }
            if !positive {
                f.write_str("!")?;
            }
            f.write_str(&self.props.names()[i])?;
        }
        Ok(())
    }
}

/// Formula in disjunctive normal form, always kept canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Dnf {
    /// The constant `true`.
    True,
    /// A disjunction of satisfiable conjunctions; empty means `false`.
    Or(Vec<Conjunction>),
}

impl Dnf {
    pub fn tt() -> Dnf {
        Dnf::True
    }

    pub fn ff() -> Dnf {
        Dnf::Or(Vec::new())
    }

    pub fn conj(c: Conjunction) -> Dnf {
        Dnf::from_disjuncts([c])
    }

    /// Canonical formula from a list of disjuncts.
    pub fn from_disjuncts<I: IntoIterator<Item = Conjunction>>(disjuncts: I) -> Dnf {
        let mut v: Vec<Conjunction> = Vec::new();
        for c in disjuncts {
            if !c.is_satisfiable() {
                continue;
            }
            if c.is_true() {
                return Dnf::True;
            }
            v.push(c);
        }
        v.sort();
        v.dedup();
        let keep: Vec<Conjunction> = v
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                !v.iter()
                    .enumerate()
                    .any(|(j, d)| j != *i && d.literals_subset_of(c) && d != *c)
            })
            .map(|(_, c)| *c)
            .collect();
        Dnf::Or(keep)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Dnf::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Dnf::Or(v) if v.is_empty())
    }

    /// Disjuncts; `true` yields the single empty conjunction.
    pub fn disjuncts(&self) -> Vec<Conjunction> {
        match self {
            Dnf::True => vec![Conjunction::TRUE],
            Dnf::Or(v) => v.clone(),
        }
    }

    pub fn satisfied_by(&self, label: Label) -> bool {
        match self {
            Dnf::True => true,
            Dnf::Or(v) => v.iter().any(|c| c.satisfied_by(label)),
        }
    }

    /// Disjunction of the disjuncts satisfied by `label`.
    pub fn satisfied_disjuncts(&self, label: Label) -> Dnf {
        match self {
            Dnf::True => Dnf::True,
            Dnf::Or(v) => Dnf::Or(v.iter().copied().filter(|c| c.satisfied_by(label)).collect()),
        }
    }

    /// Conjunction of two formulas.
    pub fn and(&self, other: &Dnf) -> Dnf {
        match (self, other) {
            (Dnf::True, x) | (x, Dnf::True) => x.clone(),
            (Dnf::Or(a), Dnf::Or(b)) => {
                Dnf::from_disjuncts(a.iter().flat_map(|x| b.iter().filter_map(move |y| x.and(y))))
            }
        }
    }

    /// Conjunction with a single conjunction.
    pub fn and_conj(&self, c: &Conjunction) -> Dnf {
        self.and(&Dnf::conj(*c))
    }

    /// Disjunction of two formulas.
    pub fn or(&self, other: &Dnf) -> Dnf {
        match (self, other) {
            (Dnf::True, _) | (_, Dnf::True) => Dnf::True,
            (Dnf::Or(a), Dnf::Or(b)) => Dnf::from_disjuncts(a.iter().chain(b.iter()).copied()),
        }
    }

    /// Whether `c` is one of the disjuncts (with `true` seen as the empty one).
    pub fn has_disjunct(&self, c: &Conjunction) -> bool {
        match self {
            Dnf::True => c.is_true(),
            Dnf::Or(v) => v.contains(c),
        }
    }

    /// Union of the propositions mentioned.
    pub fn mentioned(&self) -> u64 {
        match self {
            Dnf::True => 0,
            Dnf::Or(v) => v.iter().fold(0, |m, c| m | c.pos | c.neg),
        }
    }

    /// Parses the text format over `props`.
    pub fn parse(text: &str, props: &PropositionSet) -> Result<Dnf> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::FormulaParse("empty formula".into()));
        }
        let mut disjuncts = Vec::new();
        for part in text.split(['|', '∨']) {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::FormulaParse(format!("empty disjunct in '{text}'")));
            }
            let mut c = Conjunction::TRUE;
            let mut contradictory = false;
            for lit in part.split(['&', '∧']) {
                let mut lit = lit.trim();
                let mut negated = false;
                while let Some(rest) = lit.strip_prefix('!').or_else(|| lit.strip_prefix('¬')) {
                    negated = !negated;
                    lit = rest.trim_start();
                }
                let lit = lit.trim_start_matches('(').trim_end_matches(')').trim();
                if lit.is_empty() {
                    return Err(Error::FormulaParse(format!("empty literal in '{text}'")));
                }
                match (lit, negated) {
                    ("true" | "⊤", false) | ("false" | "⊥", true) => {}
                    ("false" | "⊥", false) | ("true" | "⊤", true) => contradictory = true,
                    (name, _) => {
                        let bit = 1u64 << props.index_of(name)?;
                        if negated {
                            c.neg |= bit;
                        } else {
                            c.pos |= bit;
                        }
                    }
                }
            }
            if !contradictory {
                disjuncts.push(c);
            }
        }
        Ok(Dnf::from_disjuncts(disjuncts))
    }

    /// Renders the formula over `props`.
    pub fn display<'a>(&'a self, props: &'a PropositionSet) -> impl fmt::Display + 'a {
        DnfDisplay { dnf: self, props }
    }
}

struct DnfDisplay<'a> {
    dnf: &'a Dnf,
    props: &'a PropositionSet,
}

impl fmt::Display for DnfDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dnf {
            Dnf::True => f.write_str("true"),
            Dnf::Or(v) if v.is_empty() => f.write_str("false"),
            Dnf::Or(v) => {
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{}", c.display(self.props))?;
                }
                Ok(())
            }
        }
    }
}
