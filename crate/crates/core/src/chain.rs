//! Labelled Markov chains with exact rational transition probabilities, and
//! the explicit-state `.tra` / `.lab` file formats.
//!
//! A transitions file starts with `STATES <n>` followed by one
//! `<src> <dst> <prob>` line per transition. A labels file has one
//! `<state> <label> [name]` line per state; the optional third column gives
//! the state a display name used in reports.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::probability::{format_ratio, parse_rational, Probability, ProbabilityError};

pub type State = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{file} line {line}: {message}")]
    Syntax { file: &'static str, line: usize, message: String },
    #[error("{file} line {line}: {source}")]
    Probability {
        file: &'static str,
        line: usize,
        #[source]
        source: ProbabilityError,
    },
    #[error("{file} line {line}: state {state} is out of range (model has {n} states)")]
    DanglingState { file: &'static str, line: usize, state: usize, n: usize },
    #[error("transitions line {line}: duplicate transition {src} -> {dst}")]
    DuplicateTransition { line: usize, src: State, dst: State },
    #[error("labels line {line}: state {state} is labelled twice")]
    DuplicateLabel { line: usize, state: State },
    #[error("row {state} sums to {sum}, expected 1")]
    RowSum { state: State, sum: String },
    #[error("state {state} has no label")]
    Unlabelled { state: State },
    #[error("all states carry the same label; pass the single-label option to allow this")]
    SingleLabel,
    #[error("model has no states")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

/// A probability distribution with finite support, stored sparsely and
/// sorted by state. Zero entries are never stored and the entries sum to
/// exactly one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distribution {
    entries: Vec<(State, Probability)>,
}

impl Distribution {
    /// Builds a distribution, dropping zero entries. Fails if a state occurs
    /// twice or the mass is not exactly one.
    pub fn new<I>(entries: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (State, BigRational)>,
    {
        let mut entries: Vec<(State, BigRational)> =
            entries.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        entries.sort_by_key(|(s, _)| *s);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ModelError::Invalid(format!("state {} occurs twice in a distribution", w[0].0)));
        }
        let sum: BigRational = entries.iter().map(|(_, p)| p).sum();
        if !sum.is_one() {
            return Err(ModelError::Invalid(format!("distribution sums to {}", format_ratio(&sum))));
        }
        let entries = entries
            .into_iter()
            .map(|(s, p)| Probability::new(p).map(|p| (s, p)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ModelError::Invalid(e.to_string()))?;
        Ok(Distribution { entries })
    }

    pub fn point(state: State) -> Self {
        Distribution { entries: vec![(state, Probability::one())] }
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, &Probability)> + '_ {
        self.entries.iter().map(|(s, p)| (*s, p))
    }

    pub fn support(&self) -> impl Iterator<Item = State> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, state: State) -> Option<&Probability> {
        self.entries
            .binary_search_by_key(&state, |(s, _)| *s)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    /// `μ(x)`, zero outside the support.
    pub fn prob(&self, state: State) -> BigRational {
        self.get(state).map(|p| p.value().clone()).unwrap_or_else(BigRational::zero)
    }

    pub fn contains(&self, state: State) -> bool {
        self.get(state).is_some()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ChainOptions {
    /// Accept chains whose states all share one label.
    pub allow_single_label: bool,
}

/// A finite labelled Markov chain `<S, L, τ, ℓ>` with states `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledMarkovChain {
    labels: Vec<usize>,
    label_names: Vec<String>,
    names: Vec<String>,
    transitions: Vec<Distribution>,
    predecessors: Vec<Vec<State>>,
}

impl LabelledMarkovChain {
    /// Builds a chain from one label string per state and one distribution
    /// per state. Label ids are assigned in order of first occurrence.
    pub fn new(
        labels: Vec<String>,
        transitions: Vec<Distribution>,
        options: ChainOptions,
    ) -> Result<Self, ModelError> {
        let names = (0..labels.len()).map(|s| s.to_string()).collect();
        Self::with_names(labels, transitions, names, options)
    }

    pub fn with_names(
        labels: Vec<String>,
        transitions: Vec<Distribution>,
        names: Vec<String>,
        options: ChainOptions,
    ) -> Result<Self, ModelError> {
        let n = transitions.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if labels.len() != n || names.len() != n {
            return Err(ModelError::Invalid(format!(
                "{} states but {} labels and {} names",
                n,
                labels.len(),
                names.len()
            )));
        }
        let mut label_ids: HashMap<String, usize> = HashMap::new();
        let mut label_names = Vec::new();
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                *label_ids.entry(l.clone()).or_insert_with(|| {
                    label_names.push(l);
                    label_names.len() - 1
                })
            })
            .collect();
        if label_names.len() < 2 && !options.allow_single_label {
            return Err(ModelError::SingleLabel);
        }
        let mut predecessors = vec![Vec::new(); n];
        for (s, row) in transitions.iter().enumerate() {
            for t in row.support() {
                if t >= n {
                    return Err(ModelError::Invalid(format!("state {s} has a successor {t} out of range")));
                }
                predecessors[t].push(s);
            }
        }
        Ok(LabelledMarkovChain { labels, label_names, names, transitions, predecessors })
    }

    /// Parses a chain from the text of a transitions file and a labels file.
    pub fn parse(transitions: &str, labels: &str, options: ChainOptions) -> Result<Self, ModelError> {
        let rows = parse_transitions(transitions)?;
        let n = rows.len();
        let (labels, names) = parse_labels(labels, n)?;
        let mut distributions = Vec::with_capacity(n);
        for (state, row) in rows.into_iter().enumerate() {
            let sum: BigRational = row.iter().map(|(_, p)| p).sum();
            if !sum.is_one() {
                return Err(ModelError::RowSum { state, sum: format_ratio(&sum) });
            }
            distributions.push(Distribution::new(row)?);
        }
        Self::with_names(labels, distributions, names, options)
    }

    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn states(&self) -> std::ops::Range<State> {
        0..self.num_states()
    }

    pub fn label(&self, s: State) -> usize {
        self.labels[s]
    }

    pub fn label_name(&self, s: State) -> &str {
        &self.label_names[self.labels[s]]
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn same_label(&self, s: State, t: State) -> bool {
        self.labels[s] == self.labels[t]
    }

    pub fn name(&self, s: State) -> &str {
        &self.names[s]
    }

    pub fn state_by_name(&self, name: &str) -> Option<State> {
        self.names.iter().position(|n| n == name)
    }

    /// `τ(s)`.
    pub fn transition(&self, s: State) -> &Distribution {
        &self.transitions[s]
    }

    pub fn predecessors(&self, s: State) -> &[State] {
        &self.predecessors[s]
    }

    /// `Post((s, t)) = support(τ(s)) × support(τ(t))`.
    pub fn post_pairs(&self, s: State, t: State) -> Vec<(State, State)> {
        let right: Vec<State> = self.transitions[t].support().collect();
        self.transitions[s]
            .support()
            .flat_map(|u| right.iter().map(move |&v| (u, v)))
            .collect()
    }

    fn has_custom_names(&self) -> bool {
        self.names.iter().enumerate().any(|(s, n)| *n != s.to_string())
    }

    /// Serializes the transition function, probabilities as reduced `a/b`.
    pub fn to_tra(&self) -> String {
        let mut out = format!("STATES {}\n", self.num_states());
        for (s, row) in self.transitions.iter().enumerate() {
            for (t, p) in row.iter() {
                let _ = writeln!(out, "{s} {t} {p}");
            }
        }
        out
    }

    /// Serializes the labelling; the name column appears only when some
    /// state has a name other than its id.
    pub fn to_lab(&self) -> String {
        let named = self.has_custom_names();
        let mut out = String::new();
        for s in self.states() {
            if named {
                let _ = writeln!(out, "{s} {} {}", self.label_name(s), self.names[s]);
            } else {
                let _ = writeln!(out, "{s} {}", self.label_name(s));
            }
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_state(token: &str, file: &'static str, line: usize, n: usize) -> Result<State, ModelError> {
    let state: usize = token.parse().map_err(|_| ModelError::Syntax {
        file,
        line,
        message: format!("expected a state id, found `{token}`"),
    })?;
    if state >= n {
        return Err(ModelError::DanglingState { file, line, state, n });
    }
    Ok(state)
}

fn parse_transitions(text: &str) -> Result<Vec<Vec<(State, BigRational)>>, ModelError> {
    const FILE: &str = "transitions";
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or(ModelError::Empty)?;
    let n: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["STATES", count] => count.parse().map_err(|_| ModelError::Syntax {
            file: FILE,
            line,
            message: format!("bad state count `{count}`"),
        })?,
        _ => {
            return Err(ModelError::Syntax {
                file: FILE,
                line,
                message: "expected header `STATES <n>`".into(),
            })
        }
    };
    if n == 0 {
        return Err(ModelError::Empty);
    }
    let mut rows: Vec<Vec<(State, BigRational)>> = vec![Vec::new(); n];
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [src, dst, prob] = fields.as_slice() else {
            return Err(ModelError::Syntax {
                file: FILE,
                line,
                message: "expected `<src> <dst> <prob>`".into(),
            });
        };
        let src = parse_state(src, FILE, line, n)?;
        let dst = parse_state(dst, FILE, line, n)?;
        let p = parse_rational(prob).map_err(|source| ModelError::Probability { file: FILE, line, source })?;
        Probability::new(p.clone()).map_err(|source| ModelError::Probability { file: FILE, line, source })?;
        if rows[src].iter().any(|(t, _)| *t == dst) {
            return Err(ModelError::DuplicateTransition { line, src, dst });
        }
        rows[src].push((dst, p));
    }
    Ok(rows)
}

fn parse_labels(text: &str, n: usize) -> Result<(Vec<String>, Vec<String>), ModelError> {
    const FILE: &str = "labels";
    let mut labels: Vec<Option<String>> = vec![None; n];
    let mut names: Vec<String> = (0..n).map(|s| s.to_string()).collect();
    for (line, text) in content_lines(text) {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let (state, label, name) = match fields.as_slice() {
            [s, l] => (s, l, None),
            [s, l, name] => (s, l, Some(name)),
            _ => {
                return Err(ModelError::Syntax {
                    file: FILE,
                    line,
                    message: "expected `<state> <label> [name]`".into(),
                })
            }
        };
        let state = parse_state(state, FILE, line, n)?;
        if labels[state].is_some() {
            return Err(ModelError::DuplicateLabel { line, state });
        }
        labels[state] = Some(label.to_string());
        if let Some(name) = name {
            names[state] = name.to_string();
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(state, l)| l.ok_or(ModelError::Unlabelled { state }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashMap::new();
    for (s, name) in names.iter().enumerate() {
        if let Some(prev) = seen.insert(name.as_str(), s) {
            return Err(ModelError::Invalid(format!("states {prev} and {s} share the name `{name}`")));
        }
    }
    Ok((labels, names))
}
