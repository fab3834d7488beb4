//! CoNLL-U reading, writing and tree validation, plus the treebank-tagged
//! dataset abstraction used by training and evaluation.
//!
//! Multiword-token range lines and empty nodes are kept verbatim together
//! with their position in the sentence, so that writing a parsed file
//! reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One syntactic word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<String>,
    pub xpos: Option<String>,
    pub feats: Option<String>,
    pub head: Option<usize>,
    pub deprel: Option<String>,
    pub deps: Option<String>,
    pub misc: Option<String>,
}

impl Token {
    /// A token with only id and form set.
    pub fn new(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: None,
            upos: None,
            xpos: None,
            feats: None,
            head: None,
            deprel: None,
            deps: None,
            misc: None,
        }
    }

    pub fn with_head(mut self, head: usize, deprel: impl Into<String>) -> Self {
        self.head = Some(head);
        self.deprel = Some(deprel.into());
        self
    }
}

/// Kind of a preserved non-token line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtraKind {
    Comment,
    /// Multiword-token range such as `3-4`.
    Range(String),
    /// Empty node such as `5.1`.
    EmptyNode(String),
}

/// A line that is carried through unchanged. `before` is the number of
/// tokens that precede it in the sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtraLine {
    pub kind: ExtraKind,
    pub before: usize,
    pub raw: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub extra: Vec<ExtraLine>,
    pub treebank_id: Option<usize>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            extra: Vec::new(),
            treebank_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Raw `#` lines, in order.
    pub fn comments(&self) -> impl Iterator<Item = &str> {
        self.extra
            .iter()
            .filter(|l| l.kind == ExtraKind::Comment)
            .map(|l| l.raw.as_str())
    }

    /// Multiword range lines and empty-node lines as (id, raw line).
    pub fn mwt_lines(&self) -> impl Iterator<Item = (&str, &str)> {
        self.extra.iter().filter_map(|l| match &l.kind {
            ExtraKind::Range(id) | ExtraKind::EmptyNode(id) => Some((id.as_str(), l.raw.as_str())),
            ExtraKind::Comment => None,
        })
    }

    /// Heads as a 0-based vector (`heads[i]` is the head of token `i + 1`).
    /// Absent heads are reported as `None`.
    pub fn heads(&self) -> Vec<Option<usize>> {
        self.tokens.iter().map(|t| t.head).collect()
    }
}

/// Ordered, duplicate-free list of treebank names. The position of a name
/// is its treebank id.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TreebankRegistry {
    names: Vec<String>,
    #[serde(skip)]
    sources: BTreeMap<String, PathBuf>,
}

impl PartialEq for TreebankRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for TreebankRegistry {}

impl TreebankRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut registry = Self::new();
        for name in names {
            let name = name.into();
            if registry.id(&name).is_some() {
                return Err(Error::Config(format!("duplicate treebank name {name:?}")));
            }
            registry.register(&name);
        }
        Ok(registry)
    }

    /// Returns the id of `name`, adding it if it is new.
    pub fn register(&mut self, name: &str) -> usize {
        match self.id(name) {
            Some(id) => id,
            None => {
                self.names.push(name.to_owned());
                self.names.len() - 1
            }
        }
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn note_source(&mut self, name: &str, path: &Path) {
        match self.sources.get(name) {
            Some(previous) if previous != path => log::warn!(
                "treebank {name:?} loaded from {} and {}",
                previous.display(),
                path.display()
            ),
            Some(_) => {}
            None => {
                self.sources.insert(name.to_owned(), path.to_owned());
            }
        }
    }
}

/// Treebank-tagged sentences together with the registry their ids refer to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub registry: TreebankRegistry,
}

impl Dataset {
    pub fn new(registry: TreebankRegistry) -> Self {
        Dataset {
            sentences: Vec::new(),
            registry,
        }
    }

    /// Appends the sentences of `other`, which must share this registry's
    /// name prefix.
    pub fn extend(&mut self, other: Dataset) -> Result<()> {
        let shared = self.registry.len().min(other.registry.len());
        if self.registry.names[..shared] != other.registry.names[..shared] {
            return Err(Error::Config(
                "cannot merge datasets with conflicting registries".into(),
            ));
        }
        if other.registry.len() > self.registry.len() {
            self.registry = other.registry;
        }
        self.sentences.extend(other.sentences);
        Ok(())
    }

    /// Sentences tagged with treebank `id`.
    pub fn treebank(&self, id: usize) -> impl Iterator<Item = &Sentence> {
        self.sentences
            .iter()
            .filter(move |s| s.treebank_id == Some(id))
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

fn field(value: &str) -> Option<String> {
    if value == "_" {
        None
    } else {
        Some(value.to_owned())
    }
}

/// Parses CoNLL-U text. Empty input yields no sentences.
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut head_lines: Vec<usize> = Vec::new();
    let mut open = false;

    for (index, line) in text.split('\n').enumerate() {
        let line_no = index + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);

        if line.trim().is_empty() {
            if open {
                finish_sentence(&mut current, &head_lines)?;
                sentences.push(std::mem::take(&mut current));
                head_lines.clear();
                open = false;
            }
            continue;
        }
        open = true;

        if line.starts_with('#') {
            current.extra.push(ExtraLine {
                kind: ExtraKind::Comment,
                before: current.tokens.len(),
                raw: line.to_owned(),
            });
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::MalformedLine {
                line: line_no,
                found: fields.len(),
            });
        }

        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            let kind = if id.contains('-') {
                ExtraKind::Range(id.to_owned())
            } else {
                ExtraKind::EmptyNode(id.to_owned())
            };
            current.extra.push(ExtraLine {
                kind,
                before: current.tokens.len(),
                raw: line.to_owned(),
            });
            continue;
        }

        let id_value: usize = id.parse().map_err(|_| Error::BadId {
            line: line_no,
            id: id.to_owned(),
        })?;
        if id_value != current.tokens.len() + 1 {
            return Err(Error::BadId {
                line: line_no,
                id: id.to_owned(),
            });
        }

        let head = match fields[6] {
            "_" => None,
            h => Some(h.parse::<usize>().map_err(|_| Error::BadHead {
                line: line_no,
                head: h.to_owned(),
            })?),
        };

        current.tokens.push(Token {
            id: id_value,
            form: fields[1].to_owned(),
            lemma: field(fields[2]),
            upos: field(fields[3]),
            xpos: field(fields[4]),
            feats: field(fields[5]),
            head,
            deprel: field(fields[7]),
            deps: field(fields[8]),
            misc: field(fields[9]),
        });
        head_lines.push(line_no);
    }

    if open {
        finish_sentence(&mut current, &head_lines)?;
        sentences.push(current);
    }

    Ok(sentences)
}

fn finish_sentence(sentence: &mut Sentence, head_lines: &[usize]) -> Result<()> {
    let n = sentence.tokens.len();
    for (token, &line) in sentence.tokens.iter().zip(head_lines) {
        if let Some(head) = token.head {
            if head > n {
                return Err(Error::BadHead {
                    line,
                    head: head.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn opt(value: &Option<String>) -> &str {
    value.as_deref().unwrap_or("_")
}

fn write_token(out: &mut String, token: &Token) {
    use std::fmt::Write;
    let head = token
        .head
        .map(|h| h.to_string())
        .unwrap_or_else(|| "_".to_owned());
    let _ = writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        token.id,
        token.form,
        opt(&token.lemma),
        opt(&token.upos),
        opt(&token.xpos),
        opt(&token.feats),
        head,
        opt(&token.deprel),
        opt(&token.deps),
        opt(&token.misc),
    );
}

/// Serializes sentences as CoNLL-U with `\n` line endings and a blank line
/// after every sentence.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        let mut extra = sentence.extra.iter().peekable();
        for (i, token) in sentence.tokens.iter().enumerate() {
            while let Some(line) = extra.next_if(|l| l.before <= i) {
                out.push_str(&line.raw);
                out.push('\n');
            }
            write_token(&mut out, token);
        }
        for line in extra {
            out.push_str(&line.raw);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// A tree well-formedness violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingHead { id: usize },
    DanglingHead { id: usize, head: usize },
    /// Token ids on a head cycle, starting from the smallest.
    Cycle(Vec<usize>),
    ZeroRoot,
    MultiRoot(Vec<usize>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingHead { id } => write!(f, "token {id} has no head"),
            Violation::DanglingHead { id, head } => {
                write!(f, "token {id} points at nonexistent head {head}")
            }
            Violation::Cycle(ids) => write!(f, "cycle through tokens {ids:?}"),
            Violation::ZeroRoot => write!(f, "no token attached to the root"),
            Violation::MultiRoot(ids) => write!(f, "multiple roots {ids:?}"),
        }
    }
}

/// Checks that the heads of `sentence` form a single-rooted tree. Violations
/// are reported in a fixed order: missing heads, dangling heads, cycles (by
/// smallest member), then root count.
pub fn validate_tree(sentence: &Sentence) -> Vec<Violation> {
    let n = sentence.tokens.len();
    let mut out = Vec::new();
    // heads[i] for 1-based i; None when missing or dangling.
    let mut heads: Vec<Option<usize>> = vec![None; n + 1];

    let mut dangling = Vec::new();
    for token in &sentence.tokens {
        match token.head {
            None => out.push(Violation::MissingHead { id: token.id }),
            Some(h) if h > n => dangling.push(Violation::DanglingHead {
                id: token.id,
                head: h,
            }),
            Some(h) => heads[token.id] = Some(h),
        }
    }
    out.extend(dangling);

    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; n + 1];
    let mut cycles = Vec::new();
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut node = start;
        loop {
            if node == 0 || state[node] == 2 {
                break;
            }
            if state[node] == 1 {
                let begin = path.iter().position(|&p| p == node).unwrap();
                let mut cycle: Vec<usize> = path[begin..].to_vec();
                let min_pos = cycle
                    .iter()
                    .enumerate()
                    .min_by_key(|&(_, &v)| v)
                    .map(|(i, _)| i)
                    .unwrap();
                cycle.rotate_left(min_pos);
                cycles.push(cycle);
                break;
            }
            state[node] = 1;
            path.push(node);
            match heads[node] {
                Some(h) => node = h,
                None => break,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    cycles.sort();
    out.extend(cycles.into_iter().map(Violation::Cycle));

    let roots: Vec<usize> = sentence
        .tokens
        .iter()
        .filter(|t| t.head == Some(0))
        .map(|t| t.id)
        .collect();
    match roots.len() {
        0 if n > 0 => out.push(Violation::ZeroRoot),
        0 | 1 => {}
        _ => out.push(Violation::MultiRoot(roots)),
    }
    out
}

/// Reads a CoNLL-U file and tags every sentence with the id of `name`,
/// registering the name if needed.
pub fn load_treebank(
    path: impl AsRef<Path>,
    name: &str,
    registry: &mut TreebankRegistry,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = registry.register(name);
    registry.note_source(name, path);
    let mut sentences = parse_conllu(&text)?;
    for s in &mut sentences {
        s.treebank_id = Some(id);
    }
    Ok(Dataset {
        sentences,
        registry: registry.clone(),
    })
}

/// Train/dev/test fragments of one UD-style treebank directory.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Option<Dataset>,
    pub dev: Option<Dataset>,
    pub test: Option<Dataset>,
}

/// Loads a directory holding files named `*-train.conllu`, `*-dev.conllu`
/// and `*-test.conllu`. Missing splits are `None`.
pub fn load_ud_directory(
    dir: impl AsRef<Path>,
    name: &str,
    registry: &mut TreebankRegistry,
) -> Result<Splits> {
    let dir = dir.as_ref();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();

    let mut find = |suffix: &str| -> Result<Option<Dataset>> {
        let found = entries.iter().find(|p| {
            p.file_name()
                .and_then(|f| f.to_str())
                .is_some_and(|f| f.ends_with(suffix))
        });
        match found {
            Some(path) => load_treebank(path, name, registry).map(Some),
            None => Ok(None),
        }
    };

    let train = find("-train.conllu")?;
    let dev = find("-dev.conllu")?;
    let test = find("-test.conllu")?;
    // All fragments see the final registry.
    let fix = |d: Option<Dataset>, reg: &TreebankRegistry| {
        d.map(|mut d| {
            d.registry = reg.clone();
            d
        })
    };
    Ok(Splits {
        train: fix(train, registry),
        dev: fix(dev, registry),
        test: fix(test, registry),
    })
}
