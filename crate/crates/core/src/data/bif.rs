//! Reader for the discrete subset of the BIF interchange format.
//!
//! Accepted: `network` blocks, `variable` blocks declaring
//! `type discrete [ k ] { s0, s1, … };`, and `probability ( X | P1, P2 )`
//! blocks holding either tuple rows `(p1_state, p2_state) v0, v1, …;` or a
//! single `table …;`. `property` statements are skipped. For a conditional
//! `table`, entries are listed with the child state varying slowest and the
//! parent configuration (last parent fastest) varying fastest.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graphs::{Dag, MixedGraph};

/// Conditional probability table for one node.
///
/// Rows are indexed by parent configuration in mixed radix, first parent most
/// significant; each row holds `card` probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parents: Vec<usize>,
    pub parent_cards: Vec<usize>,
    pub card: usize,
    pub probs: Vec<f64>,
}

impl Cpt {
    pub fn n_configs(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn config_index(&self, parent_states: impl IntoIterator<Item = usize>) -> usize {
        parent_states
            .into_iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (s, &c)| acc * c + s)
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.probs[config * self.card..(config + 1) * self.card]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    pub name: String,
    pub names: Vec<String>,
    pub states: Vec<Vec<String>>,
    pub dag: Dag,
    pub cpts: Vec<Cpt>,
}

impl BayesNet {
    pub fn d(&self) -> usize {
        self.names.len()
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.states[j].len()
    }
}

const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut column) = (0, 1, 1);
    let advance = |c: char, line: &mut usize, column: &mut usize| {
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(c, &mut line, &mut column);
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                column += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, column);
            i += 2;
            column += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(Error::Parse {
                        line: l0,
                        column: c0,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    column += 2;
                    break;
                }
                advance(chars[i], &mut line, &mut column);
                i += 1;
            }
        } else if c == '"' {
            // quoted strings only occur in property values; keep them as one word
            let (l0, c0) = (line, column);
            let mut s = String::new();
            i += 1;
            column += 1;
            while i < chars.len() && chars[i] != '"' {
                s.push(chars[i]);
                advance(chars[i], &mut line, &mut column);
                i += 1;
            }
            if i >= chars.len() {
                return Err(Error::Parse {
                    line: l0,
                    column: c0,
                    message: "unterminated string".into(),
                });
            }
            i += 1;
            column += 1;
            out.push(Token {
                tok: Tok::Word(s),
                line: l0,
                column: c0,
            });
        } else if "{}()[],;|=".contains(c) {
            out.push(Token {
                tok: Tok::Punct(c),
                line,
                column,
            });
            i += 1;
            column += 1;
        } else if c.is_alphanumeric() || "_.-+".contains(c) {
            let (l0, c0) = (line, column);
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || "_.-+".contains(chars[i])) {
                s.push(chars[i]);
                i += 1;
                column += 1;
            }
            out.push(Token {
                tok: Tok::Word(s),
                line: l0,
                column: c0,
            });
        } else {
            return Err(Error::Parse {
                line,
                column,
                message: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

struct RawCpt {
    child: String,
    parents: Vec<String>,
    rows: Vec<(Vec<String>, Vec<f64>, usize, usize)>,
    table: Option<(Vec<f64>, usize, usize)>,
    at: (usize, usize),
}

impl Parser {
    fn err<T>(&self, at: (usize, usize), message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: at.0,
            column: at.1,
            message: message.into(),
        })
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.eof)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Result<Token> {
        match self.tokens.get(self.pos).cloned() {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => self.err(self.eof, "unexpected end of input"),
        }
    }

    fn expect(&mut self, p: char) -> Result<()> {
        let at = self.here();
        match self.next()?.tok {
            Tok::Punct(c) if c == p => Ok(()),
            other => self.err(at, format!("expected '{p}', found {other:?}")),
        }
    }

    fn eat(&mut self, p: char) -> bool {
        if self.peek() == Some(&Tok::Punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Result<(String, (usize, usize))> {
        let at = self.here();
        match self.next()?.tok {
            Tok::Word(w) => Ok((w, at)),
            other => self.err(at, format!("expected identifier, found {other:?}")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (w, at) = self.word()?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.err(at, format!("expected number, found '{w}'")),
        }
    }

    /// `a, b, c` up to (not including) the closing delimiter.
    fn word_list(&mut self, close: char) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::Punct(close)) {
            return Ok(out);
        }
        loop {
            out.push(self.word()?.0);
            if !self.eat(',') {
                break;
            }
        }
        Ok(out)
    }

    fn number_list(&mut self) -> Result<Vec<f64>> {
        let mut out = vec![self.number()?];
        while self.eat(',') {
            out.push(self.number()?);
        }
        Ok(out)
    }

    fn skip_property(&mut self) -> Result<()> {
        loop {
            if let Tok::Punct(';') = self.next()?.tok {
                return Ok(());
            }
        }
    }

    fn network(&mut self) -> Result<String> {
        let (name, _) = self.word()?;
        self.expect('{')?;
        while !self.eat('}') {
            let (w, at) = self.word()?;
            if w != "property" {
                return self.err(at, format!("unsupported network statement '{w}'"));
            }
            self.skip_property()?;
        }
        Ok(name)
    }

    fn variable(&mut self) -> Result<(String, Vec<String>, (usize, usize))> {
        let (name, at) = self.word()?;
        self.expect('{')?;
        let mut states = None;
        while !self.eat('}') {
            let (w, wat) = self.word()?;
            match w.as_str() {
                "property" => self.skip_property()?,
                "type" => {
                    let (kind, kat) = self.word()?;
                    if kind != "discrete" {
                        return self.err(kat, format!("unsupported variable type '{kind}'"));
                    }
                    self.expect('[')?;
                    let kat = self.here();
                    let k = self.number()?;
                    self.expect(']')?;
                    self.expect('{')?;
                    let list = self.word_list('}')?;
                    self.expect('}')?;
                    self.expect(';')?;
                    if k.fract() != 0.0 || k < 1.0 || list.len() != k as usize {
                        return self.err(
                            kat,
                            format!("variable {name} declares {k} states but lists {}", list.len()),
                        );
                    }
                    states = Some(list);
                }
                _ => return self.err(wat, format!("unsupported variable statement '{w}'")),
            }
        }
        match states {
            Some(s) => Ok((name, s, at)),
            None => self.err(at, format!("variable {name} has no type declaration")),
        }
    }

    fn probability(&mut self) -> Result<RawCpt> {
        let at = self.here();
        self.expect('(')?;
        let (child, _) = self.word()?;
        let mut parents = Vec::new();
        if self.eat('|') {
            parents = self.word_list(')')?;
        }
        self.expect(')')?;
        self.expect('{')?;
        let mut raw = RawCpt {
            child,
            parents,
            rows: Vec::new(),
            table: None,
            at,
        };
        while !self.eat('}') {
            let sat = self.here();
            if self.eat('(') {
                let cfg = self.word_list(')')?;
                self.expect(')')?;
                let vals = self.number_list()?;
                self.expect(';')?;
                raw.rows.push((cfg, vals, sat.0, sat.1));
                continue;
            }
            let (w, wat) = self.word()?;
            match w.as_str() {
                "table" => {
                    let vals = self.number_list()?;
                    self.expect(';')?;
                    raw.table = Some((vals, wat.0, wat.1));
                }
                "property" => self.skip_property()?,
                _ => return self.err(wat, format!("unsupported probability statement '{w}'")),
            }
        }
        Ok(raw)
    }
}

fn check_row(row: &mut [f64], line: usize, column: usize, ctx: &str) -> Result<()> {
    if row.iter().any(|&p| p < 0.0) {
        return Err(Error::Parse {
            line,
            column,
            message: format!("negative probability in {ctx}"),
        });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Parse {
            line,
            column,
            message: format!("row of {ctx} sums to {sum}"),
        });
    }
    row.iter_mut().for_each(|p| *p /= sum);
    Ok(())
}

pub fn parse_bif(text: &str) -> Result<BayesNet> {
    let tokens = tokenize(text)?;
    let eof = tokens
        .last()
        .map(|t| (t.line, t.column + 1))
        .unwrap_or((1, 1));
    let mut p = Parser {
        tokens,
        pos: 0,
        eof,
    };

    let mut name = String::from("unknown");
    let mut names: Vec<String> = Vec::new();
    let mut states: Vec<Vec<String>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raws = Vec::new();

    while p.peek().is_some() {
        let (w, at) = p.word()?;
        match w.as_str() {
            "network" => name = p.network()?,
            "variable" => {
                let (v, s, vat) = p.variable()?;
                if index.contains_key(&v) {
                    return p.err(vat, format!("variable {v} declared twice"));
                }
                index.insert(v.clone(), names.len());
                names.push(v);
                states.push(s);
            }
            "probability" => raws.push(p.probability()?),
            _ => return p.err(at, format!("unexpected top-level keyword '{w}'")),
        }
    }

    let d = names.len();
    let mut cpts: Vec<Option<Cpt>> = vec![None; d];
    let mut graph = MixedGraph::empty(d);
    for raw in raws {
        let lookup = |v: &str| {
            index.get(v).copied().ok_or(Error::Parse {
                line: raw.at.0,
                column: raw.at.1,
                message: format!("unknown variable '{v}'"),
            })
        };
        let child = lookup(&raw.child)?;
        let parents = raw
            .parents
            .iter()
            .map(|v| lookup(v))
            .collect::<Result<Vec<_>>>()?;
        if cpts[child].is_some() {
            return p.err(raw.at, format!("second probability block for {}", raw.child));
        }
        let card = states[child].len();
        let parent_cards: Vec<usize> = parents.iter().map(|&q| states[q].len()).collect();
        let n_configs: usize = parent_cards.iter().product();
        let mut probs = vec![f64::NAN; n_configs * card];

        if let Some((vals, line, column)) = raw.table {
            if !raw.rows.is_empty() {
                return p.err((line, column), "probability block mixes table and tuple rows");
            }
            if vals.len() != n_configs * card {
                return p.err(
                    (line, column),
                    format!("table for {} has {} entries, expected {}", raw.child, vals.len(), n_configs * card),
                );
            }
            for s in 0..card {
                for c in 0..n_configs {
                    probs[c * card + s] = vals[s * n_configs + c];
                }
            }
            for c in 0..n_configs {
                check_row(&mut probs[c * card..(c + 1) * card], line, column, &format!("P({})", raw.child))?;
            }
        } else {
            for (cfg, mut vals, line, column) in raw.rows {
                if cfg.len() != parents.len() {
                    return p.err((line, column), "parent configuration has the wrong arity");
                }
                let mut config = 0;
                for ((state, &q), &pc) in cfg.iter().zip(&parents).zip(&parent_cards) {
                    let s = states[q].iter().position(|x| x == state).ok_or(Error::Parse {
                        line,
                        column,
                        message: format!("unknown state '{state}' of {}", names[q]),
                    })?;
                    config = config * pc + s;
                }
                if vals.len() != card {
                    return p.err((line, column), format!("row has {} entries, expected {card}", vals.len()));
                }
                check_row(&mut vals, line, column, &format!("P({})", raw.child))?;
                if !probs[config * card].is_nan() {
                    return p.err((line, column), "duplicate parent configuration");
                }
                probs[config * card..(config + 1) * card].copy_from_slice(&vals);
            }
            if probs.iter().any(|v| v.is_nan()) {
                return p.err(raw.at, format!("probability block for {} misses parent configurations", raw.child));
            }
        }
        for &q in &parents {
            if q == child || graph.adjacent(q, child) {
                return p.err(raw.at, format!("invalid parent set for {}", raw.child));
            }
            graph.add_directed(q, child);
        }
        cpts[child] = Some(Cpt {
            parents,
            parent_cards,
            card,
            probs,
        });
    }

    let cpts = cpts
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            c.ok_or_else(|| Error::Parse {
                line: eof.0,
                column: eof.1,
                message: format!("no probability block for {}", names[j]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dag = Dag::try_from(graph).map_err(|_| Error::Parse {
        line: eof.0,
        column: eof.1,
        message: "parent structure is cyclic".into(),
    })?;
    Ok(BayesNet {
        name,
        names,
        states,
        dag,
        cpts,
    })
}
