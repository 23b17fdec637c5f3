//! A deliberately small text-template language.
//!
//! ```text
//! {{ path.to.value }}
//! {% if flag %} ... {% else %} ... {% endif %}      (also `if not flag`)
//! {% for item in list %} {{ item.x }} {{ loop.index0 }} {% endfor %}
//! ```
//!
//! Inside a loop `loop.index0`, `loop.first` and `loop.last` are defined.
//! A line holding nothing but a `{% ... %}` tag disappears entirely, so
//! control flow does not leave blank lines behind.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    fn truthy(&self) -> bool {
        match self {
            Value::Str(s) => !s.is_empty(),
            Value::Int(i) => *i != 0,
            Value::Bool(b) => *b,
            Value::List(l) => !l.is_empty(),
            Value::Map(m) => !m.is_empty(),
        }
    }

    fn render(&self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s.clone()),
            Value::Int(i) => Some(i.to_string()),
            Value::Bool(b) => Some(b.to_string()),
            Value::List(_) | Value::Map(_) => None,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::List(v.into_iter().map(Into::into).collect())
    }
}

impl From<Context> for Value {
    fn from(c: Context) -> Self {
        Value::Map(c.0)
    }
}

/// Named values handed to a template.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context(BTreeMap<String, Value>);

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.set(key, value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Text(String),
    Var {
        path: String,
        line: usize,
    },
    If {
        path: String,
        negate: bool,
        then: Vec<Node>,
        other: Vec<Node>,
        line: usize,
    },
    For {
        var: String,
        path: String,
        body: Vec<Node>,
        line: usize,
    },
}

#[derive(Debug)]
enum Token {
    Text(String),
    Var(String, usize),
    Tag(String, usize),
}

/// A parsed template, reusable across renders.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    name: String,
    nodes: Vec<Node>,
}

fn err(name: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Template(format!("{name}:{line}: {msg}"))
}

fn tokenize(name: &str, src: &str) -> Result<Vec<Token>> {
    let line_at = |pos: usize| 1 + src[..pos].matches('\n').count();
    let mut tokens = Vec::new();
    let mut text = String::new();
    let mut pos = 0;
    while pos < src.len() {
        let rest = &src[pos..];
        let next = match (rest.find("{{"), rest.find("{%")) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let Some(rel) = next else {
            text.push_str(rest);
            break;
        };
        let start = pos + rel;
        text.push_str(&src[pos..start]);
        let line = line_at(start);
        let is_tag = src[start..].starts_with("{%");
        let close = if is_tag { "%}" } else { "}}" };
        let end = src[start + 2..]
            .find(close)
            .map(|i| start + 2 + i)
            .ok_or_else(|| err(name, line, format!("unterminated `{}`", &src[start..start + 2])))?;
        let body = src[start + 2..end].trim().to_string();
        pos = end + 2;

        if is_tag {
            // Standalone tag line: drop its indentation and newline.
            let line_start = src[..start].rfind('\n').map_or(0, |i| i + 1);
            let indent = &src[line_start..start];
            let line_end = src[pos..].find('\n').map_or(src.len(), |i| pos + i);
            if indent.chars().all(|c| c == ' ' || c == '\t') && src[pos..line_end].trim().is_empty() {
                text.truncate(text.len() - indent.len());
                pos = (line_end + 1).min(src.len());
            }
        }
        if !text.is_empty() {
            tokens.push(Token::Text(std::mem::take(&mut text)));
        }
        tokens.push(if is_tag {
            Token::Tag(body, line)
        } else {
            Token::Var(body, line)
        });
    }
    if !text.is_empty() {
        tokens.push(Token::Text(text));
    }
    Ok(tokens)
}

fn valid_path(p: &str) -> bool {
    !p.is_empty()
        && p.split('.')
            .all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

/// What terminated a block.
enum End {
    Eof,
    Else(usize),
    If(usize),
    For(usize),
}

fn parse_block(name: &str, tokens: &mut std::vec::IntoIter<Token>) -> Result<(Vec<Node>, End)> {
    let mut nodes = Vec::new();
    while let Some(tok) = tokens.next() {
        match tok {
            Token::Text(t) => nodes.push(Node::Text(t)),
            Token::Var(path, line) => {
                if !valid_path(&path) {
                    return Err(err(name, line, format!("bad expression `{path}`")));
                }
                nodes.push(Node::Var { path, line });
            }
            Token::Tag(body, line) => {
                let words: Vec<&str> = body.split_whitespace().collect();
                match words.as_slice() {
                    ["if", "not", p] | ["if", p] if valid_path(p) => {
                        let negate = words.len() == 3;
                        let (then, end) = parse_block(name, tokens)?;
                        let other = match end {
                            End::If(_) => Vec::new(),
                            End::Else(_) => match parse_block(name, tokens)? {
                                (other, End::If(_)) => other,
                                (_, _) => return Err(err(name, line, "`if` without `endif`")),
                            },
                            _ => return Err(err(name, line, "`if` without `endif`")),
                        };
                        nodes.push(Node::If {
                            path: p.to_string(),
                            negate,
                            then,
                            other,
                            line,
                        });
                    }
                    ["for", var, "in", p] if valid_path(var) && !var.contains('.') && valid_path(p) => {
                        let (body, end) = parse_block(name, tokens)?;
                        if !matches!(end, End::For(_)) {
                            return Err(err(name, line, "`for` without `endfor`"));
                        }
                        nodes.push(Node::For {
                            var: var.to_string(),
                            path: p.to_string(),
                            body,
                            line,
                        });
                    }
                    ["else"] => return Ok((nodes, End::Else(line))),
                    ["endif"] => return Ok((nodes, End::If(line))),
                    ["endfor"] => return Ok((nodes, End::For(line))),
                    _ => return Err(err(name, line, format!("unknown tag `{body}`"))),
                }
            }
        }
    }
    Ok((nodes, End::Eof))
}

impl Template {
    pub fn parse(name: &str, src: &str) -> Result<Self> {
        let mut tokens = tokenize(name, src)?.into_iter();
        let (nodes, end) = parse_block(name, &mut tokens)?;
        match end {
            End::Eof => Ok(Self {
                name: name.to_string(),
                nodes,
            }),
            End::Else(l) => Err(err(name, l, "`else` outside `if`")),
            End::If(l) => Err(err(name, l, "unmatched `endif`")),
            End::For(l) => Err(err(name, l, "unmatched `endfor`")),
        }
    }

    pub fn render(&self, ctx: &Context) -> Result<String> {
        let mut scopes = vec![ctx.0.clone()];
        let mut out = String::new();
        self.render_nodes(&self.nodes, &mut scopes, &mut out)?;
        Ok(out)
    }

    fn lookup<'a>(&self, scopes: &'a [BTreeMap<String, Value>], path: &str, line: usize) -> Result<&'a Value> {
        let mut parts = path.split('.');
        let head = parts.next().unwrap_or_default();
        let mut v = scopes
            .iter()
            .rev()
            .find_map(|s| s.get(head))
            .ok_or_else(|| err(&self.name, line, format!("undefined `{head}`")))?;
        for seg in parts {
            v = match v {
                Value::Map(m) => m.get(seg),
                _ => None,
            }
            .ok_or_else(|| err(&self.name, line, format!("undefined `{path}`")))?;
        }
        Ok(v)
    }

    fn render_nodes(&self, nodes: &[Node], scopes: &mut Vec<BTreeMap<String, Value>>, out: &mut String) -> Result<()> {
        for node in nodes {
            match node {
                Node::Text(t) => out.push_str(t),
                Node::Var { path, line } => {
                    let v = self.lookup(scopes, path, *line)?;
                    let s = v
                        .render()
                        .ok_or_else(|| err(&self.name, *line, format!("`{path}` is not a scalar")))?;
                    out.push_str(&s);
                }
                Node::If {
                    path,
                    negate,
                    then,
                    other,
                    line,
                } => {
                    let cond = self.lookup(scopes, path, *line)?.truthy() != *negate;
                    self.render_nodes(if cond { then } else { other }, scopes, out)?;
                }
                Node::For { var, path, body, line } => {
                    let Value::List(items) = self.lookup(scopes, path, *line)?.clone() else {
                        return Err(err(&self.name, *line, format!("`{path}` is not a list")));
                    };
                    let n = items.len();
                    for (i, item) in items.into_iter().enumerate() {
                        let mut scope = BTreeMap::new();
                        scope.insert(var.clone(), item);
                        scope.insert(
                            "loop".to_string(),
                            Context::new()
                                .with("index0", i)
                                .with("first", i == 0)
                                .with("last", i + 1 == n)
                                .into(),
                        );
                        scopes.push(scope);
                        let r = self.render_nodes(body, scopes, out);
                        scopes.pop();
                        r?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn render(name: &str, src: &str, ctx: &Context) -> Result<String> {
    Template::parse(name, src)?.render(ctx)
}
