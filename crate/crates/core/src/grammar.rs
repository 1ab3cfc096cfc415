//! Text forms of densities, weights and rules used by the CLI, the scenario
//! config and the forecast-stream CSV.
//!
//! ```text
//! density := normal(mu,sigma) | scaledt(nu,scale,loc) | skewt(nu,gamma,loc,scale)
//!          | hlt | hrt | G | H
//! weight  := right(r) | left(r) | above(r) | below(r) | interval(a,b)
//!          | outside(a,b) | smoothright(r,delta) | one | zero
//! rule    := logs | crps | hy | qcrps(a)
//!          | twcrps(w) | csl(w) | cl(w) | pwl(w) | wh(w)
//!          | conditional(logs,w) | binary(bars|logloss,w) | sum(rule,...)
//! ```
//!
//! Numbers are decimal literals. Inside scenario templates the name `r`
//! stands for the current threshold.

use crate::dist::Density;
use crate::error::{Error, Result};
use crate::scores::{conditional_rule, BinaryScore, ScoringRule};
use crate::weights::WeightFunction;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Call(String, Vec<Node>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("{msg} at column {} in `{}`", self.pos + 1, self.src))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn node(&mut self) -> Result<Node> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') => {
                let text = self.take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '+' | '.'));
                text.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Node::Num)
                    .ok_or_else(|| self.err(format!("bad number `{text}`")))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_').to_string();
                let mut args = Vec::new();
                if self.eat('(') && !self.eat(')') {
                    loop {
                        args.push(self.node()?);
                        if self.eat(')') {
                            break;
                        }
                        if !self.eat(',') {
                            return Err(self.err("expected `,` or `)`"));
                        }
                    }
                }
                Ok(Node::Call(name, args))
            }
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

fn parse_node(src: &str) -> Result<Node> {
    let mut p = Parser { src, pos: 0 };
    let node = p.node()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(node)
}

/// Values available while converting a parse tree.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    /// Value of the variable `r`.
    pub r: Option<f64>,
    /// Weight given to a bare weighted rule name such as `csl`.
    pub weight: Option<WeightFunction>,
    /// Weight given to a bare `wh`; falls back to `weight`.
    pub smooth_weight: Option<WeightFunction>,
}

fn num(node: &Node, env: &Env) -> Result<f64> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Call(name, args) if name == "r" && args.is_empty() => {
            env.r.ok_or_else(|| Error::Parse("the threshold `r` is only available in scenario templates".into()))
        }
        Node::Call(name, _) => Err(Error::Parse(format!("expected a number, found `{name}`"))),
    }
}

fn nums<const N: usize>(name: &str, args: &[Node], env: &Env) -> Result<[f64; N]> {
    if args.len() != N {
        return Err(Error::Parse(format!("`{name}` takes {N} numeric argument(s), got {}", args.len())));
    }
    let mut out = [0.0; N];
    for (o, a) in out.iter_mut().zip(args) {
        *o = num(a, env)?;
    }
    Ok(out)
}

fn call(node: &Node) -> Result<(&str, &[Node])> {
    match node {
        Node::Call(name, args) => Ok((name, args)),
        Node::Num(v) => Err(Error::Parse(format!("expected a name, found number {v}"))),
    }
}

fn density_node(node: &Node, env: &Env) -> Result<Density> {
    let (name, args) = call(node)?;
    let d = match name {
        "normal" => {
            let [mu, sigma] = nums(name, args, env)?;
            Density::normal(mu, sigma)?
        }
        "scaledt" => {
            let [nu, scale, loc] = nums(name, args, env)?;
            Density::scaled_t(nu, scale, loc)?
        }
        "skewt" => {
            let [nu, gamma, loc, scale] = nums(name, args, env)?;
            Density::skew_t(nu, gamma, loc, scale)?
        }
        "hlt" | "hrt" | "G" | "H" | "g" | "h" => {
            let [] = nums(name, args, env)?;
            match name {
                "hlt" => Density::hlt(),
                "hrt" => Density::hrt(),
                "G" | "g" => Density::cdfmix_g(),
                _ => Density::cdfmix_h(),
            }
        }
        other => return Err(Error::Parse(format!("unknown density family `{other}`"))),
    };
    Ok(d)
}

fn weight_node(node: &Node, env: &Env) -> Result<WeightFunction> {
    let (name, args) = call(node)?;
    Ok(match name {
        "right" | "left" | "above" | "below" => {
            let [r] = nums(name, args, env)?;
            let w = if name == "right" || name == "below" { WeightFunction::right(r) } else { WeightFunction::left(r) };
            if name == "below" || name == "above" {
                w.complement()?
            } else {
                w
            }
        }
        "interval" => {
            let [a, b] = nums(name, args, env)?;
            WeightFunction::interval(a, b)?
        }
        "outside" => {
            let [a, b] = nums(name, args, env)?;
            WeightFunction::interval(a, b)?.complement()?
        }
        "smoothright" => {
            let [r, delta] = nums(name, args, env)?;
            WeightFunction::smooth_right(r, delta)?
        }
        "one" | "zero" => {
            let [] = nums(name, args, env)?;
            if name == "one" {
                WeightFunction::one()
            } else {
                WeightFunction::zero()
            }
        }
        other => return Err(Error::Parse(format!("unknown weight `{other}`"))),
    })
}

fn rule_node(node: &Node, env: &Env) -> Result<ScoringRule> {
    let (name, args) = call(node)?;
    let weighted = |make: fn(WeightFunction) -> ScoringRule, smooth: bool| -> Result<ScoringRule> {
        match args {
            [w] => Ok(make(weight_node(w, env)?)),
            [] => {
                let fallback = if smooth { env.smooth_weight.or(env.weight) } else { env.weight };
                fallback
                    .map(make)
                    .ok_or_else(|| Error::Parse(format!("`{name}` needs a weight, e.g. {name}(right(0))")))
            }
            _ => Err(Error::Parse(format!("`{name}` takes one weight argument"))),
        }
    };
    let rule = match name {
        "logs" | "crps" | "hy" => {
            let [] = nums(name, args, env)?;
            match name {
                "logs" => ScoringRule::LogS,
                "crps" => ScoringRule::Crps,
                _ => ScoringRule::Hy,
            }
        }
        "qcrps" => {
            let [a] = nums(name, args, env)?;
            ScoringRule::qcrps(a)?
        }
        "twcrps" => weighted(ScoringRule::TwCrps, false)?,
        "csl" => weighted(ScoringRule::Csl, false)?,
        "cl" => weighted(ScoringRule::Cl, false)?,
        "pwl" => weighted(ScoringRule::Pwl, false)?,
        "wh" => weighted(ScoringRule::Wh, true)?,
        "conditional" => match args {
            [base, w] => conditional_rule(rule_node(base, env)?, weight_node(w, env)?)?,
            _ => return Err(Error::Parse("`conditional` takes a base rule and a weight".into())),
        },
        "binary" => match args {
            [b, w] => {
                let binary = match call(b)? {
                    ("bars", []) => BinaryScore::BarS,
                    ("logloss", []) => BinaryScore::LogLoss,
                    (other, _) => return Err(Error::Parse(format!("unknown binary score `{other}`"))),
                };
                ScoringRule::BinaryAugmented { binary, weight: weight_node(w, env)? }
            }
            _ => return Err(Error::Parse("`binary` takes a binary score and a weight".into())),
        },
        "sum" => ScoringRule::Sum(args.iter().map(|a| rule_node(a, env)).collect::<Result<_>>()?),
        other => return Err(Error::Parse(format!("unknown scoring rule `{other}`"))),
    };
    rule.validate()?;
    Ok(rule)
}

pub fn parse_density(s: &str) -> Result<Density> {
    density_node(&parse_node(s)?, &Env::default())
}

pub fn parse_weight(s: &str) -> Result<WeightFunction> {
    weight_node(&parse_node(s)?, &Env::default())
}

pub fn parse_rule(s: &str) -> Result<ScoringRule> {
    parse_rule_in(s, &Env::default())
}

pub fn parse_rule_in(s: &str, env: &Env) -> Result<ScoringRule> {
    rule_node(&parse_node(s)?, env)
}

/// Whether a rule text mentions the threshold variable `r`.
pub fn mentions_threshold(s: &str) -> Result<bool> {
    fn walk(n: &Node) -> bool {
        match n {
            Node::Num(_) => false,
            Node::Call(name, args) => (name == "r" && args.is_empty()) || args.iter().any(walk),
        }
    }
    Ok(walk(&parse_node(s)?))
}

/// Splits a comma-separated list at top-level commas only.
pub fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}
