//! Problem definition: exponents, envelope constants, and the two
//! right-hand sides written in a small expression language.
//!
//! Grammar of a rule (whitespace is ignored):
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' expo)?
//! atom   := number | param | 's1' | 's2' | '|xi1|' | '|xi2|' | '(' expr ')'
//! expo   := '-'? (number | param)
//! param  := alpha1 | alpha2 | beta1 | beta2 | gamma1 | gamma2
//!         | theta1 | theta2 | m1 | m2 | M1 | M2
//! ```
//!
//! Parameters resolve against the owning [`SystemSpec`] at evaluation time,
//! so a rule such as `M1 * s1^alpha1 * s2^beta1` follows parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Alpha(usize),
    Beta(usize),
    Gamma(usize),
    Theta(usize),
    SmallM(usize),
    BigM(usize),
}

impl Param {
    fn parse(name: &str) -> Option<Self> {
        let (head, idx) = name.split_at(name.len().checked_sub(1)?);
        let i = match idx {
            "1" => 0,
            "2" => 1,
            _ => return None,
        };
        Some(match head {
            "alpha" => Param::Alpha(i),
            "beta" => Param::Beta(i),
            "gamma" => Param::Gamma(i),
            "theta" => Param::Theta(i),
            "m" => Param::SmallM(i),
            "M" => Param::BigM(i),
            _ => return None,
        })
    }

    fn value(self, spec: &SystemSpec) -> f64 {
        match self {
            Param::Alpha(i) => spec.alpha[i],
            Param::Beta(i) => spec.beta[i],
            Param::Gamma(i) => spec.gamma[i],
            Param::Theta(i) => spec.theta[i],
            Param::SmallM(i) => spec.m[i],
            Param::BigM(i) => spec.big_m[i],
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, i) = match *self {
            Param::Alpha(i) => ("alpha", i),
            Param::Beta(i) => ("beta", i),
            Param::Gamma(i) => ("gamma", i),
            Param::Theta(i) => ("theta", i),
            Param::SmallM(i) => ("m", i),
            Param::BigM(i) => ("M", i),
        };
        write!(f, "{name}{}", i + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Num(f64),
    Param(Param),
    Neg(Param),
}

impl Scalar {
    fn value(self, spec: &SystemSpec) -> f64 {
        match self {
            Scalar::Num(x) => x,
            Scalar::Param(p) => p.value(spec),
            Scalar::Neg(p) => -p.value(spec),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Num(x) => write!(f, "{x:?}"),
            Scalar::Param(p) => write!(f, "{p}"),
            Scalar::Neg(p) => write!(f, "-{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    S1,
    S2,
    Xi1,
    Xi2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Scalar),
    Var(Var),
    Pow(Box<Expr>, Scalar),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
}

/// Arguments of a rule: the two unknowns and the magnitudes of their gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Args {
    pub s1: f64,
    pub s2: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl Expr {
    pub fn eval(&self, spec: &SystemSpec, a: &Args) -> f64 {
        match self {
            Expr::Const(c) => c.value(spec),
            Expr::Var(Var::S1) => a.s1,
            Expr::Var(Var::S2) => a.s2,
            Expr::Var(Var::Xi1) => a.xi1.abs(),
            Expr::Var(Var::Xi2) => a.xi2.abs(),
            Expr::Pow(base, e) => {
                let e = e.value(spec);
                if e == 0.0 {
                    1.0
                } else {
                    base.eval(spec, a).powf(e)
                }
            }
            Expr::Sum(ts) => ts.iter().map(|t| t.eval(spec, a)).sum(),
            Expr::Product(fs) => fs.iter().map(|t| t.eval(spec, a)).product(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        match self {
            Expr::Const(Scalar::Neg(p)) => write!(f, "(-{p})"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::S1) => f.write_str("s1"),
            Expr::Var(Var::S2) => f.write_str("s2"),
            Expr::Var(Var::Xi1) => f.write_str("|xi1|"),
            Expr::Var(Var::Xi2) => f.write_str("|xi2|"),
            Expr::Pow(b, e) => {
                b.fmt_prec(f, 3)?;
                write!(f, "^{e}")
            }
            Expr::Sum(ts) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    t.fmt_prec(f, 1)?;
                }
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Product(fs) => {
                if prec > 2 {
                    f.write_str("(")?;
                }
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" * ")?;
                    }
                    t.fmt_prec(f, 2)?;
                }
                if prec > 2 {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Parse(format!("{msg} at offset {} in `{}`", self.pos, self.src)))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let mut end = 0;
        let b = rest.as_bytes();
        while end < b.len() && (b[end].is_ascii_digit() || b[end] == b'.') {
            end += 1;
        }
        if end == 0 {
            return None;
        }
        if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
            let mut k = end + 1;
            if k < b.len() && (b[k] == b'-' || b[k] == b'+') {
                k += 1;
            }
            let digits = k;
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits {
                end = k;
            }
        }
        let v = rest[..end].parse().ok()?;
        self.pos += end;
        Some(v)
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let end = rest.find(|c: char| !c.is_ascii_alphanumeric()).unwrap_or(rest.len());
        if end == 0 || !rest.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return None;
        }
        self.pos += end;
        Some(&rest[..end])
    }

    fn scalar(&mut self) -> Result<Scalar> {
        let neg = self.eat("-");
        if let Some(x) = self.number() {
            return Ok(Scalar::Num(if neg { -x } else { x }));
        }
        match self.ident().and_then(Param::parse) {
            Some(p) if neg => Ok(Scalar::Neg(p)),
            Some(p) => Ok(Scalar::Param(p)),
            None => self.err("expected a number or parameter name"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        while self.eat("+") {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut fs = vec![self.factor()?];
        while self.eat("*") {
            fs.push(self.factor()?);
        }
        Ok(if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) })
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat("^") {
            Ok(Expr::Pow(Box::new(base), self.scalar()?))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        if self.eat("(") {
            if self.eat("-") {
                // negated parameter, as printed by Display
                let p = self.ident().and_then(Param::parse);
                return match p {
                    Some(p) if self.eat(")") => Ok(Expr::Const(Scalar::Neg(p))),
                    _ => self.err("expected `(-param)`"),
                };
            }
            let e = self.expr()?;
            if !self.eat(")") {
                return self.err("expected `)`");
            }
            return Ok(e);
        }
        if self.eat("|xi1|") {
            return Ok(Expr::Var(Var::Xi1));
        }
        if self.eat("|xi2|") {
            return Ok(Expr::Var(Var::Xi2));
        }
        if let Some(x) = self.number() {
            if x < 0.0 || !x.is_finite() {
                return self.err("constants must be finite and nonnegative");
            }
            return Ok(Expr::Const(Scalar::Num(x)));
        }
        let at = self.pos;
        match self.ident() {
            Some("s1") => Ok(Expr::Var(Var::S1)),
            Some("s2") => Ok(Expr::Var(Var::S2)),
            Some(name) => match Param::parse(name) {
                Some(p) => Ok(Expr::Const(Scalar::Param(p))),
                None => {
                    self.pos = at;
                    self.err(&format!("unknown name `{name}`"))
                }
            },
            None => self.err("expected an operand"),
        }
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Geometry of the computational domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub extents: Vec<(f64, f64)>,
    /// Default node counts per axis; command-line overrides take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Exponents {
    p: [f64; 2],
    alpha: [f64; 2],
    beta: [f64; 2],
    #[serde(default)]
    gamma: [f64; 2],
    #[serde(default)]
    theta: [f64; 2],
    r: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope {
    m: [f64; 2],
    #[serde(rename = "M")]
    big_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Rule {
    expr: Expr,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    domain: Domain,
    exponents: Exponents,
    envelope: Envelope,
    f1: Rule,
    f2: Rule,
}

/// Full description of a two-component system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub domain: Domain,
    pub p: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
    pub theta: [f64; 2],
    pub m: [f64; 2],
    pub big_m: [f64; 2],
    pub r: [f64; 2],
    pub f: [Expr; 2],
}

impl SystemSpec {
    /// Spatial dimension N.
    pub fn n_dim(&self) -> usize {
        self.domain.dim
    }

    /// `alpha_i + beta_i`.
    pub fn s(&self, i: usize) -> f64 {
        self.alpha[i] + self.beta[i]
    }

    pub fn max_growth(&self, i: usize) -> f64 {
        self.gamma[i].max(self.theta[i])
    }

    /// Sets a parameter by name: `p1`, `alpha2`, `beta1`, `gamma1`, `theta2`,
    /// `m1`, `M2`, `r1`, ...
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let bad = || Error::Config(format!("unknown parameter `{name}`"));
        let (head, idx) = name.split_at(name.len().checked_sub(1).ok_or_else(bad)?);
        let i = match idx {
            "1" => 0,
            "2" => 1,
            _ => return Err(bad()),
        };
        let slot = match head {
            "p" => &mut self.p,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "theta" => &mut self.theta,
            "m" => &mut self.m,
            "M" => &mut self.big_m,
            "r" => &mut self.r,
            _ => return Err(bad()),
        };
        slot[i] = value;
        Ok(())
    }

    /// Structural sanity: finite values, `p > 1`, positive envelope constants,
    /// nonnegative gradient exponents. Admissibility is [`validate_cdt`]'s job.
    pub fn check_well_formed(&self) -> Result<()> {
        let all = [self.p, self.alpha, self.beta, self.gamma, self.theta, self.m, self.big_m, self.r];
        if all.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        for i in 0..2 {
            if !(self.p[i] > 1.0) {
                return Err(Error::Config(format!("p{} = {} must exceed 1", i + 1, self.p[i])));
            }
            if !(self.m[i] > 0.0 && self.big_m[i] > 0.0) {
                return Err(Error::Config(format!("envelope constants m{0}, M{0} must be positive", i + 1)));
            }
            if self.gamma[i] < 0.0 || self.theta[i] < 0.0 {
                return Err(Error::Config(format!("gamma{0}, theta{0} must be nonnegative", i + 1)));
            }
        }
        if self.domain.dim != self.domain.extents.len() || !(1..=2).contains(&self.domain.dim) {
            return Err(Error::Config("domain extents must match dim (1 or 2)".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: SpecFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spec = SystemSpec {
            domain: f.domain,
            p: f.exponents.p,
            alpha: f.exponents.alpha,
            beta: f.exponents.beta,
            gamma: f.exponents.gamma,
            theta: f.exponents.theta,
            m: f.envelope.m,
            big_m: f.envelope.big_m,
            r: f.exponents.r,
            f: [f.f1.expr, f.f2.expr],
        };
        spec.check_well_formed()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        let f = SpecFile {
            domain: self.domain.clone(),
            exponents: Exponents {
                p: self.p,
                alpha: self.alpha,
                beta: self.beta,
                gamma: self.gamma,
                theta: self.theta,
                r: self.r,
            },
            envelope: Envelope { m: self.m, big_m: self.big_m },
            f1: Rule { expr: self.f[0].clone() },
            f2: Rule { expr: self.f[1].clone() },
        };
        toml::to_string(&f).expect("spec serializes")
    }

    /// Pure-power system `f_i = m_i s1^alpha_i s2^beta_i` on the unit square
    /// (or interval), with `m_i = M_i = 1`.
    pub fn pure_power(dim: usize, p: [f64; 2], alpha: [f64; 2], beta: [f64; 2], r: [f64; 2]) -> Self {
        SystemSpec {
            domain: Domain { dim, extents: vec![(0.0, 1.0); dim], n: None },
            p,
            alpha,
            beta,
            gamma: [0.0; 2],
            theta: [0.0; 2],
            m: [1.0; 2],
            big_m: [1.0; 2],
            r,
            f: [
                "M1 * s1^alpha1 * s2^beta1".parse().unwrap(),
                "M2 * s1^alpha2 * s2^beta2".parse().unwrap(),
            ],
        }
    }
}

/// One inequality of the admissibility check; `margin > 0` means satisfied
/// (or, for the closed left end, `margin >= 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdtReport {
    pub conditions: Vec<Condition>,
    /// The derived exponent inequalities on `gamma_i p_i'` and `theta_i p_i'`.
    pub derived: Vec<Condition>,
}

impl CdtReport {
    /// True when every primary condition holds.
    pub fn pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn derived_pass(&self) -> bool {
        self.derived.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.pass).collect()
    }
}

impl fmt::Display for CdtReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.conditions.iter().chain(&self.derived) {
            writeln!(f, "{} = {} (margin {:.6e})", c.name, if c.pass { "pass" } else { "fail" }, c.margin)?;
        }
        Ok(())
    }
}

/// Checks the admissibility conditions per component: `r_i > N`,
/// `-1/r_i <= alpha_i + beta_i < (p_i - 1)/r_i`, `max(gamma_i, theta_i) < (p_i - 1)/r_i`,
/// plus the derived exponent bounds on `gamma_i p_i'` and `theta_i p_i'`.
pub fn validate_cdt(spec: &SystemSpec) -> CdtReport {
    let n = spec.n_dim() as f64;
    let mut conditions = Vec::new();
    let mut push = |name: String, margin: f64, closed: bool| {
        let pass = if closed { margin >= 0.0 } else { margin > 0.0 };
        conditions.push(Condition { name, pass, margin });
    };
    for i in 0..2 {
        let k = i + 1;
        let (p, r, s) = (spec.p[i], spec.r[i], spec.s(i));
        push(format!("r{k} > N"), r - n, false);
        push(format!("alpha{k}+beta{k} >= -1/r{k}"), s + 1.0 / r, true);
        push(format!("alpha{k}+beta{k} < (p{k}-1)/r{k}"), (p - 1.0) / r - s, false);
        push(format!("max(gamma{k},theta{k}) < (p{k}-1)/r{k}"), (p - 1.0) / r - spec.max_growth(i), false);
    }
    let conj = |p: f64| p / (p - 1.0);
    let g = (0..2).map(|i| spec.gamma[i] * conj(spec.p[i])).fold(f64::NEG_INFINITY, f64::max);
    let t = (0..2).map(|i| spec.theta[i] * conj(spec.p[i])).fold(f64::NEG_INFINITY, f64::max);
    let derived = vec![
        Condition { name: "max_i gamma_i p_i' < p1".into(), pass: g < spec.p[0], margin: spec.p[0] - g },
        Condition { name: "max_i theta_i p_i' < p2".into(), pass: t < spec.p[1], margin: spec.p[1] - t },
    ];
    CdtReport { conditions, derived }
}

/// Evaluates `f_i` (0-based `i`) at the given arguments.
pub fn eval_f(spec: &SystemSpec, i: usize, args: &Args) -> Result<f64> {
    if !(args.s1 > 0.0 && args.s2 > 0.0) {
        return Err(Error::Domain(format!("f{} needs positive arguments, got s1 = {}, s2 = {}", i + 1, args.s1, args.s2)));
    }
    let v = spec.f[i].eval(spec, args);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("f{} evaluated to {v} at {args:?}", i + 1)));
    }
    Ok(v)
}

/// `m_i s1^alpha_i s2^beta_i` and `M_i s1^alpha_i s2^beta_i + |xi1|^gamma_i + |xi2|^theta_i`.
pub fn envelope(spec: &SystemSpec, i: usize, a: &Args) -> (f64, f64) {
    let core = a.s1.powf(spec.alpha[i]) * a.s2.powf(spec.beta[i]);
    let pw = |x: f64, e: f64| if e == 0.0 { 1.0 } else { x.abs().powf(e) };
    (spec.m[i] * core, spec.big_m[i] * core + pw(a.xi1, spec.gamma[i]) + pw(a.xi2, spec.theta[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// Smallest `f_i / lower_i - 1` seen, per component.
    pub lower_margin: [f64; 2],
    /// Smallest `1 - f_i / upper_i` seen, per component.
    pub upper_margin: [f64; 2],
}

/// Samples `s1, s2` log-uniformly in `[1e-3, 1e3]` and `|xi1|, |xi2|` uniformly in
/// `[0, 100]`, and checks both envelope inequalities (relative slack `1e-12`).
pub fn check_envelope(spec: &SystemSpec, samples: usize, seed: u64) -> Result<EnvelopeReport> {
    const SLACK: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower_margin = [f64::INFINITY; 2];
    let mut upper_margin = [f64::INFINITY; 2];
    for _ in 0..samples {
        let a = Args {
            s1: 10f64.powf(rng.gen_range(-3.0..=3.0)),
            s2: 10f64.powf(rng.gen_range(-3.0..=3.0)),
            xi1: rng.gen_range(0.0..=100.0),
            xi2: rng.gen_range(0.0..=100.0),
        };
        for i in 0..2 {
            let v = eval_f(spec, i, &a).map_err(|e| Error::SpecInvalid(e.to_string()))?;
            let (lo, hi) = envelope(spec, i, &a);
            let (ml, mu) = (v / lo - 1.0, 1.0 - v / hi);
            if ml < -SLACK {
                return Err(Error::SpecInvalid(format!("f{} = {v:.6e} below m{}-bound {lo:.6e} at {a:?}", i + 1, i + 1)));
            }
            if mu < -SLACK {
                return Err(Error::SpecInvalid(format!("f{} = {v:.6e} above M{}-bound {hi:.6e} at {a:?}", i + 1, i + 1)));
            }
            lower_margin[i] = lower_margin[i].min(ml);
            upper_margin[i] = upper_margin[i].min(mu);
        }
    }
    Ok(EnvelopeReport { samples, lower_margin, upper_margin })
}
