//! PDDL domain assembly, emission and syntax checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::synthesis::{normalize_identifier, ActionModel, Literal, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    Subject,
    Object,
    Either,
}

impl ArgType {
    fn of(param: Param) -> Self {
        match param {
            Param::X => ArgType::Subject,
            Param::O => ArgType::Object,
        }
    }

    fn join(self, other: ArgType) -> ArgType {
        if self == other {
            self
        } else {
            ArgType::Either
        }
    }

    fn render(self) -> &'static str {
        match self {
            ArgType::Subject => "subject",
            ArgType::Object => "object",
            ArgType::Either => "(either subject object)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateDecl {
    pub name: String,
    pub arg_types: Vec<ArgType>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanningDomain {
    pub name: String,
    pub requirements: Vec<String>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionModel>,
}

fn unique_name(base: &str, taken: &HashSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..)
        .map(|n| format!("{base}-{n}"))
        .find(|candidate| !taken.contains(candidate))
        .expect("unbounded suffix search")
}

/// Collect predicates, resolve name clashes and compute requirements.
///
/// A predicate name used at several arities keeps its name for the most
/// frequent arity (the lower arity on ties); the other variants are renamed
/// `<name>-<arity>` throughout. Colliding action names get `-2`, `-3`, ...
pub fn assemble(actions: Vec<ActionModel>, name: &str) -> PlanningDomain {
    let mut actions = actions;

    let mut frequency: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for a in &actions {
        for l in a.preconditions.iter().chain(&a.effects) {
            *frequency.entry((l.predicate.clone(), l.args.len())).or_default() += 1;
        }
    }
    let mut by_name: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for ((pred, arity), count) in &frequency {
        by_name.entry(pred).or_default().push((*arity, *count));
    }
    let mut taken: HashSet<String> = by_name.keys().map(|s| s.to_string()).collect();
    let mut rename: HashMap<(String, usize), String> = HashMap::new();
    for (pred, mut variants) in by_name.clone() {
        if variants.len() < 2 {
            continue;
        }
        variants.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(arity, _) in &variants[1..] {
            let new = unique_name(&format!("{pred}-{arity}"), &taken);
            taken.insert(new.clone());
            rename.insert((pred.to_string(), arity), new);
        }
    }
    if !rename.is_empty() {
        for a in &mut actions {
            for l in a.preconditions.iter_mut().chain(a.effects.iter_mut()) {
                if let Some(new) = rename.get(&(l.predicate.clone(), l.args.len())) {
                    l.predicate = new.clone();
                }
            }
        }
    }

    let mut names = HashSet::new();
    for a in &mut actions {
        let base = if a.name.is_empty() { "action".to_string() } else { a.name.clone() };
        a.name = unique_name(&base, &names);
        names.insert(a.name.clone());
    }

    let mut decls: BTreeMap<String, Vec<ArgType>> = BTreeMap::new();
    for a in &actions {
        for l in a.preconditions.iter().chain(&a.effects) {
            let types: Vec<ArgType> = l.args.iter().map(|p| ArgType::of(*p)).collect();
            decls
                .entry(l.predicate.clone())
                .and_modify(|known| {
                    for (k, t) in known.iter_mut().zip(&types) {
                        *k = k.join(*t);
                    }
                })
                .or_insert(types);
        }
    }
    let predicates = decls
        .into_iter()
        .map(|(name, arg_types)| PredicateDecl { name, arg_types })
        .collect();

    let mut requirements = vec![":strips".to_string(), ":typing".to_string()];
    if actions.iter().any(|a| a.preconditions.iter().any(|l| l.negated)) {
        requirements.push(":negative-preconditions".to_string());
    }

    let name = normalize_identifier(name);
    PlanningDomain {
        name: if name.is_empty() { "domain".into() } else { name },
        requirements,
        predicates,
        actions,
    }
}

const DECL_VARS: [&str; 2] = ["?a", "?b"];

fn write_literals(out: &mut String, keyword: &str, literals: &[Literal]) {
    if literals.is_empty() {
        out.push_str(&format!("    {keyword} (and)\n"));
        return;
    }
    out.push_str(&format!("    {keyword} (and\n"));
    for l in literals {
        out.push_str(&format!("      {l}\n"));
    }
    out.push_str("    )\n");
}

/// Canonical PDDL text for a domain.
pub fn emit_pddl(domain: &PlanningDomain) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (domain {})\n", domain.name));
    out.push_str(&format!("  (:requirements {})\n", domain.requirements.join(" ")));
    out.push_str("  (:types subject object)\n");
    if domain.predicates.is_empty() {
        out.push_str("  (:predicates)\n");
    } else {
        out.push_str("  (:predicates\n");
        for p in &domain.predicates {
            let args: Vec<String> = p
                .arg_types
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let var = DECL_VARS.get(i).map(|v| v.to_string()).unwrap_or_else(|| format!("?a{i}"));
                    format!(" {var} - {}", t.render())
                })
                .collect();
            out.push_str(&format!("    ({}{})\n", p.name, args.concat()));
        }
        out.push_str("  )\n");
    }
    for a in &domain.actions {
        let params: Vec<String> = a
            .parameters()
            .iter()
            .map(|p| format!("{} - {}", p.variable(), p.type_name()))
            .collect();
        out.push_str(&format!("  (:action {}\n", a.name));
        out.push_str(&format!("    :parameters ({})\n", params.join(" ")));
        write_literals(&mut out, ":precondition", &a.preconditions);
        write_literals(&mut out, ":effect", &a.effects);
        out.push_str("  )\n");
    }
    out.push_str(")\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom { text: String, line: usize, column: usize },
    List { items: Vec<SExpr>, line: usize, column: usize },
}

impl SExpr {
    pub fn position(&self) -> (usize, usize) {
        match self {
            SExpr::Atom { line, column, .. } | SExpr::List { line, column, .. } => (*line, *column),
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn items(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    fn head(&self) -> Option<&str> {
        self.items().and_then(|i| i.first()).and_then(SExpr::atom)
    }
}

/// Parse a sequence of s-expressions. `;` starts a comment to end of line.
/// Atoms are lowercased, since PDDL is case-insensitive.
pub fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, Diagnostic> {
    let mut stack: Vec<(Vec<SExpr>, usize, usize)> = vec![(Vec::new(), 0, 0)];
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    let mut atom: Option<(String, usize, usize)> = None;

    fn flush(atom: &mut Option<(String, usize, usize)>, stack: &mut [(Vec<SExpr>, usize, usize)]) {
        if let Some((text, line, column)) = atom.take() {
            stack.last_mut().expect("root frame").0.push(SExpr::Atom { text, line, column });
        }
    }

    while let Some(c) = chars.next() {
        match c {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push((Vec::new(), line, column));
            }
            ')' => {
                flush(&mut atom, &mut stack);
                if stack.len() == 1 {
                    return Err(Diagnostic {
                        line,
                        column,
                        message: "unexpected ')'".into(),
                    });
                }
                let (items, l, col) = stack.pop().expect("checked depth");
                stack.last_mut().expect("root frame").0.push(SExpr::List {
                    items,
                    line: l,
                    column: col,
                });
            }
            ';' => {
                flush(&mut atom, &mut stack);
                while chars.peek().is_some_and(|&n| n != '\n') {
                    chars.next();
                    column += 1;
                }
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => match &mut atom {
                Some((text, _, _)) => text.extend(c.to_lowercase()),
                None => atom = Some((c.to_lowercase().collect(), line, column)),
            },
        }
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    flush(&mut atom, &mut stack);
    if stack.len() > 1 {
        let (_, l, col) = stack.last().expect("depth > 1");
        return Err(Diagnostic {
            line: *l,
            column: *col,
            message: "unclosed '('".into(),
        });
    }
    Ok(stack.pop().expect("root frame").0)
}

const DOMAIN_SECTIONS: &[&str] = &[":requirements", ":types", ":constants", ":predicates", ":functions", ":action"];
const ACTION_FIELDS: &[&str] = &[":parameters", ":precondition", ":effect"];
const KNOWN_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":disjunctive-preconditions",
    ":equality",
    ":existential-preconditions",
    ":universal-preconditions",
    ":quantified-preconditions",
    ":conditional-effects",
    ":adl",
];

struct Checker {
    diagnostics: Vec<Diagnostic>,
    types: HashSet<String>,
    constants: HashSet<String>,
    predicates: HashMap<String, usize>,
    requirements: HashSet<String>,
}

impl Checker {
    fn report(&mut self, at: &SExpr, message: impl Into<String>) {
        let (line, column) = at.position();
        self.diagnostics.push(Diagnostic {
            line,
            column,
            message: message.into(),
        });
    }

    fn is_name(text: &str) -> bool {
        let mut chars = text.chars();
        chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }

    fn check_type(&mut self, t: &SExpr) {
        match t {
            SExpr::Atom { text, .. } => {
                if text != "object" && !self.types.contains(text) {
                    self.report(t, format!("undeclared type {text}"));
                }
            }
            SExpr::List { items, .. } => {
                if t.head() != Some("either") || items.len() < 2 {
                    self.report(t, "malformed type expression");
                    return;
                }
                for item in &items[1..] {
                    if item.items().is_some() {
                        self.report(item, "nested type expression");
                    } else {
                        self.check_type(item);
                    }
                }
            }
        }
    }

    /// Typed list `a b - t c - u`; returns the names in order.
    fn typed_list(&mut self, items: &[SExpr], variables: bool) -> Vec<String> {
        let mut names = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let item = &items[i];
            match item.atom() {
                Some("-") => {
                    match items.get(i + 1) {
                        Some(t) => {
                            if self.requirements.contains(":typing") || !variables {
                                self.check_type(t);
                            }
                        }
                        None => self.report(item, "'-' without a type"),
                    }
                    i += 2;
                    continue;
                }
                Some(name) => {
                    let ok = if variables {
                        name.len() > 1 && name.starts_with('?') && Self::is_name(&name[1..])
                    } else {
                        Self::is_name(name)
                    };
                    if !ok {
                        self.report(item, format!("malformed name {name}"));
                    }
                    if names.contains(&name.to_string()) {
                        self.report(item, format!("duplicate name {name}"));
                    }
                    names.push(name.to_string());
                }
                None => self.report(item, "unexpected list in typed list"),
            }
            i += 1;
        }
        names
    }

    fn check_atom(&mut self, expr: &SExpr, items: &[SExpr], params: &HashSet<String>) {
        let Some(pred) = items.first().and_then(SExpr::atom) else {
            self.report(expr, "literal without a predicate name");
            return;
        };
        let args = &items[1..];
        match self.predicates.get(pred) {
            None => self.report(expr, format!("undeclared predicate {pred}")),
            Some(&arity) if arity != args.len() => self.report(
                expr,
                format!("predicate {pred} expects {arity} argument(s), got {}", args.len()),
            ),
            _ => {}
        }
        for arg in args {
            match arg.atom() {
                Some(v) if v.starts_with('?') => {
                    if !params.contains(v) {
                        self.report(arg, format!("undeclared parameter {v}"));
                    }
                }
                Some(c) => {
                    if !self.constants.contains(c) {
                        self.report(arg, format!("undeclared constant {c}"));
                    }
                }
                None => self.report(arg, "nested term in literal"),
            }
        }
    }

    fn check_condition(&mut self, expr: &SExpr, params: &HashSet<String>, effect: bool) {
        let Some(items) = expr.items() else {
            self.report(expr, "expected a parenthesized formula");
            return;
        };
        match expr.head() {
            Some("and") => {
                for sub in &items[1..] {
                    self.check_condition(sub, params, effect);
                }
            }
            Some("not") => {
                if items.len() != 2 {
                    self.report(expr, "'not' takes exactly one formula");
                    return;
                }
                if !effect && !self.requirements.contains(":negative-preconditions") && !self.requirements.contains(":adl")
                {
                    self.report(expr, "negative precondition without :negative-preconditions");
                }
                match items[1].items() {
                    Some(inner) if items[1].head().is_some_and(|h| !matches!(h, "and" | "not" | "or")) => {
                        self.check_atom(&items[1], inner, params)
                    }
                    _ if effect => self.report(&items[1], "effects may only negate atoms"),
                    _ => self.check_condition(&items[1], params, effect),
                }
            }
            Some("or") if !effect => {
                for sub in &items[1..] {
                    self.check_condition(sub, params, effect);
                }
            }
            _ => self.check_atom(expr, items, params),
        }
    }

    fn check_action(&mut self, expr: &SExpr, items: &[SExpr]) -> Option<String> {
        let name = match items.get(1).and_then(SExpr::atom) {
            Some(n) if Self::is_name(n) => Some(n.to_string()),
            _ => {
                self.report(expr, "action without a valid name");
                None
            }
        };
        let mut params = HashSet::new();
        let mut seen = HashSet::new();
        let mut rest = items.iter().skip(2);
        let mut fields = Vec::new();
        while let Some(key) = rest.next() {
            match key.atom() {
                Some(k) if ACTION_FIELDS.contains(&k) => match rest.next() {
                    Some(value) => {
                        if !seen.insert(k.to_string()) {
                            self.report(key, format!("duplicate {k}"));
                        }
                        fields.push((k.to_string(), value));
                    }
                    None => self.report(key, format!("{k} without a value")),
                },
                Some(k) => self.report(key, format!("unknown action field {k}")),
                None => self.report(key, "expected an action field keyword"),
            }
        }
        // parameters first so literals can be checked against them
        for (k, value) in &fields {
            if k == ":parameters" {
                match value.items() {
                    Some(list) => params.extend(self.typed_list(list, true)),
                    None => self.report(value, ":parameters expects a list"),
                }
            }
        }
        for (k, value) in &fields {
            match k.as_str() {
                ":precondition" => self.check_condition(value, &params, false),
                ":effect" => self.check_condition(value, &params, true),
                _ => {}
            }
        }
        name
    }
}

/// Syntax and consistency diagnostics for a PDDL domain; empty when valid.
pub fn validate_syntax(text: &str) -> Vec<Diagnostic> {
    let exprs = match parse_sexprs(text) {
        Ok(e) => e,
        Err(d) => return vec![d],
    };
    let mut checker = Checker {
        diagnostics: Vec::new(),
        types: HashSet::new(),
        constants: HashSet::new(),
        predicates: HashMap::new(),
        requirements: HashSet::new(),
    };
    let Some(root) = exprs.first() else {
        return vec![Diagnostic {
            line: 1,
            column: 1,
            message: "empty input".into(),
        }];
    };
    for extra in &exprs[1..] {
        checker.report(extra, "unexpected content after domain");
    }
    let Some(items) = root.items().filter(|_| root.head() == Some("define")) else {
        checker.report(root, "expected (define (domain NAME) ...)");
        return checker.diagnostics;
    };
    match items.get(1) {
        Some(d) if d.head() == Some("domain") && d.items().map(<[SExpr]>::len) == Some(2) => {
            if !d.items().unwrap()[1].atom().is_some_and(Checker::is_name) {
                checker.report(d, "invalid domain name");
            }
        }
        Some(d) => checker.report(d, "expected (domain NAME)"),
        None => checker.report(root, "missing (domain NAME)"),
    }

    let sections = &items[2.min(items.len())..];
    // declarations first, so section order does not matter for lookups
    for section in sections {
        let Some(list) = section.items() else {
            checker.report(section, "expected a section");
            continue;
        };
        match section.head() {
            Some(":requirements") => {
                for r in &list[1..] {
                    match r.atom() {
                        Some(req) if KNOWN_REQUIREMENTS.contains(&req) => {
                            checker.requirements.insert(req.to_string());
                        }
                        Some(req) => checker.report(r, format!("unknown requirement {req}")),
                        None => checker.report(r, "malformed requirement"),
                    }
                }
            }
            Some(":types") => {
                let names: Vec<String> = list[1..]
                    .iter()
                    .filter_map(SExpr::atom)
                    .filter(|a| *a != "-")
                    .map(str::to_string)
                    .collect();
                checker.types.extend(names);
            }
            _ => {}
        }
    }
    for section in sections {
        let Some(list) = section.items() else { continue };
        match section.head() {
            Some(":types") => {
                let _ = checker.typed_list(&list[1..], false);
            }
            Some(":constants") => {
                let names = checker.typed_list(&list[1..], false);
                checker.constants.extend(names);
            }
            Some(":predicates") => {
                for p in &list[1..] {
                    match (p.head(), p.items()) {
                        (Some(name), Some(sig)) if Checker::is_name(name) => {
                            let vars = checker.typed_list(&sig[1..], true);
                            if checker.predicates.insert(name.to_string(), vars.len()).is_some() {
                                checker.report(p, format!("predicate {name} declared twice"));
                            }
                        }
                        _ => checker.report(p, "malformed predicate declaration"),
                    }
                }
            }
            _ => {}
        }
    }
    let mut actions = HashSet::new();
    let mut seen_sections = HashSet::new();
    for section in sections {
        let Some(list) = section.items() else { continue };
        match section.head() {
            Some(":action") => {
                if let Some(name) = checker.check_action(section, list) {
                    if !actions.insert(name.clone()) {
                        checker.report(section, format!("duplicate action {name}"));
                    }
                }
            }
            Some(s) if DOMAIN_SECTIONS.contains(&s) => {
                if !seen_sections.insert(s.to_string()) {
                    checker.report(section, format!("duplicate section {s}"));
                }
            }
            Some(s) => checker.report(section, format!("unknown section {s}")),
            None => checker.report(section, "section without a keyword"),
        }
    }
    checker.diagnostics
}

/// Action name with its rendered precondition and effect conjuncts.
pub type ActionSummary = (String, BTreeSet<String>, BTreeSet<String>);

/// Action names and literal renderings read back from PDDL text, for
/// round-trip checks.
pub fn read_actions(text: &str) -> Result<Vec<ActionSummary>, Diagnostic> {
    fn render(e: &SExpr) -> String {
        match e {
            SExpr::Atom { text, .. } => text.clone(),
            SExpr::List { items, .. } => format!("({})", items.iter().map(render).collect::<Vec<_>>().join(" ")),
        }
    }
    fn conjuncts(e: &SExpr) -> BTreeSet<String> {
        match (e.head(), e.items()) {
            (Some("and"), Some(items)) => items[1..].iter().map(render).collect(),
            _ => [render(e)].into(),
        }
    }
    let exprs = parse_sexprs(text)?;
    let mut out = Vec::new();
    for e in exprs.iter().filter_map(SExpr::items).flatten() {
        if e.head() != Some(":action") {
            continue;
        }
        let items = e.items().expect("has head");
        let name = items.get(1).and_then(SExpr::atom).unwrap_or_default().to_string();
        let field = |k: &str| {
            items
                .windows(2)
                .find(|w| w[0].atom() == Some(k))
                .map(|w| conjuncts(&w[1]))
                .unwrap_or_default()
        };
        out.push((name, field(":precondition"), field(":effect")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::Relation;

    fn lit(pred: &str, args: &[Param], negated: bool) -> Literal {
        Literal {
            predicate: pred.into(),
            args: args.to_vec(),
            negated,
            source_relation: Relation::XNeed,
            probability: 0.9,
            phrase: pred.replace('-', " "),
        }
    }

    fn action(name: &str, has_object: bool, pre: Vec<Literal>, eff: Vec<Literal>) -> ActionModel {
        ActionModel {
            name: name.into(),
            has_object,
            subject_text: "a".into(),
            object_text: has_object.then(|| "b".into()),
            preconditions: pre,
            effects: eff,
        }
    }

    use Param::{O, X};

    fn hit() -> ActionModel {
        action(
            "hit",
            true,
            vec![
                lit("close-to", &[X, O], false),
                lit("angry-at", &[X, O], false),
                lit("in-a-fight", &[X, O], false),
            ],
            vec![
                lit("yell-at", &[O, X], false),
                lit("injured", &[O], false),
                lit("close-to", &[X, O], true),
            ],
        )
    }

    fn squash(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ").replace("( ", "(").replace(" )", ")")
    }

    #[test]
    fn bryan_hits_action_block() {
        let text = emit_pddl(&assemble(vec![hit()], "story"));
        let expected = "(:action hit :parameters (?x - subject ?o - object) \
             :precondition (and (close-to ?x ?o) (angry-at ?x ?o) (in-a-fight ?x ?o)) \
             :effect (and (yell-at ?o ?x) (injured ?o) (not (close-to ?x ?o))))";
        assert!(squash(&text).contains(&squash(expected)), "{text}");
        assert!(validate_syntax(&text).is_empty(), "{:?}", validate_syntax(&text));
        assert!(text.contains("(:requirements :strips :typing)\n"));
        assert!(text.contains("(close-to ?a - subject ?b - object)"));
        assert!(text.contains("(yell-at ?a - object ?b - subject)"));
    }

    #[test]
    fn shared_predicate_deduplicated() {
        let a = action("a", true, vec![], vec![lit("injured", &[O], false)]);
        let b = action("b", true, vec![], vec![lit("injured", &[O], false)]);
        let d = assemble(vec![a, b], "t");
        assert_eq!(d.predicates.len(), 1);
    }

    #[test]
    fn mixed_positions_use_either() {
        let a = action("a", true, vec![lit("injured", &[X], false)], vec![lit("injured", &[O], false)]);
        let d = assemble(vec![a], "t");
        assert_eq!(d.predicates[0].arg_types, vec![ArgType::Either]);
        let text = emit_pddl(&d);
        assert!(text.contains("(injured ?a - (either subject object))"));
        assert!(validate_syntax(&text).is_empty());
    }

    #[test]
    fn arity_conflict_renamed() {
        let a = action("a", true, vec![lit("injured", &[X], false)], vec![lit("injured", &[X, O], false)]);
        let d = assemble(vec![a], "t");
        let names: Vec<&str> = d.predicates.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["injured", "injured-2"]);
        assert_eq!(d.actions[0].effects[0].predicate, "injured-2");
        assert!(validate_syntax(&emit_pddl(&d)).is_empty());
    }

    #[test]
    fn arity_conflict_frequency_wins() {
        let a = action("a", true, vec![lit("p", &[X, O], false)], vec![lit("p", &[O, X], false)]);
        let b = action("b", true, vec![lit("p", &[X], false)], vec![]);
        let d = assemble(vec![a, b], "t");
        assert_eq!(d.actions[0].preconditions[0].predicate, "p");
        assert_eq!(d.actions[1].preconditions[0].predicate, "p-1");
    }

    #[test]
    fn duplicate_action_names() {
        let d = assemble(vec![hit(), hit(), hit()], "t");
        let names: Vec<&str> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["hit", "hit-2", "hit-3"]);
    }

    #[test]
    fn empty_domain_is_valid() {
        let text = emit_pddl(&assemble(vec![], "empty"));
        assert!(text.contains("(:predicates)"));
        assert!(validate_syntax(&text).is_empty(), "{text}");
    }

    #[test]
    fn no_object_parameter() {
        let a = action("die", false, vec![], vec![lit("dead", &[X], false)]);
        let text = emit_pddl(&assemble(vec![a], "t"));
        assert!(text.contains(":parameters (?x - subject)\n"));
    }

    #[test]
    fn negative_precondition_requirement() {
        let a = action("go", false, vec![lit("gone", &[X], true)], vec![lit("gone", &[X], false)]);
        let d = assemble(vec![a], "t");
        assert!(d.requirements.contains(&":negative-preconditions".to_string()));
        let text = emit_pddl(&d);
        assert!(validate_syntax(&text).is_empty());
        let stripped = text.replace(" :negative-preconditions", "");
        assert_eq!(validate_syntax(&stripped).len(), 1);
    }

    #[test]
    fn unbalanced_paren_reported_with_position() {
        let text = emit_pddl(&assemble(vec![hit()], "t"));
        let broken = text.replacen("(injured ?o)", "(injured ?o", 1);
        let diags = validate_syntax(&broken);
        assert_eq!(diags.len(), 1);
        // the lost ')' leaves the outermost list open
        assert_eq!((diags[0].line, diags[0].column), (1, 1));
        assert!(diags[0].message.contains("unclosed"));
        let extra = format!("{text})");
        let diags = validate_syntax(&extra);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("')'"));
    }

    #[test]
    fn undeclared_parameter_named() {
        let text = emit_pddl(&assemble(vec![hit()], "t")).replacen("(injured ?o)", "(injured ?z)", 1);
        let diags = validate_syntax(&text);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("?z"));
    }

    #[test]
    fn undeclared_predicate_and_bad_section() {
        let text = "(define (domain t) (:requirements :strips) (:action a :parameters (?x) :precondition (and) :effect (and (p ?x))) (:bogus))";
        let diags = validate_syntax(text);
        assert_eq!(diags.len(), 2, "{diags:?}");
    }

    #[test]
    fn read_back_literals() {
        let text = emit_pddl(&assemble(vec![hit()], "t"));
        let read = read_actions(&text).unwrap();
        assert_eq!(read[0].0, "hit");
        assert!(read[0].2.contains("(not (close-to ?x ?o))"));
        assert_eq!(read[0].1.len(), 3);
    }

    #[test]
    fn emit_is_deterministic() {
        let d = assemble(vec![hit()], "t");
        assert_eq!(emit_pddl(&d), emit_pddl(&d.clone()));
    }
}
