use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;

use super::ast::*;
use super::sexpr::{self, Pos, SExpr};
use super::PddlError;

const SUPPORTED_REQUIREMENTS: [&str; 4] = [":strips", ":typing", ":equality", ":action-costs"];

fn syntax(pos: Pos, msg: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

fn unsupported(pos: Pos, feature: impl Into<String>) -> PddlError {
    PddlError::UnsupportedFeature {
        line: pos.line,
        col: pos.col,
        feature: feature.into(),
    }
}

fn expect_atom(e: &SExpr, what: &str) -> Result<String, PddlError> {
    e.as_atom()
        .map(str::to_string)
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

/// Splits `(define (<kind> name) sections...)`.
fn define_header<'a>(root: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "(define ...)")?;
    if items.first().and_then(SExpr::as_atom) != Some("define") {
        return Err(syntax(root.pos(), "expected 'define'"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(root.pos(), format!("missing ({kind} <name>)")))?;
    let h = expect_list(header, "header list")?;
    if h.len() != 2 || h[0].as_atom() != Some(kind) {
        return Err(syntax(header.pos(), format!("expected ({kind} <name>)")));
    }
    Ok((expect_atom(&h[1], "name")?, &items[2..]))
}

/// Parses `a b - t c - u d` into typed names; untyped entries default to `object`.
fn typed_list(items: &[SExpr]) -> Result<Vec<TypedName>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let tok = &items[i];
        match tok.as_atom() {
            Some("-") => {
                let ty_expr = items
                    .get(i + 1)
                    .ok_or_else(|| syntax(tok.pos(), "type expected after '-'"))?;
                if ty_expr.head() == Some("either") {
                    return Err(unsupported(ty_expr.pos(), "either-types"));
                }
                let ty = expect_atom(ty_expr, "type name")?;
                if pending.is_empty() {
                    return Err(syntax(tok.pos(), "'-' without preceding names"));
                }
                out.extend(pending.drain(..).map(|name| TypedName {
                    name,
                    ty: ty.clone(),
                }));
                i += 2;
            }
            Some(name) => {
                pending.push(name.to_string());
                i += 1;
            }
            None => return Err(syntax(tok.pos(), "expected a name")),
        }
    }
    out.extend(pending.into_iter().map(|name| TypedName {
        name,
        ty: ROOT_TYPE.to_string(),
    }));
    Ok(out)
}

fn parse_requirements(items: &[SExpr]) -> Result<Vec<String>, PddlError> {
    let mut reqs = Vec::new();
    for r in items {
        let flag = expect_atom(r, "requirement flag")?;
        if !SUPPORTED_REQUIREMENTS.contains(&flag.as_str()) {
            return Err(PddlError::UnsupportedRequirement(flag));
        }
        if flag == ":action-costs" {
            warn!("':action-costs' requested; action costs are ignored and forced to 1");
        }
        reqs.push(flag);
    }
    Ok(reqs)
}

pub fn parse_domain(text: &str) -> Result<DomainAst, PddlError> {
    let root = sexpr::read(text)?;
    let (name, sections) = define_header(&root, "domain")?;
    let mut domain = DomainAst {
        name,
        requirements: Vec::new(),
        types: BTreeMap::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        action_schemas: Vec::new(),
    };
    let mut raw_actions = Vec::new();
    for sec in sections {
        let items = expect_list(sec, "domain section")?;
        let key = items
            .first()
            .and_then(SExpr::as_atom)
            .ok_or_else(|| syntax(sec.pos(), "section keyword expected"))?;
        let body = &items[1..];
        match key {
            ":requirements" => domain.requirements.extend(parse_requirements(body)?),
            ":types" => {
                for t in typed_list(body)? {
                    if t.name == ROOT_TYPE {
                        continue;
                    }
                    domain.types.insert(t.name, t.ty);
                }
            }
            ":constants" => domain.constants.extend(typed_list(body)?),
            ":predicates" => {
                for p in body {
                    let parts = expect_list(p, "predicate declaration")?;
                    let pname = parts
                        .first()
                        .ok_or_else(|| syntax(p.pos(), "empty predicate declaration"))?;
                    domain.predicates.push(PredicateDecl {
                        name: expect_atom(pname, "predicate name")?,
                        params: typed_list(&parts[1..])?,
                    });
                }
            }
            ":functions" => warn!("ignoring ':functions' section (numeric fluents unsupported)"),
            ":action" => raw_actions.push(sec),
            other => return Err(unsupported(sec.pos(), other)),
        }
    }
    // Parent types mentioned only on the right of '-' are declared implicitly.
    let parents: Vec<String> = domain.types.values().cloned().collect();
    for p in parents {
        if p != ROOT_TYPE && !domain.types.contains_key(&p) {
            domain.types.insert(p, ROOT_TYPE.to_string());
        }
    }
    check_type_hierarchy(&domain)?;
    let mut seen_preds = HashSet::new();
    for p in &domain.predicates {
        if !seen_preds.insert(p.name.clone()) {
            return Err(PddlError::Type(format!("duplicate predicate '{}'", p.name)));
        }
        for param in &p.params {
            require_type(&domain, &param.ty)?;
        }
    }
    for c in &domain.constants {
        require_type(&domain, &c.ty)?;
    }
    let constants: HashMap<String, String> = domain
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.ty.clone()))
        .collect();
    let mut seen_actions = HashSet::new();
    for sec in raw_actions {
        let schema = parse_action(sec, &domain, &constants)?;
        if !seen_actions.insert(schema.name.clone()) {
            return Err(PddlError::Type(format!(
                "duplicate action schema '{}'",
                schema.name
            )));
        }
        domain.action_schemas.push(schema);
    }
    Ok(domain)
}

fn require_type(domain: &DomainAst, ty: &str) -> Result<(), PddlError> {
    if domain.has_type(ty) {
        Ok(())
    } else {
        Err(PddlError::Type(format!("undeclared type '{ty}'")))
    }
}

fn check_type_hierarchy(domain: &DomainAst) -> Result<(), PddlError> {
    for start in domain.types.keys() {
        let mut current = start.as_str();
        let mut steps = 0;
        while let Some(parent) = domain.types.get(current) {
            current = parent;
            steps += 1;
            if steps > domain.types.len() {
                return Err(PddlError::Type(format!(
                    "cyclic type hierarchy at '{start}'"
                )));
            }
        }
    }
    Ok(())
}

struct Scope<'a> {
    domain: &'a DomainAst,
    params: HashMap<String, String>,
    constants: &'a HashMap<String, String>,
}

impl Scope<'_> {
    fn term(&self, e: &SExpr) -> Result<(Term, String), PddlError> {
        let s = expect_atom(e, "term")?;
        if s.starts_with('?') {
            let ty = self
                .params
                .get(&s)
                .ok_or_else(|| PddlError::Type(format!("undeclared variable '{s}'")))?;
            Ok((Term::Var(s), ty.clone()))
        } else {
            let ty = self
                .constants
                .get(&s)
                .ok_or_else(|| PddlError::Type(format!("undeclared constant '{s}'")))?;
            Ok((Term::Const(s), ty.clone()))
        }
    }

    fn atom(&self, e: &SExpr) -> Result<AtomSchema, PddlError> {
        let items = expect_list(e, "atom")?;
        let pred = items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?;
        let pred = expect_atom(pred, "predicate name")?;
        let decl = self
            .domain
            .predicate(&pred)
            .ok_or_else(|| PddlError::Type(format!("undeclared predicate '{pred}'")))?;
        let args = &items[1..];
        if args.len() != decl.params.len() {
            return Err(PddlError::Type(format!(
                "predicate '{pred}' expects {} arguments, got {}",
                decl.params.len(),
                args.len()
            )));
        }
        let mut terms = Vec::with_capacity(args.len());
        for (arg, param) in args.iter().zip(&decl.params) {
            let (term, ty) = self.term(arg)?;
            if !self.domain.is_subtype(&ty, &param.ty) {
                return Err(PddlError::Type(format!(
                    "argument of type '{ty}' does not match '{}' in '{pred}'",
                    param.ty
                )));
            }
            terms.push(term);
        }
        Ok(AtomSchema {
            predicate: pred,
            args: terms,
        })
    }

    fn equality(&self, items: &[SExpr], pos: Pos) -> Result<(Term, Term), PddlError> {
        if items.len() != 3 {
            return Err(syntax(pos, "'=' takes two terms"));
        }
        Ok((self.term(&items[1])?.0, self.term(&items[2])?.0))
    }

    fn precondition(&self, e: &SExpr, out: &mut Vec<Condition>) -> Result<(), PddlError> {
        let items = expect_list(e, "precondition")?;
        match items.first().and_then(SExpr::as_atom) {
            None if items.is_empty() => Ok(()),
            Some("and") => {
                for c in &items[1..] {
                    self.precondition(c, out)?;
                }
                Ok(())
            }
            Some("=") => {
                let (a, b) = self.equality(items, e.pos())?;
                out.push(Condition::Equal(a, b));
                Ok(())
            }
            Some("not") => {
                let inner = items.get(1).ok_or_else(|| syntax(e.pos(), "empty 'not'"))?;
                let inner_items = expect_list(inner, "negated atom")?;
                if inner.head() == Some("=") {
                    let (a, b) = self.equality(inner_items, inner.pos())?;
                    out.push(Condition::NotEqual(a, b));
                    Ok(())
                } else {
                    Err(unsupported(e.pos(), "negative preconditions"))
                }
            }
            Some(k @ ("or" | "imply" | "exists" | "forall" | "when")) => {
                Err(unsupported(e.pos(), k.to_string()))
            }
            _ => {
                out.push(Condition::Atom(self.atom(e)?));
                Ok(())
            }
        }
    }

    fn effect(
        &self,
        e: &SExpr,
        add: &mut Vec<AtomSchema>,
        del: &mut Vec<AtomSchema>,
    ) -> Result<(), PddlError> {
        let items = expect_list(e, "effect")?;
        match items.first().and_then(SExpr::as_atom) {
            None if items.is_empty() => Ok(()),
            Some("and") => {
                for c in &items[1..] {
                    self.effect(c, add, del)?;
                }
                Ok(())
            }
            Some("not") => {
                let inner = items.get(1).ok_or_else(|| syntax(e.pos(), "empty 'not'"))?;
                del.push(self.atom(inner)?);
                Ok(())
            }
            Some("increase" | "decrease" | "assign") => {
                warn!("ignoring numeric effect at {} (unit costs)", e.pos());
                Ok(())
            }
            Some(k @ ("forall" | "when")) => Err(unsupported(e.pos(), k.to_string())),
            _ => {
                add.push(self.atom(e)?);
                Ok(())
            }
        }
    }
}

fn parse_action(
    sec: &SExpr,
    domain: &DomainAst,
    constants: &HashMap<String, String>,
) -> Result<ActionSchema, PddlError> {
    let items = sec.as_list().unwrap_or_default();
    let name = expect_atom(
        items
            .get(1)
            .ok_or_else(|| syntax(sec.pos(), "action name expected"))?,
        "action name",
    )?;
    let mut params = Vec::new();
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut i = 2;
    while i < items.len() {
        let key = expect_atom(&items[i], "action keyword")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| syntax(items[i].pos(), format!("missing value for {key}")))?;
        match key.as_str() {
            ":parameters" => params = typed_list(expect_list(value, "parameter list")?)?,
            ":precondition" => pre_expr = Some(value),
            ":effect" => eff_expr = Some(value),
            other => return Err(unsupported(items[i].pos(), other.to_string())),
        }
        i += 2;
    }
    let mut param_types = HashMap::new();
    for p in &params {
        if !p.name.starts_with('?') {
            return Err(syntax(
                sec.pos(),
                format!("parameter '{}' must start with '?'", p.name),
            ));
        }
        require_type(domain, &p.ty)?;
        if param_types.insert(p.name.clone(), p.ty.clone()).is_some() {
            return Err(PddlError::Type(format!(
                "duplicate parameter '{}' in '{name}'",
                p.name
            )));
        }
    }
    let scope = Scope {
        domain,
        params: param_types,
        constants,
    };
    let mut precondition = Vec::new();
    if let Some(p) = pre_expr {
        scope.precondition(p, &mut precondition)?;
    }
    let (mut add, mut del) = (Vec::new(), Vec::new());
    if let Some(e) = eff_expr {
        scope.effect(e, &mut add, &mut del)?;
    }
    Ok(ActionSchema {
        name,
        params,
        precondition,
        add,
        del,
    })
}

pub fn parse_problem(text: &str, domain: &DomainAst) -> Result<ProblemAst, PddlError> {
    let root = sexpr::read(text)?;
    let (name, sections) = define_header(&root, "problem")?;
    let mut domain_name = None;
    let mut objects = Vec::new();
    let mut init_exprs: &[SExpr] = &[];
    let mut goal_expr = None;
    for sec in sections {
        let items = expect_list(sec, "problem section")?;
        let key = items
            .first()
            .and_then(SExpr::as_atom)
            .ok_or_else(|| syntax(sec.pos(), "section keyword expected"))?;
        match key {
            ":domain" => {
                let d = items
                    .get(1)
                    .ok_or_else(|| syntax(sec.pos(), "domain name expected"))?;
                domain_name = Some(expect_atom(d, "domain name")?);
            }
            ":requirements" => {
                parse_requirements(&items[1..])?;
            }
            ":objects" => objects = typed_list(&items[1..])?,
            ":init" => init_exprs = &items[1..],
            ":goal" => {
                goal_expr = Some(
                    items
                        .get(1)
                        .ok_or_else(|| syntax(sec.pos(), "goal formula expected"))?,
                )
            }
            ":metric" => warn!("ignoring ':metric' (unit costs)"),
            other => return Err(unsupported(sec.pos(), other)),
        }
    }
    let domain_name =
        domain_name.ok_or_else(|| syntax(root.pos(), "problem lacks (:domain <name>)"))?;
    if domain_name != domain.name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.clone(),
            found: domain_name,
        });
    }
    let mut object_types: HashMap<String, String> = domain
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.ty.clone()))
        .collect();
    for o in &objects {
        require_type(domain, &o.ty)?;
        if object_types.insert(o.name.clone(), o.ty.clone()).is_some() {
            return Err(PddlError::Type(format!("duplicate object '{}'", o.name)));
        }
    }
    let ground = |e: &SExpr| -> Result<GroundAtom, PddlError> {
        let items = expect_list(e, "ground atom")?;
        let pred = expect_atom(
            items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?,
            "predicate",
        )?;
        let decl = domain
            .predicate(&pred)
            .ok_or_else(|| PddlError::Type(format!("undeclared predicate '{pred}'")))?;
        if items.len() - 1 != decl.params.len() {
            return Err(PddlError::Type(format!(
                "predicate '{pred}' expects {} arguments, got {}",
                decl.params.len(),
                items.len() - 1
            )));
        }
        let mut args = Vec::new();
        for (a, param) in items[1..].iter().zip(&decl.params) {
            let obj = expect_atom(a, "object")?;
            let ty = object_types
                .get(&obj)
                .ok_or_else(|| PddlError::Type(format!("undeclared object '{obj}'")))?;
            if !domain.is_subtype(ty, &param.ty) {
                return Err(PddlError::Type(format!(
                    "object '{obj}' of type '{ty}' does not match '{}' in '{pred}'",
                    param.ty
                )));
            }
            args.push(obj);
        }
        Ok(GroundAtom {
            predicate: pred,
            args,
        })
    };
    let mut init = Vec::new();
    for e in init_exprs {
        match e.head() {
            Some("=") => warn!("ignoring numeric initial value at {}", e.pos()),
            Some("not") => return Err(unsupported(e.pos(), "negative initial literals")),
            _ => init.push(ground(e)?),
        }
    }
    let mut goal = Vec::new();
    if let Some(g) = goal_expr {
        collect_goal(g, &ground, &mut goal)?;
    }
    Ok(ProblemAst {
        name,
        domain_name,
        objects,
        init,
        goal,
    })
}

fn collect_goal(
    e: &SExpr,
    ground: &dyn Fn(&SExpr) -> Result<GroundAtom, PddlError>,
    out: &mut Vec<GroundAtom>,
) -> Result<(), PddlError> {
    let items = expect_list(e, "goal formula")?;
    match items.first().and_then(SExpr::as_atom) {
        None if items.is_empty() => Ok(()),
        Some("and") => {
            for c in &items[1..] {
                collect_goal(c, ground, out)?;
            }
            Ok(())
        }
        Some(k @ ("not" | "or" | "imply" | "exists" | "forall" | "=")) => {
            Err(unsupported(e.pos(), format!("'{k}' in goal")))
        }
        _ => {
            out.push(ground(e)?);
            Ok(())
        }
    }
}
