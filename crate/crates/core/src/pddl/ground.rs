use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::PddlError;
use crate::task::{Action, PlanningTask};

/// Grounds a type-checked domain/problem pair.
///
/// Predicates that never appear in any effect are static: their atoms are
/// evaluated against the initial state here and never become task facts.
/// Atoms of predicates that are never added but true initially prune an
/// action when absent from the initial state.
pub fn ground(domain: &DomainAst, problem: &ProblemAst) -> Result<PlanningTask, PddlError> {
    if problem.domain_name != domain.name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.clone(),
            found: problem.domain_name.clone(),
        });
    }
    let mut object_types: BTreeMap<String, String> = BTreeMap::new();
    for o in domain.constants.iter().chain(&problem.objects) {
        if !domain.has_type(&o.ty) {
            return Err(PddlError::Type(format!(
                "object '{}' has unknown type '{}'",
                o.name, o.ty
            )));
        }
        object_types.insert(o.name.clone(), o.ty.clone());
    }

    let mut added: HashSet<&str> = HashSet::new();
    let mut deleted: HashSet<&str> = HashSet::new();
    for s in &domain.action_schemas {
        added.extend(s.add.iter().map(|a| a.predicate.as_str()));
        deleted.extend(s.del.iter().map(|a| a.predicate.as_str()));
    }
    let is_static = |p: &str| !added.contains(p) && !deleted.contains(p);
    let init: HashSet<&GroundAtom> = problem.init.iter().collect();

    let mut schemas: Vec<&ActionSchema> = domain.action_schemas.iter().collect();
    schemas.sort_by(|a, b| a.name.cmp(&b.name));

    let mut raw_actions: Vec<RawAction> = Vec::new();
    for schema in schemas {
        // Objects per parameter, sorted by name so tuples come out lexicographically.
        let domains: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|p| {
                object_types
                    .iter()
                    .filter(|(_, ty)| domain.is_subtype(ty, &p.ty))
                    .map(|(name, _)| name.as_str())
                    .collect()
            })
            .collect();
        let var_index: HashMap<&str, usize> = schema
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.as_str(), i))
            .collect();
        // Static checks are attached to the depth at which all their variables are bound.
        let mut checks: Vec<Vec<&Condition>> = vec![Vec::new(); schema.params.len() + 1];
        let mut fluent_pre: Vec<&AtomSchema> = Vec::new();
        for c in &schema.precondition {
            let depth = condition_vars(c)
                .iter()
                .map(|v| var_index[v.as_str()] + 1)
                .max()
                .unwrap_or(0);
            match c {
                Condition::Atom(a) if added.contains(a.predicate.as_str()) => fluent_pre.push(a),
                Condition::Atom(a) if !is_static(&a.predicate) => {
                    // Never added but deletable: must hold initially, stays a fluent.
                    checks[depth].push(c);
                    fluent_pre.push(a);
                }
                _ => checks[depth].push(c),
            }
        }
        let ctx = SchemaCtx {
            schema,
            domains: &domains,
            var_index: &var_index,
            checks: &checks,
            init: &init,
        };
        let mut binding = Vec::with_capacity(schema.params.len());
        if ctx.passes(0, &binding) {
            ctx.enumerate(&mut binding, &mut |args| {
                let inst = |a: &AtomSchema| instantiate(a, args, &var_index);
                raw_actions.push(RawAction {
                    name: if args.is_empty() {
                        schema.name.clone()
                    } else {
                        format!("{} {}", schema.name, args.join(" "))
                    },
                    pre: fluent_pre.iter().map(|a| inst(a)).collect(),
                    add: schema.add.iter().map(inst).collect(),
                    del: schema.del.iter().map(inst).collect(),
                });
            });
        }
    }

    let goal_atoms: Vec<&GroundAtom> = problem
        .goal
        .iter()
        .filter(|g| !(is_static(&g.predicate) && init.contains(g)))
        .collect();

    // Fixpoint: drop actions whose preconditions can never be facts of the task.
    let mut alive = vec![true; raw_actions.len()];
    let facts: BTreeSet<GroundAtom> = loop {
        let mut facts: BTreeSet<GroundAtom> = problem
            .init
            .iter()
            .filter(|a| !is_static(&a.predicate))
            .cloned()
            .collect();
        facts.extend(goal_atoms.iter().map(|g| (*g).clone()));
        for (a, _) in raw_actions.iter().zip(&alive).filter(|(_, &l)| l) {
            facts.extend(a.add.iter().cloned());
        }
        let mut changed = false;
        for (a, live) in raw_actions.iter().zip(alive.iter_mut()) {
            if *live && !a.pre.iter().all(|p| facts.contains(p)) {
                *live = false;
                changed = true;
            }
        }
        if !changed {
            break facts;
        }
    };

    let fact_list: Vec<GroundAtom> = facts.into_iter().collect();
    let index: HashMap<&GroundAtom, usize> =
        fact_list.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let ids = |atoms: &[GroundAtom]| -> Vec<usize> {
        atoms.iter().filter_map(|a| index.get(a).copied()).collect()
    };
    let actions: Vec<Action> = raw_actions
        .iter()
        .zip(&alive)
        .filter(|(_, &l)| l)
        .map(|(a, _)| Action {
            name: a.name.clone(),
            pre: ids(&a.pre),
            add: ids(&a.add),
            del: ids(&a.del),
        })
        .collect();
    let init_ids = problem
        .init
        .iter()
        .filter_map(|a| index.get(a).copied())
        .collect();
    let goal_ids = goal_atoms.iter().map(|g| index[*g]).collect();
    let names = fact_list.iter().map(GroundAtom::name).collect();
    Ok(PlanningTask::new(
        problem.name.clone(),
        names,
        actions,
        init_ids,
        goal_ids,
    )?)
}

struct RawAction {
    name: String,
    pre: Vec<GroundAtom>,
    add: Vec<GroundAtom>,
    del: Vec<GroundAtom>,
}

fn condition_vars(c: &Condition) -> Vec<&String> {
    let terms: Vec<&Term> = match c {
        Condition::Atom(a) => a.args.iter().collect(),
        Condition::Equal(x, y) | Condition::NotEqual(x, y) => vec![x, y],
    };
    terms
        .into_iter()
        .filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
        .collect()
}

fn resolve<'a>(t: &'a Term, args: &[&'a str], var_index: &HashMap<&str, usize>) -> &'a str {
    match t {
        Term::Var(v) => args[var_index[v.as_str()]],
        Term::Const(c) => c,
    }
}

fn instantiate(a: &AtomSchema, args: &[&str], var_index: &HashMap<&str, usize>) -> GroundAtom {
    GroundAtom {
        predicate: a.predicate.clone(),
        args: a
            .args
            .iter()
            .map(|t| resolve(t, args, var_index).to_string())
            .collect(),
    }
}

struct SchemaCtx<'a> {
    schema: &'a ActionSchema,
    domains: &'a [Vec<&'a str>],
    var_index: &'a HashMap<&'a str, usize>,
    checks: &'a [Vec<&'a Condition>],
    init: &'a HashSet<&'a GroundAtom>,
}

impl<'a> SchemaCtx<'a> {
    fn passes(&self, depth: usize, args: &[&str]) -> bool {
        self.checks[depth].iter().all(|c| match c {
            Condition::Atom(a) => self.init.contains(&instantiate(a, args, self.var_index)),
            Condition::Equal(x, y) => {
                resolve(x, args, self.var_index) == resolve(y, args, self.var_index)
            }
            Condition::NotEqual(x, y) => {
                resolve(x, args, self.var_index) != resolve(y, args, self.var_index)
            }
        })
    }

    fn enumerate(&self, binding: &mut Vec<&'a str>, emit: &mut dyn FnMut(&[&str])) {
        let depth = binding.len();
        if depth == self.schema.params.len() {
            emit(binding);
            return;
        }
        for &obj in &self.domains[depth] {
            binding.push(obj);
            if self.passes(depth + 1, binding) {
                self.enumerate(binding, emit);
            }
            binding.pop();
        }
    }
}
