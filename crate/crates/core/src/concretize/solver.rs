use std::cmp::Ordering;
use std::time::{Duration, Instant};

use crate::constraints::{ConstraintProblem, GlobalView, LinearConstraint, Relation, VarId};

use super::{Solution, SolveStatus};

const EPS: f64 = 1e-9;

/// Selected elements with negative weight and selected elements overall.
pub(crate) fn tally(weights: &[f64], x: &[bool]) -> (usize, usize) {
    let mut negative = 0;
    let mut selected = 0;
    for (w, &v) in weights.iter().zip(x) {
        if v {
            selected += 1;
            if *w < 0.0 {
                negative += 1;
            }
        }
    }
    (negative, selected)
}

/// Candidate ordering: higher objective, then fewer selected minority
/// (negative-weight) elements, then more selected elements, then the
/// lexicographically smallest assignment.
pub(crate) fn compare(weights: &[f64], a: (f64, &[bool]), b: (f64, &[bool])) -> Ordering {
    if a.0 > b.0 + EPS {
        return Ordering::Greater;
    }
    if a.0 < b.0 - EPS {
        return Ordering::Less;
    }
    let (na, sa) = tally(weights, a.1);
    let (nb, sb) = tally(weights, b.1);
    nb.cmp(&na).then(sa.cmp(&sb)).then_with(|| b.1.cmp(a.1))
}

struct Search<'a> {
    problem: &'a ConstraintProblem,
    view: GlobalView<'a>,
    /// Constraint indices touching each variable.
    touching: Vec<Vec<usize>>,
    order: Vec<VarId>,
    deadline: Instant,
    timed_out: bool,
    nodes_visited: u64,
    best: Option<(f64, Vec<bool>)>,
}

/// Outcome of propagating a constraint over a partial assignment.
enum Propagation {
    Conflict,
    Forced(Vec<(VarId, bool)>),
}

fn propagate_one(c: &LinearConstraint, x: &[Option<bool>]) -> Propagation {
    let (mut lo, mut hi) = (0i64, 0i64);
    for &(a, v) in &c.terms {
        match x[v] {
            Some(true) => {
                lo += a;
                hi += a;
            }
            Some(false) => {}
            None => {
                lo += a.min(0);
                hi += a.max(0);
            }
        }
    }
    let b = c.bound;
    let need_le = matches!(c.relation, Relation::Le | Relation::Eq);
    let need_ge = matches!(c.relation, Relation::Ge | Relation::Eq);
    if (need_le && lo > b) || (need_ge && hi < b) {
        return Propagation::Conflict;
    }
    let mut forced = Vec::new();
    for &(a, v) in &c.terms {
        if x[v].is_some() || a == 0 {
            continue;
        }
        let span = a.abs();
        // choosing the value that raises the activity by `span` above `lo`
        if need_le && lo + span > b {
            forced.push((v, a < 0));
        } else if need_ge && hi - span < b {
            forced.push((v, a > 0));
        }
    }
    Propagation::Forced(forced)
}

impl<'a> Search<'a> {
    fn propagate(&self, x: &mut [Option<bool>], mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; self.problem.linear.len()];
        for &c in &queue {
            queued[c] = true;
        }
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            match propagate_one(&self.problem.linear[ci], x) {
                Propagation::Conflict => return false,
                Propagation::Forced(f) => {
                    for (v, val) in f {
                        match x[v] {
                            Some(old) if old != val => return false,
                            Some(_) => continue,
                            None => x[v] = Some(val),
                        }
                        for &cj in &self.touching[v] {
                            if !queued[cj] {
                                queued[cj] = true;
                                queue.push(cj);
                            }
                        }
                    }
                }
            }
        }
        true
    }

    /// Objective upper bound, minority elements already selected and the
    /// most elements any completion can select without adding minority ones.
    fn bound(&self, x: &[Option<bool>]) -> (f64, usize, usize) {
        let mut b = 0.0;
        let mut negative = 0;
        let mut reach = 0;
        for (v, &w) in self.problem.weights.iter().enumerate() {
            match x[v] {
                Some(true) => {
                    b += w;
                    reach += 1;
                    if w < 0.0 {
                        negative += 1;
                    }
                }
                None if w > 0.0 => {
                    b += w;
                    reach += 1;
                }
                None if w == 0.0 => reach += 1,
                _ => {}
            }
        }
        (b, negative, reach)
    }

    fn dominated(&self, x: &[Option<bool>]) -> bool {
        let Some((best_obj, best)) = &self.best else {
            return false;
        };
        let (bound, negative, reach) = self.bound(x);
        if bound < best_obj - EPS {
            return true;
        }
        if bound <= best_obj + EPS {
            let (best_negative, best_selected) = tally(&self.problem.weights, best);
            return negative > best_negative || (negative == best_negative && reach < best_selected);
        }
        false
    }

    fn dfs(&mut self, x: Vec<Option<bool>>) {
        self.nodes_visited += 1;
        if self.nodes_visited.is_multiple_of(1024) && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        if self.timed_out || self.dominated(&x) || self.view.refuted(&x) {
            return;
        }
        let Some(&v) = self.order.iter().find(|&&v| x[v].is_none()) else {
            let full: Vec<bool> = x.iter().map(|b| b.expect("complete")).collect();
            if self.problem.satisfies(&full) {
                let obj = self.problem.objective(&full);
                let improves = match &self.best {
                    None => true,
                    Some((bo, b)) => compare(&self.problem.weights, (obj, &full), (*bo, b)) == Ordering::Greater,
                };
                if improves {
                    self.best = Some((obj, full));
                }
            }
            return;
        };
        let preferred = self.problem.weights[v] >= 0.0;
        for value in [preferred, !preferred] {
            let mut child = x.clone();
            child[v] = Some(value);
            if self.propagate(&mut child, self.touching[v].clone()) {
                self.dfs(child);
            }
        }
    }
}

/// Branch and bound over the binary variables with linear bound
/// propagation, incremental global-constraint refutation and full checks at
/// the leaves.
pub fn solve(problem: &ConstraintProblem, timeout: Duration) -> Solution {
    let n = problem.len();
    let mut touching = vec![Vec::new(); n];
    for (ci, c) in problem.linear.iter().enumerate() {
        for &(_, v) in &c.terms {
            if !touching[v].contains(&ci) {
                touching[v].push(ci);
            }
        }
    }
    let mut order: Vec<VarId> = (0..n).collect();
    order.sort_by(|&a, &b| {
        problem.weights[b]
            .abs()
            .total_cmp(&problem.weights[a].abs())
            .then(a.cmp(&b))
    });
    let mut search = Search {
        problem,
        view: GlobalView::new(problem),
        touching,
        order,
        deadline: Instant::now() + timeout,
        timed_out: false,
        nodes_visited: 0,
        best: None,
    };
    let mut root = vec![None; n];
    for (&v, &b) in &problem.fixed {
        root[v] = Some(b);
    }
    if search.propagate(&mut root, (0..problem.linear.len()).collect()) {
        search.dfs(root);
    }
    log::debug!("branch and bound visited {} nodes", search.nodes_visited);
    match (search.best, search.timed_out) {
        (Some((objective, assignment)), timed_out) => Solution {
            assignment,
            objective,
            status: if timed_out {
                SolveStatus::TimedOutBest
            } else {
                SolveStatus::Optimal
            },
        },
        (None, true) => Solution::none(n, SolveStatus::TimedOut),
        (None, false) => Solution::none(n, SolveStatus::Infeasible),
    }
}
