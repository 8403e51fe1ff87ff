//! Numeric backend: exact variable aliasing, bound and LP presolve, then
//! projected Levenberg-Marquardt with seeded restarts.

use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::expr::{Expr, VarId};
use super::set::{Cmp, ConstraintSet, Tag};
use super::SolverConfig;

/// Strict inequalities must clear this margin to count as satisfied.
const STRICT_EPS: f64 = 1e-9;
/// Equalities are driven below this residual.
const EQ_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 400;
/// Largest common slack sought for the interior start point.
const INTERIOR_CAP: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    /// `proven` is set when bounds or the linear relaxation certify that no
    /// assignment exists; `conflict` then lists a minimal set of relation
    /// tags that cannot hold together.
    #[error("infeasible ({}): {reason}", if *proven { "proven" } else { "search exhausted" })]
    Infeasible {
        proven: bool,
        conflict: Vec<Tag>,
        reason: String,
    },
    #[error("solver timed out after {0:.1} s")]
    Timeout(f64),
    #[error("backend error: {0}")]
    Backend(String),
}

/// Satisfying assignment over the set's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub assignment: Vec<f64>,
    /// Index of the start point that converged (hints first, then the LP
    /// point, then random restarts).
    pub start_index: usize,
    pub iterations: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, a: usize) -> usize {
        let mut r = a;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = a;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Relation in `g(x) >= margin` or `g(x) = 0` form over reduced variables.
struct Active {
    expr: Expr,
    eq: bool,
    margin: f64,
    /// Acceptance threshold for inequalities.
    accept: f64,
    tag: Tag,
    linear: Option<(Vec<(VarId, f64)>, f64)>,
}

struct Reduced {
    /// Original variable -> reduced index.
    map: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    active: Vec<Active>,
}

fn infeasible(proven: bool, conflict: Vec<Tag>, reason: impl Into<String>) -> SolveError {
    SolveError::Infeasible {
        proven,
        conflict,
        reason: reason.into(),
    }
}

fn reduce(set: &ConstraintSet) -> Result<Reduced, SolveError> {
    let n = set.vars.len();
    let mut uf = UnionFind((0..n).collect());
    let mut fixed: Vec<Option<(f64, Tag)>> = vec![None; n];
    let mut consumed = vec![false; set.relations.len()];
    for (k, r) in set.relations.iter().enumerate() {
        if r.cmp != Cmp::Eq {
            continue;
        }
        let Some((terms, c)) = r.expr.as_linear() else { continue };
        match terms.as_slice() {
            [] => {
                if c.abs() > EQ_TOL {
                    return Err(infeasible(true, vec![r.tag.clone()], "constant equality fails"));
                }
                consumed[k] = true;
            }
            [(v, a)] => {
                let val = -c / a;
                if let Some((prev, tag)) = &fixed[v.0] {
                    if (prev - val).abs() > EQ_TOL {
                        return Err(infeasible(
                            true,
                            vec![tag.clone(), r.tag.clone()],
                            "variable fixed to two values",
                        ));
                    }
                }
                fixed[v.0] = Some((val, r.tag.clone()));
                consumed[k] = true;
            }
            [(v1, a1), (v2, a2)] if c == 0.0 && (a1 + a2).abs() < 1e-15 => {
                uf.union(v1.0, v2.0);
                consumed[k] = true;
            }
            _ => {}
        }
    }

    let mut rep_index = vec![usize::MAX; n];
    let mut map = vec![0; n];
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut fixed_rep: Vec<Option<(f64, Tag)>> = Vec::new();
    for v in 0..n {
        let r = uf.find(v);
        if rep_index[r] == usize::MAX {
            rep_index[r] = lo.len();
            lo.push(f64::NEG_INFINITY);
            hi.push(f64::INFINITY);
            fixed_rep.push(None);
        }
        let i = rep_index[r];
        map[v] = i;
        lo[i] = lo[i].max(set.vars[v].lo);
        hi[i] = hi[i].min(set.vars[v].hi);
        if let Some((val, tag)) = &fixed[v] {
            if let Some((prev, ptag)) = &fixed_rep[i] {
                if (prev - val).abs() > EQ_TOL {
                    return Err(infeasible(true, vec![ptag.clone(), tag.clone()], "aliased variables fixed apart"));
                }
            }
            fixed_rep[i] = Some((*val, tag.clone()));
        }
    }
    for (i, f) in fixed_rep.iter().enumerate() {
        if let Some((val, tag)) = f {
            if *val < lo[i] - EQ_TOL || *val > hi[i] + EQ_TOL {
                return Err(infeasible(true, vec![tag.clone()], "fixed value outside variable bounds"));
            }
            lo[i] = *val;
            hi[i] = *val;
        }
    }
    for i in 0..lo.len() {
        if lo[i] > hi[i] {
            return Err(infeasible(true, Vec::new(), "aliased variable bounds are disjoint"));
        }
    }

    let mut active = Vec::new();
    for (k, r) in set.relations.iter().enumerate() {
        if consumed[k] {
            continue;
        }
        let expr = r.oriented().remap(&map);
        let eq = r.cmp == Cmp::Eq;
        let strict = r.cmp.is_strict();
        let margin = if strict {
            r.solve_margin.max(1e-6)
        } else {
            r.solve_margin.max(0.0)
        };
        let accept = if eq {
            0.0
        } else if strict {
            (0.5 * margin).max(10.0 * STRICT_EPS)
        } else if margin > 0.0 {
            0.5 * margin
        } else {
            -1e-12
        };
        let linear = expr.as_linear();
        if let Some((terms, c)) = &linear {
            if terms.is_empty() {
                let ok = if eq { c.abs() <= EQ_TOL } else if strict { *c > STRICT_EPS } else { *c >= 0.0 };
                if !ok {
                    return Err(infeasible(true, vec![r.tag.clone()], "constant relation fails"));
                }
                continue;
            }
        }
        active.push(Active {
            expr,
            eq,
            margin,
            accept,
            tag: r.tag.clone(),
            linear,
        });
    }
    Ok(Reduced { map, lo, hi, active })
}

/// Linear relaxation check; returns a feasible point of the linear subset.
fn lp_point(red: &Reduced, skip: &[bool]) -> Option<Vec<f64>> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..red.lo.len())
        .map(|i| p.add_var(0.0, (red.lo[i], red.hi[i])))
        .collect();
    for (k, a) in red.active.iter().enumerate() {
        if skip[k] {
            continue;
        }
        let Some((terms, c)) = &a.linear else { continue };
        let expr: Vec<_> = terms.iter().map(|(v, coef)| (vars[v.0], *coef)).collect();
        if a.eq {
            p.add_constraint(&expr[..], ComparisonOp::Eq, -c);
        } else {
            let need = a.accept.max(0.0);
            p.add_constraint(&expr[..], ComparisonOp::Ge, -c + need);
        }
    }
    match p.solve() {
        Ok(sol) => Some(vars.iter().map(|v| *sol.var_value(*v)).collect()),
        Err(_) => None,
    }
}

/// Interior point of the linear relations: maximizes the common slack of
/// every inequality, capped at `cap`.
fn lp_interior(red: &Reduced, cap: f64) -> Option<Vec<f64>> {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..red.lo.len())
        .map(|i| p.add_var(0.0, (red.lo[i], red.hi[i])))
        .collect();
    let slack = p.add_var(1.0, (0.0, cap));
    for a in &red.active {
        let Some((terms, c)) = &a.linear else { continue };
        let mut expr: Vec<_> = terms.iter().map(|(v, coef)| (vars[v.0], *coef)).collect();
        if a.eq {
            p.add_constraint(&expr[..], ComparisonOp::Eq, -c);
        } else {
            let norm = terms.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
            if norm > 0.0 {
                expr.push((slack, -norm));
            }
            p.add_constraint(&expr[..], ComparisonOp::Ge, -c + a.accept.max(0.0));
        }
    }
    let sol = p.solve().ok()?;
    Some(vars.iter().map(|v| *sol.var_value(*v)).collect())
}

/// Deletion filter: a minimal subset of linear relations that is
/// infeasible together with the variable bounds.
fn minimal_conflict(red: &Reduced) -> Vec<Tag> {
    let mut skip: Vec<bool> = red.active.iter().map(|a| a.linear.is_none()).collect();
    for k in 0..red.active.len() {
        if skip[k] {
            continue;
        }
        skip[k] = true;
        if lp_point(red, &skip).is_some() {
            skip[k] = false;
        }
    }
    let mut tags: Vec<Tag> = red
        .active
        .iter()
        .zip(&skip)
        .filter(|(_, s)| !**s)
        .map(|(a, _)| a.tag.clone())
        .collect();
    tags.dedup();
    tags
}

fn residuals(red: &Reduced, x: &[f64], jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
    let m = red.active.len();
    let n = x.len();
    let mut r = DVector::zeros(m);
    let mut grad = vec![0.0; n];
    let mut jac = jac;
    for (k, a) in red.active.iter().enumerate() {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let g = a.expr.accumulate_grad(x, 1.0, &mut grad);
        let (val, on) = if a.eq {
            (g, true)
        } else if g < a.margin {
            (g - a.margin, true)
        } else {
            (0.0, false)
        };
        r[k] = val;
        if let Some(j) = jac.as_deref_mut() {
            for c in 0..n {
                j[(k, c)] = if on { grad[c] } else { 0.0 };
            }
        }
    }
    r
}

fn satisfied(red: &Reduced, x: &[f64]) -> bool {
    red.active.iter().all(|a| {
        let g = a.expr.eval(x);
        if a.eq {
            g.abs() <= EQ_TOL * (1.0 + g.abs())
        } else {
            g >= a.accept
        }
    })
}

fn clamp(red: &Reduced, x: &mut [f64]) {
    for (i, v) in x.iter_mut().enumerate() {
        *v = v.clamp(red.lo[i], red.hi[i]);
    }
}

/// Projected Levenberg-Marquardt; returns the final point and whether it
/// satisfies every relation.
fn levenberg_marquardt(red: &Reduced, x0: &[f64], deadline: Instant, iters: &mut usize) -> (Vec<f64>, bool, f64) {
    let n = x0.len();
    let m = red.active.len();
    let mut x = x0.to_vec();
    clamp(red, &mut x);
    let mut jac = DMatrix::zeros(m, n);
    let mut r = residuals(red, &x, Some(&mut jac));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERS {
        *iters += 1;
        if satisfied(red, &x) {
            return (x, true, cost);
        }
        if Instant::now() > deadline {
            break;
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-6);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(red, &mut xn);
            let rn = residuals(red, &xn, None);
            let cn = rn.norm_squared();
            if cn < cost {
                x = xn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
        r = residuals(red, &x, Some(&mut jac));
        cost = r.norm_squared();
    }
    let ok = satisfied(red, &x);
    (x, ok, cost)
}

fn expand(red: &Reduced, xr: &[f64]) -> Vec<f64> {
    red.map.iter().map(|&i| xr[i]).collect()
}

fn to_reduced(red: &Reduced, full: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; red.lo.len()];
    for (v, &i) in red.map.iter().enumerate() {
        if out[i].is_nan() {
            out[i] = full[v];
        }
    }
    for (i, v) in out.iter_mut().enumerate() {
        if v.is_nan() {
            *v = 0.5 * (red.lo[i] + red.hi[i]);
        }
    }
    out
}

/// Searches for an assignment satisfying every relation of `set`.
///
/// `starts` are full-length assignments tried first, in order. Results are
/// reproducible for a fixed `(set, config.seed, starts)` unless the
/// timeout interrupts the search.
pub fn solve(set: &ConstraintSet, config: &SolverConfig, starts: &[Vec<f64>]) -> Result<SolveOutcome, SolveError> {
    if !set.is_well_formed() {
        return Err(SolveError::Backend("relation references an undeclared variable".into()));
    }
    let began = Instant::now();
    let deadline = began + Duration::from_secs_f64(config.timeout_s);
    let red = reduce(set)?;
    if let Some(i) = (0..red.lo.len()).find(|&i| red.lo[i] > red.hi[i]) {
        return Err(infeasible(true, Vec::new(), format!("empty bounds on variable {i}")));
    }
    let all_nonlinear_skipped: Vec<bool> = red.active.iter().map(|a| a.linear.is_none()).collect();
    let lp = lp_point(&red, &all_nonlinear_skipped);
    if lp.is_none() {
        let conflict = minimal_conflict(&red);
        return Err(infeasible(true, conflict, "linear relations are jointly infeasible"));
    }

    let mut candidates: Vec<Vec<f64>> = starts
        .iter()
        .filter(|s| s.len() == set.vars.len())
        .map(|s| to_reduced(&red, s))
        .collect();
    candidates.extend(lp);
    candidates.extend(lp_interior(&red, INTERIOR_CAP));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut iterations = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let base = candidates.len();
    let total = base + config.max_restarts;
    for k in 0..total {
        if Instant::now() > deadline {
            return Err(SolveError::Timeout(began.elapsed().as_secs_f64()));
        }
        let x0 = if k < base {
            candidates[k].clone()
        } else {
            let anchor = best
                .as_ref()
                .map(|b| b.1.clone())
                .unwrap_or_else(|| candidates[k % base].clone());
            anchor
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let span = (red.hi[i] - red.lo[i]).min(50.0);
                    v + span * 0.05 * (rng.gen::<f64>() - 0.5)
                })
                .collect()
        };
        let (x, ok, cost) = levenberg_marquardt(&red, &x0, deadline, &mut iterations);
        if ok {
            return Ok(SolveOutcome {
                assignment: expand(&red, &x),
                start_index: k,
                iterations,
            });
        }
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, x));
        }
    }
    let worst: Vec<Tag> = best
        .map(|(_, x)| {
            let mut v: Vec<(f64, &Active)> = red
                .active
                .iter()
                .map(|a| {
                    let g = a.expr.eval(&x);
                    let viol = if a.eq { g.abs() } else { (a.accept - g).max(0.0) };
                    (viol, a)
                })
                .filter(|(v, _)| *v > 0.0)
                .collect();
            v.sort_by(|a, b| b.0.total_cmp(&a.0));
            v.into_iter().take(5).map(|(_, a)| a.tag.clone()).collect()
        })
        .unwrap_or_default();
    Err(infeasible(false, worst, "no start point converged"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(label: &str) -> Tag {
        Tag {
            group: 3,
            participant: "P1".into(),
            action: "t#0".into(),
            label: label.into(),
            extrapolated: false,
        }
    }

    #[test]
    fn solves_circle_line_intersection() {
        let mut s = ConstraintSet::default();
        let x = s.declare("x", -10.0, 10.0);
        let y = s.declare("y", -10.0, 10.0);
        let r2 = Expr::var(x) * Expr::var(x) + Expr::var(y) * Expr::var(y) - Expr::constant(25.0);
        s.push(&tag("circle"), r2, Cmp::Eq, 0.0);
        s.push(&tag("half"), Expr::var(x), Cmp::Gt, 0.1);
        s.push(&tag("line"), Expr::linear(&[(y, 1.0)], -3.0), Cmp::Eq, 0.0);
        let out = solve(&s, &SolverConfig::default(), &[]).unwrap();
        assert!((out.assignment[0] - 4.0).abs() < 1e-9);
        assert_eq!(out.assignment[1], 3.0);
    }

    #[test]
    fn contradictory_bounds_report_minimal_conflict() {
        let mut s = ConstraintSet::default();
        let v = s.declare("v", 0.0, 50.0);
        let w = s.declare("w", 0.0, 50.0);
        s.push(&tag("positive"), Expr::var(v), Cmp::Gt, 0.5);
        s.push(&tag("limit"), Expr::var(v), Cmp::Le, 0.0);
        s.push(&tag("other"), Expr::var(w), Cmp::Ge, 1.0);
        match solve(&s, &SolverConfig::default(), &[]) {
            Err(SolveError::Infeasible { proven, conflict, .. }) => {
                assert!(proven);
                let labels: Vec<_> = conflict.iter().map(|t| t.label.as_str()).collect();
                assert_eq!(labels, vec!["positive", "limit"]);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn aliasing_makes_equalities_exact() {
        let mut s = ConstraintSet::default();
        let a = s.declare("a", -5.0, 5.0);
        let b = s.declare("b", -5.0, 5.0);
        s.push(&tag("alias"), Expr::linear(&[(a, 1.0), (b, -1.0)], 0.0), Cmp::Eq, 0.0);
        s.push(&tag("sq"), Expr::var(a) * Expr::var(b), Cmp::Eq, 0.0);
        let x = s.declare("x", -5.0, 5.0);
        s.push(&tag("x"), Expr::var(x) * Expr::var(x) - Expr::constant(2.0), Cmp::Eq, 0.0);
        let out = solve(&s, &SolverConfig::default(), &[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(out.assignment[0], out.assignment[1]);
        assert!((out.assignment[2] - 2f64.sqrt()).abs() < 1e-9);
    }
}
