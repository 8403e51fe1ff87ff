use std::fmt;

use super::expr::{Expr, VarId};

/// Declared real variable with box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Comparison of an expression against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Ge,
    Gt,
    Le,
    Lt,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Cmp::Gt | Cmp::Lt)
    }
}

/// Provenance of a relation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    /// Constraint group 1-5.
    pub group: u8,
    pub participant: String,
    /// Action slug with its index in the participant's sequence, or a
    /// pseudo-action such as `chain` or `crash`.
    pub action: String,
    /// Short identifier of the relation family, e.g. `eq2-start`.
    pub label: String,
    /// True for relations of the extended action catalog (lane changes,
    /// pedestrians, road exits and similar) rather than the core groups.
    pub extrapolated: bool,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "group{} participant{} action{}",
            self.group, self.participant, self.action
        )
    }
}

/// `expr cmp 0`, plus the slack the numeric backend aims for.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub expr: Expr,
    pub cmp: Cmp,
    pub tag: Tag,
    /// Inequalities are solved to `expr >= solve_margin` (after sign
    /// normalization) so that rounding never flips them.
    pub solve_margin: f64,
}

impl Relation {
    /// Expression oriented so that satisfaction means `>= 0` (or `= 0`).
    pub fn oriented(&self) -> Expr {
        match self.cmp {
            Cmp::Le | Cmp::Lt => -self.expr.clone(),
            _ => self.expr.clone(),
        }
    }

    /// Signed slack: `|g|` is the violation for equalities, negative when
    /// an inequality is violated.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let g = self.expr.eval(x);
        match self.cmp {
            Cmp::Eq => -g.abs(),
            Cmp::Ge | Cmp::Gt => g,
            Cmp::Le | Cmp::Lt => -g,
        }
    }

    pub fn is_constant(&self) -> bool {
        let mut v = Vec::new();
        self.expr.vars(&mut v);
        v.is_empty()
    }
}

/// Variables plus tagged relations over them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub vars: Vec<Variable>,
    pub relations: Vec<Relation>,
}

impl ConstraintSet {
    pub fn new(vars: Vec<Variable>) -> Self {
        ConstraintSet {
            vars,
            relations: Vec::new(),
        }
    }

    pub fn declare(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lo,
            hi,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn push(&mut self, tag: &Tag, expr: Expr, cmp: Cmp, solve_margin: f64) {
        self.relations.push(Relation {
            expr,
            cmp,
            tag: tag.clone(),
            solve_margin,
        });
    }

    /// Appends another set's relations; both must share the variable table.
    pub fn extend(&mut self, other: ConstraintSet) {
        assert_eq!(
            self.vars.len(),
            other.vars.len(),
            "constraint sets must share one variable table"
        );
        self.relations.extend(other.relations);
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// Every relation references declared variables only.
    pub fn is_well_formed(&self) -> bool {
        let mut buf = Vec::new();
        self.relations.iter().all(|r| {
            buf.clear();
            r.expr.vars(&mut buf);
            buf.iter().all(|v| v.0 < self.vars.len())
        })
    }

    pub fn relations_in_group(&self, group: u8) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.tag.group == group)
    }

    /// One relation per line: `group<id> participant<id> action<name>: <relation>`.
    pub fn dump(&self) -> String {
        let names = self.names();
        let mut out = String::new();
        for r in &self.relations {
            out.push_str(&format!(
                "{}: {} {} 0  [{}{}]\n",
                r.tag,
                r.expr.display(&names),
                r.cmp.symbol(),
                r.tag.label,
                if r.tag.extrapolated { ", extrapolated" } else { "" }
            ));
        }
        out
    }
}
