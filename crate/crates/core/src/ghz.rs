//! Simultaneous ±1 value attributions over the four observables
//! S⁽¹⁾ₐ, S⁽¹⁾ᵣₐ, S⁽²⁾ₐ, S⁽²⁾ᵣₐ, and an exhaustive satisfiability check.
//!
//! The cross-particle relations (answers referred to different particles)
//! are jointly satisfiable. Pretending the same-particle attributions hold
//! simultaneously as well makes the system unsatisfiable — a logical
//! contradiction independent of any statistics, certified by enumerating
//! all 16 assignments.

use crate::response::Sign;

/// The four attributable observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignVar {
    S1A,
    S1Ra,
    S2A,
    S2Ra,
}

impl SignVar {
    pub const ALL: [SignVar; 4] = [SignVar::S1A, SignVar::S1Ra, SignVar::S2A, SignVar::S2Ra];

    fn index(self) -> usize {
        match self {
            SignVar::S1A => 0,
            SignVar::S1Ra => 1,
            SignVar::S2A => 2,
            SignVar::S2Ra => 3,
        }
    }
}

impl std::fmt::Display for SignVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SignVar::S1A => "S1_a",
            SignVar::S1Ra => "S1_Ra",
            SignVar::S2A => "S2_a",
            SignVar::S2Ra => "S2_Ra",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Equal,
    Negation,
}

/// left = right or left = −right, tagged with its source label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub left: SignVar,
    pub right: SignVar,
    pub relation: Relation,
    pub label: String,
}

impl Constraint {
    pub fn new(left: SignVar, right: SignVar, relation: Relation, label: &str) -> Constraint {
        assert!(left != right, "constraint must relate two distinct variables");
        Constraint {
            left,
            right,
            relation,
            label: label.to_string(),
        }
    }

    pub fn satisfied_by(&self, assignment: &Assignment) -> bool {
        let l = assignment.get(self.left);
        let r = assignment.get(self.right);
        match self.relation {
            Relation::Equal => l == r,
            Relation::Negation => l == -r,
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.relation {
            Relation::Equal => "",
            Relation::Negation => "-",
        };
        write!(f, "{} {} = {}{}", self.label, self.left, op, self.right)
    }
}

/// A ±1 value for each of the four variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    values: [Sign; 4],
}

impl Assignment {
    /// The k-th assignment in lexicographic order with +1 before −1, so
    /// index 0 is all-plus.
    pub fn from_index(k: u8) -> Assignment {
        debug_assert!(k < 16);
        let mut values = [Sign::Plus; 4];
        for (i, v) in values.iter_mut().enumerate() {
            if k & (1 << (3 - i)) != 0 {
                *v = Sign::Minus;
            }
        }
        Assignment { values }
    }

    pub fn get(&self, var: SignVar) -> Sign {
        self.values[var.index()]
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, var) in SignVar::ALL.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}={:+}", var, self.get(*var).value())?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new(constraints: Vec<Constraint>) -> ConstraintSystem {
        assert!(!constraints.is_empty(), "a constraint system must be non-empty");
        ConstraintSystem { constraints }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// The same system with every constraint labeled `label` removed.
    pub fn without_label(&self, label: &str) -> ConstraintSystem {
        ConstraintSystem::new(
            self.constraints
                .iter()
                .filter(|c| c.label != label)
                .cloned()
                .collect(),
        )
    }

    pub fn with_constraint(&self, extra: Constraint) -> ConstraintSystem {
        let mut constraints = self.constraints.clone();
        constraints.push(extra);
        ConstraintSystem::new(constraints)
    }
}

/// One line of an unsatisfiability certificate: an assignment together with
/// the label of a constraint it violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutationRow {
    pub assignment: Assignment,
    pub violated_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    /// The lexicographically first satisfying assignment.
    Satisfiable(Assignment),
    /// For each of the 16 assignments, one violated constraint.
    Unsatisfiable(Vec<RefutationRow>),
}

/// The relations between answers referred to *different* particles: the two
/// opposite-field negations, the shared value, and the reflected-setting
/// negation (the singlet law).
pub fn cross_particle_system() -> ConstraintSystem {
    ConstraintSystem::new(vec![
        Constraint::new(SignVar::S1A, SignVar::S1Ra, Relation::Negation, "(1)"),
        Constraint::new(SignVar::S2A, SignVar::S2Ra, Relation::Negation, "(2)"),
        Constraint::new(SignVar::S1A, SignVar::S2A, Relation::Equal, "(3)"),
        Constraint::new(SignVar::S1A, SignVar::S2Ra, Relation::Negation, "(4)"),
    ])
}

/// The cross system plus the same-particle attributions extracted from the
/// measurement diagrams: S⁽¹⁾ₐ = −S⁽²⁾ₐ and S⁽¹⁾ᵣₐ = −S⁽²⁾ᵣₐ.
pub fn full_attribution_system() -> ConstraintSystem {
    cross_particle_system()
        .with_constraint(Constraint::new(
            SignVar::S1A,
            SignVar::S2A,
            Relation::Negation,
            "(5)+(6)",
        ))
        .with_constraint(Constraint::new(
            SignVar::S1Ra,
            SignVar::S2Ra,
            Relation::Negation,
            "(7)+(8)",
        ))
}

/// Exhaustive check of all 2⁴ = 16 assignments.
pub fn solve(system: &ConstraintSystem) -> Solution {
    let mut rows = Vec::with_capacity(16);
    for k in 0..16u8 {
        let assignment = Assignment::from_index(k);
        match system
            .constraints()
            .iter()
            .find(|c| !c.satisfied_by(&assignment))
        {
            None => return Solution::Satisfiable(assignment),
            Some(violated) => rows.push(RefutationRow {
                assignment,
                violated_label: violated.label.clone(),
            }),
        }
    }
    Solution::Unsatisfiable(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn witness(values: [i32; 4]) -> Assignment {
        let mut a = Assignment::from_index(0);
        for (i, v) in values.iter().enumerate() {
            a.values[i] = Sign::from_value(*v as i64).unwrap();
        }
        a
    }

    #[test]
    fn cross_system_shape() {
        let sys = cross_particle_system();
        assert_eq!(sys.len(), 4);
        assert!(sys.constraints().iter().any(|c| c.label == "(3)"
            && c.relation == Relation::Equal
            && c.left == SignVar::S1A
            && c.right == SignVar::S2A));
        assert!(sys.constraints().iter().any(|c| c.label == "(4)"
            && c.relation == Relation::Negation
            && c.left == SignVar::S1A
            && c.right == SignVar::S2Ra));
    }

    #[test]
    fn full_system_shape() {
        let sys = full_attribution_system();
        assert_eq!(sys.len(), 6);
        // the contradiction pair on (S1_a, S2_a)
        assert!(sys
            .constraints()
            .iter()
            .any(|c| c.left == SignVar::S1A && c.right == SignVar::S2A && c.relation == Relation::Equal));
        assert!(sys
            .constraints()
            .iter()
            .any(|c| c.left == SignVar::S1A && c.right == SignVar::S2A && c.relation == Relation::Negation));
        let labels: Vec<&str> = sys.constraints().iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["(1)", "(2)", "(3)", "(4)", "(5)+(6)", "(7)+(8)"]);
    }

    #[test]
    fn cross_system_is_satisfiable() {
        match solve(&cross_particle_system()) {
            Solution::Satisfiable(a) => {
                assert_eq!(a, witness([1, -1, 1, -1]));
                // independent re-verification of the witness
                for c in cross_particle_system().constraints() {
                    assert!(c.satisfied_by(&a), "witness violates {c}");
                }
            }
            Solution::Unsatisfiable(_) => panic!("cross system must be satisfiable"),
        }
    }

    #[test]
    fn full_system_is_unsatisfiable_with_certificate() {
        let sys = full_attribution_system();
        match solve(&sys) {
            Solution::Satisfiable(a) => panic!("unexpected witness {a}"),
            Solution::Unsatisfiable(rows) => {
                assert_eq!(rows.len(), 16);
                for (k, row) in rows.iter().enumerate() {
                    assert_eq!(row.assignment, Assignment::from_index(k as u8));
                    let cited = sys
                        .constraints()
                        .iter()
                        .find(|c| c.label == row.violated_label)
                        .expect("cited label exists");
                    assert!(
                        !cited.satisfied_by(&row.assignment),
                        "row {k} cites {} but it is satisfied",
                        row.violated_label
                    );
                }
            }
        }
    }

    #[test]
    fn single_equality_is_satisfiable() {
        let sys = ConstraintSystem::new(vec![Constraint::new(
            SignVar::S1A,
            SignVar::S2A,
            Relation::Equal,
            "(3)",
        )]);
        assert!(matches!(solve(&sys), Solution::Satisfiable(_)));
    }

    #[test]
    fn either_attribution_alone_already_contradicts() {
        let with_a = cross_particle_system().with_constraint(Constraint::new(
            SignVar::S1A,
            SignVar::S2A,
            Relation::Negation,
            "(5)+(6)",
        ));
        assert!(matches!(solve(&with_a), Solution::Unsatisfiable(_)));

        let with_ra = cross_particle_system().with_constraint(Constraint::new(
            SignVar::S1Ra,
            SignVar::S2Ra,
            Relation::Negation,
            "(7)+(8)",
        ));
        assert!(matches!(solve(&with_ra), Solution::Unsatisfiable(_)));
    }

    #[test]
    fn dropping_the_equality_does_not_restore_satisfiability() {
        // (2) and (4) together force S1_a = S2_a, so removing (3) alone
        // leaves the full system contradictory; removing (4) as well
        // restores satisfiability.
        let sys = full_attribution_system().without_label("(3)");
        assert_eq!(sys.len(), 5);
        assert!(matches!(solve(&sys), Solution::Unsatisfiable(_)));

        let sys = sys.without_label("(4)");
        assert!(matches!(solve(&sys), Solution::Satisfiable(_)));
    }

    #[test]
    fn solver_is_complete() {
        // satisfiable iff some assignment satisfies all constraints,
        // checked against a direct scan
        for system in [
            cross_particle_system(),
            full_attribution_system(),
            full_attribution_system().without_label("(3)"),
        ] {
            let any_sat = (0..16u8).any(|k| {
                let a = Assignment::from_index(k);
                system.constraints().iter().all(|c| c.satisfied_by(&a))
            });
            match solve(&system) {
                Solution::Satisfiable(_) => assert!(any_sat),
                Solution::Unsatisfiable(_) => assert!(!any_sat),
            }
        }
    }

    #[test]
    fn assignment_order_puts_plus_first() {
        assert_eq!(Assignment::from_index(0), witness([1, 1, 1, 1]));
        assert_eq!(Assignment::from_index(5), witness([1, -1, 1, -1]));
        assert_eq!(Assignment::from_index(15), witness([-1, -1, -1, -1]));
        assert_eq!(format!("{}", Assignment::from_index(5)), "(S1_a=+1, S1_Ra=-1, S2_a=+1, S2_Ra=-1)");
    }
}
