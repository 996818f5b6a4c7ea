use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpConstraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Linear program over nonnegative variables:
/// optimize `c^T x` subject to `a_i^T x (<=|=|>=) b_i`, `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self {
            sense,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(LpConstraint { coeffs, relation, rhs });
        self
    }

    /// Adds `x[var] <= ub`.
    pub fn upper_bound(&mut self, var: usize, ub: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars()];
        coeffs[var] = 1.0;
        self.add(coeffs, Relation::Le, ub)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::InvalidInput("linear program has no variables".into()));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("objective must be finite".into()));
        }
        for c in &self.constraints {
            check_dim(n, c.coeffs.len())?;
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("constraint coefficients must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
    },
    /// `farkas` is a row multiplier `y` with `y^T A >= 0`, `y^T b < 0`,
    /// `y_i >= 0` on `<=` rows and `y_i <= 0` on `>=` rows.
    Infeasible {
        farkas: Vec<f64>,
    },
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let pv = self.t[p * w + q];
        for j in 0..w {
            self.t[p * w + j] /= pv;
        }
        self.t[p * w + q] = 1.0;
        let (before, rest) = self.t.split_at_mut(p * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for j in 0..w {
                self.obj[j] -= f * prow[j];
            }
            self.obj[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Primal simplex on the columns allowed by `enter`: Dantzig's rule,
    /// switching to Bland's rule during runs of degenerate pivots.
    fn run(&mut self, enter: &[bool], tol: f64, cap: usize) -> Result<Step> {
        let w = self.width;
        let mut degenerate = 0usize;
        for _ in 0..cap {
            let choice = if degenerate >= DEGENERATE_RUN {
                (0..w - 1).find(|&j| enter[j] && self.obj[j] < -tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..w - 1 {
                    let r = self.obj[j];
                    if enter[j] && r < -tol && best.is_none_or(|(_, b)| r < b) {
                        best = Some((j, r));
                    }
                }
                best.map(|(j, _)| j)
            };
            let q = match choice {
                Some(q) => q,
                None => return Ok(Step::Optimal),
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[i * w + q];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((p, ratio)) => {
                    if ratio <= 0.0 {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                    self.pivot(p, q)
                }
                None => return Ok(Step::Unbounded),
            }
        }
        Err(Error::NumericalBreakdown(format!(
            "simplex did not terminate within {cap} pivots"
        )))
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width;
        self.obj = vec![0.0; w];
        self.obj[..cost.len()].copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] -= cb * self.t[i * w + j];
                }
            }
        }
    }
}

/// Two-phase dense-tableau primal simplex with Dantzig pricing and Bland's
/// rule as the anti-cycling fallback.
///
/// `tol` bounds the reduced-cost optimality test and the phase-one
/// feasibility test.
pub fn lp_solve(problem: &LpProblem, tol: f64) -> Result<LpOutcome> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let n = problem.num_vars();
    let m = problem.constraints.len();
    if m == 0 {
        return solve_unconstrained(problem);
    }

    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, c) in problem.constraints.iter().enumerate() {
        let mut r = c.relation;
        if c.rhs < 0.0 {
            sign[i] = -1.0;
            r = match r {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rel.push(r);
    }

    let mut slack_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    let mut ncols = n;
    for i in 0..m {
        if rel[i] != Relation::Eq {
            slack_col[i] = ncols;
            ncols += 1;
        }
    }
    for i in 0..m {
        if rel[i] != Relation::Le {
            art_col[i] = ncols;
            ncols += 1;
        }
    }
    let width = ncols + 1;
    let mut t = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let mut initial = vec![0; m];
    for (i, c) in problem.constraints.iter().enumerate() {
        let row = &mut t[i * width..(i + 1) * width];
        for j in 0..n {
            row[j] = sign[i] * c.coeffs[j];
        }
        row[width - 1] = sign[i] * c.rhs;
        match rel[i] {
            Relation::Le => {
                row[slack_col[i]] = 1.0;
                basis[i] = slack_col[i];
            }
            Relation::Ge => {
                row[slack_col[i]] = -1.0;
                row[art_col[i]] = 1.0;
                basis[i] = art_col[i];
            }
            Relation::Eq => {
                row[art_col[i]] = 1.0;
                basis[i] = art_col[i];
            }
        }
        initial[i] = basis[i];
    }
    let is_art: Vec<bool> = (0..ncols).map(|j| art_col.contains(&j)).collect();
    let mut tab = Tableau {
        rows: m,
        width,
        t,
        obj: Vec::new(),
        basis,
    };
    let cap = 50 * (m + ncols) + 10_000;
    let scale = problem.constraints.iter().fold(1.0f64, |s, c| s.max(c.rhs.abs()));

    if is_art.iter().any(|&a| a) {
        let phase1: Vec<f64> = (0..ncols).map(|j| if is_art[j] { 1.0 } else { 0.0 }).collect();
        tab.set_objective(&phase1);
        let all = vec![true; ncols];
        tab.run(&all, tol * 1e-3, cap)?;
        let infeas = -tab.obj[width - 1];
        if infeas > tol * scale {
            let farkas = (0..m)
                .map(|i| {
                    let j = initial[i];
                    let pi = phase1[j] - tab.obj[j];
                    -pi * sign[i]
                })
                .collect();
            return Ok(LpOutcome::Infeasible { farkas });
        }
        for i in 0..m {
            if is_art[tab.basis[i]] {
                let w = tab.width;
                if let Some(q) = (0..ncols).find(|&j| !is_art[j] && tab.t[i * w + j].abs() > PIVOT_TOL) {
                    tab.pivot(i, q);
                }
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    for j in 0..n {
        cost[j] = match problem.sense {
            Sense::Minimize => problem.objective[j],
            Sense::Maximize => -problem.objective[j],
        };
    }
    tab.set_objective(&cost);
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art[j]).collect();
    match tab.run(&allowed, tol * 1e-3, cap)? {
        Step::Unbounded => Ok(LpOutcome::Unbounded),
        Step::Optimal => {
            let mut x = vec![0.0; n];
            for i in 0..m {
                if tab.basis[i] < n {
                    x[tab.basis[i]] = tab.rhs(i).max(0.0);
                }
            }
            let mut value = 0.0;
            for j in 0..n {
                value += problem.objective[j] * x[j];
            }
            Ok(LpOutcome::Optimal { x, value })
        }
    }
}

fn solve_unconstrained(problem: &LpProblem) -> Result<LpOutcome> {
    let improving = problem.objective.iter().any(|&c| match problem.sense {
        Sense::Minimize => c < 0.0,
        Sense::Maximize => c > 0.0,
    });
    if improving {
        Ok(LpOutcome::Unbounded)
    } else {
        Ok(LpOutcome::Optimal {
            x: vec![0.0; problem.num_vars()],
            value: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_upper_bound() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]);
        p.add(vec![1.0], Relation::Le, 3.0);
        let (x, v) = lp_solve(&p, 1e-9).unwrap().optimal().unwrap();
        assert_eq!(x, vec![3.0]);
        assert_eq!(v, 3.0);
    }

    #[test]
    fn empty_feasible_set_has_farkas_witness() {
        let mut p = LpProblem::new(Sense::Minimize, vec![0.0]);
        p.add(vec![1.0], Relation::Le, -1.0);
        match lp_solve(&p, 1e-9).unwrap() {
            LpOutcome::Infeasible { farkas } => {
                assert!(farkas[0] >= 0.0);
                assert!(farkas[0] * 1.0 >= 0.0);
                assert!(farkas[0] * -1.0 < 0.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn simplex_face_value() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]);
        p.add(vec![1.0, 1.0], Relation::Eq, 1.0);
        let (_, v) = lp_solve(&p, 1e-9).unwrap().optimal().unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_detected() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 0.0]);
        p.add(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&p, 1e-9).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn ge_and_eq_rows() {
        // min x + 2y s.t. x + y >= 2, x - y = 0.5
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 2.0]);
        p.add(vec![1.0, 1.0], Relation::Ge, 2.0);
        p.add(vec![1.0, -1.0], Relation::Eq, 0.5);
        let (x, v) = lp_solve(&p, 1e-9).unwrap().optimal().unwrap();
        assert!((x[0] - 1.25).abs() < 1e-12 && (x[1] - 0.75).abs() < 1e-12);
        assert!((v - 2.75).abs() < 1e-12);
    }
}
