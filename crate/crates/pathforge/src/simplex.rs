//! Deterministic two-phase revised simplex with an explicit dense basis
//! inverse and periodic refactorization. Produces primal and dual solutions;
//! the dual of the annual emissions row is the CO2 shadow price.
//!
//! Dual sign convention: `dual[i]` is the sensitivity d(objective)/d(rhs_i)
//! of the minimization. For a binding `<=` row this is non-positive;
//! [`shadow_price`] reports it negated so that prices come out non-negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lp::{LinearProgram, Sense};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Absolute + relative primal feasibility tolerance.
    pub feas_abs: f64,
    pub feas_rel: f64,
    /// Relative duality-gap tolerance for the optimality certificate.
    pub gap_rel: f64,
    /// Minimum pivot magnitude.
    pub pivot: f64,
    /// Reduced-cost threshold for entering candidates.
    pub reduced_cost: f64,
    /// Degenerate pivots before Bland's rule engages.
    pub stall_threshold: usize,
    /// Iterations between basis refactorizations.
    pub refactor_every: usize,
    /// Hard iteration cap per phase; 0 means automatic from problem size.
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas_abs: 1e-9,
            feas_rel: 1e-9,
            gap_rel: 1e-6,
            pivot: 1e-9,
            reduced_cost: 1e-9,
            stall_threshold: 50,
            refactor_every: 500,
            max_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Numerical breakdown; diagnostics explain what failed. Never a silent
    /// wrong answer.
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Per original column.
    pub primal: Vec<f64>,
    /// Per original row: d(objective)/d(rhs).
    pub dual: Vec<f64>,
    /// Per original column.
    pub reduced_costs: Vec<f64>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    pub row_senses: Vec<Sense>,
    /// Farkas-style certificate when infeasible (per original row).
    pub dual_ray: Option<Vec<f64>>,
    /// Improving ray when unbounded (per original column).
    pub primal_ray: Option<Vec<f64>>,
    pub iterations: usize,
    pub diagnostics: String,
}

impl LpSolution {
    pub fn value_of(&self, column: &str) -> Result<f64> {
        let idx = self
            .col_names
            .iter()
            .position(|n| n == column)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column '{column}'")))?;
        Ok(self.primal[idx])
    }

    pub fn dual_of(&self, row: &str) -> Result<f64> {
        let idx = self
            .row_names
            .iter()
            .position(|n| n == row)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown row '{row}'")))?;
        Ok(self.dual[idx])
    }
}

/// Shadow price of a row: the marginal objective change per unit of rhs
/// relaxation, reported non-negative for binding `<=` rows in the
/// minimization (prices, not raw sensitivities).
pub fn shadow_price(solution: &LpSolution, row: &str) -> Result<f64> {
    if solution.status != SolveStatus::Optimal {
        return Err(Error::InvalidArgument(
            "shadow prices require an optimal solution".into(),
        ));
    }
    let idx = solution
        .row_names
        .iter()
        .position(|n| n == row)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown row '{row}'")))?;
    let dual = solution.dual[idx];
    Ok(match solution.row_senses[idx] {
        Sense::Le => -dual,
        Sense::Eq | Sense::Ge => dual,
    })
}

// ---------------------------------------------------------------------------
// standard-form conversion
// ---------------------------------------------------------------------------

/// How an original column maps into standard-form variables.
#[derive(Debug, Clone)]
enum ColMap {
    /// x = value (presolved out).
    Fixed(f64),
    /// x = lower + u[idx].
    Shifted { idx: usize, lower: f64 },
    /// x = upper - u[idx]  (only an upper bound is finite).
    Mirrored { idx: usize, upper: f64 },
    /// x = u[pos] - u[neg]  (free).
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowOrigin {
    /// Original row index; `flipped` when the standardized row was negated.
    Orig { index: usize, flipped: bool },
    /// Upper-bound row for a standard-form column.
    Bound,
}

struct StdForm {
    m: usize,
    n_total: usize,
    /// Column-major sparse matrix, rows 0..m.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    /// Phase-2 costs per standard column (0 for slacks/artificials).
    cost: Vec<f64>,
    is_artificial: Vec<bool>,
    row_origin: Vec<RowOrigin>,
    col_map: Vec<ColMap>,
    /// Rows removed in presolve (became empty): original index list.
    removed_rows: Vec<usize>,
    initial_basis: Vec<usize>,
}

enum Converted {
    Std(StdForm),
    /// Resolved entirely in presolve.
    Done(LpSolution),
}

fn names_of(lp: &LinearProgram) -> (Vec<String>, Vec<String>, Vec<Sense>) {
    (
        lp.columns.iter().map(|c| c.name.clone()).collect(),
        lp.rows.iter().map(|r| r.name.clone()).collect(),
        lp.rows.iter().map(|r| r.sense).collect(),
    )
}

fn empty_solution(lp: &LinearProgram, status: SolveStatus, diagnostics: String) -> LpSolution {
    let (col_names, row_names, row_senses) = names_of(lp);
    LpSolution {
        status,
        objective: f64::NAN,
        primal: vec![0.0; lp.columns.len()],
        dual: vec![0.0; lp.rows.len()],
        reduced_costs: vec![0.0; lp.columns.len()],
        col_names,
        row_names,
        row_senses,
        dual_ray: None,
        primal_ray: None,
        iterations: 0,
        diagnostics,
    }
}

fn convert(lp: &LinearProgram, tol: &Tolerances) -> Result<Converted> {
    let n = lp.columns.len();
    let mut col_map: Vec<Option<ColMap>> = vec![None; n];
    let mut col_has_coeff = vec![false; n];
    for row in &lp.rows {
        for (j, v) in &row.coeffs {
            if *v != 0.0 {
                col_has_coeff[*j] = true;
            }
        }
    }

    // Pre-pass: fix pinned columns, settle empty columns at their best bound.
    for (j, col) in lp.columns.iter().enumerate() {
        if (col.upper - col.lower).abs() <= 1e-12 && col.lower.is_finite() {
            col_map[j] = Some(ColMap::Fixed(col.lower));
            continue;
        }
        if !col_has_coeff[j] {
            let val = if col.obj > 0.0 {
                if !col.lower.is_finite() {
                    let mut ray = vec![0.0; n];
                    ray[j] = -1.0;
                    let mut sol = empty_solution(
                        lp,
                        SolveStatus::Unbounded,
                        format!("column '{}' unbounded below with positive cost", col.name),
                    );
                    sol.primal_ray = Some(ray);
                    return Ok(Converted::Done(sol));
                }
                col.lower
            } else if col.obj < 0.0 {
                if !col.upper.is_finite() {
                    let mut ray = vec![0.0; n];
                    ray[j] = 1.0;
                    let mut sol = empty_solution(
                        lp,
                        SolveStatus::Unbounded,
                        format!("column '{}' unbounded above with negative cost", col.name),
                    );
                    sol.primal_ray = Some(ray);
                    return Ok(Converted::Done(sol));
                }
                col.upper
            } else if col.lower.is_finite() {
                col.lower
            } else if col.upper.is_finite() {
                col.upper
            } else {
                0.0
            };
            col_map[j] = Some(ColMap::Fixed(val));
        }
    }

    // Row pre-pass: rhs adjustment for fixed columns; drop rows that have no
    // remaining support, checking their residual feasibility.
    let mut kept_rows: Vec<usize> = Vec::new();
    let mut adj_rhs: Vec<f64> = Vec::new();
    let mut removed_rows: Vec<usize> = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let mut rhs = row.rhs;
        let mut live = false;
        for (j, v) in &row.coeffs {
            match &col_map[*j] {
                Some(ColMap::Fixed(val)) => rhs -= v * val,
                _ => {
                    if *v != 0.0 {
                        live = true;
                    }
                }
            }
        }
        if live {
            kept_rows.push(i);
            adj_rhs.push(rhs);
        } else {
            let feastol = tol.feas_abs + tol.feas_rel * row.rhs.abs();
            let violated = match row.sense {
                Sense::Le => rhs < -feastol,
                Sense::Ge => rhs > feastol,
                Sense::Eq => rhs.abs() > feastol,
            };
            if violated {
                let mut ray = vec![0.0; lp.rows.len()];
                ray[i] = match row.sense {
                    Sense::Le => -1.0,
                    _ => 1.0,
                };
                let mut sol = empty_solution(
                    lp,
                    SolveStatus::Infeasible,
                    format!("row '{}' is infeasible after presolve", row.name),
                );
                sol.dual_ray = Some(ray);
                return Ok(Converted::Done(sol));
            }
            removed_rows.push(i);
        }
    }

    // All columns fixed and all rows satisfied: the presolve solved it.
    if kept_rows.is_empty() && col_map.iter().all(|m| m.is_some()) {
        let primal: Vec<f64> = col_map
            .iter()
            .map(|m| match m {
                Some(ColMap::Fixed(v)) => *v,
                _ => unreachable!(),
            })
            .collect();
        let objective = lp
            .columns
            .iter()
            .zip(&primal)
            .map(|(c, x)| c.obj * x)
            .sum();
        let mut sol = empty_solution(lp, SolveStatus::Optimal, "solved in presolve".into());
        sol.primal = primal;
        sol.objective = objective;
        sol.reduced_costs = lp.columns.iter().map(|c| c.obj).collect();
        return Ok(Converted::Done(sol));
    }

    // Standard-form structural columns.
    let mut n_structural = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new(); // (std col, range)
    for (j, col) in lp.columns.iter().enumerate() {
        if col_map[j].is_some() {
            continue;
        }
        if col.lower.is_finite() {
            let idx = n_structural;
            n_structural += 1;
            if col.upper.is_finite() {
                bound_rows.push((idx, col.upper - col.lower));
            }
            col_map[j] = Some(ColMap::Shifted {
                idx,
                lower: col.lower,
            });
        } else if col.upper.is_finite() {
            let idx = n_structural;
            n_structural += 1;
            col_map[j] = Some(ColMap::Mirrored {
                idx,
                upper: col.upper,
            });
        } else {
            let pos = n_structural;
            let neg = n_structural + 1;
            n_structural += 2;
            col_map[j] = Some(ColMap::Split { pos, neg });
        }
    }
    let col_map: Vec<ColMap> = col_map.into_iter().map(|m| m.unwrap()).collect();

    let m = kept_rows.len() + bound_rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_structural];
    let mut cost = vec![0.0f64; n_structural];
    let mut b = vec![0.0f64; m];
    let mut row_origin: Vec<RowOrigin> = Vec::with_capacity(m);
    let mut row_sense: Vec<Sense> = Vec::with_capacity(m);

    for (j, col) in lp.columns.iter().enumerate() {
        match &col_map[j] {
            ColMap::Shifted { idx, .. } => cost[*idx] = col.obj,
            ColMap::Mirrored { idx, .. } => cost[*idx] = -col.obj,
            ColMap::Split { pos, neg } => {
                cost[*pos] = col.obj;
                cost[*neg] = -col.obj;
            }
            ColMap::Fixed(_) => {}
        }
    }

    for (std_i, (&orig_i, &rhs0)) in kept_rows.iter().zip(adj_rhs.iter()).enumerate() {
        let row = &lp.rows[orig_i];
        let mut rhs = rhs0;
        for (j, v) in &row.coeffs {
            if *v == 0.0 {
                continue;
            }
            match &col_map[*j] {
                ColMap::Fixed(_) => {}
                ColMap::Shifted { idx, lower } => {
                    rhs -= v * lower;
                    cols[*idx].push((std_i, *v));
                }
                ColMap::Mirrored { idx, upper } => {
                    rhs -= v * upper;
                    cols[*idx].push((std_i, -*v));
                }
                ColMap::Split { pos, neg } => {
                    cols[*pos].push((std_i, *v));
                    cols[*neg].push((std_i, -*v));
                }
            }
        }
        b[std_i] = rhs;
        row_origin.push(RowOrigin::Orig {
            index: orig_i,
            flipped: false,
        });
        row_sense.push(row.sense);
    }
    for (bi, (std_col, range)) in bound_rows.iter().enumerate() {
        let std_i = kept_rows.len() + bi;
        cols[*std_col].push((std_i, 1.0));
        b[std_i] = *range;
        row_origin.push(RowOrigin::Bound);
        row_sense.push(Sense::Le);
    }

    // Coalesce duplicate (row, value) entries per column.
    for c in cols.iter_mut() {
        c.sort_by_key(|(r, _)| *r);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for (r, v) in c.iter() {
            if let Some(last) = merged.last_mut() {
                if last.0 == *r {
                    last.1 += v;
                    continue;
                }
            }
            merged.push((*r, *v));
        }
        merged.retain(|(_, v)| *v != 0.0);
        *c = merged;
    }

    // Slacks, row sign normalization, artificials, initial basis.
    let mut is_artificial = vec![false; n_structural];
    let mut initial_basis: Vec<usize> = Vec::with_capacity(m);
    let mut flip = vec![false; m];
    for i in 0..m {
        if b[i] < 0.0 {
            flip[i] = true;
            b[i] = -b[i];
        }
    }
    for c in cols.iter_mut() {
        for (r, v) in c.iter_mut() {
            if flip[*r] {
                *v = -*v;
            }
        }
    }
    for i in 0..m {
        if let RowOrigin::Orig { index, flipped } = &mut row_origin[i] {
            let _ = index;
            *flipped = flip[i];
        }
    }

    for i in 0..m {
        let slack_sign = match row_sense[i] {
            Sense::Le => Some(1.0),
            Sense::Ge => Some(-1.0),
            Sense::Eq => None,
        }
        .map(|s| if flip[i] { -s } else { s });
        let basic = match slack_sign {
            Some(sign) => {
                let idx = cols.len();
                cols.push(vec![(i, sign)]);
                cost.push(0.0);
                is_artificial.push(false);
                if sign > 0.0 {
                    Some(idx)
                } else {
                    None
                }
            }
            None => None,
        };
        let basis_col = match basic {
            Some(idx) => idx,
            None => {
                let idx = cols.len();
                cols.push(vec![(i, 1.0)]);
                cost.push(0.0);
                is_artificial.push(true);
                idx
            }
        };
        initial_basis.push(basis_col);
    }

    let n_total = cols.len();
    Ok(Converted::Std(StdForm {
        m,
        n_total,
        cols,
        b,
        cost,
        is_artificial,
        row_origin,
        col_map,
        removed_rows,
        initial_basis,
    }))
}

// ---------------------------------------------------------------------------
// simplex core
// ---------------------------------------------------------------------------

struct Core<'a> {
    std: &'a StdForm,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense basis inverse, row-major m x m.
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded { entering: usize, direction: Vec<f64> },
}

impl<'a> Core<'a> {
    fn new(std: &'a StdForm) -> Self {
        let m = std.m;
        let mut in_basis = vec![false; std.n_total];
        for &j in &std.initial_basis {
            in_basis[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Core {
            std,
            basis: std.initial_basis.clone(),
            in_basis,
            binv,
            xb: std.b.clone(),
            iterations: 0,
        }
    }

    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.std.m;
        let mut y = vec![0.0; m];
        for (k, &bk) in self.basis.iter().enumerate() {
            let c = cost[bk];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    fn ftran(&self, col: usize) -> Vec<f64> {
        let m = self.std.m;
        let mut w = vec![0.0; m];
        for &(i, v) in &self.std.cols[col] {
            for k in 0..m {
                w[k] += v * self.binv[k * m + i];
            }
        }
        w
    }

    fn reduced_cost(&self, y: &[f64], j: usize, cost: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(i, v) in &self.std.cols[j] {
            d -= y[i] * v;
        }
        d
    }

    /// Rebuilds the dense inverse from the basis columns via Gauss-Jordan
    /// with partial pivoting. Returns false on a singular basis.
    fn refactor(&mut self) -> bool {
        let m = self.std.m;
        let mut a = vec![0.0f64; m * m];
        for (k, &bk) in self.basis.iter().enumerate() {
            for &(i, v) in &self.std.cols[bk] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = a[col * m + col].abs();
            for r in (col + 1)..m {
                let v = a[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                return false;
            }
            if piv_row != col {
                for c in 0..m {
                    a.swap(piv_row * m + c, col * m + c);
                    inv.swap(piv_row * m + c, col * m + c);
                }
            }
            let piv = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= piv;
                inv[col * m + c] /= piv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        a[r * m + c] -= f * a[col * m + c];
                        inv[r * m + c] -= f * inv[col * m + c];
                    }
                }
            }
        }
        self.binv = inv;
        // Recompute basic values from scratch.
        let mut xb = vec![0.0; m];
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let mut v = 0.0;
            for i in 0..m {
                v += row[i] * self.std.b[i];
            }
            xb[k] = v.max(0.0);
        }
        self.xb = xb;
        true
    }

    fn pivot(&mut self, entering: usize, leave_pos: usize, w: &[f64], theta: f64) {
        let m = self.std.m;
        for k in 0..m {
            self.xb[k] -= theta * w[k];
            if self.xb[k] < 0.0 {
                self.xb[k] = 0.0;
            }
        }
        self.xb[leave_pos] = theta;
        let piv = w[leave_pos];
        let (before, rest) = self.binv.split_at_mut(leave_pos * m);
        let (piv_row, after) = rest.split_at_mut(m);
        for v in piv_row.iter_mut() {
            *v /= piv;
        }
        for (k, chunk) in before.chunks_mut(m).enumerate() {
            let f = w[k];
            if f != 0.0 {
                for (c, pv) in chunk.iter_mut().zip(piv_row.iter()) {
                    *c -= f * pv;
                }
            }
        }
        for (k0, chunk) in after.chunks_mut(m).enumerate() {
            let f = w[leave_pos + 1 + k0];
            if f != 0.0 {
                for (c, pv) in chunk.iter_mut().zip(piv_row.iter()) {
                    *c -= f * pv;
                }
            }
        }
        self.in_basis[self.basis[leave_pos]] = false;
        self.in_basis[entering] = true;
        self.basis[leave_pos] = entering;
    }

    /// Runs simplex iterations to optimality for the given costs over the
    /// allowed column set.
    fn run_phase(
        &mut self,
        cost: &[f64],
        allow_artificial: bool,
        tol: &Tolerances,
    ) -> Result<PhaseOutcome> {
        let m = self.std.m;
        let max_iters = if tol.max_iterations > 0 {
            tol.max_iterations
        } else {
            20_000 + 60 * (m + self.std.n_total)
        };
        let mut bland = false;
        let mut stall = 0usize;
        let mut since_refactor = 0usize;

        loop {
            self.iterations += 1;
            since_refactor += 1;
            if self.iterations > max_iters {
                return Err(Error::Solver(format!(
                    "iteration limit {max_iters} exceeded (m={m}, n={})",
                    self.std.n_total
                )));
            }
            if since_refactor >= tol.refactor_every {
                since_refactor = 0;
                if !self.refactor() {
                    return Err(Error::Solver("singular basis during refactorization".into()));
                }
            }

            let y = self.btran(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.std.n_total {
                if self.in_basis[j] {
                    continue;
                }
                if !allow_artificial && self.std.is_artificial[j] {
                    continue;
                }
                let d = self.reduced_cost(&y, j, cost);
                if d < -tol.reduced_cost {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    match entering {
                        Some((_, best)) if d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                }
            }
            let (q, _) = match entering {
                Some(e) => e,
                None => return Ok(PhaseOutcome::Optimal),
            };

            let w = self.ftran(q);
            let mut theta = f64::INFINITY;
            for k in 0..m {
                if w[k] > tol.pivot {
                    let ratio = self.xb[k].max(0.0) / w[k];
                    if ratio < theta {
                        theta = ratio;
                    }
                }
            }
            if !theta.is_finite() {
                return Ok(PhaseOutcome::Unbounded {
                    entering: q,
                    direction: w,
                });
            }
            // Choose the leaving row among near-ties: Bland picks the lowest
            // variable index, otherwise take the numerically largest pivot.
            let tie = theta * (1.0 + 1e-9) + 1e-12;
            let mut leave: Option<usize> = None;
            for k in 0..m {
                if w[k] > tol.pivot && self.xb[k].max(0.0) / w[k] <= tie {
                    leave = match leave {
                        None => Some(k),
                        Some(cur) => {
                            if bland {
                                if self.basis[k] < self.basis[cur] {
                                    Some(k)
                                } else {
                                    Some(cur)
                                }
                            } else if w[k] > w[cur] {
                                Some(k)
                            } else {
                                Some(cur)
                            }
                        }
                    };
                }
            }
            let leave_pos = leave.expect("ratio test found a bound but no row");

            if theta <= 1e-12 {
                stall += 1;
                if stall >= tol.stall_threshold {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            self.pivot(q, leave_pos, &w, theta);
        }
    }

    /// After phase 1, pivots zero-valued artificial variables out of the
    /// basis where a structural column can replace them. Rows whose
    /// artificial cannot be replaced are linearly dependent and stay pinned.
    fn drive_out_artificials(&mut self, tol: &Tolerances) {
        let m = self.std.m;
        for k in 0..m {
            if !self.std.is_artificial[self.basis[k]] {
                continue;
            }
            let mut replacement: Option<(usize, Vec<f64>)> = None;
            for j in 0..self.std.n_total {
                if self.in_basis[j] || self.std.is_artificial[j] {
                    continue;
                }
                let w = self.ftran(j);
                if w[k].abs() > tol.pivot * 10.0 {
                    replacement = Some((j, w));
                    break;
                }
            }
            if let Some((j, w)) = replacement {
                // Degenerate exchange: the artificial sits at zero.
                let m = self.std.m;
                let piv = w[k];
                let (before, rest) = self.binv.split_at_mut(k * m);
                let (piv_row, after) = rest.split_at_mut(m);
                for v in piv_row.iter_mut() {
                    *v /= piv;
                }
                for (r, chunk) in before.chunks_mut(m).enumerate() {
                    let f = w[r];
                    if f != 0.0 {
                        for (c, pv) in chunk.iter_mut().zip(piv_row.iter()) {
                            *c -= f * pv;
                        }
                    }
                }
                for (r0, chunk) in after.chunks_mut(m).enumerate() {
                    let f = w[k + 1 + r0];
                    if f != 0.0 {
                        for (c, pv) in chunk.iter_mut().zip(piv_row.iter()) {
                            *c -= f * pv;
                        }
                    }
                }
                self.in_basis[self.basis[k]] = false;
                self.in_basis[j] = true;
                self.basis[k] = j;
                self.xb[k] = 0.0;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// public solve
// ---------------------------------------------------------------------------

/// Solves a minimization LP. Deterministic: identical inputs produce an
/// identical solution.
pub fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    lp.validate()?;
    let std = match convert(lp, tol)? {
        Converted::Done(sol) => return Ok(sol),
        Converted::Std(s) => s,
    };

    let mut core = Core::new(&std);

    // Phase 1: minimize the sum of artificial variables.
    let phase1_cost: Vec<f64> = std
        .is_artificial
        .iter()
        .map(|a| if *a { 1.0 } else { 0.0 })
        .collect();
    let needs_phase1 = std.initial_basis.iter().any(|&j| std.is_artificial[j]);
    if needs_phase1 {
        match core.run_phase(&phase1_cost, true, tol)? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded { .. } => {
                return Err(Error::Solver(
                    "phase-1 objective unbounded; inconsistent standard form".into(),
                ));
            }
        }
        let infeas: f64 = core
            .basis
            .iter()
            .zip(&core.xb)
            .filter(|(j, _)| std.is_artificial[**j])
            .map(|(_, x)| x)
            .sum();
        let scale = 1.0 + std.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > (tol.feas_abs + tol.feas_rel) * scale * 10.0 {
            // Farkas certificate from the phase-1 duals.
            let y = core.btran(&phase1_cost);
            let mut ray = vec![0.0; lp.rows.len()];
            for (std_i, origin) in std.row_origin.iter().enumerate() {
                if let RowOrigin::Orig { index, flipped } = origin {
                    ray[*index] = if *flipped { -y[std_i] } else { y[std_i] };
                }
            }
            let mut sol = empty_solution(
                lp,
                SolveStatus::Infeasible,
                format!("phase-1 infeasibility {infeas:.3e}"),
            );
            sol.dual_ray = Some(ray);
            sol.iterations = core.iterations;
            return Ok(sol);
        }
        core.drive_out_artificials(tol);
    }

    // Phase 2.
    match core.run_phase(&std.cost, false, tol)? {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded { entering, direction } => {
            // Map the std-form improving ray back to original columns.
            let mut std_ray = vec![0.0; std.n_total];
            std_ray[entering] = 1.0;
            for (k, &bk) in core.basis.iter().enumerate() {
                std_ray[bk] = -direction[k];
            }
            let mut ray = vec![0.0; lp.columns.len()];
            for (j, map) in std.col_map.iter().enumerate() {
                match map {
                    ColMap::Fixed(_) => {}
                    ColMap::Shifted { idx, .. } => ray[j] = std_ray[*idx],
                    ColMap::Mirrored { idx, .. } => ray[j] = -std_ray[*idx],
                    ColMap::Split { pos, neg } => ray[j] = std_ray[*pos] - std_ray[*neg],
                }
            }
            let mut sol = empty_solution(lp, SolveStatus::Unbounded, "phase-2 unbounded".into());
            sol.primal_ray = Some(ray);
            sol.iterations = core.iterations;
            return Ok(sol);
        }
    }

    // Tighten numerics before extracting the certificate.
    if !core.refactor() {
        return Err(Error::Solver("singular basis at optimum".into()));
    }

    // Recover the primal solution.
    let mut std_x = vec![0.0; std.n_total];
    for (k, &bk) in core.basis.iter().enumerate() {
        std_x[bk] = core.xb[k];
    }
    let mut primal = vec![0.0; lp.columns.len()];
    for (j, map) in std.col_map.iter().enumerate() {
        primal[j] = match map {
            ColMap::Fixed(v) => *v,
            ColMap::Shifted { idx, lower } => lower + std_x[*idx],
            ColMap::Mirrored { idx, upper } => upper - std_x[*idx],
            ColMap::Split { pos, neg } => std_x[*pos] - std_x[*neg],
        };
    }
    let objective: f64 = lp
        .columns
        .iter()
        .zip(&primal)
        .map(|(c, x)| c.obj * x)
        .sum();

    // Duals in the sensitivity convention.
    let y_std = core.btran(&std.cost);
    let mut dual = vec![0.0; lp.rows.len()];
    for (std_i, origin) in std.row_origin.iter().enumerate() {
        if let RowOrigin::Orig { index, flipped } = origin {
            dual[*index] = if *flipped { -y_std[std_i] } else { y_std[std_i] };
        }
    }
    for &i in &std.removed_rows {
        dual[i] = 0.0;
    }

    let mut reduced_costs = vec![0.0; lp.columns.len()];
    for (j, col) in lp.columns.iter().enumerate() {
        let mut d = col.obj;
        for (i, row) in lp.rows.iter().enumerate() {
            for (cj, v) in &row.coeffs {
                if *cj == j {
                    d -= dual[i] * v;
                }
            }
        }
        reduced_costs[j] = d;
    }

    // Certificate checks: primal feasibility and the duality gap. A failure
    // here is reported as Failed, never as a silent wrong answer.
    let mut worst_violation = 0.0f64;
    for (i, row) in lp.rows.iter().enumerate() {
        let activity: f64 = row.coeffs.iter().map(|(j, v)| v * primal[*j]).sum();
        let viol = match row.sense {
            Sense::Le => (activity - row.rhs).max(0.0),
            Sense::Ge => (row.rhs - activity).max(0.0),
            Sense::Eq => (activity - row.rhs).abs(),
        };
        let scale = 1.0 + row.rhs.abs() + activity.abs();
        worst_violation = worst_violation.max(viol / scale);
        let _ = i;
    }
    let mut dual_obj: f64 = lp
        .rows
        .iter()
        .zip(&dual)
        .map(|(r, y)| r.rhs * y)
        .sum();
    for (col, d) in lp.columns.iter().zip(&reduced_costs) {
        if d.abs() <= 1e-7 * (1.0 + col.obj.abs()) {
            continue;
        }
        if *d > 0.0 && col.lower.is_finite() {
            dual_obj += col.lower * d;
        } else if *d < 0.0 && col.upper.is_finite() {
            dual_obj += col.upper * d;
        }
    }
    let gap = (objective - dual_obj).abs() / (1.0 + objective.abs());

    let (col_names, row_names, row_senses) = names_of(lp);
    let mut status = SolveStatus::Optimal;
    let mut diagnostics = format!(
        "iterations={}, max primal violation={:.3e}, duality gap={:.3e}",
        core.iterations, worst_violation, gap
    );
    if worst_violation > 1e-7 || gap > tol.gap_rel.max(1e-6) * 10.0 {
        status = SolveStatus::Failed;
        diagnostics = format!("certificate check failed: {diagnostics}");
    }

    Ok(LpSolution {
        status,
        objective,
        primal,
        dual,
        reduced_costs,
        col_names,
        row_names,
        row_senses,
        dual_ray: None,
        primal_ray: None,
        iterations: core.iterations,
        diagnostics,
    })
}

/// Reads an external solver's solution file for cross-checks: plain CSV of
/// `name,value` pairs over column and row names.
pub fn read_external_solution(path: &std::path::Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 2 {
            continue;
        }
        let name = record[0].trim().to_string();
        if name == "name" {
            continue;
        }
        let value: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad value for '{name}': {e}")))?;
        out.insert(name, value);
    }
    Ok(out)
}
