//! Exact optimal transport between discrete measures.
//!
//! The main solver is a transportation-network simplex on the complete
//! bipartite graph with cost |x_i - y_j|^p: deterministic (northwest-corner
//! start, most-negative reduced cost with lowest-index tie-breaking), exact
//! up to floating point, and it exposes the node potentials so the
//! Kantorovich-Rubinstein dual comes for free at p = 1.
//!
//! Two independent routes exist for cross-checking: a quantile-coupling
//! closed form in dimension one and a permutation-enumeration oracle for
//! uniform measures of equal small support.

use crate::measure::{pow_dist, validate_order, DiscreteMeasure};
use crate::{Error, Result};

/// Weight perturbation used to break degenerate ties during pivoting; the
/// output flows are recomputed from the unperturbed marginals afterwards.
const PERTURB: f64 = 1e-15;

/// Flows below this are rounding residue of degenerate basis arcs and are
/// zeroed on output (the marginal error this introduces is far below the
/// 1e-9 feasibility tolerance).
const FLOW_DUST: f64 = 1e-13;

/// Largest support size accepted per side by the exact solver.
pub const EXACT_SOLVER_LIMIT: usize = 1500;

/// Support cap for the brute-force assignment oracle.
pub const BRUTE_FORCE_LIMIT: usize = 7;

/// A feasible coupling between two discrete measures.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    m: usize,
    n: usize,
    gamma: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    /// Total transport cost sum gamma_ij |x_i - y_j|^p.
    pub cost: f64,
}

impl TransportPlan {
    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n + j]
    }

    /// Prescribed row marginal (the first measure's weights).
    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    /// Prescribed column marginal (the second measure's weights).
    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Row sums of the coupling matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for i in 0..self.m {
            for j in 0..self.n {
                sums[i] += self.gamma[i * self.n + j];
            }
        }
        sums
    }

    /// Column sums of the coupling matrix.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                sums[j] += self.gamma[i * self.n + j];
            }
        }
        sums
    }

    /// Entries with nonzero flow, row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > 0.0)
            .map(move |(idx, &g)| (idx / n, idx % n, g))
    }
}

/// Dual variables of the order-1 problem on the two supports.
///
/// Feasibility means phi_i - psi_j <= |x_i - y_j| for all pairs; the dual
/// value sum phi_i mu_i - sum psi_j nu_j matches the primal optimum.
#[derive(Clone, Debug)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Exact Wasserstein distance of order `p` with an optimal plan.
pub fn wasserstein_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<(f64, TransportPlan)> {
    let solved = solve_transport(mu, nu, p)?;
    Ok((solved.distance, solved.plan))
}

/// Order-`p` distance, dispatching to the 1-D closed form when possible.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if mu.dim() == 1 && nu.dim() == 1 {
        wasserstein_1d(mu, nu, p)
    } else {
        Ok(wasserstein_exact(mu, nu, p)?.0)
    }
}

/// Exact 1-D distance via the quantile (monotone) coupling.
///
/// Computes the integral of |F_mu^-1(q) - F_nu^-1(q)|^p dq by merging the two
/// sorted cumulative weight sequences.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    validate_order(p)?;
    let mut a: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .map(|at| (at.location.coords()[0], at.weight))
        .collect();
    let mut b: Vec<(f64, f64)> = nu
        .atoms()
        .iter()
        .map(|at| (at.location.coords()[0], at.weight))
        .collect();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    b.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_a = a[0].1;
    let mut rem_b = b[0].1;
    loop {
        let q = rem_a.min(rem_b);
        cost += q * pow_dist((a[i].0 - b[j].0).abs(), p);
        rem_a -= q;
        rem_b -= q;
        let advance_a = rem_a <= 0.0;
        let advance_b = rem_b <= 0.0;
        if advance_a {
            i += 1;
            if i == a.len() {
                break;
            }
            rem_a = a[i].1;
        }
        if advance_b {
            j += 1;
            if j == b.len() {
                break;
            }
            rem_b = b[j].1;
        }
    }
    Ok(cost.max(0.0).powf(1.0 / p))
}

/// Kantorovich-Rubinstein dual of the order-1 problem.
///
/// The potentials are the node potentials of the optimal simplex basis, so
/// strong duality makes the returned value match the primal distance.
pub fn kr_dual(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, DualPotentials)> {
    let solved = solve_transport(mu, nu, 1.0)?;
    let phi = solved.u;
    let psi: Vec<f64> = solved.v.iter().map(|v| -v).collect();
    let mut value = 0.0;
    for (i, at) in mu.atoms().iter().enumerate() {
        value += phi[i] * at.weight;
    }
    for (j, at) in nu.atoms().iter().enumerate() {
        value -= psi[j] * at.weight;
    }
    Ok((value, DualPotentials { phi, psi }))
}

/// Permutation-enumeration oracle for two uniform measures of equal support
/// size at most [`BRUTE_FORCE_LIMIT`].
///
/// The optimum of the balanced uniform problem is attained at a permutation
/// (Birkhoff), so scanning all n! assignments is exact.
pub fn brute_force_wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    validate_order(p)?;
    let n = mu.support_size();
    if n != nu.support_size() || n > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleUnsupported {
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let w = 1.0 / n as f64;
    let uniform = |m: &DiscreteMeasure| m.atoms().iter().all(|a| (a.weight - w).abs() <= 1e-9);
    if !uniform(mu) || !uniform(nu) {
        return Err(Error::OracleUnsupported {
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let cost: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            pow_dist(mu.atoms()[i].location.dist(&nu.atoms()[j].location), p)
        })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |sigma| {
        let total: f64 = sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[i * n + j])
            .sum();
        if total < best {
            best = total;
        }
    });
    Ok((w * best).powf(1.0 / p))
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

struct Solved {
    distance: f64,
    plan: TransportPlan,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn solve_transport(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Solved> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            left: mu.dim(),
            right: nu.dim(),
        });
    }
    validate_order(p)?;
    let m = mu.support_size();
    let n = nu.support_size();
    if m > EXACT_SOLVER_LIMIT || n > EXACT_SOLVER_LIMIT {
        return Err(Error::SupportTooLarge {
            size: m.max(n),
            limit: EXACT_SOLVER_LIMIT,
        });
    }

    let mut cost = vec![0.0; m * n];
    let mut max_cost = 0.0f64;
    for (i, a) in mu.atoms().iter().enumerate() {
        for (j, b) in nu.atoms().iter().enumerate() {
            let c = pow_dist(a.location.dist(&b.location), p);
            cost[i * n + j] = c;
            max_cost = max_cost.max(c);
        }
    }
    let supply: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let demand: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();

    let mut simplex = Simplex::new(m, n, cost, &supply, &demand, max_cost);
    simplex.run()?;
    // The optimal basis tree determines unique flows; recomputing them from
    // the unperturbed marginals strips the tie-breaking perturbation from
    // the output.
    simplex.recompute_tree_flows(&supply, &demand);

    let mut gamma = vec![0.0; m * n];
    let mut total_cost = 0.0;
    for arc in &simplex.arcs {
        let flow = if arc.flow < FLOW_DUST { 0.0 } else { arc.flow };
        gamma[arc.row * n + arc.col] += flow;
        total_cost += flow * simplex.cost[arc.row * n + arc.col];
    }
    let distance = total_cost.max(0.0).powf(1.0 / p);
    Ok(Solved {
        distance,
        plan: TransportPlan {
            m,
            n,
            gamma,
            row_marginal: supply,
            col_marginal: demand,
            cost: total_cost,
        },
        u: simplex.u,
        v: simplex.v,
    })
}

#[derive(Clone, Debug)]
struct BasisArc {
    row: usize,
    col: usize,
    flow: f64,
}

/// Transportation simplex over a spanning-tree basis. Nodes are indexed
/// 0..m for rows and m..m+n for columns.
struct Simplex {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    tol: f64,
    arcs: Vec<BasisArc>,
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    visited: Vec<bool>,
    parent_arc: Vec<usize>,
    parent_node: Vec<usize>,
    queue: Vec<usize>,
}

impl Simplex {
    fn new(
        m: usize,
        n: usize,
        cost: Vec<f64>,
        supply: &[f64],
        demand: &[f64],
        max_cost: f64,
    ) -> Self {
        // Lexicographic weight perturbation, balanced on the last demand.
        let mut a: Vec<f64> = supply
            .iter()
            .enumerate()
            .map(|(i, w)| w + (i as f64 + 1.0) * PERTURB)
            .collect();
        let mut b: Vec<f64> = demand.to_vec();
        b[n - 1] += PERTURB * (m * (m + 1) / 2) as f64;

        // Northwest-corner initial basis: a staircase spanning tree with
        // exactly m + n - 1 arcs.
        let mut arcs: Vec<BasisArc> = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = a[i].min(b[j]).max(0.0);
            arcs.push(BasisArc {
                row: i,
                col: j,
                flow: q,
            });
            a[i] -= q;
            b[j] -= q;
            if i + 1 == m && j + 1 == n {
                break;
            }
            if i + 1 == m {
                j += 1;
            } else if j + 1 == n {
                i += 1;
            } else if a[i] < b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(arcs.len(), m + n - 1);

        let nodes = m + n;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for (idx, arc) in arcs.iter().enumerate() {
            adj[arc.row].push(idx);
            adj[m + arc.col].push(idx);
        }

        Simplex {
            m,
            n,
            cost,
            tol: 1e-12 * (1.0 + max_cost),
            arcs,
            adj,
            u: vec![0.0; m],
            v: vec![0.0; n],
            visited: vec![false; nodes],
            parent_arc: vec![usize::MAX; nodes],
            parent_node: vec![usize::MAX; nodes],
            queue: Vec::with_capacity(nodes),
        }
    }

    fn run(&mut self) -> Result<()> {
        let max_pivots = 1000 + 60 * self.m * self.n;
        for _ in 0..max_pivots {
            self.compute_potentials()?;
            match self.entering_arc() {
                None => return Ok(()),
                Some((ei, ej)) => self.pivot(ei, ej)?,
            }
        }
        Err(Error::Internal(
            "transport simplex failed to converge within the pivot budget".into(),
        ))
    }

    /// Flows on a spanning tree are uniquely determined by the node balances;
    /// peeling leaves reconstructs them exactly for the given marginals.
    fn recompute_tree_flows(&mut self, supply: &[f64], demand: &[f64]) {
        let nodes = self.m + self.n;
        let mut balance: Vec<f64> = Vec::with_capacity(nodes);
        balance.extend_from_slice(supply);
        balance.extend(demand.iter().map(|d| -d));

        let mut degree = vec![0usize; nodes];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for (idx, arc) in self.arcs.iter().enumerate() {
            degree[arc.row] += 1;
            degree[self.m + arc.col] += 1;
            incident[arc.row].push(idx);
            incident[self.m + arc.col].push(idx);
        }
        let mut removed_arc = vec![false; self.arcs.len()];
        let mut leaves: Vec<usize> = (0..nodes).filter(|&u| degree[u] == 1).collect();
        while let Some(u) = leaves.pop() {
            let arc_idx = match incident[u].iter().find(|&&a| !removed_arc[a]) {
                Some(&a) => a,
                None => continue,
            };
            removed_arc[arc_idx] = true;
            let arc = &mut self.arcs[arc_idx];
            let (row_node, col_node) = (arc.row, self.m + arc.col);
            let flow = if u == row_node { balance[u] } else { -balance[u] };
            arc.flow = flow;
            let other = if u == row_node { col_node } else { row_node };
            balance[row_node] -= flow;
            balance[col_node] += flow;
            degree[u] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
    }

    /// Node potentials from the spanning tree: u_i + v_j = c_ij on basis arcs.
    fn compute_potentials(&mut self) -> Result<()> {
        self.visited.iter_mut().for_each(|x| *x = false);
        self.queue.clear();
        self.visited[0] = true;
        self.u[0] = 0.0;
        self.queue.push(0);
        let mut head = 0;
        let mut seen = 1usize;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for k in 0..self.adj[node].len() {
                let arc_idx = self.adj[node][k];
                let arc = &self.arcs[arc_idx];
                let row_node = arc.row;
                let col_node = self.m + arc.col;
                let other = if row_node == node { col_node } else { row_node };
                if self.visited[other] {
                    continue;
                }
                self.visited[other] = true;
                seen += 1;
                let c = self.cost[arc.row * self.n + arc.col];
                if other == col_node {
                    self.v[arc.col] = c - self.u[arc.row];
                } else {
                    self.u[arc.row] = c - self.v[arc.col];
                }
                self.queue.push(other);
            }
        }
        if seen != self.m + self.n {
            return Err(Error::Internal(
                "transport simplex: basis tree is disconnected".into(),
            ));
        }
        Ok(())
    }

    /// Most negative reduced cost; the row-major scan keeps the lowest
    /// (i, j) on ties.
    fn entering_arc(&self) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.m {
            let u_i = self.u[i];
            for j in 0..self.n {
                let rc = self.cost[i * self.n + j] - u_i - self.v[j];
                if rc < -self.tol && best.map_or(true, |(b, _, _)| rc < b) {
                    best = Some((rc, i, j));
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    /// Unique tree path from `from` to `to`, as arc indices in walk order.
    fn tree_path(&mut self, from: usize, to: usize) -> Result<Vec<usize>> {
        self.visited.iter_mut().for_each(|x| *x = false);
        self.queue.clear();
        self.visited[from] = true;
        self.queue.push(from);
        let mut head = 0;
        let mut found = false;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            if node == to {
                found = true;
                break;
            }
            for k in 0..self.adj[node].len() {
                let arc_idx = self.adj[node][k];
                let arc = &self.arcs[arc_idx];
                let row_node = arc.row;
                let col_node = self.m + arc.col;
                let other = if row_node == node { col_node } else { row_node };
                if self.visited[other] {
                    continue;
                }
                self.visited[other] = true;
                self.parent_arc[other] = arc_idx;
                self.parent_node[other] = node;
                self.queue.push(other);
            }
        }
        if !found {
            return Err(Error::Internal(
                "transport simplex: entering arc endpoints not connected".into(),
            ));
        }
        let mut path = Vec::new();
        let mut node = to;
        while node != from {
            path.push(self.parent_arc[node]);
            node = self.parent_node[node];
        }
        path.reverse();
        Ok(path)
    }

    fn pivot(&mut self, ei: usize, ej: usize) -> Result<()> {
        // Cycle: entering arc (+) followed by the tree path from the entering
        // row to the entering column; path arcs alternate -, +, -, ...
        let path = self.tree_path(ei, self.m + ej)?;
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (k, &arc_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let arc = &self.arcs[arc_idx];
                if arc.flow < theta {
                    theta = arc.flow;
                    leaving = Some(arc_idx);
                } else if arc.flow == theta {
                    if let Some(cur) = leaving {
                        if (arc.row, arc.col) < (self.arcs[cur].row, self.arcs[cur].col) {
                            leaving = Some(arc_idx);
                        }
                    }
                }
            }
        }
        let leaving = leaving.ok_or_else(|| {
            Error::Internal("transport simplex: cycle without leaving arc".into())
        })?;
        let theta = theta.max(0.0);

        for (k, &arc_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.arcs[arc_idx].flow -= theta;
            } else {
                self.arcs[arc_idx].flow += theta;
            }
        }

        // Replace the leaving arc with the entering arc in place.
        let old = self.arcs[leaving].clone();
        remove_from_adj(&mut self.adj[old.row], leaving);
        remove_from_adj(&mut self.adj[self.m + old.col], leaving);
        self.arcs[leaving] = BasisArc {
            row: ei,
            col: ej,
            flow: theta,
        };
        self.adj[ei].push(leaving);
        self.adj[self.m + ej].push(leaving);
        Ok(())
    }
}

fn remove_from_adj(list: &mut Vec<usize>, arc_idx: usize) {
    if let Some(pos) = list.iter().position(|&x| x == arc_idx) {
        list.swap_remove(pos);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Point;
    use approx::assert_abs_diff_eq;

    fn m1(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            atoms
                .iter()
                .map(|&(x, w)| (Point::scalar(x), w))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_distance_is_zero() {
        let mu = m1(&[(0.0, 0.25), (1.0, 0.5), (-2.0, 0.25)]);
        let (d, plan) = wasserstein_exact(&mu, &mu, 2.0).unwrap();
        assert!(d <= 1e-9, "identity distance {d}");
        let rows = plan.row_sums();
        for (s, a) in rows.iter().zip(mu.atoms()) {
            assert_abs_diff_eq!(s, &a.weight, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_point_to_dirac() {
        let mu = m1(&[(0.0, 0.5), (1.0, 0.5)]);
        let nu = DiscreteMeasure::dirac(Point::scalar(0.5));
        let (d, _) = wasserstein_exact(&mu, &nu, 1.0).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quantile_closed_form_cases() {
        let d = wasserstein_1d(
            &DiscreteMeasure::dirac(Point::scalar(0.0)),
            &DiscreteMeasure::dirac(Point::scalar(3.0)),
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(d, 3.0, epsilon = 1e-12);

        let mu = m1(&[(0.0, 0.5), (1.0, 0.5)]);
        let nu = m1(&[(1.0, 0.5), (2.0, 0.5)]);
        assert_abs_diff_eq!(wasserstein_1d(&mu, &nu, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dual_on_two_diracs() {
        let mu = DiscreteMeasure::dirac(Point::scalar(0.0));
        let nu = DiscreteMeasure::dirac(Point::scalar(1.0));
        let (value, pots) = kr_dual(&mu, &nu).unwrap();
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-9);
        // Feasibility on the joint support.
        assert!(pots.phi[0] - pots.psi[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn dual_identity_is_zero() {
        let mu = m1(&[(0.0, 0.25), (2.0, 0.75)]);
        let (value, _) = kr_dual(&mu, &mu).unwrap();
        assert!(value.abs() <= 1e-9);
    }

    #[test]
    fn brute_force_small_cases() {
        let mu = DiscreteMeasure::uniform(vec![
            Point::scalar(0.0),
            Point::scalar(1.0),
            Point::scalar(2.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            brute_force_wasserstein(&mu, &mu, 1.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let a = DiscreteMeasure::uniform(vec![Point::scalar(0.0), Point::scalar(1.0)]).unwrap();
        let b = DiscreteMeasure::uniform(vec![Point::scalar(1.0), Point::scalar(2.0)]).unwrap();
        assert_abs_diff_eq!(
            brute_force_wasserstein(&a, &b, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn brute_force_rejects_nonuniform() {
        let mu = m1(&[(0.0, 0.25), (1.0, 0.75)]);
        let nu = m1(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!(brute_force_wasserstein(&mu, &nu, 1.0).is_err());
    }

    #[test]
    fn plan_marginals_feasible() {
        let mu = m1(&[(0.0, 0.3), (1.0, 0.3), (5.0, 0.4)]);
        let nu = m1(&[(-1.0, 0.6), (2.0, 0.4)]);
        let (_, plan) = wasserstein_exact(&mu, &nu, 1.5).unwrap();
        for (s, w) in plan.row_sums().iter().zip(plan.row_marginal()) {
            assert_abs_diff_eq!(s, w, epsilon = 1e-9);
        }
        for (s, w) in plan.col_sums().iter().zip(plan.col_marginal()) {
            assert_abs_diff_eq!(s, w, epsilon = 1e-9);
        }
        for (_, _, g) in plan.nonzeros() {
            assert!(g >= 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mu = m1(&[(0.0, 1.0)]);
        let nu = DiscreteMeasure::dirac(Point::new(vec![0.0, 0.0]).unwrap());
        assert!(wasserstein_exact(&mu, &nu, 1.0).is_err());
        assert!(wasserstein_1d(&nu, &nu, 1.0).is_err());
    }
}
