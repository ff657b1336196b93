//! Exact discrete optimal transport via the transportation simplex, and
//! the 2-Wasserstein distance between Gaussian mixtures built on it.

use super::gmm::GmmModel;
use super::stats::frechet_distance;
use super::MetricError;
use crate::real::{real, Real};
use ndarray::Array2;

/// Exact optimal transport between discrete marginals.
///
/// Solves `min Σ plan[i][j]·cost[i][j]` subject to the row sums matching
/// `supply` and the column sums matching `demand` (which must total the
/// same mass). Returns the optimal plan and its cost. Northwest-corner
/// start, then MODI pivots with Bland's rule, so the solve terminates and
/// is deterministic.
pub fn transport<S: Real>(
    cost: &Array2<S>,
    supply: &[S],
    demand: &[S],
) -> Result<(Array2<S>, S), MetricError> {
    let m = supply.len();
    let n = demand.len();
    if cost.nrows() != m || cost.ncols() != n {
        return Err(MetricError::DimensionMismatch(format!(
            "cost is {}×{}, marginals are {m} and {n}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    let total_a = supply.iter().fold(S::zero(), |a, &x| a + x);
    let total_b = demand.iter().fold(S::zero(), |a, &x| a + x);
    if (total_a - total_b).abs() > real(1e-9) {
        return Err(MetricError::NonFinite(format!(
            "marginals carry different mass: {total_a} vs {total_b}"
        )));
    }
    // Rescale demand so the masses match exactly in float arithmetic.
    let mut demand: Vec<S> = demand.to_vec();
    if total_b > S::zero() {
        let scale = total_a / total_b;
        for d in demand.iter_mut() {
            *d *= scale;
        }
    }

    let mut flow = Array2::<S>::zeros((m, n));
    let mut basic = vec![vec![false; n]; m];

    // Northwest-corner initialization: exactly m + n − 1 basic cells,
    // zero-flow cells included when a row and column exhaust together.
    {
        let mut a = supply.to_vec();
        let mut b = demand.clone();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let x = a[i].min(b[j]);
            flow[[i, j]] = x;
            basic[i][j] = true;
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if a[i] <= S::zero() && i < m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cost_scale = cost
        .iter()
        .fold(S::one(), |acc, &c| acc.max(c.abs()));
    let tol = cost_scale * real(1e-12);

    let max_pivots = 200 * (m + n) * (m + n);
    for _ in 0..max_pivots {
        let (u, v) = duals(cost, &basic, m, n);
        // Bland's rule: first improving cell in lexicographic order.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if !basic[i][j] && cost[[i, j]] - u[i] - v[j] < -tol {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // Unique cycle: the entering cell plus the tree path from its
        // column node back to its row node.
        let path = tree_path(&basic, m, n, ei, ej);
        // Cells along the cycle alternate −θ/+θ starting at the first
        // path edge; find θ as the minimum flow on the −θ cells.
        let mut theta = S::infinity();
        let mut leaving = (ei, ej);
        for (idx, &(i, j)) in path.iter().enumerate() {
            if idx % 2 == 0 {
                let f = flow[[i, j]];
                if f < theta || (f == theta && (i, j) < leaving) {
                    theta = f;
                    leaving = (i, j);
                }
            }
        }
        flow[[ei, ej]] += theta;
        for (idx, &(i, j)) in path.iter().enumerate() {
            if idx % 2 == 0 {
                flow[[i, j]] -= theta;
            } else {
                flow[[i, j]] += theta;
            }
        }
        basic[leaving.0][leaving.1] = false;
        flow[[leaving.0, leaving.1]] = S::zero();
        basic[ei][ej] = true;
    }

    let mut total = S::zero();
    for i in 0..m {
        for j in 0..n {
            total += flow[[i, j]] * cost[[i, j]];
        }
    }
    Ok((flow, total))
}

/// Dual potentials from the basis tree (`u[0] = 0`).
fn duals<S: Real>(
    cost: &Array2<S>,
    basic: &[Vec<bool>],
    m: usize,
    n: usize,
) -> (Vec<S>, Vec<S>) {
    let mut u = vec![S::zero(); m];
    let mut v = vec![S::zero(); n];
    let mut u_known = vec![false; m];
    let mut v_known = vec![false; n];
    u_known[0] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(NodeId::Row(0));
    while let Some(node) = queue.pop_front() {
        match node {
            NodeId::Row(i) => {
                for j in 0..n {
                    if basic[i][j] && !v_known[j] {
                        v[j] = cost[[i, j]] - u[i];
                        v_known[j] = true;
                        queue.push_back(NodeId::Col(j));
                    }
                }
            }
            NodeId::Col(j) => {
                for i in 0..m {
                    if basic[i][j] && !u_known[i] {
                        u[i] = cost[[i, j]] - v[j];
                        u_known[i] = true;
                        queue.push_back(NodeId::Row(i));
                    }
                }
            }
        }
    }
    (u, v)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum NodeId {
    Row(usize),
    Col(usize),
}

/// Cells along the basis-tree path from column `ej` to row `ei`,
/// alternating (row-of-current-col, col) then (row, next-col) pairs. The
/// first returned cell is adjacent to the entering column.
fn tree_path(basic: &[Vec<bool>], m: usize, n: usize, ei: usize, ej: usize) -> Vec<(usize, usize)> {
    // BFS from Col(ej) to Row(ei) over basic cells.
    let start = NodeId::Col(ej);
    let goal = NodeId::Row(ei);
    let mut parent: std::collections::HashMap<NodeId, NodeId> = std::collections::HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    parent.insert(start, start);
    'bfs: while let Some(node) = queue.pop_front() {
        match node {
            NodeId::Col(j) => {
                for i in 0..m {
                    let next = NodeId::Row(i);
                    if basic[i][j] && !parent.contains_key(&next) {
                        parent.insert(next, node);
                        if next == goal {
                            break 'bfs;
                        }
                        queue.push_back(next);
                    }
                }
            }
            NodeId::Row(i) => {
                for j in 0..n {
                    let next = NodeId::Col(j);
                    if basic[i][j] && !parent.contains_key(&next) {
                        parent.insert(next, node);
                        queue.push_back(next);
                    }
                }
            }
        }
    }

    // Walk back from the goal, emitting the cell of every edge.
    let mut cells = Vec::new();
    let mut node = goal;
    while node != start {
        let prev = parent[&node];
        let cell = match (node, prev) {
            (NodeId::Row(i), NodeId::Col(j)) | (NodeId::Col(j), NodeId::Row(i)) => (i, j),
            _ => unreachable!("bipartite path alternates row/col"),
        };
        cells.push(cell);
        node = prev;
    }
    // `cells` runs goal→start; the cycle wants start→goal order so that
    // the first cell shares the entering column.
    cells.reverse();
    cells
}

impl std::hash::Hash for NodeId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            NodeId::Row(i) => {
                state.write_u8(0);
                state.write_usize(*i);
            }
            NodeId::Col(j) => {
                state.write_u8(1);
                state.write_usize(*j);
            }
        }
    }
}

/// 2-Wasserstein distance between Gaussian mixtures.
///
/// Pairwise component costs are squared Gaussian W2 distances
/// (`‖Δμ‖² + Bures`), the discrete transport problem over the mixture
/// weights is solved exactly, and the square root of the optimal cost is
/// returned.
pub fn gmm_w2<S: Real>(a: &GmmModel<S>, b: &GmmModel<S>) -> Result<S, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch(format!(
            "mixtures have dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let ka = a.k();
    let kb = b.k();
    let mut cost = Array2::<S>::zeros((ka, kb));
    for i in 0..ka {
        for j in 0..kb {
            cost[[i, j]] = frechet_distance(&a.components[i], &b.components[j])?;
        }
    }
    let (_, total) = transport(&cost, &a.weights, &b.weights)?;
    Ok(total.max(S::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::stats::GaussianStats;
    use approx::assert_relative_eq;
    use ndarray::{array, Array1};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Brute-force oracle: enumerate all bases (spanning trees) of the
    /// transportation polytope and take the cheapest feasible one.
    fn transport_oracle(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
        let m = a.len();
        let n = b.len();
        let cells: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect();
        let basis_size = m + n - 1;
        let mut best = f64::INFINITY;

        // Iterate over all cell subsets of size m+n−1.
        let total = cells.len();
        let mut idx: Vec<usize> = (0..basis_size).collect();
        loop {
            // Try to solve the tree system by repeatedly stripping leaves.
            let chosen: Vec<(usize, usize)> = idx.iter().map(|&k| cells[k]).collect();
            if let Some(flows) = solve_tree(&chosen, a, b) {
                if flows.iter().all(|&f| f >= -1e-9) {
                    let c: f64 = chosen
                        .iter()
                        .zip(&flows)
                        .map(|(&(i, j), &f)| f * cost[[i, j]])
                        .sum();
                    best = best.min(c);
                }
            }
            // Next combination.
            let mut pos = basis_size;
            loop {
                if pos == 0 {
                    return best;
                }
                pos -= 1;
                if idx[pos] + 1 <= total - (basis_size - pos) {
                    idx[pos] += 1;
                    for p in pos + 1..basis_size {
                        idx[p] = idx[p - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn solve_tree(cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let m = a.len();
        let n = b.len();
        let mut residual_a = a.to_vec();
        let mut residual_b = b.to_vec();
        let mut flows = vec![f64::NAN; cells.len()];
        let mut active: Vec<bool> = vec![true; cells.len()];
        for _ in 0..cells.len() {
            // Find a leaf: a row or column incident to exactly one active cell.
            let mut leaf = None;
            for node in 0..m + n {
                let incident: Vec<usize> = cells
                    .iter()
                    .enumerate()
                    .filter(|&(k, &(i, j))| active[k] && (if node < m { i == node } else { j == node - m }))
                    .map(|(k, _)| k)
                    .collect();
                if incident.len() == 1 {
                    leaf = Some((node, incident[0]));
                    break;
                }
            }
            let (node, k) = leaf?;
            let (i, j) = cells[k];
            let f = if node < m { residual_a[i] } else { residual_b[j] };
            flows[k] = f;
            residual_a[i] -= f;
            residual_b[j] -= f;
            active[k] = false;
        }
        Some(flows)
    }

    #[test]
    fn transport_matches_brute_force_on_3x3() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..25 {
            let mut cost = Array2::<f64>::zeros((3, 3));
            for v in cost.iter_mut() {
                *v = rng.random_range(0.0..5.0);
            }
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for v in a.iter_mut() {
                *v = rng.random_range(0.1..1.0);
            }
            let sa: f64 = a.iter().sum();
            for v in a.iter_mut() {
                *v /= sa;
            }
            for v in b.iter_mut() {
                *v = rng.random_range(0.1..1.0);
            }
            let sb: f64 = b.iter().sum();
            for v in b.iter_mut() {
                *v /= sb;
            }
            let (_, got) = transport(&cost, &a, &b).unwrap();
            let want = transport_oracle(&cost, &a, &b);
            assert_relative_eq!(got, want, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn transport_identity_cost_zero_diagonal() {
        // Identical marginals with zero diagonal cost: stay put.
        let cost = array![[0.0, 3.0], [3.0, 0.0]];
        let a = [0.3, 0.7];
        let (plan, total) = transport(&cost, &a, &a).unwrap();
        assert_relative_eq!(total, 0.0);
        assert_relative_eq!(plan[[0, 0]], 0.3);
        assert_relative_eq!(plan[[1, 1]], 0.7);
    }

    #[test]
    fn transport_respects_marginals() {
        let cost = array![[1.0, 2.0, 0.5], [0.5, 1.5, 2.5]];
        let a = [0.6, 0.4];
        let b = [0.2, 0.3, 0.5];
        let (plan, _) = transport(&cost, &a, &b).unwrap();
        for i in 0..2 {
            let row: f64 = (0..3).map(|j| plan[[i, j]]).sum();
            assert_relative_eq!(row, a[i], epsilon = 1e-12);
        }
        for j in 0..3 {
            let col: f64 = (0..2).map(|i| plan[[i, j]]).sum();
            assert_relative_eq!(col, b[j], epsilon = 1e-12);
        }
    }

    fn gaussian_1d(mean: f64, var: f64) -> GaussianStats<f64> {
        GaussianStats {
            mean: Array1::from(vec![mean]),
            cov: array![[var]],
        }
    }

    fn mixture_1d(parts: &[(f64, f64, f64)]) -> GmmModel<f64> {
        GmmModel {
            weights: parts.iter().map(|p| p.0).collect(),
            components: parts.iter().map(|p| gaussian_1d(p.1, p.2)).collect(),
        }
    }

    #[test]
    fn identical_mixtures_have_zero_distance() {
        let m = mixture_1d(&[(0.5, -1.0, 0.5), (0.5, 2.0, 1.5)]);
        assert!(gmm_w2(&m, &m).unwrap() <= 1e-9);
    }

    #[test]
    fn single_component_reduces_to_gaussian_w2() {
        // Closed form in 1-D: W2² = (m1−m2)² + (σ1−σ2)².
        let a = mixture_1d(&[(1.0, 0.0, 4.0)]);
        let b = mixture_1d(&[(1.0, 3.0, 1.0)]);
        let want = (9.0f64 + (2.0 - 1.0) * (2.0 - 1.0)).sqrt();
        assert_relative_eq!(gmm_w2(&a, &b).unwrap(), want, epsilon = 1e-5);
    }

    #[test]
    fn mixture_distance_is_symmetric() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let a = mixture_1d(&[
                (0.4, rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0)),
                (0.6, rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0)),
            ]);
            let b = mixture_1d(&[
                (0.7, rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0)),
                (0.3, rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0)),
            ]);
            let ab = gmm_w2(&a, &b).unwrap();
            let ba = gmm_w2(&b, &a).unwrap();
            assert_relative_eq!(ab, ba, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn mixture_distance_satisfies_triangle_inequality() {
        let mut rng = StdRng::seed_from_u64(23);
        let random_mixture = |rng: &mut StdRng| {
            let w = rng.random_range(0.2..0.8);
            mixture_1d(&[
                (w, rng.random_range(-4.0..4.0), rng.random_range(0.3..2.0)),
                (1.0 - w, rng.random_range(-4.0..4.0), rng.random_range(0.3..2.0)),
            ])
        };
        for _ in 0..50 {
            let a = random_mixture(&mut rng);
            let b = random_mixture(&mut rng);
            let c = random_mixture(&mut rng);
            let ab = gmm_w2(&a, &b).unwrap();
            let bc = gmm_w2(&b, &c).unwrap();
            let ac = gmm_w2(&a, &c).unwrap();
            assert!(
                ac <= ab + bc + 1e-8,
                "triangle violated: {ac} > {ab} + {bc}"
            );
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = mixture_1d(&[(1.0, 0.0, 1.0)]);
        let b = GmmModel {
            weights: vec![1.0],
            components: vec![GaussianStats {
                mean: Array1::from(vec![0.0, 0.0]),
                cov: Array2::eye(2),
            }],
        };
        assert!(matches!(
            gmm_w2(&a, &b),
            Err(MetricError::DimensionMismatch(_))
        ));
    }
}
