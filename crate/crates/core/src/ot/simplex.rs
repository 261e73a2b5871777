//! Primal network simplex for the complete bipartite transportation problem.
//!
//! Sources `0..n`, sinks `n..n+m`, artificial root `n+m`. Edge `e < n·m` joins
//! source `e / m` to sink `n + e % m`; edge `n·m + k` is the artificial edge of node
//! `k`. The spanning tree is stored with parent pointers, subtree sizes and a
//! depth-first thread. Only tree edges carry flow, kept on the child node.

const NONE: usize = usize::MAX;

pub(crate) struct Solution {
    /// `(source, sink, mass)` on edges with positive flow.
    pub plan: Vec<(usize, usize, f64)>,
    /// Node potentials; reduced cost `c_ij - π_i + π_j ≥ 0`.
    pub potentials: Vec<f64>,
    /// Largest residual flow left on artificial edges.
    pub artificial_flow: f64,
    pub pivots: usize,
}

struct Tree<'a> {
    n: usize,
    m: usize,
    root: usize,
    cost: &'a dyn Fn(usize, usize) -> f64,
    big_m: f64,
    source_like: Vec<bool>,
    parent: Vec<usize>,
    pedge: Vec<usize>,
    pflow: Vec<f64>,
    size: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    last: Vec<usize>,
    pi: Vec<f64>,
}

impl<'a> Tree<'a> {
    fn ends(&self, e: usize) -> (usize, usize) {
        let nm = self.n * self.m;
        if e < nm {
            (e / self.m, self.n + e % self.m)
        } else {
            let k = e - nm;
            if self.source_like[k] {
                (k, self.root)
            } else {
                (self.root, k)
            }
        }
    }

    fn weight(&self, e: usize) -> f64 {
        if e < self.n * self.m {
            (self.cost)(e / self.m, e % self.m)
        } else {
            self.big_m
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (s, t) = self.ends(e);
        self.weight(e) - self.pi[s] + self.pi[t]
    }

    fn is_tree_edge(&self, e: usize) -> bool {
        let (s, t) = self.ends(e);
        (self.parent[s] == t && self.pedge[s] == e) || (self.parent[t] == s && self.pedge[t] == e)
    }

    fn find_apex(&self, mut p: usize, mut q: usize) -> usize {
        let mut sp = self.size[p];
        let mut sq = self.size[q];
        loop {
            while sp < sq {
                p = self.parent[p];
                sp = self.size[p];
            }
            while sp > sq {
                q = self.parent[q];
                sq = self.size[q];
            }
            if sp == sq {
                if p != q {
                    p = self.parent[p];
                    sp = self.size[p];
                    q = self.parent[q];
                    sq = self.size[q];
                } else {
                    return p;
                }
            }
        }
    }

    fn trace_path(&self, mut p: usize, w: usize) -> (Vec<usize>, Vec<usize>) {
        let mut nodes = vec![p];
        let mut edges = Vec::new();
        while p != w {
            edges.push(self.pedge[p]);
            p = self.parent[p];
            nodes.push(p);
        }
        (nodes, edges)
    }

    /// Cycle through entering edge `i = (p, q)`, oriented from `p` to `q`.
    fn find_cycle(&self, i: usize, p: usize, q: usize) -> (Vec<usize>, Vec<usize>) {
        let w = self.find_apex(p, q);
        let (mut wn, mut we) = self.trace_path(p, w);
        wn.reverse();
        we.reverse();
        we.push(i);
        let (mut wn_r, we_r) = self.trace_path(q, w);
        wn_r.pop();
        wn.extend(wn_r);
        we.extend(we_r);
        (wn, we)
    }

    /// Tree node holding the flow of tree edge `e` between `a` and `b`.
    fn slot(&self, e: usize, a: usize, b: usize) -> usize {
        if self.parent[a] == b && self.pedge[a] == e {
            a
        } else {
            b
        }
    }

    fn flow(&self, e: usize, a: usize, b: usize, entering: usize, entering_flow: f64) -> f64 {
        if e == entering {
            entering_flow
        } else {
            self.pflow[self.slot(e, a, b)]
        }
    }

    fn residual(&self, e: usize, from: usize, flow: f64) -> f64 {
        if self.ends(e).0 == from {
            f64::INFINITY
        } else {
            flow
        }
    }

    fn remove_edge(&mut self, mut s: usize, t: usize) {
        let size_t = self.size[t];
        let prev_t = self.prev[t];
        let last_t = self.last[t];
        let next_last_t = self.next[last_t];
        self.parent[t] = NONE;
        self.pedge[t] = NONE;
        self.next[prev_t] = next_last_t;
        self.prev[next_last_t] = prev_t;
        self.next[last_t] = t;
        self.prev[t] = last_t;
        while s != NONE {
            self.size[s] -= size_t;
            if self.last[s] == last_t {
                self.last[s] = prev_t;
            }
            s = self.parent[s];
        }
    }

    fn make_root(&mut self, mut q: usize) {
        let mut ancestors = Vec::new();
        while q != NONE {
            ancestors.push(q);
            q = self.parent[q];
        }
        ancestors.reverse();
        for w in ancestors.windows(2) {
            let (p, q) = (w[0], w[1]);
            let size_p = self.size[p];
            let mut last_p = self.last[p];
            let prev_q = self.prev[q];
            let last_q = self.last[q];
            let next_last_q = self.next[last_q];
            self.parent[p] = q;
            self.parent[q] = NONE;
            self.pedge[p] = self.pedge[q];
            self.pflow[p] = self.pflow[q];
            self.pedge[q] = NONE;
            self.size[p] = size_p - self.size[q];
            self.size[q] = size_p;
            self.next[prev_q] = next_last_q;
            self.prev[next_last_q] = prev_q;
            self.next[last_q] = q;
            self.prev[q] = last_q;
            if last_p == last_q {
                self.last[p] = prev_q;
                last_p = prev_q;
            }
            self.prev[p] = last_q;
            self.next[last_q] = p;
            self.next[last_p] = q;
            self.prev[q] = last_p;
            self.last[q] = last_p;
        }
    }

    fn add_edge(&mut self, i: usize, mut p: usize, q: usize, flow: f64) {
        let last_p = self.last[p];
        let next_last_p = self.next[last_p];
        let size_q = self.size[q];
        let last_q = self.last[q];
        self.parent[q] = p;
        self.pedge[q] = i;
        self.pflow[q] = flow;
        self.next[last_p] = q;
        self.prev[q] = last_p;
        self.prev[next_last_p] = last_q;
        self.next[last_q] = next_last_p;
        while p != NONE {
            self.size[p] += size_q;
            if self.last[p] == last_p {
                self.last[p] = last_q;
            }
            p = self.parent[p];
        }
    }

    fn update_potentials(&mut self, i: usize, p: usize, q: usize) {
        let w = self.weight(i);
        let d = if q == self.ends(i).1 {
            self.pi[p] - w - self.pi[q]
        } else {
            self.pi[p] + w - self.pi[q]
        };
        let l = self.last[q];
        let mut r = q;
        loop {
            self.pi[r] += d;
            if r == l {
                break;
            }
            r = self.next[r];
        }
    }

    /// Recomputes every potential from the tree, root first along the thread.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut q = self.next[self.root];
        while q != self.root {
            let p = self.parent[q];
            let e = self.pedge[q];
            let w = self.weight(e);
            self.pi[q] = if q == self.ends(e).1 {
                self.pi[p] - w
            } else {
                self.pi[p] + w
            };
            q = self.next[q];
        }
    }

    fn pivot(&mut self, i: usize) {
        // non-tree edges carry no flow, so the cycle runs along the edge direction
        let (p, q) = self.ends(i);
        let (wn, we) = self.find_cycle(i, p, q);
        let len = we.len();
        let node_after = |k: usize| wn[(k + 1) % len];

        let mut best = f64::INFINITY;
        let mut leave = 0;
        for k in (0..len).rev() {
            let e = we[k];
            let f = self.flow(e, wn[k], node_after(k), i, 0.0);
            let r = self.residual(e, wn[k], f);
            if r < best {
                best = r;
                leave = k;
            }
        }
        let delta = best;
        let mut entering_flow = 0.0;
        for k in 0..len {
            let e = we[k];
            let forward = self.ends(e).0 == wn[k];
            if e == i {
                entering_flow = if forward { delta } else { -delta };
                continue;
            }
            let slot = self.slot(e, wn[k], node_after(k));
            if forward {
                self.pflow[slot] += delta;
            } else {
                self.pflow[slot] -= delta;
            }
        }
        let j = we[leave];
        if i == j {
            return;
        }
        let (mut s, mut t) = (wn[leave], node_after(leave));
        if self.parent[t] != s {
            std::mem::swap(&mut s, &mut t);
        }
        let (mut p, mut q) = (p, q);
        let pos_i = we.iter().position(|&e| e == i).expect("entering edge on cycle");
        if pos_i > leave {
            std::mem::swap(&mut p, &mut q);
        }
        self.remove_edge(s, t);
        self.make_root(q);
        self.add_edge(i, p, q, entering_flow);
        self.update_potentials(i, p, q);
    }
}

/// Solves `min Σ c_ij γ_ij` subject to row sums `supply` and column sums `demand`.
/// Both sides must carry the same total mass.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Solution {
    let (n, m) = (supply.len(), demand.len());
    let nodes = n + m;
    let root = nodes;

    let mut c_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..m {
            c_max = c_max.max(cost(i, j).abs());
        }
    }
    let big_m = (nodes as f64 + 1.0) * c_max.max(1.0);

    let node_supply: Vec<f64> = supply.iter().cloned().chain(demand.iter().map(|d| -d)).collect();
    let source_like: Vec<bool> = node_supply.iter().map(|&s| s >= 0.0).collect();

    let mut tree = Tree {
        n,
        m,
        root,
        cost,
        big_m,
        pi: source_like
            .iter()
            .map(|&s| if s { big_m } else { -big_m })
            .chain(std::iter::once(0.0))
            .collect(),
        source_like,
        parent: (0..nodes).map(|_| root).chain(std::iter::once(NONE)).collect(),
        pedge: (0..nodes).map(|k| n * m + k).chain(std::iter::once(NONE)).collect(),
        pflow: node_supply.iter().map(|s| s.abs()).chain(std::iter::once(0.0)).collect(),
        size: std::iter::repeat_n(1, nodes).chain(std::iter::once(nodes + 1)).collect(),
        next: (1..=nodes).chain(std::iter::once(0)).collect(),
        prev: std::iter::once(root).chain(0..nodes).collect(),
        last: (0..nodes).chain(std::iter::once(nodes - 1)).collect(),
    };

    let edge_count = n * m + nodes;
    let block = (edge_count as f64).sqrt().ceil() as usize;
    let blocks = edge_count.div_ceil(block);
    let tol = 64.0 * f64::EPSILON * (big_m + c_max);
    let mut idle = 0;
    let mut first = 0;
    let mut pivots = 0usize;
    while idle < blocks {
        let mut best = 0.0;
        let mut best_e = NONE;
        for k in 0..block {
            let e = (first + k) % edge_count;
            let c = tree.reduced_cost(e);
            if c < best && !tree.is_tree_edge(e) {
                best = c;
                best_e = e;
            }
        }
        first = (first + block) % edge_count;
        if best_e == NONE || best >= -tol {
            idle += 1;
            continue;
        }
        tree.pivot(best_e);
        pivots += 1;
        idle = 0;
        if pivots % 1024 == 0 {
            tree.refresh_potentials();
        }
    }
    tree.refresh_potentials();

    let mut plan = Vec::new();
    let mut artificial_flow: f64 = 0.0;
    for v in 0..nodes {
        let e = tree.pedge[v];
        let f = tree.pflow[v];
        if e >= n * m {
            artificial_flow = artificial_flow.max(f.abs());
        } else if f > 0.0 {
            plan.push((e / m, e % m, f));
        }
    }
    plan.sort_by_key(|&(i, j, _)| (i, j));
    Solution {
        plan,
        potentials: tree.pi,
        artificial_flow,
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_2x2(a: [f64; 2], b: [f64; 2], c: [[f64; 2]; 2]) -> f64 {
        // one free parameter: γ00 ∈ [max(0, a0 - b1), min(a0, b0)]
        let lo = (a[0] - b[1]).max(0.0);
        let hi = a[0].min(b[0]);
        let eval = |g00: f64| {
            let g01 = a[0] - g00;
            let g10 = b[0] - g00;
            let g11 = a[1] - g10;
            c[0][0] * g00 + c[0][1] * g01 + c[1][0] * g10 + c[1][1] * g11
        };
        eval(lo).min(eval(hi))
    }

    #[test]
    fn two_by_two_matches_brute_force() {
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        let c = [[1.0, 4.0], [2.5, 0.5]];
        let sol = solve(&a, &b, &|i, j| c[i][j]);
        let cost: f64 = sol.plan.iter().map(|&(i, j, f)| f * c[i][j]).sum();
        assert!((cost - brute_force_2x2(a, b, c)).abs() < 1e-12);
        assert!(sol.artificial_flow < 1e-12);
    }

    #[test]
    fn reduced_costs_are_nonnegative_and_tight_on_plan() {
        let n = 7;
        let m = 9;
        let a: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 1.3).sin().abs()).collect();
        let sa: f64 = a.iter().sum();
        let b: Vec<f64> = (0..m).map(|j| 1.0 + (j as f64 * 0.7).cos().abs()).collect();
        let sb: f64 = b.iter().sum();
        let b: Vec<f64> = b.iter().map(|v| v * sa / sb).collect();
        let cost = |i: usize, j: usize| ((i as f64) * 0.37 - (j as f64) * 0.29).powi(2);
        let sol = solve(&a, &b, &cost);
        let pi = &sol.potentials;
        for i in 0..n {
            for j in 0..m {
                assert!(cost(i, j) - pi[i] + pi[n + j] > -1e-9);
            }
        }
        for &(i, j, _) in &sol.plan {
            assert!((cost(i, j) - pi[i] + pi[n + j]).abs() < 1e-9);
        }
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; m];
        for &(i, j, f) in &sol.plan {
            rows[i] += f;
            cols[j] += f;
        }
        for i in 0..n {
            assert!((rows[i] - a[i]).abs() < 1e-12);
        }
        for j in 0..m {
            assert!((cols[j] - b[j]).abs() < 1e-12);
        }
    }
}
