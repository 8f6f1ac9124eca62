//! Slow, direct reference implementations used to check the fast paths.
//! Compiled for tests and behind the `oracles` feature.

use nalgebra::{DMatrix, DVector};

fn sgn(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Tau-a by enumerating all `M(M-1)/2` pairs.
pub fn kendall_tau_pairs(g: &[f64], t: &[f64]) -> f64 {
    let m = g.len();
    let mut s = 0i64;
    for i in 0..m {
        for j in i + 1..m {
            s += sgn(g[i] - g[j]) * sgn(t[i] - t[j]);
        }
    }
    s as f64 / (m * (m - 1) / 2) as f64
}

/// Weighted tau by pair enumeration. The rank of model `i` starts at the
/// number of strictly better models; tied models average `1/(1+r)` over the
/// positions they jointly occupy.
pub fn weighted_kendall_tau_pairs(g: &[f64], t: &[f64]) -> f64 {
    let m = g.len();
    let w: Vec<f64> = (0..m)
        .map(|i| {
            let better = (0..m).filter(|&j| g[j] > g[i]).count();
            let tied = (0..m).filter(|&j| g[j] == g[i]).count();
            (better..better + tied).map(|r| 1.0 / (1.0 + r as f64)).sum::<f64>() / tied as f64
        })
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            num += (w[i] + w[j]) * (sgn(g[i] - g[j]) * sgn(t[i] - t[j])) as f64;
            den += w[i] + w[j];
        }
    }
    num / den
}

/// Optimal transport cost between the uniform empirical measures on `p` and
/// `q` with ground cost `|x - y|`, solved as a min-cost flow. Each point of
/// `p` supplies `|q|` units and each point of `q` demands `|p|` units, so all
/// capacities are integers and successive shortest paths reach the LP optimum.
pub fn transport_lp(p: &[f64], q: &[f64]) -> f64 {
    let (n, m) = (p.len(), q.len());
    assert!(n > 0 && m > 0);
    // nodes: 0 = source, 1..=n supply, n+1..=n+m demand, n+m+1 = sink
    let nodes = n + m + 2;
    let sink = nodes - 1;
    struct Edge {
        to: usize,
        cap: i64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, a: usize, b: usize, cap: i64, cost: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost });
        adj[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0, cost: -cost });
    };
    for i in 0..n {
        add(&mut edges, 0, 1 + i, m as i64, 0.0);
        for j in 0..m {
            add(&mut edges, 1 + i, 1 + n + j, i64::MAX / 4, (p[i] - q[j]).abs());
        }
    }
    for j in 0..m {
        add(&mut edges, 1 + n + j, sink, n as i64, 0.0);
    }

    let mut remaining = (n * m) as i64;
    let mut total = 0.0;
    while remaining > 0 {
        // Bellman-Ford over the residual graph
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    // the slack absorbs rounding on zero-cost residual cycles
                    if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] - 1e-12 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[sink].is_finite(), "demand must be reachable");
        let mut push = remaining;
        let mut v = sink;
        for hop in 0.. {
            if v == 0 {
                break;
            }
            assert!(hop < nodes, "predecessor walk does not reach the source");
            let e = via[v];
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != 0 {
            let e = via[v];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push as f64 * edges[e].cost;
            v = edges[e ^ 1].to;
        }
        remaining -= push;
    }
    total / (n * m) as f64
}

/// Log evidence of Bayesian linear regression `y ~ N(F m, 1/beta)`,
/// `m ~ N(0, 1/alpha)`, evaluated with a dense Cholesky solve.
pub fn logme_dense_evidence(f: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, beta: f64) -> f64 {
    let (n, d) = (f.nrows() as f64, f.ncols());
    let a = DMatrix::identity(d, d) * alpha + f.transpose() * f * beta;
    let chol = a.cholesky().expect("alpha > 0 keeps A positive definite");
    let m = chol.solve(&(f.transpose() * y)) * beta;
    let res = (f * &m - y).norm_squared();
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    0.5 * d as f64 * alpha.ln() + 0.5 * n * beta.ln()
        - 0.5 * beta * res
        - 0.5 * alpha * m.norm_squared()
        - 0.5 * log_det
        - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// LogME by brute force: per class, the best evidence over a log-spaced
/// `steps x steps` grid of `(alpha, beta)` in `[1e-6, 1e6]^2`, divided by `N`,
/// then averaged over the distinct labels.
pub fn logme_grid(data: &[f32], n: usize, d: usize, labels: &[i64], steps: usize) -> f64 {
    let f = DMatrix::from_fn(n, d, |i, j| f64::from(data[i * d + j]));
    let grid: Vec<f64> = (0..steps).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (steps - 1) as f64)).collect();
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0;
    for &c in &classes {
        let y = DVector::from_iterator(n, labels.iter().map(|&l| f64::from(l == c)));
        let mut best = f64::NEG_INFINITY;
        for &a in &grid {
            for &b in &grid {
                best = best.max(logme_dense_evidence(&f, &y, a, b));
            }
        }
        total += best / n as f64;
    }
    total / classes.len() as f64
}
