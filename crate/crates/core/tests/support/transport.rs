// Exact optimal transport between integer mass vectors with an arbitrary
// non-negative integer cost matrix, by successive shortest augmenting paths
// (Bellman-Ford on the residual network, one unit at a time).

pub fn min_cost_transport(supply: &[u64], demand: &[u64], cost: &[Vec<i64>]) -> i64 {
    assert_eq!(supply.iter().sum::<u64>(), demand.iter().sum::<u64>());
    let n = supply.len();
    let m = demand.len();
    // nodes: source 0, supplies 1..=n, demands n+1..=n+m, sink n+m+1
    let nodes = n + m + 2;
    let sink = nodes - 1;
    struct Edge {
        to: usize,
        cap: i64,
        cost: i64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, u: usize, v: usize, cap: i64, c: i64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost: c });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0, cost: -c });
    };
    for i in 0..n {
        add(&mut edges, &mut adj, 0, 1 + i, supply[i] as i64, 0);
        for j in 0..m {
            add(&mut edges, &mut adj, 1 + i, 1 + n + j, i64::MAX / 4, cost[i][j]);
        }
    }
    for j in 0..m {
        add(&mut edges, &mut adj, 1 + n + j, sink, demand[j] as i64, 0);
    }
    let total: u64 = supply.iter().sum();
    let mut paid = 0i64;
    for _ in 0..total {
        let mut dist = vec![i64::MAX; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[0] = 0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == i64::MAX {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    if ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] {
                        dist[ed.to] = dist[u] + ed.cost;
                        via[ed.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[sink] < i64::MAX, "infeasible transport");
        let mut v = sink;
        while v != 0 {
            let e = via[v];
            edges[e].cap -= 1;
            edges[e ^ 1].cap += 1;
            v = edges[e ^ 1].to;
        }
        paid += dist[sink];
    }
    paid
}

/// Unit ground distance between distinct bins.
pub fn unit_cost(bins: usize) -> Vec<Vec<i64>> {
    (0..bins).map(|i| (0..bins).map(|j| i64::from(i != j)).collect()).collect()
}
