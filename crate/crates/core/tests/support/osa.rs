// Exhaustive optimal-string-alignment distance: tries every alignment
// script from the front of both strings. Each position is touched by at
// most one operation, which is exactly the OSA restriction.

pub fn osa(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut best = 1 + osa(&a[1..], b); // delete a[0]
    best = best.min(1 + osa(a, &b[1..])); // insert b[0]
    let sub = usize::from(a[0] != b[0]);
    best = best.min(sub + osa(&a[1..], &b[1..]));
    if a.len() >= 2 && b.len() >= 2 && a[0] == b[1] && a[1] == b[0] && a[0] != a[1] {
        best = best.min(1 + osa(&a[2..], &b[2..]));
    }
    best
}

/// Every string over `k` symbols with length `0..=max_len`.
pub fn all_strings(k: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &layer {
            for s in 0..k {
                let mut u = t.clone();
                u.push(s);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Unrestricted Damerau-Levenshtein distance (Lowrance-Wagner), which is a
/// true metric. Used to tell OSA's known triangle failures apart from bugs.
pub fn unrestricted_dl(a: &[u32], b: &[u32], k: u32) -> usize {
    let (n, m) = (a.len(), b.len());
    let inf = n + m;
    let w = m + 2;
    let mut d = vec![0usize; (n + 2) * w];
    d[0] = inf;
    for i in 0..=n {
        d[(i + 1) * w] = inf;
        d[(i + 1) * w + 1] = i;
    }
    for j in 0..=m {
        d[j + 1] = inf;
        d[w + j + 1] = j;
    }
    let mut last_row = vec![0usize; k as usize];
    for i in 1..=n {
        let mut last_col = 0;
        for j in 1..=m {
            let i1 = last_row[b[j - 1] as usize];
            let j1 = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            let v = (d[i * w + j] + cost)
                .min(d[(i + 1) * w + j] + 1)
                .min(d[i * w + j + 1] + 1)
                .min(d[i1 * w + j1] + (i - i1 - 1) + 1 + (j - j1 - 1));
            d[(i + 1) * w + j + 1] = v;
        }
        last_row[a[i - 1] as usize] = i;
    }
    d[(n + 1) * w + m + 1]
}
