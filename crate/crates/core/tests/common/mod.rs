//! Dense brute-force reference implementations and instance generators shared
//! by the integration tests. Nothing here calls the library's numerical code.

#![allow(dead_code)]

use relclean::numerics::{DenseMatrix, Rng};

pub type Dense = Vec<Vec<f64>>;

pub fn random_columns(rng: &mut Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect()
}

/// Random columns where roughly a fifth are copies of an earlier column, so
/// similarity ties occur.
pub fn columns_with_ties(rng: &mut Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    let mut cols = random_columns(rng, d, n);
    for j in 1..n {
        if rng.uniform() < 0.2 {
            let src = rng.below(j);
            cols[j] = cols[src].clone();
        }
    }
    cols
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("e{i}")).collect()
}

pub fn to_dense(m: &DenseMatrix) -> Dense {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect()).collect()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reciprocal kNN affinity by exhaustive comparison: each row's neighbors are
/// the `min(k, N−1)` others with largest cosine, ties to the smaller index.
pub fn affinity(cols: &[Vec<f64>], k: usize) -> Dense {
    let n = cols.len();
    let u: Vec<Vec<f64>> = cols.iter().map(|c| unit(c)).collect();
    let sim = |i: usize, j: usize| inner(&u[i], &u[j]);
    let k = k.min(n.saturating_sub(1));
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| sim(i, b).partial_cmp(&sim(i, a)).unwrap().then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && nbrs[i].contains(&j) && nbrs[j].contains(&i) {
                a[i][j] = sim(i, j).max(0.0);
            }
        }
    }
    a
}

/// D⁻¹(A + I).
pub fn row_stochastic(a: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| a[i][j] + if i == j { 1.0 } else { 0.0 }).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

/// D^{-1/2} A D^{-1/2}, isolated vertices left at zero.
pub fn symmetric(a: &Dense) -> Dense {
    let n = a.len();
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let f = |x: f64| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 };
    (0..n).map(|i| (0..n).map(|j| f(d[i]) * a[i][j] * f(d[j])).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (r, inner_dim, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| (0..c).map(|j| (0..inner_dim).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return vec![];
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Relevance-weighted mean of raw columns.
pub fn prototype(cols: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let total: f64 = r.iter().sum();
    let d = cols[0].len();
    (0..d)
        .map(|i| cols.iter().zip(r).map(|(c, w)| w * c[i]).sum::<f64>() / total)
        .collect()
}

/// −Σⱼ rⱼ/R_{yⱼ} · log softmax(s Ŵᵀ x̂ⱼ)_{yⱼ}, with W given as class columns.
pub fn classifier_loss(w: &[Vec<f64>], scale: f64, xs: &[Vec<f64>], ys: &[usize], r: &[f64]) -> f64 {
    let mut totals = vec![0.0; w.len()];
    for (&y, &rv) in ys.iter().zip(r) {
        totals[y] += rv;
    }
    let wn: Vec<Vec<f64>> = w.iter().map(|c| unit(c)).collect();
    let mut loss = 0.0;
    for ((x, &y), &rv) in xs.iter().zip(ys).zip(r) {
        if rv == 0.0 {
            continue;
        }
        let xn = unit(x);
        let z: Vec<f64> = wn.iter().map(|c| scale * inner(c, &xn)).collect();
        let log_sum = z.iter().map(|v| v.exp()).sum::<f64>().ln();
        loss -= rv / totals[y] * (z[y] - log_sum);
    }
    loss
}

/// Two-layer GCN forward: σ(Θ2ᵀ [Θ1ᵀ V Ã]₊ Ã), optionally scaling hidden
/// activations (row-major m×N) by `mask`.
pub fn gcn_outputs(theta1: &Dense, theta2: &Dense, v: &Dense, a: &Dense, mask: Option<&[f64]>) -> Vec<f64> {
    let mut h = matmul(&matmul(&transpose(theta1), v), a);
    let n = a.len();
    for (r, row) in h.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = x.max(0.0) * mask.map_or(1.0, |m| m[r * n + c]);
        }
    }
    let t = matmul(&matmul(&transpose(theta2), &h), a);
    t[0].iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect()
}

pub fn gcn_loss(f: &[f64], k: usize, lambda: f64) -> f64 {
    let n = f.len();
    let c = |x: f64| x.clamp(1e-12, 1.0 - 1e-12);
    let clean: f64 = f[..k].iter().map(|&x| c(x).ln()).sum::<f64>() / k as f64;
    let noisy = if n > k {
        f[k..].iter().map(|&x| (1.0 - c(x)).ln()).sum::<f64>() / (n - k) as f64
    } else {
        0.0
    };
    -clean - lambda * noisy
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut m: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap()).unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    x
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

/// ‖g − fd‖ / max(‖g‖, ‖fd‖, 1e-12).
pub fn relative_error(g: &[f64], fd: &[f64]) -> f64 {
    let diff = g.iter().zip(fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = inner(g, g).sqrt().max(inner(fd, fd).sqrt()).max(1e-12);
    diff / scale
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
