//! Reference solvers used only by the tests.
#![allow(dead_code)]

/// Outcome of the dense tableau method.
#[derive(Debug, Clone, PartialEq)]
pub enum Tableau {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-11;

/// Minimizes `c.x` subject to `A x = b`, `x >= 0` with a full two-phase
/// tableau and Bland's rule. `a` is row-major, one `Vec` per constraint.
pub fn tableau_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Tableau {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    // rows 0..m constraints, columns 0..n structural, n..n+m artificial, last rhs
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| -> bool {
        loop {
            // reduced costs d_j = c_j - c_B B^-1 A_j, read off the current tableau
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let d = cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if d < -1e-10 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][j] > EPS {
                    let ratio = t[i][width - 1] / t[i][j];
                    let better = match leave {
                        None => true,
                        Some((k, r)) => ratio < r - 1e-13 || (ratio <= r + 1e-13 && basis[i] < basis[k]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            pivot(t, r, j);
            basis[r] = j;
        }
    };

    let mut cost1 = vec![0.0; n + m];
    for k in n..n + m {
        cost1[k] = 1.0;
    }
    phase(&mut t, &mut basis, &cost1, n + m);
    let infeas: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][width - 1]).sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if infeas > 1e-9 * scale {
        return Tableau::Infeasible;
    }
    // drive zero-level artificials out, dropping redundant rows
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= n {
            match (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => {
                    pivot(&mut t, i, j);
                    basis[i] = j;
                    i += 1;
                }
                None => {
                    t.remove(i);
                    basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    let mut cost2 = c.to_vec();
    cost2.extend(std::iter::repeat_n(0.0, m));
    if !phase(&mut t, &mut basis, &cost2, n) {
        return Tableau::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &k) in basis.iter().enumerate() {
        if k < n {
            x[k] = t[i][width - 1];
        }
    }
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Tableau::Optimal { value, x }
}

fn pivot(t: &mut [Vec<f64>], r: usize, j: usize) {
    let p = t[r][j];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let row = t[r].clone();
    for (i, other) in t.iter_mut().enumerate() {
        if i != r {
            let f = other[j];
            if f != 0.0 {
                for (v, w) in other.iter_mut().zip(&row) {
                    *v -= f * w;
                }
            }
        }
    }
}

/// The full `N`-marginal transport LP over all `m^N` tuples (all `N m` rows kept).
pub fn transport_lp(weights: &[f64], n: usize, cost: impl Fn(&[usize]) -> f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<Vec<usize>>) {
    let m = weights.len();
    let total = m.pow(n as u32);
    let mut tuples = Vec::with_capacity(total);
    for flat in 0..total {
        let mut t = vec![0; n];
        let mut f = flat;
        for slot in t.iter_mut().rev() {
            *slot = f % m;
            f /= m;
        }
        tuples.push(t);
    }
    let mut a = vec![vec![0.0; total]; n * m];
    for (col, t) in tuples.iter().enumerate() {
        for (i, &k) in t.iter().enumerate() {
            a[i * m + k][col] = 1.0;
        }
    }
    let b: Vec<f64> = (0..n).flat_map(|_| weights.iter().copied()).collect();
    let c: Vec<f64> = tuples.iter().map(|t| cost(t)).collect();
    (a, b, c, tuples)
}

/// `sum_{i<j} |p_i - p_j|^-s` written out directly.
pub fn pair_cost(points: &[Vec<f64>], s: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            total += d.powf(-s);
        }
    }
    total
}
