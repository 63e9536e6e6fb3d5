/// Maximum-weight assignment on a (possibly rectangular) weight matrix given
/// row by row. Returns, for every row, the column it is matched to (`None`
/// if the row is left over because there are more rows than columns).
///
/// Shortest augmenting path formulation of the Hungarian method, `O(n^3)`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.iter().map(|r| r.len()).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let wmax = weights
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, &v| m.max(v));
    // padded square cost matrix, 1-based as in the classic formulation
    let cost = |i: usize, j: usize| -> f64 {
        let w = weights
            .get(i - 1)
            .and_then(|r| r.get(j - 1))
            .copied()
            .unwrap_or(0.0);
        wmax - w
    };

    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(w: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|j| w[i][j]))
            .sum()
    }

    #[test]
    fn picks_the_anti_diagonal() {
        let w = vec![vec![1.0, 5.0], vec![5.0, 1.0]];
        let a = max_weight_assignment(&w);
        assert_eq!(a, vec![Some(1), Some(0)]);
    }

    #[test]
    fn matches_brute_force_on_3x3() {
        let w = vec![
            vec![7.0, 2.0, 9.0],
            vec![3.0, 8.0, 1.0],
            vec![6.0, 4.0, 5.0],
        ];
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let best = perms
            .iter()
            .map(|p| (0..3).map(|i| w[i][p[i]]).sum::<f64>())
            .fold(f64::MIN, f64::max);
        assert_eq!(total(&w, &max_weight_assignment(&w)), best);
    }

    #[test]
    fn rectangular_inputs() {
        let tall = vec![vec![1.0], vec![4.0], vec![2.0]];
        assert_eq!(max_weight_assignment(&tall), vec![None, Some(0), None]);
        let wide = vec![vec![1.0, 3.0, 2.0]];
        assert_eq!(max_weight_assignment(&wide), vec![Some(1)]);
    }
}
