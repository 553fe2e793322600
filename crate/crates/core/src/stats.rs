//! Small statistical utilities: Kendall's tau, KS tests, sample moments.

/// Sample Kendall's tau-b of two equal-length slices.
///
/// Uses Knight's O(n log n) algorithm with tie corrections.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "kendall_tau needs at least two observations");

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();

    // tie counts in x, y, and joint (x,y)
    let tie_sum = |v: &[f64]| -> f64 {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut s = 0.0;
        let mut run = 1u64;
        for i in 1..sorted.len() {
            if sorted[i] == sorted[i - 1] {
                run += 1;
            } else {
                s += (run * (run - 1) / 2) as f64;
                run = 1;
            }
        }
        s + (run * (run - 1) / 2) as f64
    };
    let n1 = tie_sum(&xs);
    let n2 = tie_sum(y);
    let mut n3 = 0.0;
    {
        let mut run = 1u64;
        for i in 1..n {
            if xs[i] == xs[i - 1] && ys[i] == ys[i - 1] {
                run += 1;
            } else {
                n3 += (run * (run - 1) / 2) as f64;
                run = 1;
            }
        }
        n3 += (run * (run - 1) / 2) as f64;
    }

    let discordant = merge_count(&mut ys) as f64;
    let n0 = (n as f64) * (n as f64 - 1.0) / 2.0;
    // concordant - discordant = n0 - n1 - n2 + n3 - 2*discordant
    let num = n0 - n1 - n2 + n3 - 2.0 * discordant;
    let den = ((n0 - n1) * (n0 - n2)).sqrt();
    if den == 0.0 {
        return f64::NAN;
    }
    num / den
}

// Counts inversions via bottom-up merge sort.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0; n];
    let mut count = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo + width < n {
            let mid = lo + width;
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[i] <= v[j] {
                    buf[k] = v[i];
                    i += 1;
                } else {
                    buf[k] = v[j];
                    j += 1;
                    count += (mid - i) as u64;
                }
                k += 1;
            }
            while i < mid {
                buf[k] = v[i];
                i += 1;
                k += 1;
            }
            while j < hi {
                buf[k] = v[j];
                j += 1;
                k += 1;
            }
            v[lo..hi].copy_from_slice(&buf[lo..hi]);
            lo += 2 * width;
        }
        width *= 2;
    }
    count
}

/// Asymptotic p-value of the one-sample KS test against Uniform(0,1).
pub fn ks_uniform_pvalue(data: &[f64]) -> f64 {
    let n = data.len();
    assert!(n > 0);
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let lo = i as f64 / nf;
        let hi = (i + 1) as f64 / nf;
        d = d.max((u - lo).abs()).max((hi - u).abs());
    }
    ks_pvalue(d * nf.sqrt())
}

/// Asymptotic p-value of the two-sample KS test.
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let (mut xa, mut xb) = (a.to_vec(), b.to_vec());
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        if xa[i] <= xb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    ks_pvalue(d * ne)
}

// Kolmogorov distribution tail: Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)
fn ks_pvalue(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..101 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_pvalue(stat: f64, df: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let dist = ChiSquared::new(df).expect("df must be positive");
    1.0 - dist.cdf(stat)
}

/// Sample mean of each column of a row-major matrix.
pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        for (j, v) in r.iter().enumerate() {
            m[j] += v;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Sample covariance matrix (denominator n-1) of row-major data.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let means = column_means(rows);
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - means[i];
            for j in i..d {
                cov[i][j] += di * (r[j] - means[j]);
            }
        }
    }
    let denom = (n - 1).max(1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Empirical quantile (linear interpolation between order statistics).
pub fn empirical_quantile(data: &[f64], level: f64) -> f64 {
    assert!(!data.is_empty());
    assert!((0.0..=1.0).contains(&level));
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
