//! Small statistical utilities shared by the experiment harness and the
//! verification tests: mean/standard-error accumulation, exact Poisson
//! tails, chi-square goodness of fit, rank correlation, and a least-squares
//! slope for log-log rate fits.

/// Sample mean and standard error of the mean; `se` is `None` for n < 2.
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some((var / n as f64).sqrt()))
}

/// Ordinary least squares fit y = slope * x + intercept.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exact Poisson pmf via the multiplicative recurrence; stable for
/// moderate rates (the concentration experiments use rates around 10).
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda < 500.0 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    } else {
        poisson_ln_pmf(lambda, k).exp()
    }
}

fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    -lambda + k as f64 * lambda.ln() - libm::lgamma(k as f64 + 1.0)
}

/// P(N <= k) for N ~ Poisson(lambda), by cumulative summation. For large
/// rates the sum is windowed around the mean in log space; terms outside
/// +-14 standard deviations are below double precision.
pub fn poisson_cdf(lambda: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if lambda < 500.0 {
        let mut p = (-lambda).exp();
        let mut acc = p;
        for i in 1..=k {
            p *= lambda / i as f64;
            acc += p;
        }
        return acc.min(1.0);
    }
    let sd = lambda.sqrt();
    if (k as f64) > lambda + 14.0 * sd {
        return 1.0;
    }
    // mass below the window is under 1e-40 and is dropped
    let lo = (lambda - 14.0 * sd).floor().max(0.0) as u64;
    let mut acc = 0.0;
    for i in lo..=k {
        acc += poisson_ln_pmf(lambda, i).exp();
    }
    acc.min(1.0)
}

/// P(N >= k).
pub fn poisson_sf(lambda: f64, k: i64) -> f64 {
    if k <= 0 {
        return 1.0;
    }
    if lambda < 500.0 {
        return (1.0 - poisson_cdf(lambda, k - 1)).max(0.0);
    }
    let sd = lambda.sqrt();
    if (k as f64) < lambda - 14.0 * sd {
        return 1.0;
    }
    let hi = (lambda + 14.0 * sd).ceil().max(k as f64) as u64 + 2;
    let mut acc = 0.0;
    for i in k as u64..=hi {
        acc += poisson_ln_pmf(lambda, i).exp();
    }
    acc.min(1.0)
}

/// Two-sided exact Poisson test p-value for an observed count.
pub fn poisson_two_sided_p(lambda: f64, observed: u64) -> f64 {
    let lower = poisson_cdf(lambda, observed as i64);
    let upper = poisson_sf(lambda, observed as i64);
    (2.0 * lower.min(upper)).min(1.0)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series representation
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + a * x.ln() - x - libm::lgamma(a)).exp()
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / 1e-300;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < 1e-300 {
            d = 1e-300;
        }
        c = b + an / c;
        if c.abs() < 1e-300 {
            c = 1e-300;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * x.ln() - x - libm::lgamma(a)).exp() * h
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    (1.0 - gamma_p(0.5 * df, 0.5 * x)).clamp(0.0, 1.0)
}

/// Pearson chi-square goodness-of-fit p-value. Observed counts against
/// cell probabilities; cells with tiny expectation should be merged by the
/// caller.
pub fn chi_square_gof_p(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p;
        assert!(e > 0.0, "cell with zero expectation");
        stat += (o as f64 - e) * (o as f64 - e) / e;
    }
    chi2_sf(stat, observed.len() as f64 - 1.0)
}

/// Spearman rank correlation. Ties are not handled (inputs here are
/// distinct means over a dyadic grid).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let d2: f64 = rx
        .iter()
        .zip(&ry)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64 + 1.0;
    }
    r
}

/// Exact one-sided permutation p-value for a negative Spearman trend:
/// P(rho(perm) <= rho_observed) over all permutations of `ys`. Only for
/// small n (the dyadic grids here have at most 9 points).
pub fn spearman_negative_trend_p(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    assert!((2..=9).contains(&n), "exact permutation test needs 2..=9 points");
    let observed = spearman_rho(xs, ys);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    let mut total = 0u64;
    permute(&mut perm, 0, &mut |p| {
        let ys_p: Vec<f64> = p.iter().map(|&i| ys[i]).collect();
        if spearman_rho(xs, &ys_p) <= observed + 1e-12 {
            count += 1;
        }
        total += 1;
    });
    count as f64 / total as f64
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
