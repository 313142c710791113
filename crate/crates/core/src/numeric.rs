//! Small numerical kernels shared by the modules: Poisson masses and tails,
//! log-space accumulation, color-count compositions and Gauss-Legendre rules.

use statrs::function::gamma::ln_gamma;

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// ln of the multinomial coefficient (sum counts)! / prod(count!).
pub fn ln_multinomial(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    ln_factorial(total as u64) - counts.iter().map(|&k| ln_factorial(k as u64)).sum::<f64>()
}

pub fn ln_poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    ln_poisson_pmf(lambda, k).exp()
}

/// P(K >= k) for K ~ Poisson(lambda), accurate in the far tail.
pub fn poisson_tail(lambda: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return 0.0;
    }
    if (k as f64) <= lambda {
        let head: f64 = (0..k).map(|j| poisson_pmf(lambda, j)).sum();
        return (1.0 - head).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut j = k;
    loop {
        let term = poisson_pmf(lambda, j);
        sum += term;
        if term <= sum * 1e-17 || term == 0.0 {
            break;
        }
        j += 1;
    }
    sum.min(1.0)
}

/// Smallest k with `lambda * P(K >= k) <= budget`, i.e. E[K 1{K >= k}] <= budget.
pub fn poisson_mean_tail_cutoff(lambda: f64, budget: f64, k_limit: u64) -> Option<u64> {
    if lambda == 0.0 {
        return Some(0);
    }
    let start = lambda.floor() as u64;
    (start..=k_limit.max(start)).find(|&k| lambda * poisson_tail(lambda, k) <= budget)
}

/// Running log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSumExp {
    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = LogSumExp::default();
    for v in it {
        acc.push(v);
    }
    acc.value()
}

/// Visit every composition of `total` into `parts` nonnegative counts, in
/// lexicographic order, with the log of its multinomial coefficient.
pub fn for_each_composition(parts: usize, total: usize, mut f: impl FnMut(&[usize], f64)) {
    let mut counts = vec![0usize; parts];
    let ln_total = ln_factorial(total as u64);
    fn rec(idx: usize, left: usize, ln_acc: f64, counts: &mut [usize], f: &mut dyn FnMut(&[usize], f64)) {
        let last = counts.len() - 1;
        if idx == last {
            counts[idx] = left;
            f(counts, ln_acc - ln_factorial(left as u64));
            return;
        }
        for k in 0..=left {
            counts[idx] = k;
            rec(idx + 1, left - k, ln_acc - ln_factorial(k as u64), counts, f);
        }
    }
    if parts == 0 {
        if total == 0 {
            f(&[], 0.0);
        }
        return;
    }
    rec(0, total, ln_total, &mut counts, &mut f);
}

/// Number of compositions of `total` into `parts` counts, as f64.
pub fn composition_count(parts: usize, total: usize) -> f64 {
    if parts == 0 {
        return if total == 0 { 1.0 } else { 0.0 };
    }
    (ln_factorial((total + parts - 1) as u64) - ln_factorial(total as u64) - ln_factorial((parts - 1) as u64))
        .exp()
        .round()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with an `n`-point Gauss-Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Asymptotic Kolmogorov-Smirnov critical constant c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn ks_critical_constant(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// sup |F_n - F| for a sample against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// sup |F_a - F_b| between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
