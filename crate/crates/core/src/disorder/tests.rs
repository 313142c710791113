use super::*;
use crate::bounds::annealed_pressure;
use crate::model::log_partition;

fn params(q: usize, beta: f64, c: f64) -> ModelParams {
    ModelParams::new(q, beta, c).unwrap()
}

#[test]
fn coupling_sampler_moments() {
    assert_eq!(sample_couplings(4, 0.0, 1).unwrap(), CouplingMatrix::zeros(4));
    let (n, c, draws) = (3usize, 2.0, 20_000u64);
    let mut totals = Vec::new();
    let mut entry = Vec::new();
    for i in 0..draws {
        let j = sample_couplings_with(n, c, &mut stream(11, Domain::Couplings, i)).unwrap();
        totals.push(j.total() as f64);
        entry.push(j.get(0, 1) as f64);
    }
    let (m, se) = mean_and_stderr(&totals);
    assert!((m - c * n as f64 / 2.0).abs() < 4.0 * se, "{m} {se}");
    let lam = c / (2.0 * n as f64);
    let (em, _) = mean_and_stderr(&entry);
    let var: Vec<f64> = entry.iter().map(|v| (v - em).powi(2)).collect();
    let (v, vse) = mean_and_stderr(&var);
    assert!((v - lam).abs() < 4.0 * vse, "{v} {vse}");
}

#[test]
fn edge_sampler_is_uniform() {
    assert!(sample_edges_given_k(3, 0, 5).unwrap().pairs().is_empty());
    let (n, k) = (3usize, 50_000usize);
    let edges = sample_edges_given_k(n, k, 9).unwrap();
    let hits = edges.pairs().iter().filter(|&&p| p == (0, 0)).count() as f64;
    let p = 1.0 / (n * n) as f64;
    let se = (p * (1.0 - p) / k as f64).sqrt();
    assert!((hits / k as f64 - p).abs() < 4.0 * se);
    assert_eq!(edges.to_couplings().total(), k as u64);
}

#[test]
fn conditional_edge_law_factorizes_over_edges() {
    // Fixed two-replica bundle on N = 2 sites; average the Boltzmann factor
    // of K placed edges over all N^{2K} placements.
    let (n, beta) = (2usize, 0.9);
    let bundle = [[0usize, 1], [1, 1]];
    let factor = |i: usize, j: usize| {
        let hits = bundle.iter().filter(|r| r[i] == r[j]).count() as f64;
        (-beta * hits).exp()
    };
    let single: f64 =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| factor(i, j)).sum::<f64>() / (n * n) as f64;
    for k in 1..=2u32 {
        let cells = (n * n).pow(k);
        let mut total = 0.0;
        for code in 0..cells {
            let mut rem = code;
            let mut prod = 1.0;
            for _ in 0..k {
                let cell = rem % (n * n);
                rem /= n * n;
                prod *= factor(cell / n, cell % n);
            }
            total += prod;
        }
        assert!((total / cells as f64 - single.powi(k as i32)).abs() < 1e-14);
    }
}

#[test]
fn quenched_exact_trivial_cases() {
    for q in 2..4 {
        let e = quenched_pressure_exact(&params(q, 1.3, 0.0), 4, 1e-9).unwrap();
        assert_eq!(e.value, (q as f64).ln());
        assert_eq!(e.tail_bound, 0.0);
    }
    for &(q, beta, c) in &[(2, 1.0, 1.0), (3, 0.4, 4.0), (4, 2.0, 2.5)] {
        let e = quenched_pressure_exact(&params(q, beta, c), 1, 1e-10).unwrap();
        let want = (q as f64).ln() - beta * c / 2.0;
        assert!((e.value - want).abs() <= 1e-10 + e.tail_bound);
    }
    assert!(matches!(
        quenched_pressure_exact(&ModelParams::new(2, f64::INFINITY, 1.0).unwrap(), 2, 1e-6),
        Err(Error::InfiniteBeta(_))
    ));
}

#[test]
fn quenched_exact_two_sites_matches_direct_poisson_sum() {
    // Oracle: J_12 + J_21 ~ Poisson(c/2), ln Z for m pair edges at q colors.
    let (q, beta, c) = (3usize, 1.1, 2.0);
    let lam: f64 = c / 2.0;
    let mut want = 0.0;
    for m in 0..200u64 {
        let pi = (m as f64 * lam.ln() - lam - ln_factorial(m)).exp();
        let lz = ((q as f64) * (q as f64 - 1.0) + q as f64 * (-beta * m as f64).exp()).ln();
        want += pi * lz;
    }
    want = want / 2.0 - beta * c / 4.0;
    let e = quenched_pressure_exact(&params(q, beta, c), 2, 1e-12).unwrap();
    assert_eq!(e.stat_error, 0.0);
    assert!((e.value - want).abs() <= 1e-12 + e.tail_bound, "{} {}", e.value, want);
}

#[test]
fn quenched_exact_three_sites_matches_enumerated_oracle() {
    // Oracle: enumerate pair multiplicities (m01, m02, m12) directly.
    let (q, beta, c) = (2usize, 0.8, 1.5);
    let n = 3usize;
    let lam_pair = c / n as f64;
    let pmf = |m: u64| (m as f64 * lam_pair.ln() - lam_pair - ln_factorial(m)).exp();
    let mut want = 0.0;
    for a in 0..40u64 {
        for b in 0..40u64 {
            for d in 0..40u64 {
                let w = pmf(a) * pmf(b) * pmf(d);
                if w < 1e-300 {
                    continue;
                }
                let j = CouplingMatrix::from_rows(&[vec![0, a as u32, b as u32], vec![0, 0, d as u32], vec![0, 0, 0]])
                    .unwrap();
                want += w * log_partition(&j, q, beta).unwrap();
            }
        }
    }
    want = want / n as f64 - beta * c / (2.0 * n as f64);
    let e = quenched_pressure_exact(&params(q, beta, c), n, 1e-11).unwrap();
    assert!((e.value - want).abs() <= 1e-10 + e.tail_bound + 4.0 * e.stat_error, "{} {}", e.value, want);
}

#[test]
fn quenched_mc_trivial_and_agreement() {
    let e = quenched_pressure_mc(&params(3, 1.0, 0.0), 3, 10, 1).unwrap();
    assert_eq!(e.value, 3f64.ln());
    assert_eq!(e.stat_error, 0.0);
    let e = quenched_pressure_mc(&params(2, 0.0, 3.0), 3, 10, 1).unwrap();
    assert_eq!(e.value, 2f64.ln());
    assert!(quenched_pressure_mc(&params(2, 1.0, 3.0), 3, 1, 1).is_err());
    let p = params(2, 1.0, 4.0);
    let mc = quenched_pressure_mc(&p, 4, 20_000, 3).unwrap();
    let ex = quenched_pressure_exact(&p, 4, 1e-9).unwrap();
    let tol = 4.0 * (mc.stat_error.powi(2) + ex.stat_error.powi(2)).sqrt() + ex.tail_bound;
    assert!((mc.value - ex.value).abs() <= tol, "{} {} {}", mc.value, ex.value, tol);
    assert!(ex.value <= annealed_pressure(&p) + 1e-9 + ex.tail_bound);
}

#[test]
fn sum_rule_trivial_cases() {
    assert_eq!(sum_rule_deficit(&params(2, 0.0, 2.0), 2, 5, 4, 1).unwrap().estimate.value, 0.0);
    assert_eq!(sum_rule_deficit(&params(2, 1.0, 0.0), 2, 5, 4, 1).unwrap().estimate.value, 0.0);
}

#[test]
fn restricted_partition_examples() {
    let z = CouplingMatrix::zeros(4);
    let want = (24.0f64 / 4.0).ln();
    assert!((restricted_partition_balanced(&z, ExtReal::Finite(0.0), 2).unwrap() - want).abs() < 1e-12);
    assert!((restricted_partition_balanced(&z, ExtReal::Finite(3.0), 2).unwrap() - want).abs() < 1e-12);
    let z6 = CouplingMatrix::zeros(6);
    let want6 = (720.0f64 / 8.0).ln();
    assert!((restricted_partition_balanced(&z6, ExtReal::Finite(0.0), 3).unwrap() - want6).abs() < 1e-12);
    // N = q = 3, single edge (0,1): balanced colorings are permutations, all proper.
    let mut j = CouplingMatrix::zeros(3);
    j.set(0, 1, 1);
    let v = restricted_partition_balanced(&j, ExtReal::Infinite, 3).unwrap();
    assert!((v - 6f64.ln()).abs() < 1e-12);
    // A self-loop forbids every proper coloring.
    j.set(2, 2, 1);
    assert_eq!(restricted_partition_balanced(&j, ExtReal::Infinite, 3).unwrap(), f64::NEG_INFINITY);
    assert!(restricted_partition_balanced(&z, ExtReal::Finite(1.0), 3).is_err());
}

#[test]
fn conditional_moment_examples() {
    let (first, second) = conditional_moments_balanced(4, 2, 1.0, 0).unwrap();
    assert!((first - 6.0).abs() < 1e-12);
    assert!((second - 36.0).abs() < 1e-9);
    for k in 0..5 {
        let (first, _) = conditional_moments_balanced(6, 3, 0.0, k).unwrap();
        assert!((first - 90.0).abs() < 1e-9);
    }
    assert!(conditional_moments_balanced(5, 2, 1.0, 1).is_err());
}
