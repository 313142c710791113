use std::collections::HashMap;

use potts_af::bounds::annealed_pressure;
use potts_af::disorder::{quenched_pressure_exact, sample_couplings_with, sample_edges_given_k_with, QuenchedEstimate};
use potts_af::rng::{stream, Domain};
use potts_af::ModelParams;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const EPS: f64 = 1e-6;

fn params(q: usize, beta: f64, c: f64) -> ModelParams {
    ModelParams::new(q, beta, c).unwrap()
}

/// p_N for N = 1..=n_max.
fn ladder(p: &ModelParams, n_max: usize) -> Vec<QuenchedEstimate> {
    (1..=n_max).map(|n| quenched_pressure_exact(p, n, EPS).unwrap()).collect()
}

fn err(e: &QuenchedEstimate) -> f64 {
    e.error_budget(4.0)
}

#[test]
fn superadditive_and_dominated_by_annealed() {
    for (q, beta, c) in [(2, 1.0, 4.0), (3, 0.5, 1.0), (2, 2.0, 1.0)] {
        let p = params(q, beta, c);
        let ps = ladder(&p, 6);
        let annealed = annealed_pressure(&p);
        for (i, e) in ps.iter().enumerate() {
            assert!(e.value <= annealed + 1e-9 + err(e), "N={} {} > {annealed}", i + 1, e.value);
        }
        for n1 in 1..=3 {
            for n2 in 1..=3 {
                let (a, b, s) = (&ps[n1 - 1], &ps[n2 - 1], &ps[n1 + n2 - 1]);
                let lhs = (n1 + n2) as f64 * s.value;
                let rhs = n1 as f64 * a.value + n2 as f64 * b.value;
                let tol = (n1 + n2) as f64 * err(s) + n1 as f64 * err(a) + n2 as f64 * err(b);
                assert!(lhs >= rhs - tol, "q={q} beta={beta} c={c} N1={n1} N2={n2}: {lhs} < {rhs}");
            }
        }
        // Superadditivity forces p_{kN} >= p_N, so the running maximum over
        // these subsequences never falls and stays below the limit.
        for (small, big) in [(1, 2), (2, 4), (3, 6), (1, 3), (2, 6)] {
            let (a, b) = (&ps[small - 1], &ps[big - 1]);
            assert!(b.value >= a.value - err(a) - err(b));
        }
    }
}

#[test]
fn lipschitz_in_connectivity() {
    for (q, beta) in [(2, 1.0), (3, 2.0)] {
        for (c1, c2) in [(1.0, 2.0), (2.0, 4.0)] {
            for n in 1..=4 {
                let a = quenched_pressure_exact(&params(q, beta, c1), n, EPS).unwrap();
                let b = quenched_pressure_exact(&params(q, beta, c2), n, EPS).unwrap();
                let gap = (b.value - a.value).abs();
                assert!(gap <= beta * (c2 - c1) / 2.0 + err(&a) + err(&b), "N={n} {gap}");
            }
        }
    }
}

/// Two-sample chi-square p-value over pooled histogram cells.
fn chi_square_p(a: &HashMap<u64, f64>, b: &HashMap<u64, f64>) -> f64 {
    let (na, nb): (f64, f64) = (a.values().sum(), b.values().sum());
    let mut keys: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    // Merge sparse cells into the last one kept.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in keys {
        acc.0 += a.get(&k).copied().unwrap_or(0.0);
        acc.1 += b.get(&k).copied().unwrap_or(0.0);
        if acc.0 + acc.1 >= 20.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let t = x + y;
            let (ex, ey) = (t * na / (na + nb), t * nb / (na + nb));
            (x - ex).powi(2) / ex + (y - ey).powi(2) / ey
        })
        .sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn conditional_edge_law_matches_independent_entries() {
    let (n, c, draws) = (3usize, 3.0, 100_000u64);
    let k_law = Poisson::new(c * n as f64 / 2.0).unwrap();
    let mut stats: [(HashMap<u64, f64>, HashMap<u64, f64>); 3] = Default::default();
    for i in 0..draws {
        let direct = sample_couplings_with(n, c, &mut stream(21, Domain::Couplings, i)).unwrap();
        let mut rng = stream(22, Domain::EdgeLists, i);
        let k = k_law.sample(&mut rng) as usize;
        let placed = sample_edges_given_k_with(n, k, &mut rng).unwrap().to_couplings();
        for (slot, j) in [(0, &direct), (1, &placed)] {
            let diag: u64 = (0..n).map(|a| j.get(a, a) as u64).sum();
            let values = [j.total(), diag, j.get(0, 1) as u64 + j.get(1, 0) as u64];
            for (s, v) in stats.iter_mut().zip(values) {
                let h = if slot == 0 { &mut s.0 } else { &mut s.1 };
                *h.entry(v).or_insert(0.0) += 1.0;
            }
        }
    }
    for (name, (a, b)) in ["total", "diagonal", "pair"].iter().zip(&stats) {
        let p = chi_square_p(a, b);
        assert!(p > 1e-3, "{name}: p = {p}");
    }
}
