mod common;

use common::table_params;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use teleqkd::quadrature::integrate_adaptive;
use teleqkd::sim::{run_session, sample_outcome, OutcomeSampler};
use teleqkd::teleport::{outcome_density_form, OutcomeDistribution};
use teleqkd::CoherentState;

#[test]
fn samples_follow_the_outcome_density() {
    let input = CoherentState::new(2.3, 0.0).unwrap();
    let (r, theta) = (0.5, 0.182f64.sqrt().acos());
    let form = outcome_density_form(&input, r, theta).unwrap();
    let dist = OutcomeDistribution::from_density_form(&form).unwrap();
    let sampler = OutcomeSampler::new(&dist).unwrap();

    let edges = |i: usize| -> Vec<f64> {
        let (m, s) = (dist.mean[i], dist.cov[i][i].sqrt());
        (0..=10).map(|k| m - 2.5 * s + 0.5 * s * k as f64).collect()
    };
    let (ex, ep) = (edges(0), edges(1));
    let cell_prob = |i: usize, j: usize| {
        integrate_adaptive(
            |x| {
                let inner = integrate_adaptive(|p| form.value_at(&[x, p]), ep[j], ep[j + 1], 1e-12, 1e-10).unwrap();
                inner.value
            },
            ex[i],
            ex[i + 1],
            1e-11,
            1e-9,
        )
        .unwrap()
        .value
        .re
    };

    let n = 100_000usize;
    let mut counts = vec![[0u64; 10]; 10];
    let mut outside = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..n {
        let o = sampler.sample(&mut rng);
        let bin = |v: f64, e: &[f64]| ((v - e[0]) / (e[1] - e[0])).floor();
        let (i, j) = (bin(o.x_u, &ex), bin(o.p_v, &ep));
        if (0.0..10.0).contains(&i) && (0.0..10.0).contains(&j) {
            counts[i as usize][j as usize] += 1;
        } else {
            outside += 1;
        }
    }

    let (mut chi2, mut bins, mut pooled_obs, mut pooled_exp, mut inside) = (0.0, 0usize, outside as f64, 0.0, 0.0);
    for i in 0..10 {
        for j in 0..10 {
            let e = n as f64 * cell_prob(i, j);
            inside += e;
            let o = counts[i][j] as f64;
            if e < 5.0 {
                pooled_obs += o;
                pooled_exp += e;
            } else {
                chi2 += (o - e).powi(2) / e;
                bins += 1;
            }
        }
    }
    pooled_exp += n as f64 - inside;
    chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
    bins += 1;
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "χ² = {chi2:.1} on {} dof, p = {p_value:.2e}", bins - 1);
}

#[test]
fn vacuum_sample_mean_is_centred() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let (mut sx, mut sp) = (0.0, 0.0);
    for _ in 0..n {
        let o = sample_outcome(&CoherentState::vacuum(), 0.0, 0.25 * std::f64::consts::PI, &mut rng).unwrap();
        sx += o.x_u;
        sp += o.p_v;
    }
    let bound = 4.0 * 0.5 / (n as f64).sqrt();
    assert!((sx / n as f64).abs() < bound && (sp / n as f64).abs() < bound);
}

#[test]
fn bit_error_rate_matches_channel_statistics() {
    let (_, s) = run_session(&table_params(1.0, 0.8), 100_000, 17).unwrap();
    let p = s.expected.error_rate();
    let sigma = (p * (1.0 - p) / s.n_sifted as f64).sqrt();
    assert!((s.bit_error_rate - p).abs() < 3.0 * sigma, "{} vs {p}", s.bit_error_rate);
    assert!(s.q0_z.abs() < 4.0 && s.q1_z.abs() < 4.0 && s.sift_z.abs() < 4.0);
}

#[test]
fn records_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_session(&table_params(0.7, 0.8), 5_000, 99).unwrap())
    };
    let (a, sa) = run(1);
    let (b, sb) = run(3);
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}
