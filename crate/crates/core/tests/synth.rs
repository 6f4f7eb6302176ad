use bookrec_core::corpus::{liked_authors, synth_generate, SynthParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn params(affinity: f64, seed: u64) -> SynthParams {
    SynthParams {
        n_users: 200,
        n_authors: 40,
        books_per_author: 6,
        affinity,
        seed,
    }
}

/// p-value of Pearson's test on the (liked author, rating ≥ 4) table.
fn independence_p_value(p: &SynthParams) -> f64 {
    let likes = liked_authors(p).unwrap();
    let mut table = [[0.0f64; 2]; 2];
    for ev in synth_generate(p).unwrap() {
        let u: usize = ev.user_id[1..].parse().unwrap();
        let a: usize = ev.author_id[1..].parse().unwrap();
        let liked = usize::from(likes[u].contains(&a));
        let high = usize::from(ev.rating >= 4);
        table[liked][high] += 1.0;
    }
    let total: f64 = table.iter().flatten().sum();
    let mut stat = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let row: f64 = table[r].iter().sum();
            let col = table[0][c] + table[1][c];
            let expected = row * col / total;
            stat += (table[r][c] - expected).powi(2) / expected;
        }
    }
    1.0 - ChiSquared::new(1.0).unwrap().cdf(stat)
}

#[test]
fn zero_affinity_ratings_ignore_authorship() {
    for seed in 0..5 {
        let p = independence_p_value(&params(0.0, seed));
        assert!(p > 0.01, "seed {seed}: p = {p}");
    }
}

#[test]
fn planted_affinity_is_detectable() {
    for seed in 0..5 {
        let p = independence_p_value(&params(0.8, seed));
        assert!(p < 1e-6, "seed {seed}: p = {p}");
    }
}

#[test]
fn liked_share_of_high_ratings_grows_with_affinity() {
    let share = |affinity: f64| {
        let p = params(affinity, 3);
        let likes = liked_authors(&p).unwrap();
        let events = synth_generate(&p).unwrap();
        let high: Vec<_> = events.iter().filter(|e| e.rating >= 4).collect();
        let liked = high
            .iter()
            .filter(|e| {
                let u: usize = e.user_id[1..].parse().unwrap();
                let a: usize = e.author_id[1..].parse().unwrap();
                likes[u].contains(&a)
            })
            .count();
        liked as f64 / high.len() as f64
    };
    let shares: Vec<f64> = [0.0, 0.5, 1.0].into_iter().map(share).collect();
    assert!(shares[0] < shares[1] && shares[1] < shares[2], "{shares:?}");
    assert_eq!(shares[2], 1.0);
}
