use coopbandit::algorithms::{AlgorithmSpec, GreedyParams, LinUcbParams, MetcParams};
use coopbandit::game::{core_nonempty, is_in_core, TuGame};
use coopbandit::harness::ExperimentConfig;
use coopbandit::instances::{embed_svd, make_gapped_arms, Generator, SparseRatings};
use coopbandit::{Coalition, RngStream};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// For three players the minimal balanced collections are the partitions plus
/// the three pairs at weight 1/2, so non-emptiness reduces to four inequalities.
fn three_player_core_nonempty(v: &[f64]) -> bool {
    let grand = v[7];
    let tol = 1e-9;
    grand + tol >= v[1] + v[2] + v[4]
        && grand + tol >= v[1] + v[6]
        && grand + tol >= v[2] + v[5]
        && grand + tol >= v[4] + v[3]
        && 2.0 * grand + tol >= v[3] + v[5] + v[6]
}

#[test]
fn core_nonempty_matches_balanced_collections() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut empty, mut nonempty) = (0, 0);
    for _ in 0..2000 {
        let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] = 0.0;
        let want = three_player_core_nonempty(&v);
        let game = TuGame::new(3, v).unwrap();
        let (got, witness) = core_nonempty(&game, 1e-9).unwrap();
        assert_eq!(got, want, "game {:?}", game.values());
        if got {
            nonempty += 1;
            assert!(is_in_core(&game, &witness.unwrap(), 1e-9).unwrap().pass);
        } else {
            empty += 1;
        }
    }
    assert!(empty > 100 && nonempty > 100, "{empty} empty, {nonempty} non-empty");
}

#[test]
fn svd_truncation_error_matches_spectrum_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (users, movies, d) = (50, 80, 10);
    let m = DMatrix::from_fn(users, movies, |_, _| rng.random_range(1.0..5.0));
    let sparse = SparseRatings::from_dense(&m);
    let (centered, _) = sparse.centered_dense();
    let emb = embed_svd(&sparse, d).unwrap();
    let err2 = (&centered - emb.reconstruct_centered()).norm_squared();

    // singular values squared are the eigenvalues of C^T C
    let mut eig: Vec<f64> = (centered.transpose() * &centered).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let tail: f64 = eig[d..].iter().map(|e| e.max(0.0)).sum();
    assert!((err2 - tail).abs() <= 1e-8 * tail.max(1.0), "{err2} vs {tail}");
    for (s, e) in emb.singular_values.iter().zip(&eig) {
        assert!((s * s - e).abs() <= 1e-8 * e.max(1.0));
    }
}

#[test]
fn shared_data_on_a_shared_action_set_means_identical_plays() {
    // on a fixed instance every member sees the same pooled data, so
    // deterministic policies pick the same action at every step
    let inst = make_gapped_arms(&[0.0, 0.1, 0.3, 0.6], 3, 300, 1.0).unwrap();
    let algs = [
        AlgorithmSpec::LinucbM(LinUcbParams::default()),
        AlgorithmSpec::Greedy(GreedyParams::default()),
        AlgorithmSpec::Metc(MetcParams::default()),
    ];
    for alg in algs {
        let res = alg.run(&inst, Coalition::grand(3), RngStream::new(5)).unwrap();
        let first: Vec<usize> = res.trajectories[0].actions().collect();
        for tr in &res.trajectories[1..] {
            assert_eq!(tr.actions().collect::<Vec<_>>(), first, "{}", alg.label());
        }
    }
}

#[test]
fn experiment_config_roundtrips_and_rejects_unknown_keys() {
    let cfg = ExperimentConfig::new(
        3,
        Generator::GappedArms { gaps: vec![0.0, 0.5], num_agents: 2 },
        AlgorithmSpec::LinucbM(LinUcbParams::default()),
    );
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    assert!(ExperimentConfig::from_toml(&format!("{text}\nbogus = 1\n")).is_err());
}
