use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sgs_admm::instances::{generate, oracle_prox_quadratic, random_spd, ProxKind, RandomPreset};
use sgs_admm::model::{polarization_forms, MajorizerMode, MinorizerMode};
use sgs_admm::parallel::map_range;
use sgs_admm::problem_file;
use sgs_admm::trials::{random_block_operator, random_theta};
use sgs_admm::{Execution, ProxFriendlyFunction};

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn prox_kind() -> impl Strategy<Value = ProxKind> {
    prop_oneof![
        Just(ProxKind::Zero),
        (0.05..2.0f64).prop_map(|weight| ProxKind::L1 { weight }),
        (0.1..2.0f64, 0.1..2.0f64).prop_map(|(a, b)| ProxKind::Box { lo: -a, hi: b }),
    ]
}

fn knobs() -> impl Strategy<Value = RandomPreset> {
    (
        prop::collection::vec(1usize..=3, 1..=3),
        prop::collection::vec(1usize..=3, 1..=3),
        prox_kind(),
        prox_kind(),
        any::<bool>(),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_filter_map("needs a smooth coordinate", |(mut xd, yd, p1, q1, loose, mineig, seed)| {
            if xd.len() == 1 && yd.len() == 1 {
                xd.push(1);
            }
            let free = xd.iter().skip(1).sum::<usize>() + yd.iter().skip(1).sum::<usize>();
            Some(RandomPreset {
                x_dims: xd,
                y_dims: yd,
                z_dim: 1 + (seed as usize) % free,
                p1,
                q1,
                eig_range: (0.3, 6.0),
                majorizer: if loose { MajorizerMode::Loose } else { MajorizerMode::Tight },
                minorizer: if mineig { MinorizerMode::MinEig } else { MinorizerMode::Zero },
                seed,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn prox_is_nonexpansive(kind in prox_kind(), a in vec_of(4), b in vec_of(4), t in 0.01..3.0f64) {
        let f = kind.build(4).unwrap();
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let pa = f.prox(t, &a).unwrap();
        let pb = f.prox(t, &b).unwrap();
        prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() * (1.0 + 1e-12) + 1e-15);
        // prox(v) = u means (v - u)/t ∈ ∂f(u)
        prop_assert!(f.subgradient_violation(&pa, &((&a - &pa) / t)) <= 1e-12);
    }

    #[test]
    fn prox_quadratic_matches_enumeration(kind in 0usize..3, seed in any::<u64>(), q in vec_of(4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_theta(kind, 4, &mut rng).unwrap();
        let p = random_spd(4, (0.2, 5.0), &mut rng);
        let q = DVector::from_vec(q);
        let a = theta.prox_quadratic(&p, &q).unwrap();
        let b = oracle_prox_quadratic(&theta, &p, &q).unwrap();
        prop_assert!((&a - &b).amax() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn majorization_sandwich(k in knobs(), seed in any::<u64>()) {
        let spec = generate(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for h in [spec.f(), spec.g()] {
            let n = h.structure().total_dim();
            let x = sgs_admm::instances::gaussian_vector(n, &mut rng);
            let x0 = sgs_admm::instances::gaussian_vector(n, &mut rng);
            let (lo, mid, hi) = (h.minorizer(&x, &x0), h.value(&x), h.majorizer(&x, &x0));
            let scale = 1e-10 * (1.0 + lo.abs().max(mid.abs()).max(hi.abs()));
            prop_assert!(lo <= mid + scale && mid <= hi + scale);
        }
    }

    #[test]
    fn polarization_forms_agree(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_spd(n, (0.1, 10.0), &mut rng);
        let u = sgs_admm::instances::gaussian_vector(n, &mut rng);
        let v = sgs_admm::instances::gaussian_vector(n, &mut rng);
        let (a, b) = polarization_forms(&u, &v, &h);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn problem_files_round_trip(k in knobs()) {
        let spec = generate(&k).unwrap();
        let text = problem_file::to_string(&spec);
        prop_assert_eq!(problem_file::parse(&text).unwrap(), spec);
    }

    #[test]
    fn random_block_operators_have_definite_diagonal(seed in any::<u64>(), s in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_block_operator(s, 4, &mut rng).unwrap();
        let st = h.row_structure();
        for i in 0..s {
            let b: DMatrix<f64> = h.block(i, i);
            prop_assert!(b.symmetric_eigenvalues().min() > 0.0);
        }
        prop_assert!(sgs_admm::blockalg::min_eig(&h).unwrap() > -1e-10);
        prop_assert_eq!(st.num_blocks(), s);
    }

    #[test]
    fn execution_modes_agree(n in 0usize..500) {
        let f = |i: usize| (i as f64).sqrt().sin();
        prop_assert_eq!(map_range(Execution::Sequential, n, f), map_range(Execution::Parallel, n, f));
    }
}

#[test]
fn zero_prox_is_identity() {
    let v = DVector::from_vec(vec![1.5, -2.0]);
    assert_eq!(ProxFriendlyFunction::zero(2).prox(0.7, &v).unwrap(), v);
}
