use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quantum_exponents::classical::{moment_identity, nussbaum_szkola};
use quantum_exponents::discrimination::{audenaert_bound, threshold_test};
use quantum_exponents::random::random_density;
use quantum_exponents::state::DensityOperator;

fn pair(seed: u64, dim: usize, rank_rho: usize, rank_sigma: usize) -> (DensityOperator, DensityOperator) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_density(&mut rng, dim, rank_rho.min(dim));
    let sigma = random_density(&mut rng, dim, rank_sigma.min(dim));
    (rho, sigma)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classical_pair_reproduces_quantum_moments(seed in any::<u64>(), dim in 2usize..5, r1 in 1usize..5, r2 in 1usize..5, s in 0.0f64..=1.0) {
        let (rho, sigma) = pair(seed, dim, r1, r2);
        let ns = nussbaum_szkola(&rho, &sigma).unwrap();
        let check = moment_identity(&ns, &rho, &sigma, s).unwrap();
        prop_assert!(check.holds(), "{check:?}");
    }

    #[test]
    fn bayes_error_below_audenaert_bound(seed in any::<u64>(), dim in 2usize..5, pi in 0.05f64..0.95, s in 0.0f64..=1.0) {
        let (rho, sigma) = pair(seed, dim, dim, 1);
        let check = audenaert_bound(&rho, &sigma, pi, s).unwrap();
        prop_assert!(check.lhs <= check.rhs + 1e-12, "{check:?}");
    }

    #[test]
    fn threshold_errors_are_monotone_in_a(seed in any::<u64>(), a in -2.0f64..2.0, da in 0.0f64..1.0) {
        let (rho, sigma) = pair(seed, 3, 3, 2);
        let lo = threshold_test(&rho, &sigma, a, 1).unwrap();
        let hi = threshold_test(&rho, &sigma, a + da, 1).unwrap();
        prop_assert!(hi.alpha >= lo.alpha - 1e-12);
        prop_assert!(hi.beta <= lo.beta + 1e-12);
    }
}
