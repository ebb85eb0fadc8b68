//! Invariants that must hold over randomized inputs, not just at the
//! worked examples: transform invariances of the two-sample tests,
//! normalization of the density estimate, determinism of the sampling
//! pipeline, and the unit-interval range of the exact transfer factors.

use proptest::prelude::*;
use senscale::rng::Stream;
use senscale::sobol::moments_of_values;
use senscale::*;

fn flat_sens(names: &[&str]) -> SensitivityResult {
    SensitivityResult {
        inputs: names
            .iter()
            .map(|n| InputSensitivity { name: n.to_string(), s_total: 0.5, ci: [0.4, 0.6] })
            .collect(),
        variance: 1.0,
        mean: 0.0,
        n: 0,
        seed: 0,
        warnings: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The KS statistic depends only on the order structure, so any
    // strictly increasing transform applied to both samples leaves it
    // bit-identical. Integer-valued samples keep x^3 exactly
    // representable and tie patterns unchanged.
    #[test]
    fn ks_is_invariant_under_monotone_transforms(
        a in prop::collection::vec(-50i32..50, 10..60),
        b in prop::collection::vec(-50i32..50, 10..60),
    ) {
        let fa: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let fb: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let ta: Vec<f64> = a.iter().map(|&v| (v as f64).powi(3) + 0.5).collect();
        let tb: Vec<f64> = b.iter().map(|&v| (v as f64).powi(3) + 0.5).collect();
        let r1 = ks_two_sample(&fa, &fb).unwrap();
        let r2 = ks_two_sample(&ta, &tb).unwrap();
        prop_assert_eq!(r1.statistic.to_bits(), r2.statistic.to_bits());
        prop_assert_eq!(r1.p_value.to_bits(), r2.p_value.to_bits());

        // Swapping the samples is also a no-op.
        let r3 = ks_two_sample(&fb, &fa).unwrap();
        prop_assert_eq!(r1.statistic.to_bits(), r3.statistic.to_bits());
        prop_assert!(r1.statistic >= 0.0 && r1.statistic <= 1.0);
        prop_assert!(r1.p_value >= 0.0 && r1.p_value <= 1.0);
    }

    // Levene's test compares dispersion, so common shifts and positive
    // scalings of both groups must not move the statistic (up to
    // floating-point noise from re-centering).
    #[test]
    fn levene_is_shift_and_scale_invariant(
        a in prop::collection::vec(-100.0f64..100.0, 12..40),
        b in prop::collection::vec(-100.0f64..100.0, 12..40),
        shift in -50.0f64..50.0,
        scale in 0.25f64..8.0,
    ) {
        let r1 = match levene(&a, &b) {
            Ok(r) => r,
            // Deviation-free groups (all values equal) are rejected;
            // nothing to compare in that case.
            Err(_) => return Ok(()),
        };
        let ta: Vec<f64> = a.iter().map(|v| scale * (v + shift)).collect();
        let tb: Vec<f64> = b.iter().map(|v| scale * (v + shift)).collect();
        let r2 = levene(&ta, &tb).unwrap();
        prop_assert!((r1.statistic - r2.statistic).abs() <= 1e-6 * r1.statistic.abs().max(1.0));
        prop_assert!((r1.p_value - r2.p_value).abs() <= 1e-5 * r1.p_value.max(1e-12));
    }

    // The histogram is a probability density: it integrates to one over
    // its support, and the ECDF ends at exactly one.
    #[test]
    fn density_estimate_integrates_to_one(
        xs in prop::collection::vec(-1e3f64..1e3, 30..200),
        bins in 2usize..40,
    ) {
        let e = ecdf_and_pdf(&xs, bins).unwrap();
        prop_assert_eq!(e.ecdf.last().unwrap().1, 1.0);
        if e.degenerate {
            prop_assert!(e.edges.is_empty() && e.density.is_empty());
            return Ok(());
        }
        let integral: f64 = e
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| d * (e.edges[i + 1] - e.edges[i]))
            .sum();
        prop_assert!((integral - 1.0).abs() < 1e-9, "integral = {}", integral);
    }

    // Sampling is a pure function of (space, n, seed). Same seed: bit
    // identical. Different seed: some entry moves.
    #[test]
    fn sampling_is_deterministic_and_seed_sensitive(
        n in 2usize..64,
        seed in any::<u64>(),
    ) {
        let space = reaction_space();
        let s1 = space.sample(n, seed).unwrap();
        let s2 = space.sample(n, seed).unwrap();
        for i in 0..n {
            for j in 0..space.dim() {
                prop_assert_eq!(s1.value(i, j).to_bits(), s2.value(i, j).to_bits());
            }
        }
        let s3 = space.sample(n, seed ^ 0x9e3779b97f4a7c15).unwrap();
        let moved = (0..n).any(|i| (0..space.dim()).any(|j| s1.value(i, j) != s3.value(i, j)));
        prop_assert!(moved);
    }

    // Counter-based streams must stay strictly inside (0, 1) and produce
    // finite normals at any counter value.
    #[test]
    fn unit_stream_stays_strictly_inside_the_interval(
        seed in any::<u64>(),
        k in any::<u64>(),
    ) {
        let s = Stream::new(seed, "props");
        let u = s.unit(k);
        prop_assert!(u > 0.0 && u < 1.0);
        prop_assert!(s.normal(k).is_finite());
    }

    // Moments measured from real samples are always Cauchy-Schwarz
    // consistent, so the exact-form transfer factors they induce must
    // land in (0, 1] no matter the seed.
    #[test]
    fn exact_form_factors_stay_in_the_unit_interval(
        seed in any::<u64>(),
        n in 64usize..256,
    ) {
        let fs = reaction_f_space().sample(n, seed).unwrap();
        let fv: Vec<f64> = (0..n).map(|i| ReactionF.eval(fs.row(i))).collect();
        let f_cm = ComponentMoments::from_estimate(&moments_of_values(&fv).unwrap());

        let hs = reaction_h_space().sample(n, seed ^ 1).unwrap();
        let h = ReactionH { t: 10.0 };
        let hv: Vec<f64> = (0..n).map(|i| h.eval(hs.row(i))).collect();
        let h_cm = ComponentMoments::from_estimate(&moments_of_values(&hv).unwrap());

        let sens = flat_sens(&["x1", "x2", "x3"]);
        let lambda = bound_multiplicative(&f_cm, &h_cm, &sens).unwrap().factor.unwrap();
        prop_assert!(lambda > 0.0 && lambda <= 1.0, "lambda = {}", lambda);
        let mu = bound_additive(&f_cm, &h_cm, &sens).unwrap().factor.unwrap();
        prop_assert!(mu > 0.0 && mu <= 1.0, "mu = {}", mu);
    }

    // Row-parallel evaluation must be indistinguishable from a serial
    // sweep, bit for bit.
    #[test]
    fn parallel_evaluation_is_bitwise_serial(
        seed in any::<u64>(),
        n in 16usize..128,
    ) {
        let m = reaction_f_space().sample(n, seed).unwrap();
        let par = evaluate_rows(&ReactionF, &m).unwrap();
        for i in 0..n {
            prop_assert_eq!(par[i].to_bits(), ReactionF.eval(m.row(i)).to_bits());
        }
    }

    // Distribution quantiles are monotone and stay inside the support.
    #[test]
    fn quantiles_are_monotone_and_supported(
        u1 in 0.001f64..0.999,
        u2 in 0.001f64..0.999,
    ) {
        let dists = [
            Distribution::Uniform { lo: -2.0, hi: 3.0 },
            Distribution::Normal { mean: 1.0, variance: 0.25 },
        ];
        let (lo, hi) = (u1.min(u2), u1.max(u2));
        for d in dists {
            let (qlo, qhi) = (d.quantile(lo), d.quantile(hi));
            prop_assert!(qlo <= qhi, "{:?}: q({}) = {} > q({}) = {}", d, lo, qlo, hi, qhi);
            prop_assert!(d.contains(qlo) && d.contains(qhi));
        }
    }
}
