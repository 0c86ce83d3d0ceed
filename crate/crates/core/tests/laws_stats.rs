//! Statistical checks on the coefficient laws: moments, distributional
//! identities and the Kolmogorov-Smirnov fit of the Gaussian sampler.

mod common;

use nodal_mc::laws::{draw_real, CoefficientLaw, SeedStream};
use nodal_mc::mcstats::ks_distance;

#[test]
fn all_laws_centred_unit_variance() {
    let laws = [
        CoefficientLaw::Gaussian,
        CoefficientLaw::Rademacher,
        CoefficientLaw::Uniform,
        CoefficientLaw::two_point(0.3).unwrap(),
        CoefficientLaw::two_point(0.8).unwrap(),
    ];
    for (i, law) in laws.iter().enumerate() {
        let draws = draw_real(*law, SeedStream::new(100 + i as u64, 0), 1_000_000);
        let m = common::mean(&draws);
        let v = common::variance(&draws);
        assert!(m.abs() < 5e-3, "{law}: mean {m}");
        assert!((v - 1.0).abs() < 5e-3, "{law}: variance {v}");
    }
}

#[test]
fn gaussian_kurtosis_is_three() {
    let draws = draw_real(CoefficientLaw::Gaussian, SeedStream::new(7, 3), 100_000);
    let v = common::variance(&draws);
    let m = common::mean(&draws);
    let k = draws.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws.len() as f64 / (v * v);
    assert!((k - 3.0).abs() < 0.1, "kurtosis {k}");
}

#[test]
fn two_point_half_is_rademacher_in_law() {
    let a = draw_real(
        CoefficientLaw::two_point(0.5).unwrap(),
        SeedStream::new(11, 0),
        100_000,
    );
    let b = draw_real(CoefficientLaw::Rademacher, SeedStream::new(12, 0), 100_000);
    let d = ks_distance(&a, &b);
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn gaussian_survives_ks_test_at_1e3_significance() {
    let n = 100_000usize;
    let draws = draw_real(CoefficientLaw::Gaussian, SeedStream::new(2024, 1), n);
    let d = common::ks_vs_cdf(&draws, common::normal_cdf);
    // c(alpha) = sqrt(ln(2/alpha)/2) at alpha = 1e-3
    let critical = (2.0_f64 / 1e-3).ln().sqrt() / 2f64.sqrt() / (n as f64).sqrt();
    assert!(d < critical, "KS {d} vs critical {critical}");
}
