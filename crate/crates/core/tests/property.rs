//! Randomized property checks.

use nodal_mc::ensembles::FieldSample;
use nodal_mc::grid::GridGeometry;
use nodal_mc::nodal::nodal_length;
use nodal_mc::special::{bessel_j, isotropic_kernel, KernelSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_stays_in_unit_band(
        n in 2usize..=5,
        u in 0.0f64..=1.0,
        r in 0.0f64..=20.0,
    ) {
        let spec = KernelSpec::new(n, u).unwrap();
        let k = isotropic_kernel(&spec, r).unwrap();
        prop_assert!(k.abs() <= 1.0 + 1e-9, "K({r}) = {k} for n={n}, U={u}");
    }

    #[test]
    fn bessel_recurrence_random_orders(
        twice_nu in 2u32..=11,
        x in 0.05f64..=400.0,
    ) {
        let nu = twice_nu as f64 / 2.0;
        let lhs = bessel_j(nu - 1.0, x).unwrap() + bessel_j(nu + 1.0, x).unwrap();
        let rhs = 2.0 * nu / x * bessel_j(nu, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9, "nu={nu}, x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn nodal_length_is_sign_invariant(
        a in -1.5f64..=1.5,
        b in -1.5f64..=1.5,
        c in -0.4f64..=0.4,
    ) {
        // random low-frequency trigonometric field on the torus
        let field = move |p: [f64; 2]| {
            let tp = 2.0 * std::f64::consts::PI;
            a * (tp * p[0]).sin() + b * (tp * p[1]).cos()
                + 0.7 * (tp * (p[0] + p[1])).sin()
                + c
        };
        let plus = FieldSample::from_fn(GridGeometry::Torus2 { n: 32 }, 1.5, "f", field);
        let mut minus = plus.clone();
        for v in minus.values.iter_mut() {
            *v = -*v;
        }
        minus.eval = None;
        let mut plain = plus.clone();
        plain.eval = None;
        let lp = nodal_length(&plain).unwrap().length;
        let lm = nodal_length(&minus).unwrap().length;
        prop_assert_eq!(lp, lm);
    }
}
