//! Property tests for the invariants of the Gaussian, rearrangement and
//! discretization layers.

use std::sync::OnceLock;

use logtrace::domains::Domain;
use logtrace::gaussian;
use logtrace::quadrature::{integrate_interior_fn, QuadratureRule};
use logtrace::rearrange::{self, DistributionSampler, ZygmundParams};
use logtrace::testbed;
use logtrace::weighted_pde::{self, WeightedMesh};
use logtrace::ScalarField;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn quadratic(a: f64, b: f64, c: f64) -> ScalarField {
    ScalarField::new(format!("{a}+{b}x+{c}x^2"), 1, move |x| a + b * x[0] + c * x[0] * x[0])
}

/// `1e−11(1+|x|)`, plus the conditioning of `Φ(x)` itself above the median:
/// near 1 a double keeps only `ε/(1 − Φ(x))` of the tail.
fn round_trip_bound(x: f64) -> f64 {
    let cond = if x > 0.0 { 2.0 * f64::EPSILON * gaussian::cdf(x) / gaussian::density_1d(x) } else { 0.0 };
    1e-11 * (1.0 + x.abs()) + cond
}

#[test]
fn quantile_round_trip_on_grid() {
    for i in 0..=10_000 {
        let x = -8.0 + 16.0 * i as f64 / 10_000.0;
        if gaussian::cdf(x) == 1.0 {
            continue;
        }
        let back = gaussian::quantile(gaussian::cdf(x)).unwrap();
        assert!((back - x).abs() <= round_trip_bound(x), "{x} -> {back}");
    }
}

fn meshes() -> &'static [WeightedMesh] {
    static MESHES: OnceLock<Vec<WeightedMesh>> = OnceLock::new();
    MESHES.get_or_init(|| {
        vec![
            weighted_pde::assemble(&Domain::interval(-3.0, 2.0).unwrap(), 0.05).unwrap(),
            weighted_pde::assemble(&Domain::rectangle(-1.0, 2.0, -2.0, 0.5).unwrap(), 0.2).unwrap(),
            weighted_pde::assemble(&Domain::half_plane(0.0).unwrap(), 0.5).unwrap(),
        ]
    })
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn quantile_inverts_cdf(x in -8.0f64..8.0) {
        let back = gaussian::quantile(gaussian::cdf(x)).unwrap();
        prop_assert!((back - x).abs() <= round_trip_bound(x), "{x} -> {back}");
    }

    #[test]
    fn cdf_is_non_decreasing(x in -40.0f64..40.0, dx in 0.0f64..5.0) {
        prop_assert!(gaussian::cdf(x) <= gaussian::cdf(x + dx));
        prop_assert!(gaussian::ln_cdf(x) <= gaussian::ln_cdf(x + dx));
    }

    #[test]
    fn rectangle_measure_is_additive(a in -5.0f64..0.0, w in 0.1f64..5.0, r in 0.05f64..0.95, c in -5.0f64..0.0, h in 0.1f64..5.0) {
        let (b, d) = (a + w, c + h);
        let m = a + r * w;
        let whole = Domain::rectangle(a, b, c, d).unwrap().gamma_measure;
        let parts = Domain::rectangle(a, m, c, d).unwrap().gamma_measure + Domain::rectangle(m, b, c, d).unwrap().gamma_measure;
        prop_assert!((whole - parts).abs() <= 1e-13, "{whole} vs {parts}");
    }

    #[test]
    fn stiffness_is_symmetric_and_non_negative(k in 0usize..3, seed in any::<u64>()) {
        let mesh = &meshes()[k];
        let mut state = seed | 1;
        let mut next = || {
            // xorshift, enough to spread test vectors
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<f64> = (0..mesh.len()).map(|_| next()).collect();
        let y: Vec<f64> = (0..mesh.len()).map(|_| next()).collect();
        let (ax, ay) = (mesh.apply_stiffness(&x), mesh.apply_stiffness(&y));
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let scale = dot(&x, &ax).abs().max(dot(&y, &ay).abs()).max(1e-300);
        prop_assert!((dot(&y, &ax) - dot(&x, &ay)).abs() <= 1e-12 * scale);
        prop_assert!(mesh.energy(&x) >= 0.0);
        prop_assert!(mesh.apply_stiffness(&vec![1.0; mesh.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distribution_function_is_non_increasing(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0, t in 0.0f64..4.0, dt in 0.0f64..2.0) {
        let u = quadratic(a, b, c);
        let d = Domain::interval(-3.0, 3.0).unwrap();
        let sampler = DistributionSampler::new(&u, &d);
        let (m0, m1) = (sampler.measure(t), sampler.measure(t + dt));
        prop_assert!(m1 <= m0 && m0 <= d.gamma_measure * (1.0 + 1e-14));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn profiles_are_equimeasurable(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0) {
        let u = quadratic(a, b, c);
        let d = testbed::line_domain();
        let profile = rearrange::rearrangement(&u, &d, 64).unwrap();
        prop_assert!(profile.ln_u.windows(2).all(|w| w[0] <= w[1]), "profile increases in s");
        for p in [1.0, 2.0, 3.0] {
            let direct = integrate_interior_fn(&d, &|x: &[f64]| u.value(x).abs().powf(p), &QuadratureRule::default());
            let rel = (profile.lp_integral(p) - direct.value).abs() / direct.value;
            prop_assert!(rel <= 1e-3, "p={p}: rel {rel:e}");
        }
    }

    #[test]
    fn rearrangement_preserves_order(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0, k in 1.0f64..3.0, shift in 0.0f64..1.0) {
        let u = quadratic(a, b, c);
        let v = ScalarField::new("k|u|+shift", 1, move |x| k * (a + b * x[0] + c * x[0] * x[0]).abs() + shift);
        let d = Domain::interval(-3.0, 3.0).unwrap();
        let (pu, pv) = (rearrange::rearrangement(&u, &d, 32).unwrap(), rearrange::rearrangement(&v, &d, 32).unwrap());
        for (i, &t) in pu.t.iter().enumerate() {
            let s = (-t).exp();
            prop_assert!(pu.value(i) <= pv.value_at(s) * (1.0 + 1e-9) + 1e-12, "s={s}: {} > {}", pu.value(i), pv.value_at(s));
        }
    }

    #[test]
    fn zygmund_norm_is_monotone_in_alpha(delta in -0.45f64..-0.01, p in 1.0f64..4.0, a0 in -2.0f64..2.0, da in 0.0f64..2.0) {
        let e = testbed::power_field(delta);
        let profile = rearrange::profile_for(&e, &Domain::half_line(0.0).unwrap(), 128).unwrap();
        let lo = rearrange::zygmund_norm(&profile, ZygmundParams::new(p, a0).unwrap()).value;
        let hi = rearrange::zygmund_norm(&profile, ZygmundParams::new(p, a0 + da).unwrap()).value;
        prop_assert!(lo <= hi * (1.0 + 1e-12), "{lo} > {hi}");
    }
}
