use fracmass::spectral::spectral_perimeter;
use fracmass::{
    boundary_mass_perimeter, curve_to_current, fourier_of_current, fractional_mass, sample_smooth_curve, spectral_mass,
    transform, CurveKind, FracParams, PlanarRegion, Point, PolyCurve, SegmentCurrent, SpectralConfig,
};
use num_complex::Complex64;

fn norm(v: &[Complex64; 3]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn square_loop() -> SegmentCurrent {
    curve_to_current(&PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], true).unwrap())
}

fn pentagon() -> PolyCurve {
    PolyCurve::planar(&[(0.0, 0.0), (1.2, -0.1), (1.5, 0.8), (0.6, 1.3), (-0.2, 0.7)], true).unwrap()
}

#[test]
fn transform_is_linear() {
    let a = square_loop();
    let b = curve_to_current(&sample_smooth_curve(CurveKind::Segment { length: 0.7 }, 5).unwrap()).scaled_weights(-2.5);
    let ab = a.union(&b).unwrap();
    for xi in [Point::new2(0.3, -1.7), Point::new2(12.0, 5.0)] {
        let (fa, fb, fab) = (fourier_of_current(&a, xi), fourier_of_current(&b, xi), fourier_of_current(&ab, xi));
        for k in 0..2 {
            assert!((fab.value[k] - fa.value[k] - fb.value[k]).norm() < 1e-13);
        }
    }
}

#[test]
fn transform_dilation() {
    // F[lambda mu](xi) = lambda F[mu](lambda xi)
    let mu = curve_to_current(&pentagon());
    let big = transform(&mu, 2.0, Point::ZERO).unwrap();
    let xi = Point::new2(0.9, -0.4);
    let (f1, f2) = (fourier_of_current(&mu, xi * 2.0), fourier_of_current(&big, xi));
    for k in 0..2 {
        assert!((f2.value[k] - f1.value[k] * 2.0).norm() < 1e-12);
    }
}

#[test]
fn low_frequency_behaviour() {
    // closed loop: F(xi) = -i A (-xi_2, xi_1) + O(|xi|^2); open: F(0) = b - a
    let c = pentagon();
    let mu = curve_to_current(&c);
    let area = c.signed_area();
    let dir = Point::new2(0.6, 0.8);
    let f1 = norm(&fourier_of_current(&mu, dir * 1e-4).value);
    let f2 = norm(&fourier_of_current(&mu, dir * 1e-3).value);
    assert!((f1 / (area * 1e-4) - 1.0).abs() < 1e-3);
    let slope = (f2 / f1).log10();
    assert!((slope - 1.0).abs() < 1e-3, "slope {slope}");

    let open = curve_to_current(&PolyCurve::planar(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0)], false).unwrap());
    let f0 = fourier_of_current(&open, Point::new2(1e-9, 0.0));
    assert!((f0.value[0] - Complex64::new(2.0, 0.0)).norm() < 1e-8);
    assert!(f0.value[1].norm() < 1e-8);
}

#[test]
fn square_loop_spectral_mass() {
    let mu = square_loop();
    let est = spectral_mass(&mu, 0.5, &SpectralConfig::default()).unwrap();
    let exact = fractional_mass(&mu, &FracParams::new(0.5)).unwrap();
    assert!(!est.has_boundary);
    assert!((est.value / exact - 1.0).abs() < 0.05, "{} vs {exact}", est.value);
    // open curves are flagged
    let open = curve_to_current(&sample_smooth_curve(CurveKind::Segment { length: 1.0 }, 3).unwrap());
    assert!(spectral_mass(&open, 0.5, &SpectralConfig::default()).unwrap().has_boundary);
}

#[test]
fn square_spectral_perimeter() {
    let e = PlanarRegion::square(0.0, 0.0, 1.0).unwrap();
    let s = 0.5;
    let spec = spectral_perimeter(&e, s, &SpectralConfig::default()).unwrap();
    let quad = s * s * boundary_mass_perimeter(&e, s, &FracParams::new(s)).unwrap();
    assert!((spec / quad - 1.0).abs() < 0.05, "{spec} vs {quad}");
}
