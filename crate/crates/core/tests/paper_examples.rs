//! The worked total-differential examples: the cubic polynomial potential
//! and sin(x)cos(y), both reconstructed from their operator-valued 1-forms.

use std::sync::Arc;

use octode_core::algebra::CdNum;
use octode_core::calculus::{
    check_exact, integrating_factor, reconstruct_potential, FactorDependence, Form1, LinOpR,
    SeriesFn,
};
use octode_core::functions::{cd_cos, cd_sin};
use octode_core::sample;

/// Phi(x, y) = x^3 + x^2 y + y x^2 + x y x - y^3.
fn phi(x: &CdNum, y: &CdNum) -> CdNum {
    let x2 = x * x;
    &(&(&(&x2 * x) + &(&x2 * y)) + &(&(y * &x2) + &(&(x * y) * x))) - &(&(y * y) * y)
}

/// The operator form of Example 8.2, written exactly as the bracketed sums.
fn form_8_2() -> Form1 {
    let a = |x: &CdNum, y: &CdNum| {
        let x = x.clone();
        let y = y.clone();
        LinOpR::from_fn(3, move |h| {
            let q = &(&(&x * &x) + &(&x * &y)) + &(&y * &x);
            &(&(&q * h) + &(h * &q))
                + &(&(&(&x * h) * &x) + &(&(&(&x * h) * &y) + &(&(&y * h) * &x)))
        })
    };
    let b = |x: &CdNum, y: &CdNum| {
        let x = x.clone();
        let y = y.clone();
        LinOpR::from_fn(3, move |v| {
            let q = &(&x * &x) - &(&y * &y);
            &(&(&q * v) + &(v * &q)) + &(&(&(&x * v) * &x) - &(&(&y * v) * &y))
        })
    };
    Form1 {
        a: Arc::new(a),
        b: Arc::new(b),
        level: 3,
        center_x: CdNum::zero(3),
        center_y: CdNum::zero(3),
        radius: 0.8,
    }
}

#[test]
fn example_8_2_is_exact_and_matches_frechet_of_phi() {
    let form = form_8_2();
    let report = check_exact(&form, 6);
    assert!(report.exact, "defect {:.3e}", report.max_defect);

    // the bracketed operator equals the Fréchet derivative of Phi in x
    for i in 0..6u64 {
        let x = sample::cd_point(61, i, 3, &CdNum::zero(3), 0.7);
        let y = sample::cd_point(63, i, 3, &CdNum::zero(3), 0.7);
        let step = 1e-5;
        for k in 0..8 {
            let h = CdNum::basis(3, k);
            let fd = (&phi(&(&x + &h.scale(step)), &y) - &phi(&(&x - &h.scale(step)), &y))
                .scale(0.5 / step);
            let op = (form.a)(&x, &y).apply(&h);
            assert!(op.approx_eq(&fd, 1e-7 * (1.0 + op.norm())), "k = {k}");
        }
    }
}

#[test]
fn example_8_2_potential_reconstruction() {
    let form = form_8_2();
    let alpha = CdNum::real(3, 0.1);
    let beta = CdNum::real(3, 0.1);
    let f = reconstruct_potential(&form, &alpha, &beta).unwrap();
    let f00 = f(&alpha, &beta).unwrap();
    let phi00 = phi(&alpha, &beta);
    for i in 0..20u64 {
        let x = sample::cd_point(65, i, 3, &CdNum::zero(3), 0.7);
        let y = sample::cd_point(67, i, 3, &CdNum::zero(3), 0.7);
        let got = &f(&x, &y).unwrap() - &f00;
        let want = &phi(&x, &y) - &phi00;
        assert!(
            got.approx_eq(&want, 1e-6 * (1.0 + want.norm())),
            "i = {i}: |diff| = {:.3e}",
            (&got - &want).norm()
        );
    }

    // differentiating the reconstruction returns the form
    let step = 1e-5;
    for i in 0..3u64 {
        let x = sample::cd_point(68, i, 3, &CdNum::zero(3), 0.6);
        let y = sample::cd_point(70, i, 3, &CdNum::zero(3), 0.6);
        for k in [0usize, 1, 5] {
            let h = CdNum::basis(3, k);
            let dx = (&f(&(&x + &h.scale(step)), &y).unwrap()
                - &f(&(&x - &h.scale(step)), &y).unwrap())
                .scale(0.5 / step);
            let want = (form.a)(&x, &y).apply(&h);
            assert!(dx.approx_eq(&want, 1e-5 * (1.0 + want.norm())));
            let dy = (&f(&x, &(&y + &h.scale(step))).unwrap()
                - &f(&x, &(&y - &h.scale(step))).unwrap())
                .scale(0.5 / step);
            let want = (form.b)(&x, &y).apply(&h);
            assert!(dy.approx_eq(&want, 1e-5 * (1.0 + want.norm())));
        }
    }
}

fn form_8_3() -> Form1 {
    let n = 31; // truncation: |x| <= ~1.6 keeps the tail far below 1e-12
    let dsin = SeriesFn::sin_series(3, n).derivative();
    let dcos = SeriesFn::cos_series(3, n).derivative();
    let a = move |x: &CdNum, y: &CdNum| {
        let x = x.clone();
        let cy = cd_cos(y);
        let dsin = dsin.clone();
        LinOpR::from_fn(3, move |h| &dsin.hat_apply(&x, h).unwrap() * &cy)
    };
    let b = move |x: &CdNum, y: &CdNum| {
        let y = y.clone();
        let sx = cd_sin(x);
        let dcos = dcos.clone();
        LinOpR::from_fn(3, move |v| &sx * &dcos.hat_apply(&y, v).unwrap())
    };
    Form1 {
        a: Arc::new(a),
        b: Arc::new(b),
        level: 3,
        center_x: CdNum::zero(3),
        center_y: CdNum::zero(3),
        radius: 0.8,
    }
}

#[test]
fn example_8_3_sin_cos_potential() {
    let form = form_8_3();
    let report = check_exact(&form, 4);
    assert!(report.exact, "defect {:.3e}", report.max_defect);

    let alpha = CdNum::real(3, 0.05);
    let beta = CdNum::real(3, 0.05);
    let f = reconstruct_potential(&form, &alpha, &beta).unwrap();
    let base = &f(&alpha, &beta).unwrap();
    let want_base = &cd_sin(&alpha) * &cd_cos(&beta);
    for i in 0..12u64 {
        let x = sample::cd_point(69, i, 3, &CdNum::zero(3), 0.6);
        let y = sample::cd_point(71, i, 3, &CdNum::zero(3), 0.6);
        let got = &f(&x, &y).unwrap() - base;
        let want = &(&cd_sin(&x) * &cd_cos(&y)) - &want_base;
        assert!(
            got.approx_eq(&want, 1e-6 * (1.0 + want.norm())),
            "i = {i}: |diff| = {:.3e}",
            (&got - &want).norm()
        );
    }
}

#[test]
fn sin_cos_closed_forms_match_series() {
    let s25 = SeriesFn::sin_series(3, 31);
    let c25 = SeriesFn::cos_series(3, 31);
    for i in 0..30u64 {
        let z = sample::cd_point(73, i, 3, &CdNum::zero(3), 1.2);
        assert!(cd_sin(&z).approx_eq(&s25.eval(&z).unwrap(), 1e-12));
        assert!(cd_cos(&z).approx_eq(&c25.eval(&z).unwrap(), 1e-12));
    }
}

#[test]
fn integrating_factor_recovers_exponential() {
    // start from the exact quaternion form (A0, B0) of F = x + y, damp it by
    // the real factor e^{-x0}: the recovered factor must be proportional to
    // e^{x0} and make the form exact again
    let g = |x: &CdNum| (-x.re()).exp();
    let a = move |x: &CdNum, _y: &CdNum| LinOpR::identity(2).scale(g(x));
    let b = move |x: &CdNum, _y: &CdNum| LinOpR::identity(2).scale(g(x));
    let form = Form1 {
        a: Arc::new(a),
        b: Arc::new(b),
        level: 2,
        center_x: CdNum::zero(2),
        center_y: CdNum::zero(2),
        radius: 0.5,
    };
    let x0 = CdNum::zero(2);
    let y0 = CdNum::zero(2);
    let mu = integrating_factor(&form, FactorDependence::XOnly, (&x0, &y0), 0).unwrap();
    // proportional to e^{x0}
    let m0 = mu(&CdNum::zero(2), &y0).unwrap();
    for i in 0..6u64 {
        let x = sample::cd_point(75, i, 2, &CdNum::zero(2), 0.5);
        let got = mu(&x, &y0).unwrap();
        let want = m0.scale(x.re().exp());
        assert!(got.approx_eq(&want, 1e-6 * (1.0 + want.norm())), "{got} vs {want}");
    }
    // (mu A, mu B) is exact
    let mu2 = integrating_factor(&form, FactorDependence::XOnly, (&x0, &y0), 0).unwrap();
    let form2 = form.clone();
    let muxed = Form1 {
        a: Arc::new(move |x: &CdNum, y: &CdNum| {
            let m = mu2(x, y).unwrap();
            let inner = (form2.a)(x, y);
            LinOpR::from_fn(2, move |h| &m * &inner.apply(h))
        }),
        b: {
            let mu3 = integrating_factor(&form, FactorDependence::XOnly, (&x0, &y0), 0).unwrap();
            let form3 = form.clone();
            Arc::new(move |x: &CdNum, y: &CdNum| {
                let m = mu3(x, y).unwrap();
                let inner = (form3.b)(x, y);
                LinOpR::from_fn(2, move |h| &m * &inner.apply(h))
            })
        },
        level: 2,
        center_x: CdNum::zero(2),
        center_y: CdNum::zero(2),
        radius: 0.5,
    };
    let report = check_exact(&muxed, 4);
    assert!(report.exact, "defect {:.3e}", report.max_defect);
}

#[test]
fn integrating_factor_unit_integrand_gives_exp_x() {
    // A.h = h y, B.v = v: the factor integrand is exactly i_j for each j,
    // so mu is proportional to e^x
    let a = |_x: &CdNum, y: &CdNum| LinOpR::right_mul(y);
    let b = |_x: &CdNum, _y: &CdNum| LinOpR::identity(2);
    let form = Form1 {
        a: Arc::new(a),
        b: Arc::new(b),
        level: 2,
        center_x: CdNum::zero(2),
        center_y: CdNum::one(2),
        radius: 0.4,
    };
    let x0 = CdNum::zero(2);
    let y0 = CdNum::one(2);
    let mu = integrating_factor(&form, FactorDependence::XOnly, (&x0, &y0), 0).unwrap();
    for i in 0..8u64 {
        let x = sample::cd_point(79, i, 2, &CdNum::zero(2), 0.6);
        let got = mu(&x, &y0).unwrap();
        let want = octode_core::functions::cd_exp(&x);
        assert!(
            got.approx_eq(&want, 1e-6 * (1.0 + want.norm())),
            "{got} vs {want}"
        );
    }
}

#[test]
fn integrating_factor_y_only_route() {
    // y-dependent damping of the exact form, recovered through the y-only
    // formula
    let g = |y: &CdNum| (-0.5 * y.re()).exp();
    let a = move |_x: &CdNum, y: &CdNum| LinOpR::identity(2).scale(g(y));
    let b = move |_x: &CdNum, y: &CdNum| LinOpR::identity(2).scale(g(y));
    let form = Form1 {
        a: Arc::new(a),
        b: Arc::new(b),
        level: 2,
        center_x: CdNum::zero(2),
        center_y: CdNum::zero(2),
        radius: 0.5,
    };
    let origin = CdNum::zero(2);
    let mu = integrating_factor(&form, FactorDependence::YOnly, (&origin, &origin), 0).unwrap();
    let m0 = mu(&origin, &CdNum::zero(2)).unwrap();
    for i in 0..6u64 {
        let y = sample::cd_point(77, i, 2, &CdNum::zero(2), 0.5);
        let got = mu(&origin, &y).unwrap();
        let want = m0.scale((0.5 * y.re()).exp());
        assert!(got.approx_eq(&want, 1e-6 * (1.0 + want.norm())));
    }
}

#[test]
fn non_quaternion_level_rejected() {
    let form = form_8_2();
    let origin = CdNum::zero(3);
    assert!(matches!(
        integrating_factor(&form, FactorDependence::XOnly, (&origin, &origin), 0),
        Err(octode_core::calculus::CalculusError::NotQuaternion)
    ));
}
