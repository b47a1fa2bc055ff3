//! Chain-rule identities between symbolic derivatives and their evaluated
//! two-term/multi-term expansions, for first order and orders two and three.

use octode_core::algebra::CdNum;
use octode_core::phrase::{Phrase, Tree, Wrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cd(rng: &mut ChaCha8Rng, level: u8, scale: f64) -> CdNum {
    let coeffs = (0..1usize << level)
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    CdNum::from_coeffs(level, coeffs).unwrap()
}

/// Random phrase: up to `terms` monomials, each a word of constants and
/// variable leaves with random bracketing.
fn random_phrase(rng: &mut ChaCha8Rng, level: u8, terms: usize, allow_conj: bool) -> Phrase {
    fn random_tree(rng: &mut ChaCha8Rng, level: u8, depth: u32, allow_conj: bool) -> Tree {
        if depth == 0 || rng.gen_bool(0.4) {
            let roll: f64 = rng.gen();
            if roll < 0.45 {
                Tree::Var
            } else if allow_conj && roll < 0.6 {
                Tree::ConjVar
            } else {
                let coeffs = (0..1usize << level).map(|_| rng.gen_range(-0.8..0.8)).collect();
                Tree::Const(CdNum::from_coeffs(level, coeffs).unwrap())
            }
        } else {
            Tree::Mul(
                Box::new(random_tree(rng, level, depth - 1, allow_conj)),
                Box::new(random_tree(rng, level, depth - 1, allow_conj)),
            )
        }
    }
    let n = rng.gen_range(1..=terms);
    Phrase::from_terms((0..n).map(|_| random_tree(rng, level, 2, allow_conj)).collect())
}

#[test]
fn first_order_chain_rule_including_conj() {
    // D_z(eta o psi).h = (D_y eta).u1 + (D_conj-y eta) fed conj(u2),
    // u1 = (D_z psi).h, u2 = (D_z conj(psi)).h
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut checked = 0;
    while checked < 50 {
        let eta = random_phrase(&mut rng, 3, 2, true);
        let psi = random_phrase(&mut rng, 3, 2, true);
        if eta.is_zero() || psi.is_zero() {
            continue;
        }
        let comp = eta.compose(&psi);
        let d_comp = comp.diff(Wrt::Z);
        let d_eta_y = eta.diff(Wrt::Z);
        let d_eta_yc = eta.diff(Wrt::ConjZ);
        let d_psi = psi.diff(Wrt::Z);
        let d_psi_conj = psi.conj().diff(Wrt::Z);
        for _ in 0..2 {
            let z = random_cd(&mut rng, 3, 0.7);
            let h = random_cd(&mut rng, 3, 0.7);
            let lhs = d_comp.eval(&z, &[h.clone()]).unwrap();
            let y = psi.eval(&z);
            let u1 = d_psi.eval(&z, &[h.clone()]).unwrap();
            let u2 = d_psi_conj.eval(&z, &[h.clone()]).unwrap();
            let term1 = d_eta_y.eval(&y, &[u1]).unwrap();
            let term2 = d_eta_yc.eval(&y, &[u2.conj()]).unwrap();
            let rhs = &term1 + &term2;
            let tol = 1e-9 * (1.0 + rhs.norm());
            assert!(
                lhs.approx_eq(&rhs, tol),
                "eta = {eta}, psi = {psi}: {lhs} vs {rhs}"
            );
        }
        checked += 1;
    }
}

#[test]
fn second_order_chain_rule() {
    // (d^2 eta(psi)/dz^2).(h1,h2) =
    //   eta''(psi).(psi'.h1, psi'.h2) + eta'(psi).(psi''.(h1,h2))
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut checked = 0;
    while checked < 50 {
        let eta = random_phrase(&mut rng, 3, 2, false);
        let psi = random_phrase(&mut rng, 3, 2, false);
        if eta.is_zero() || psi.is_zero() {
            continue;
        }
        let comp = eta.compose(&psi);
        let d2_comp = comp.diff(Wrt::Z).diff(Wrt::Z);
        let d_eta = eta.diff(Wrt::Z);
        let d2_eta = d_eta.diff(Wrt::Z);
        let d_psi = psi.diff(Wrt::Z);
        let d2_psi = d_psi.diff(Wrt::Z);
        let z = random_cd(&mut rng, 3, 0.6);
        let h1 = random_cd(&mut rng, 3, 0.6);
        let h2 = random_cd(&mut rng, 3, 0.6);
        let lhs = d2_comp.eval(&z, &[h1.clone(), h2.clone()]).unwrap();
        let y = psi.eval(&z);
        let p1 = d_psi.eval(&z, &[h1.clone()]).unwrap();
        let p2 = d_psi.eval(&z, &[h2.clone()]).unwrap();
        let rhs = &d2_eta.eval(&y, &[p1, p2]).unwrap()
            + &d_eta
                .eval(&y, &[d2_psi.eval(&z, &[h1, h2]).unwrap()])
                .unwrap();
        let tol = 1e-8 * (1.0 + rhs.norm());
        assert!(lhs.approx_eq(&rhs, tol), "{lhs} vs {rhs}");
        checked += 1;
    }
}

#[test]
fn third_order_chain_rule() {
    // five-term expansion at n = 3
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut checked = 0;
    while checked < 20 {
        let eta = random_phrase(&mut rng, 2, 2, false);
        let psi = random_phrase(&mut rng, 2, 2, false);
        if eta.is_zero() || psi.is_zero() {
            continue;
        }
        let comp = eta.compose(&psi);
        let d3_comp = comp.diff(Wrt::Z).diff(Wrt::Z).diff(Wrt::Z);
        let d_eta = eta.diff(Wrt::Z);
        let d2_eta = d_eta.diff(Wrt::Z);
        let d3_eta = d2_eta.diff(Wrt::Z);
        let d_psi = psi.diff(Wrt::Z);
        let d2_psi = d_psi.diff(Wrt::Z);
        let d3_psi = d2_psi.diff(Wrt::Z);
        let z = random_cd(&mut rng, 2, 0.6);
        let h1 = random_cd(&mut rng, 2, 0.6);
        let h2 = random_cd(&mut rng, 2, 0.6);
        let h3 = random_cd(&mut rng, 2, 0.6);
        let lhs = d3_comp
            .eval(&z, &[h1.clone(), h2.clone(), h3.clone()])
            .unwrap();
        let y = psi.eval(&z);
        let p = |h: &CdNum| d_psi.eval(&z, std::slice::from_ref(h)).unwrap();
        let pp = |a: &CdNum, b: &CdNum| d2_psi.eval(&z, &[a.clone(), b.clone()]).unwrap();
        let rhs = &(&(&d3_eta.eval(&y, &[p(&h1), p(&h2), p(&h3)]).unwrap()
            + &d2_eta.eval(&y, &[pp(&h1, &h3), p(&h2)]).unwrap())
            + &(&d2_eta.eval(&y, &[pp(&h2, &h3), p(&h1)]).unwrap()
                + &d2_eta.eval(&y, &[pp(&h1, &h2), p(&h3)]).unwrap()))
            + &d_eta
                .eval(&y, &[d3_psi.eval(&z, &[h1, h2, h3]).unwrap()])
                .unwrap();
        let tol = 1e-8 * (1.0 + rhs.norm());
        assert!(lhs.approx_eq(&rhs, tol), "{lhs} vs {rhs}");
        checked += 1;
    }
}

#[test]
fn frechet_flatten_matches_finite_differences() {
    use octode_core::calculus::{frechet_derivative, frechet_of_phrase};
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    for _ in 0..20 {
        let p = random_phrase(&mut rng, 3, 3, true);
        let z = random_cd(&mut rng, 3, 0.8);
        let sym = frechet_of_phrase(&p, &z);
        let fd = frechet_derivative(&|w| Ok(p.eval(w)), &z).unwrap();
        let rel = (sym.matrix() - fd.matrix()).norm() / sym.norm().max(1.0);
        assert!(rel < 1e-6, "phrase {p}: rel {rel}");
    }
}

#[test]
fn composition_restricted_to_complex_plane_matches_scalar() {
    // on C_M with real-coefficient phrases the whole calculus collapses to
    // ordinary complex arithmetic
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let m = {
        let mut v = CdNum::basis(3, 1).scale(0.6);
        v = &v + &CdNum::basis(3, 5).scale(0.8);
        v.scale(1.0 / v.norm())
    };
    for _ in 0..20 {
        // real-coefficient polynomial both as a phrase and as complex closure
        let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phrase = {
            let mut acc = Phrase::zero();
            for (k, c) in coeffs.iter().enumerate() {
                acc = &acc + &Phrase::var_pow(k as u32).scale(*c);
            }
            acc
        };
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let z = &CdNum::real(3, a) + &m.scale(b);
        let got = phrase.eval(&z);
        // complex oracle
        let mut re = 0.0;
        let mut im = 0.0;
        let mut pr = 1.0;
        let mut pi = 0.0;
        for c in &coeffs {
            re += c * pr;
            im += c * pi;
            let (nr, ni) = (pr * a - pi * b, pr * b + pi * a);
            pr = nr;
            pi = ni;
        }
        let want = &CdNum::real(3, re) + &m.scale(im);
        assert!(got.approx_eq(&want, 1e-10 * (1.0 + want.norm())));
    }
}
