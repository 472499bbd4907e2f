//! Flat Kähler background oracles: the constant structures, the i del delbar
//! operator, density normalization, and positivity margins. Expected values
//! are hand-derived single-mode identities frozen before implementation.

use cyforms::algebra::hitchin::reconstruct_complex_structure;
use cyforms::background::{
    complex_hessian, hermitian_min_eig, i_del_delbar, normalize_density, positivity_margin,
    primitive_potential, standard_background, DensityReference,
};
use cyforms::calculus::field::FormField;
use cyforms::calculus::ops::exterior_derivative;
use num_complex::Complex64;
use rand::Rng;

#[test]
fn background_constants() {
    let bg2 = standard_background(2, &[8, 8, 8, 8]).unwrap();
    assert_eq!(bg2.omega0.degree, 2);
    assert!((bg2.cn_ratio - Complex64::new(4.0, 0.0)).norm() < 1e-13);
    assert!(exterior_derivative(&bg2.omega).norm_inf() < 1e-13);
    assert!(exterior_derivative(&bg2.omega0).norm_inf() < 1e-13);
    let mixed = bg2.omega0.wedge(&bg2.omega).unwrap();
    assert!(mixed.norm_inf() < 1e-14, "omega0 wedge omega must vanish by type");

    let bg3 = standard_background(3, &[8, 8, 8, 8, 8, 8]).unwrap();
    assert_eq!(bg3.omega0.degree, 3);
    assert!((bg3.cn_ratio - Complex64::new(0.0, -8.0)).norm() < 1e-12);
    let mixed3 = bg3.omega0.wedge(&bg3.omega).unwrap();
    assert!(mixed3.norm_inf() < 1e-13);

    // complex structure matrix: the quartic-invariant reconstruction from
    // Re(Omega0) must reproduce the stored j0
    let re_rho = bg3.omega0.value_at(0).real_part();
    let (j, _rho_hat) = reconstruct_complex_structure(&re_rho).unwrap();
    for r in 0..6 {
        for c in 0..6 {
            assert!(
                (j[r][c] - bg3.j0[r * 6 + c]).abs() < 1e-12,
                "j0 mismatch at ({r},{c})"
            );
        }
    }

    assert!(matches!(
        standard_background(1, &[8, 8]),
        Err(cyforms::Error::UnsupportedDimension(1))
    ));
    assert!(matches!(
        standard_background(4, &[8; 8]),
        Err(cyforms::Error::UnsupportedDimension(4))
    ));
}

#[test]
fn i_del_delbar_single_mode() {
    let bg = standard_background(2, &[8, 8, 8, 8]).unwrap();
    let phi = FormField::from_scalar_fn(&bg.grid, |x| x[0].cos());
    let out = i_del_delbar(&phi, &bg);
    assert_eq!(out.degree, 2);
    // expected: -(1/2) cos(x1) dx1 dy1, nothing else
    let pos = out.basis().position(0b11).unwrap();
    for idx in 0..bg.grid.len {
        let mut x = [0.0; 4];
        bg.grid.coords(idx, &mut x);
        let want = -0.5 * x[0].cos();
        let got = out.comp(pos)[idx];
        assert!((got.re - want).abs() < 1e-13 && got.im.abs() < 1e-13);
    }
    for c in 0..out.n_comps() {
        if c == pos {
            continue;
        }
        let sup = out.comp(c).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(sup < 1e-13, "stray component {c}");
    }
    assert!(exterior_derivative(&out).norm_inf() < 1e-13, "not closed");
    for c in 0..out.n_comps() {
        assert!(out.mean_value(c).norm() < 1e-14, "zero mode must vanish");
    }

    let constant = FormField::from_scalar_fn(&bg.grid, |_| 0.7);
    assert!(i_del_delbar(&constant, &bg).norm_inf() < 1e-14);
}

#[test]
fn i_del_delbar_is_derivative_of_primitive() {
    for (n, sizes) in [(2usize, vec![8usize; 4]), (3, vec![8; 6])] {
        let bg = standard_background(n, &sizes).unwrap();
        let mut rng = cyforms::rng::stream(23, n as u64);
        let phi = FormField::random_band_limited(&bg.grid, 0, 2, 0.5, &mut rng).real_cleaned();
        let alpha = primitive_potential(&phi, &bg);
        assert!(alpha.max_imag() < 1e-13, "primitive must be real");
        let lhs = exterior_derivative(&alpha);
        let rhs = i_del_delbar(&phi, &bg);
        assert!(
            lhs.sub(&rhs).norm_inf() < 1e-12,
            "d(primitive) disagrees with i del delbar"
        );
        // type purity: wedging with the holomorphic volume form kills it
        let mixed = rhs.wedge(&bg.omega0).unwrap();
        assert!(mixed.norm_inf() < 1e-12 * (1.0 + rhs.norm_inf()));
    }
}

#[test]
fn primitive_single_mode_closed_form() {
    let bg = standard_background(2, &[8, 8, 8, 8]).unwrap();
    let phi = FormField::from_scalar_fn(&bg.grid, |x| x[0].cos());
    let alpha = primitive_potential(&phi, &bg);
    // d(cos x1)/dz1 = -(1/2) sin x1, so alpha = -(1/2) sin(x1) dy1
    for idx in 0..bg.grid.len {
        let mut x = [0.0; 4];
        bg.grid.coords(idx, &mut x);
        let want = -0.5 * x[0].sin();
        assert!((alpha.comp(1)[idx].re - want).abs() < 1e-13);
        assert!(alpha.comp(0)[idx].norm() < 1e-13);
        assert!(alpha.comp(2)[idx].norm() < 1e-13);
        assert!(alpha.comp(3)[idx].norm() < 1e-13);
    }
}

#[test]
fn density_normalization() {
    let bg = standard_background(2, &[16, 8, 8, 8]).unwrap();

    let zero = FormField::from_scalar_fn(&bg.grid, |_| 0.0);
    let d = normalize_density(&zero, &bg, DensityReference::OmegaPower);
    assert!(d.f.norm_inf() < 1e-14);
    assert!((d.reference_ratio - 1.0).abs() < 1e-13);

    let constant = FormField::from_scalar_fn(&bg.grid, |_| 0.7);
    let d = normalize_density(&constant, &bg, DensityReference::OmegaPower);
    assert!(d.f.norm_inf() < 1e-12, "constants are absorbed");

    let raw = FormField::from_scalar_fn(&bg.grid, |x| 0.3 * x[0].cos());
    let d = normalize_density(&raw, &bg, DensityReference::OmegaPower);
    let mean_exp: f64 = (0..bg.grid.len)
        .map(|i| d.f.comp(0)[i].re.exp())
        .sum::<f64>()
        / bg.grid.len as f64;
    assert!(
        (mean_exp - 1.0).abs() < 1e-11,
        "integral of e^F against the volume must reproduce the torus volume, got mean {mean_exp}"
    );
    assert!((d.reference_ratio - 1.0).abs() < 1e-12);

    // the two reference volumes are proportional on the flat background
    let d2 = normalize_density(&raw, &bg, DensityReference::OmegaOmegaBar);
    assert!(d.f.sub(&d2.f).norm_inf() < 1e-12);

    // complex-valued top pairing (n=3) still normalizes
    let bg3 = standard_background(3, &[8; 6]).unwrap();
    let raw3 = FormField::from_scalar_fn(&bg3.grid, |x| 0.2 * (x[0] + x[3]).cos());
    let d3 = normalize_density(&raw3, &bg3, DensityReference::OmegaOmegaBar);
    assert!((d3.reference_ratio - 1.0).abs() < 1e-11);
}

#[test]
fn positivity_margins() {
    let bg = standard_background(2, &[8, 8, 8, 8]).unwrap();
    assert!((positivity_margin(&bg.omega, &bg) - 1.0).abs() < 1e-13);

    // omega - 2 dx1 dy1 has coefficient matrix diag(-1, 1)
    let mut bad = bg.omega.clone();
    let pos = bad.basis().position(0b11).unwrap();
    for v in bad.comp_mut(pos) {
        *v -= Complex64::new(2.0, 0.0);
    }
    assert!((positivity_margin(&bad, &bg) - (-1.0)).abs() < 1e-13);

    // omega + i del delbar(eps cos x1): eigenvalues {1, 1 - (eps/2) cos x1}
    let eps = 0.01;
    let phi = FormField::from_scalar_fn(&bg.grid, |x| eps * x[0].cos());
    let w = bg.omega.add(&i_del_delbar(&phi, &bg));
    assert!((positivity_margin(&w, &bg) - (1.0 - eps / 2.0)).abs() < 1e-13);

    // convex combinations of positive forms stay positive
    let mut rng = cyforms::rng::stream(23, 5);
    let phi1 = FormField::random_band_limited(&bg.grid, 0, 2, 0.05, &mut rng).real_cleaned();
    let phi2 = FormField::random_band_limited(&bg.grid, 0, 2, 0.05, &mut rng).real_cleaned();
    let w1 = bg.omega.add(&i_del_delbar(&phi1, &bg));
    let w2 = bg.omega.add(&i_del_delbar(&phi2, &bg));
    assert!(positivity_margin(&w1, &bg) > 0.0);
    assert!(positivity_margin(&w2, &bg) > 0.0);
    for t in [0.25, 0.5, 0.75] {
        let mix = w1.scaled(Complex64::new(t, 0.0)).add(&w2.scaled(Complex64::new(1.0 - t, 0.0)));
        assert!(positivity_margin(&mix, &bg) > 0.0, "segment left the positive cone at t={t}");
    }
}

#[test]
fn hermitian_min_eig_matches_dense_solver() {
    let mut rng = cyforms::rng::stream(23, 6);
    for n in [1usize, 2, 3] {
        for _ in 0..200 {
            let mut h = vec![Complex64::ZERO; n * n];
            for j in 0..n {
                h[j * n + j] = Complex64::new(rng.gen_range(-2.0..2.0), 0.0);
                for k in (j + 1)..n {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    h[j * n + k] = v;
                    h[k * n + j] = v.conj();
                }
            }
            // real embedding [[Re, -Im], [Im, Re]] doubles each eigenvalue
            let mut emb = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
            for j in 0..n {
                for k in 0..n {
                    emb[(j, k)] = h[j * n + k].re;
                    emb[(j, k + n)] = -h[j * n + k].im;
                    emb[(j + n, k)] = h[j * n + k].im;
                    emb[(j + n, k + n)] = h[j * n + k].re;
                }
            }
            let eigs = nalgebra::SymmetricEigen::new(emb).eigenvalues;
            let want = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            let got = hermitian_min_eig(&h, n);
            assert!(
                (got - want).abs() < 1e-10,
                "n={n}: closed-form {got} vs dense {want}"
            );
        }
    }
}

#[test]
fn complex_hessian_single_mode() {
    let bg = standard_background(2, &[8, 8, 8, 8]).unwrap();
    let eps = 0.3;
    let phi = FormField::from_scalar_fn(&bg.grid, |x| eps * (x[0] + x[3]).cos());
    let h = complex_hessian(&phi);
    assert_eq!(h.n, 2);
    for idx in 0..bg.grid.len {
        let mut x = [0.0; 4];
        bg.grid.coords(idx, &mut x);
        let c = eps * (x[0] + x[3]).cos();
        let want = [
            Complex64::new(-c / 4.0, 0.0),
            Complex64::new(0.0, -c / 4.0),
            Complex64::new(0.0, c / 4.0),
            Complex64::new(-c / 4.0, 0.0),
        ];
        for e in 0..4 {
            assert!(
                (h.entry(idx, e / 2, e % 2) - want[e]).norm() < 1e-13,
                "entry {e} at idx {idx}"
            );
        }
    }
}

#[test]
fn complex_hessian_is_hermitian() {
    let bg = standard_background(3, &[8; 6]).unwrap();
    let mut rng = cyforms::rng::stream(23, 7);
    let phi = FormField::random_band_limited(&bg.grid, 0, 2, 0.5, &mut rng).real_cleaned();
    let h = complex_hessian(&phi);
    let mut worst = 0.0f64;
    for idx in 0..bg.grid.len {
        for j in 0..3 {
            for k in 0..3 {
                worst = worst.max((h.entry(idx, j, k) - h.entry(idx, k, j).conj()).norm());
            }
        }
    }
    assert!(worst < 1e-13, "hermiticity drift {worst:.3e}");
}
