//! Grid-level calculus oracles. Expected values are hand-derived closed forms
//! or independent brute-force sums, frozen before the spectral machinery was
//! written. Axis order is interleaved (x1, y1, x2, y2, ..).

use cyforms::algebra::form::AlgebraicForm;
use cyforms::algebra::symplectic::SymplecticFrame;
use cyforms::calculus::field::{Domain, FormField};
use cyforms::calculus::grid::TorusGrid;
use cyforms::calculus::io::{read_cyff, write_cyff, write_csv};
use cyforms::calculus::modesolve::solve_ddsymp_potential;
use cyforms::calculus::offgrid::{evaluate_offgrid, FieldSampler, SparseModeSampler};
use cyforms::calculus::ops::{
    dd_symp, exterior_derivative, star_pointwise, symplectic_codifferential,
};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

fn grid4(s: usize) -> std::sync::Arc<TorusGrid> {
    TorusGrid::new(&[s, s, s, s]).unwrap()
}

fn grid6(s: usize) -> std::sync::Arc<TorusGrid> {
    TorusGrid::new(&[s; 6]).unwrap()
}

// ------------------------------------------------------------------- grid

#[test]
fn wavenumber_layout() {
    let g = grid4(8);
    let raw: Vec<f64> = (0..8).map(|j| g.wavenumber(0, j)).collect();
    assert_eq!(raw, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
    let masked: Vec<f64> = (0..8).map(|j| g.derivative_wavenumber(0, j)).collect();
    assert_eq!(masked, vec![0.0, 1.0, 2.0, 3.0, 0.0, -3.0, -2.0, -1.0]);
}

#[test]
fn grid_validation() {
    assert!(TorusGrid::new(&[16, 16, 16, 16]).is_ok());
    assert!(TorusGrid::new(&[8; 6]).is_ok());
    // odd size
    assert!(matches!(TorusGrid::new(&[9, 9, 9, 9]), Err(cyforms::Error::Validation(_))));
    // too coarse
    assert!(matches!(TorusGrid::new(&[6, 6, 6, 6]), Err(cyforms::Error::Validation(_))));
    // dimension outside the supported complex dimensions
    assert!(matches!(
        TorusGrid::new(&[8, 8]),
        Err(cyforms::Error::UnsupportedDimension(_))
    ));
    assert!(matches!(
        TorusGrid::new(&[8; 8]),
        Err(cyforms::Error::UnsupportedDimension(_))
    ));
}

// -------------------------------------------------------------------- fft

#[test]
fn spectral_transform_is_unitary() {
    let g = grid4(8);
    let f = FormField::from_scalar_fn(&g, |x| x[0].cos() + 0.3 * (2.0 * x[3]).sin());
    let spec = f.to_spectral();
    // unitary forward: a cosine of unit amplitude puts sqrt(N)/2 on each of
    // the +/- modes
    let sqrt_n = (g.len as f64).sqrt();
    let idx_plus = g.flat_index(&[1, 0, 0, 0]);
    assert!((spec.comp(0)[idx_plus] - Complex64::new(0.5 * sqrt_n, 0.0)).norm() < 1e-12 * sqrt_n);
    // Parseval
    let sum_phys: f64 = f.comp(0).iter().map(|c| c.norm_sqr()).sum();
    let sum_spec: f64 = spec.comp(0).iter().map(|c| c.norm_sqr()).sum();
    assert!((sum_phys - sum_spec).abs() < 1e-12 * sum_phys);
    // roundtrip
    let back = spec.to_physical();
    assert!(f.sub(&back).norm_inf() < 1e-13);
    assert!(back.max_imag() < 1e-13);
}

// ------------------------------------------------------------- derivative

#[test]
fn derivative_closed_forms() {
    let g = grid4(16);
    // d cos(x1) = -sin(x1) dx1
    let f = FormField::from_scalar_fn(&g, |x| x[0].cos());
    let df = exterior_derivative(&f);
    let mut want = FormField::zeros(&g, 1, Domain::Physical);
    let s = FormField::from_scalar_fn(&g, |x| -x[0].sin());
    want.comp_mut(0).copy_from_slice(s.comp(0));
    assert!(df.sub(&want).norm_inf() < 1e-13, "d cos(x1)");

    // d sin(x1 + y2) = cos(x1 + y2)(dx1 + dy2)
    let f = FormField::from_scalar_fn(&g, |x| (x[0] + x[3]).sin());
    let df = exterior_derivative(&f);
    let c = FormField::from_scalar_fn(&g, |x| (x[0] + x[3]).cos());
    let mut want = FormField::zeros(&g, 1, Domain::Physical);
    want.comp_mut(0).copy_from_slice(c.comp(0));
    want.comp_mut(3).copy_from_slice(c.comp(0));
    assert!(df.sub(&want).norm_inf() < 1e-13, "d sin(x1 + y2)");
    assert!(df.max_imag() < 1e-13, "derivative of a real field stays real");
}

#[test]
fn derivative_kills_nyquist() {
    let g = grid4(8);
    let f = FormField::from_scalar_fn(&g, |x| (4.0 * x[0]).cos());
    let df = exterior_derivative(&f);
    assert!(df.norm_inf() < 1e-13, "pure Nyquist content must differentiate to zero");
}

#[test]
fn d_squared_vanishes() {
    let mut rng = cyforms::rng::stream(11, 1);
    let g = grid4(8);
    for degree in 0..=2usize {
        let f = FormField::random_band_limited(&g, degree, 2, 1.0, &mut rng);
        let ddf = exterior_derivative(&exterior_derivative(&f));
        assert!(ddf.norm_inf() < 1e-12, "d^2 on degree {degree}: {:.3e}", ddf.norm_inf());
    }
    let g = grid6(8);
    let f = FormField::random_band_limited(&g, 2, 1, 1.0, &mut rng);
    let ddf = exterior_derivative(&exterior_derivative(&f));
    assert!(ddf.norm_inf() < 1e-12, "d^2 on m=6: {:.3e}", ddf.norm_inf());
}

// ----------------------------------------------------------- codifferential

#[test]
fn codifferential_closed_form() {
    // alpha = cos(y1) dx1 on T^4. star(dx1) = -dx1^dx2^dy2, so
    // d star alpha = -sin(y1) vol and d^s alpha = star of that = -sin(y1).
    let g = grid4(16);
    let frame = SymplecticFrame::standard(4);
    let mut alpha = FormField::zeros(&g, 1, Domain::Physical);
    let c = FormField::from_scalar_fn(&g, |x| x[1].cos());
    alpha.comp_mut(0).copy_from_slice(c.comp(0));
    let ds = symplectic_codifferential(&alpha, &frame);
    let want = FormField::from_scalar_fn(&g, |x| -x[1].sin());
    assert_eq!(ds.degree, 0);
    assert!(ds.sub(&want).norm_inf() < 1e-13, "{:.3e}", ds.sub(&want).norm_inf());
}

#[test]
fn codifferential_squares_to_zero_and_anticommutes() {
    let mut rng = cyforms::rng::stream(11, 2);
    let g = grid4(8);
    let frame = SymplecticFrame::standard(4);
    for degree in 1..=3usize {
        let f = FormField::random_band_limited(&g, degree, 2, 1.0, &mut rng);
        let scale = 1.0 + f.norm_inf();
        if degree >= 2 {
            let dsds = symplectic_codifferential(&symplectic_codifferential(&f, &frame), &frame);
            assert!(dsds.norm_inf() < 1e-12 * scale, "(d^s)^2 degree {degree}");
        }
        if degree <= 3 {
            let a = dd_symp(&f, &frame);
            let b = exterior_derivative(&symplectic_codifferential(&f, &frame));
            assert!(a.sub(&b).norm_inf() < 1e-13 * scale);
            if degree < 4 {
                let dsd = symplectic_codifferential(&exterior_derivative(&f), &frame);
                let anti = a.add(&dsd);
                assert!(
                    anti.norm_inf() < 1e-12 * scale,
                    "dd^s + d^sd degree {degree}: {:.3e}",
                    anti.norm_inf()
                );
            }
        }
    }
    let g = grid6(8);
    let frame = SymplecticFrame::standard(6);
    for degree in [2usize, 3] {
        let f = FormField::random_band_limited(&g, degree, 1, 1.0, &mut rng);
        let scale = 1.0 + f.norm_inf();
        let anti = dd_symp(&f, &frame)
            .add(&symplectic_codifferential(&exterior_derivative(&f), &frame));
        assert!(anti.norm_inf() < 1e-12 * scale, "m=6 anticommutation degree {degree}");
    }
}

// --------------------------------------------------- pointwise consistency

#[test]
fn star_field_matches_pointwise_algebra() {
    let mut rng = cyforms::rng::stream(11, 3);
    let g = grid4(8);
    let frame = SymplecticFrame::standard(4);
    let f = FormField::random_band_limited(&g, 2, 2, 1.0, &mut rng);
    let sf = star_pointwise(&f, &frame);
    for idx in [0usize, 17, 4095, 2048] {
        let want = frame.star(&f.value_at(idx));
        let got = sf.value_at(idx);
        assert!(got.sub(&want).norm_inf() < 1e-14);
    }
}

#[test]
fn wedge_field_matches_pointwise_algebra() {
    let mut rng = cyforms::rng::stream(11, 4);
    let g = grid4(8);
    let a = FormField::random_band_limited(&g, 1, 2, 1.0, &mut rng);
    let b = FormField::random_band_limited(&g, 2, 2, 1.0, &mut rng);
    let w = a.wedge(&b).unwrap();
    for idx in [0usize, 1, 100, 4000] {
        let want = cyforms::algebra::form::wedge(&a.value_at(idx), &b.value_at(idx)).unwrap();
        assert!(w.value_at(idx).sub(&want).norm_inf() < 1e-14);
    }
}

// -------------------------------------------------------------- integrals

#[test]
fn top_form_integral() {
    let g = grid4(8);
    let mut vol = FormField::zeros(&g, 4, Domain::Physical);
    let c = FormField::from_scalar_fn(&g, |x| x[0].cos() * x[0].cos());
    vol.comp_mut(0).copy_from_slice(c.comp(0));
    let want = 0.5 * TAU.powi(4);
    assert!((vol.integrate_top() - want).abs() < 1e-12 * want);
}

// ------------------------------------------------------- potential solves

#[test]
fn dd_symp_potential_roundtrip_m4() {
    let mut rng = cyforms::rng::stream(11, 5);
    let g = grid4(8);
    let frame = SymplecticFrame::standard(4);
    for _ in 0..5 {
        let psi0 = FormField::random_band_limited(&g, 2, 2, 1.0, &mut rng);
        let eta = dd_symp(&psi0, &frame);
        let scale = eta.norm_inf().max(1.0);
        let psi = solve_ddsymp_potential(&eta, &frame, 1e-10).expect("exact image member");
        let res = dd_symp(&psi, &frame).sub(&eta).norm_inf();
        assert!(res < 1e-10 * scale, "reproduction residual {res:.3e}");
        assert!(psi.max_imag() < 1e-12, "potential of a real form is real");
    }
}

#[test]
fn dd_symp_potential_roundtrip_m6() {
    let mut rng = cyforms::rng::stream(11, 6);
    let g = grid6(8);
    let frame = SymplecticFrame::standard(6);
    for _ in 0..2 {
        let psi0 = FormField::random_band_limited(&g, 3, 1, 1.0, &mut rng);
        let eta = dd_symp(&psi0, &frame);
        let scale = eta.norm_inf().max(1.0);
        let psi = solve_ddsymp_potential(&eta, &frame, 1e-10).expect("exact image member");
        let res = dd_symp(&psi, &frame).sub(&eta).norm_inf();
        assert!(res < 1e-10 * scale, "reproduction residual {res:.3e}");
    }
}

#[test]
fn dd_symp_potential_rejects_harmonic_part() {
    let mut rng = cyforms::rng::stream(11, 7);
    let g = grid4(8);
    let frame = SymplecticFrame::standard(4);
    let psi0 = FormField::random_band_limited(&g, 2, 2, 1.0, &mut rng);
    let mut shift = AlgebraicForm::zero(4, 2);
    shift.scalars[0] = Complex64::new(0.05, 0.0);
    let eta = dd_symp(&psi0, &frame).add(&FormField::constant(&g, &shift));
    assert!(matches!(
        solve_ddsymp_potential(&eta, &frame, 1e-10),
        Err(cyforms::Error::NotCohomologous { .. })
    ));
}

#[test]
fn dd_symp_potential_rejects_off_image_content() {
    let mut rng = cyforms::rng::stream(11, 8);
    let g = grid4(8);
    let frame = SymplecticFrame::standard(4);
    let raw = FormField::random_band_limited(&g, 2, 2, 1.0, &mut rng);
    // remove the harmonic part so the failure is off-image, not cohomological
    let mut mean = AlgebraicForm::zero(4, 2);
    for c in 0..raw.n_comps() {
        mean.scalars[c] = raw.mean_value(c);
    }
    let eta = raw.sub(&FormField::constant(&g, &mean));
    assert!(matches!(
        solve_ddsymp_potential(&eta, &frame, 1e-10),
        Err(cyforms::Error::NotInImage { .. })
    ));
}

// ---------------------------------------------------------------- offgrid

#[test]
fn sparse_sampler_is_spectrally_exact() {
    let g = grid4(8);
    let f = FormField::from_scalar_fn(&g, |x| 0.3 * (x[0] + x[3]).cos() - 0.2 * x[2].sin());
    let sampler = SparseModeSampler::from_field(&f, 1e-13);
    assert!(sampler.mode_count() <= 4, "got {} modes", sampler.mode_count());
    let mut rng = cyforms::rng::stream(11, 9);
    let m = 4;
    let mut val = [0.0f64; 1];
    let mut d1 = [0.0f64; 4];
    let mut d2 = [0.0f64; 16];
    for _ in 0..50 {
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
        let fx = 0.3 * (x[0] + x[3]).cos() - 0.2 * x[2].sin();
        sampler.eval_jet(&x, &mut val, &mut d1, Some(&mut d2));
        assert!((val[0] - fx).abs() < 1e-12);
        let gx = [
            -0.3 * (x[0] + x[3]).sin(),
            0.0,
            -0.2 * x[2].cos(),
            -0.3 * (x[0] + x[3]).sin(),
        ];
        for a in 0..m {
            assert!((d1[a] - gx[a]).abs() < 1e-12, "first derivative axis {a}");
        }
        // a couple of second derivatives
        let dxx = -0.3 * (x[0] + x[3]).cos();
        assert!((d2[0] - dxx).abs() < 1e-12, "d2 x1 x1");
        assert!((d2[3] - dxx).abs() < 1e-12, "d2 x1 y2");
        let d22 = 0.2 * x[2].sin();
        assert!((d2[2 * m + 2] - d22).abs() < 1e-12, "d2 x2 x2");
    }
}

#[test]
fn upsampled_interpolation_accuracy() {
    let g = grid4(16);
    let f = FormField::from_scalar_fn(&g, |x| (x[0] + x[3]).cos());
    let mut rng = cyforms::rng::stream(11, 10);
    let pts: Vec<f64> = (0..40 * 4).map(|_| rng.gen_range(0.0..TAU)).collect();
    let vals = evaluate_offgrid(&f, &pts);
    for p in 0..40 {
        let x = &pts[p * 4..(p + 1) * 4];
        let want = (x[0] + x[3]).cos();
        assert!(
            (vals[p] - want).abs() < 1e-7,
            "interp error {:.3e} at point {p}",
            (vals[p] - want).abs()
        );
    }
}

#[test]
fn upsampled_matches_sparse_on_band_limited_fields() {
    let mut rng = cyforms::rng::stream(11, 11);
    let g = grid4(16);
    let f = FormField::random_band_limited(&g, 1, 1, 1.0, &mut rng);
    let sparse = SparseModeSampler::from_field(&f, 1e-13);
    let pts: Vec<f64> = (0..20 * 4).map(|_| rng.gen_range(0.0..TAU)).collect();
    let vals = evaluate_offgrid(&f, &pts);
    let mut out = [0.0f64; 4];
    for p in 0..20 {
        sparse.eval(&pts[p * 4..(p + 1) * 4], &mut out);
        for c in 0..4 {
            let d = (vals[p * 4 + c] - out[c]).abs();
            assert!(d < 1e-7, "offgrid disagreement {d:.3e}");
        }
    }
}

// --------------------------------------------------------------------- io

#[test]
fn cyff_roundtrip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.cyff");
    let mut rng = cyforms::rng::stream(11, 12);
    let g = grid4(8);
    let f = FormField::random_band_limited(&g, 1, 2, 1.0, &mut rng).real_cleaned();
    write_cyff(&path, &f).unwrap();
    let back = read_cyff(&path).unwrap();
    assert_eq!(back.degree, 1);
    assert_eq!(back.grid.sizes, vec![8, 8, 8, 8]);
    assert_eq!(f.sub(&back).norm_inf(), 0.0, "byte-exact roundtrip");

    // corrupt magic
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_cyff(&path), Err(cyforms::Error::Parse(_))));

    // truncated payload
    write_cyff(&path, &f).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(read_cyff(&path), Err(cyforms::Error::Parse(_))));
}

#[test]
fn csv_dump_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.csv");
    let g = grid4(8);
    let f = FormField::from_scalar_fn(&g, |x| x[0].cos());
    write_csv(&path, &f).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), g.len + 1);
    assert!(lines[0].starts_with("x1,y1,x2,y2"), "header was {}", lines[0]);
}
