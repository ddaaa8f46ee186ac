mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use riesz_dml::{Dataset, Dictionary, DictionaryKind, Functional};

fn dictionaries() -> Vec<Dictionary> {
    vec![
        Dictionary::identity(3).unwrap(),
        Dictionary::polynomial(1, 4, false).unwrap(),
        Dictionary::polynomial(3, 2, false).unwrap(),
        Dictionary::polynomial(3, 3, true).unwrap(),
        Dictionary::fourier(2, 3).unwrap(),
        Dictionary::treatment_interacted(DictionaryKind::Polynomial { degree: 2, interactions: true }, 3, 0).unwrap(),
        Dictionary::treatment_interacted(DictionaryKind::Fourier { order: 1 }, 3, 2).unwrap(),
    ]
}

fn point(dict: &Dictionary, raw: &[f64]) -> Vec<f64> {
    raw.iter().copied().cycle().take(dict.input_dim()).collect()
}

// Directions and finite differences stay off the discrete treatment coordinate.
fn continuous(dict: &Dictionary, mut a: Vec<f64>) -> Vec<f64> {
    if let Some(t) = dict.treatment_index() {
        a[t] = 0.0;
    }
    a
}

fn coefficients(p: usize, raw: &[f64]) -> DVector<f64> {
    DVector::from_iterator(p, raw.iter().copied().cycle().take(p))
}

proptest! {
    #[test]
    fn jacobian_matches_central_differences(raw in prop::collection::vec(-1.0f64..1.0, 3)) {
        for dict in dictionaries() {
            let x = point(&dict, &raw);
            let jac = dict.gradient(&x).unwrap();
            prop_assert_eq!(jac.shape(), (dict.output_dim(), dict.input_dim()));
            let scale = 1.0 + jac.amax();
            for j in 0..dict.output_dim() {
                for k in 0..dict.input_dim() {
                    if dict.treatment_index() == Some(k) {
                        prop_assert_eq!(jac[(j, k)], 0.0);
                        continue;
                    }
                    let fd = common::central_difference(|z| dict.evaluate(z).unwrap()[j], &x, k, 1e-5);
                    prop_assert!((fd - jac[(j, k)]).abs() <= 1e-4 * scale, "{:?} j={} k={}: {} vs {}", dict.kind(), j, k, fd, jac[(j, k)]);
                }
            }
        }
    }

    #[test]
    fn design_matrix_stacks_evaluations(raw in prop::collection::vec(-1.0f64..1.0, 12)) {
        for dict in dictionaries() {
            let d = dict.input_dim();
            let rows_x: Vec<Vec<f64>> = (0..4).map(|i| point(&dict, &raw[3 * i..3 * i + 3])).collect();
            let data = Dataset::from_rows(vec![0.0; 4], &rows_x, None).unwrap();
            let rows = [3, 1, 1];
            let design = dict.design_matrix(&data, &rows).unwrap();
            prop_assert_eq!(design.shape(), (3, dict.output_dim()));
            for (r, &i) in rows.iter().enumerate() {
                let b = dict.evaluate(&rows_x[i]).unwrap();
                prop_assert_eq!(design.row(r).transpose(), b);
            }
            prop_assert_eq!(rows_x[0].len(), d);
        }
    }

    #[test]
    fn m_of_gamma_is_linear(raw in prop::collection::vec(-1.0f64..1.0, 6), a in -3.0f64..3.0, c in -3.0f64..3.0) {
        for dict in dictionaries() {
            let x = point(&dict, &raw);
            let p = dict.output_dim();
            let b1 = coefficients(p, &raw);
            let b2 = coefficients(p, &raw[2..]).map(|v| v * v - 0.3);
            let fs = [
                Functional::average_derivative(continuous(&dict, vec![0.5; dict.input_dim()])).unwrap(),
                Functional::location_shift(continuous(&dict, vec![0.1; dict.input_dim()])).unwrap(),
            ];
            for f in &fs {
                let lhs = f.m_of_gamma(&dict, &x, &(&b1 * a + &b2 * c)).unwrap();
                let rhs = a * f.m_of_gamma(&dict, &x, &b1).unwrap() + c * f.m_of_gamma(&dict, &x, &b2).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn average_derivative_is_the_directional_derivative_of_gamma(raw in prop::collection::vec(-1.0f64..1.0, 6)) {
        for dict in dictionaries() {
            let x = point(&dict, &raw);
            let p = dict.output_dim();
            let beta = coefficients(p, &raw[1..]);
            let a = continuous(&dict, point(&dict, &raw[3..]));
            if a.iter().all(|v| *v == 0.0) {
                continue;
            }
            let f = Functional::average_derivative(a.clone()).unwrap();
            let gamma = |t: f64| {
                let z: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi + t * ai).collect();
                dict.evaluate(&z).unwrap().dot(&beta)
            };
            let fd = common::central_difference(|t| gamma(t[0]), &[0.0], 0, 1e-5);
            let m = f.m_of_gamma(&dict, &x, &beta).unwrap();
            prop_assert!((fd - m).abs() <= 1e-4 * (1.0 + m.abs()), "{:?}: {} vs {}", dict.kind(), fd, m);
        }
    }

    #[test]
    fn policy_shift_is_a_difference_of_evaluations(raw in prop::collection::vec(-1.0f64..1.0, 12)) {
        let dict = Dictionary::polynomial(3, 2, true).unwrap();
        let s = raw[..9].to_vec();
        let c = raw[9..].to_vec();
        let f = Functional::policy_shift(s.clone(), c.clone()).unwrap();
        let x = [raw[2], raw[5], raw[7]];
        let moved: Vec<f64> = (0..3).map(|r| (0..3).map(|k| s[3 * r + k] * x[k]).sum::<f64>() + c[r]).collect();
        let expected = dict.evaluate(&moved).unwrap() - dict.evaluate(&x).unwrap();
        let m = f.m_of_basis(&dict, &x).unwrap();
        prop_assert!((m - expected).amax() <= 1e-12);
    }

    #[test]
    fn ate_contrasts_treated_and_control(raw in prop::collection::vec(-1.0f64..1.0, 3), treated in any::<bool>()) {
        let dict = Dictionary::treatment_interacted(DictionaryKind::Polynomial { degree: 2, interactions: false }, 3, 1).unwrap();
        let mut x = raw.clone();
        x[1] = f64::from(u8::from(treated));
        let mut x1 = x.clone();
        x1[1] = 1.0;
        let mut x0 = x.clone();
        x0[1] = 0.0;
        let expected = dict.evaluate(&x1).unwrap() - dict.evaluate(&x0).unwrap();
        prop_assert_eq!(Functional::ate(1).m_of_basis(&dict, &x).unwrap(), expected);
    }
}

#[test]
fn small_location_shift_approaches_average_derivative() {
    let a = [0.7, -0.4];
    let eps = 1e-4;
    let x = [0.3, -0.8];
    for dict in [Dictionary::polynomial(2, 3, true).unwrap(), Dictionary::fourier(2, 2).unwrap()] {
        let ad = Functional::average_derivative(a.to_vec()).unwrap().m_of_basis(&dict, &x).unwrap();
        let ps = Functional::location_shift(a.iter().map(|v| v * eps).collect())
            .unwrap()
            .m_of_basis(&dict, &x)
            .unwrap()
            / eps;
        assert!((&ad - ps).amax() <= 1e-2 * (1.0 + ad.amax()));
    }
}

#[test]
fn average_derivative_moment_of_a_quadratic() {
    let dict = Dictionary::polynomial(1, 2, false).unwrap();
    let data = Dataset::from_rows(vec![0.0, 0.0], &[vec![0.0], vec![2.0]], None).unwrap();
    let f = Functional::average_derivative(vec![1.0]).unwrap();
    assert_eq!(f.m_hat_vector(&dict, &data, &[0, 1]).unwrap().as_slice(), &[0.0, 1.0, 2.0]);
}

#[test]
fn identity_transport_has_zero_moments() {
    let dict = Dictionary::fourier(2, 2).unwrap();
    let rows_x = vec![vec![0.1, 0.2], vec![-0.5, 0.9], vec![0.3, -0.3]];
    let data = Dataset::from_rows(vec![0.0; 3], &rows_x, None).unwrap();
    let f = Functional::location_shift(vec![0.0, 0.0]).unwrap();
    assert!(f.m_hat_vector(&dict, &data, &[0, 1, 2]).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn ate_recovers_the_treatment_coefficient() {
    // b(d, z) = (1, z, d, d z); gamma = tau d
    let inner = DictionaryKind::Polynomial { degree: 1, interactions: false };
    let dict = Dictionary::treatment_interacted(inner, 2, 0).unwrap();
    let tau = 1.7;
    let x = [0.0, 0.5];
    let f = Functional::ate(0);
    let m = f.m_of_basis(&dict, &x).unwrap();
    assert_eq!(m.as_slice(), &[0.0, 0.0, 1.0, 0.5]);
    let beta = DVector::from_vec(vec![0.0, 0.0, tau, 0.0]);
    assert!((f.m_of_gamma(&dict, &x, &beta).unwrap() - tau).abs() < 1e-15);
}
