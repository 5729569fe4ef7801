mod common;

use common::{random_dictionary, rng, unit};
use dualcert::bpdn::{active_set, solve, DualProblemInstance, SolverOptions, DEFAULT_TAU};
use dualcert::certificate::{build_certificate, CertificatePolyhedron, DEFAULT_MAX_VERTICES};
use dualcert::data::Dictionary;
use dualcert::linalg::dist;
use num_rational::Rational64;
use rand::Rng;

fn certify<'d>(dict: &'d Dictionary, x: &[f64], lambda: f64) -> Option<CertificatePolyhedron<'d>> {
    let s = solve(&DualProblemInstance::new(dict, x, lambda).unwrap(), &SolverOptions::default()).unwrap();
    let a = active_set(&s, DEFAULT_TAU).unwrap();
    if a.is_empty() || a.near_degenerate {
        return None;
    }
    build_certificate(dict, &s, &a).ok()
}

#[test]
fn projection_matches_enumeration_oracle() {
    let mut r = rng(21);
    let mut checked = 0;
    while checked < 40 {
        let n = r.random_range(2..=3);
        let m = r.random_range(2..=4);
        let dict = random_dictionary(&mut r, n, m, 2);
        let x: Vec<f64> = unit(&mut r, n).into_iter().map(|v| 2.0 * v).collect();
        let Some(cert) = certify(&dict, &x, 2.0) else { continue };
        let y: Vec<f64> = unit(&mut r, n).into_iter().map(|v| v * r.random_range(0.0..3.0)).collect();
        let got = cert.project_onto(&y, 1e-9).unwrap();
        let ly: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let oracle = dualcert_testkit::project_certificate(&cert.equality_normals(), &cert.inequality_normals(), &ly).unwrap();
        let oracle: Vec<f64> = oracle.iter().map(|v| v / 2.0).collect();
        assert!(dist(&got, &oracle) <= 1e-5, "{got:?} vs {oracle:?}");
        checked += 1;
    }
}

#[test]
fn anchor_is_a_fixed_point() {
    let mut r = rng(22);
    let mut checked = 0;
    while checked < 20 {
        let dict = random_dictionary(&mut r, 4, 8, 2);
        let x: Vec<f64> = unit(&mut r, 4).into_iter().map(|v| 3.0 * v).collect();
        let Some(cert) = certify(&dict, &x, 2.0) else { continue };
        let p = cert.project_onto(&x, 1e-9).unwrap();
        assert!(dist(&p, &x) <= 1e-7);
        assert!(cert.contains(&x, 1e-7).unwrap());
        checked += 1;
    }
}

// Unit columns from Pythagorean triples keep every vertex rational.
#[test]
fn vertices_match_rational_enumeration() {
    let triples = [(3, 4, 5), (5, 12, 13), (8, 15, 17), (4, -3, 5), (-12, 5, 13)];
    let cols: Vec<Vec<f64>> = triples.iter().map(|&(a, b, c)| vec![a as f64 / c as f64, b as f64 / c as f64]).collect();
    let dict = Dictionary::from_columns(&cols, vec![0, 1, 0, 1, 0], 2).unwrap();
    let rat = |&(a, b, c): &(i64, i64, i64)| [Rational64::new(a, c), Rational64::new(b, c)];
    let mut r = rng(23);
    let mut checked = 0;
    for _ in 0..200 {
        let x: Vec<f64> = unit(&mut r, 2).into_iter().map(|v| 4.0 * v).collect();
        let Some(cert) = certify(&dict, &x, 1.0) else { continue };
        let m = dict.len();
        let eq: Vec<[Rational64; 2]> = cert
            .active()
            .entries
            .iter()
            .map(|e| {
                let v = rat(&triples[e.index]);
                [v[0] * e.sign.value() as i64, v[1] * e.sign.value() as i64]
            })
            .collect();
        let ineq: Vec<[Rational64; 2]> = (0..2 * m)
            .filter(|j| !cert.active().entries.iter().any(|e| e.signed_index(m) == *j))
            .map(|j| {
                let v = rat(&triples[j % m]);
                if j < m { v } else { [-v[0], -v[1]] }
            })
            .collect();
        let oracle = dualcert_testkit::rational_vertices_2d(&eq, &ineq);
        let mut got = cert.enumerate_face_vertices(DEFAULT_MAX_VERTICES).unwrap();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got.len(), oracle.len());
        for (g, o) in got.iter().zip(&oracle) {
            let o: Vec<f64> = o.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect();
            assert!(dist(g, &o) <= 1e-9, "{g:?} vs {o:?}");
        }
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn sampled_points_keep_the_active_set() {
    let mut r = rng(24);
    let mut instances = 0;
    let (mut agree, mut degenerate, mut total) = (0usize, 0usize, 0usize);
    while instances < 10 {
        let n = r.random_range(2..=6);
        let m = r.random_range(n..=10);
        let dict = random_dictionary(&mut r, n, m, 2);
        let x: Vec<f64> = unit(&mut r, n).into_iter().map(|v| 2.0 * v).collect();
        let Some(cert) = certify(&dict, &x, 2.0) else { continue };
        let verts = cert.enumerate_face_vertices(DEFAULT_MAX_VERTICES).unwrap();
        for _ in 0..100 {
            let xp = cert.sample_point(&verts, 1.0, &mut r);
            let s = solve(&DualProblemInstance::new(&dict, &xp, 2.0).unwrap(), &SolverOptions::default()).unwrap();
            let a = active_set(&s, DEFAULT_TAU).unwrap();
            total += 1;
            if a.near_degenerate {
                degenerate += 1;
            } else if a.entries == cert.active().entries {
                agree += 1;
            }
        }
        instances += 1;
    }
    assert_eq!(agree + degenerate, total);
    assert!((degenerate as f64) < 0.02 * total as f64);
}

#[test]
fn document_round_trips_through_json() {
    let dict = Dictionary::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1], 2).unwrap();
    let cert = certify(&dict, &[1.0, 0.1], 2.0).unwrap();
    let doc = cert.to_document(true);
    let text = serde_json::to_string(&doc).unwrap();
    let back: dualcert::certificate::CertificateDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc, back);
    assert_eq!(doc.equality_columns.len(), 1);
    assert_eq!(doc.equality_columns[0].index, 0);
}
