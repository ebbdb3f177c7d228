mod common;

use fpplab::field::EdgeField;
use fpplab::lattice::{Vertex, Window};
use fpplab::rightmost::{b_distance, b_search, beta_estimate, is_rightmost, right_boundary};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dart_search_matches_enumeration(seed in any::<u64>(), radius in 1i64..=2, p in 0.5f64..=1.0, a in 0usize..25, b in 0usize..25) {
        let w = Window::new(2, radius, 0).unwrap();
        let region = w.region();
        let n = region.num_vertices();
        let (x, y) = (region.vertex(a % n), region.vertex(b % n));
        let field = EdgeField::generate(seed, 0, &w);
        let view = field.open_view(p);
        prop_assert_eq!(b_distance(&x, &y, &view).unwrap(), common::brute_rightmost_distance(&x, &y, &view));
    }

    #[test]
    fn searched_walks_are_rightmost(seed in any::<u64>(), p in 0.55f64..=1.0, a in 0usize..81, b in 0usize..81) {
        let w = Window::new(2, 4, 0).unwrap();
        let region = w.region();
        let (x, y) = (region.vertex(a), region.vertex(b));
        let field = EdgeField::generate(seed, 0, &w);
        let view = field.open_view(p);
        if let Some(s) = b_search(&x, &y, &view).unwrap() {
            prop_assert!(is_rightmost(&s.walk).unwrap());
            prop_assert_eq!(s.walk.start(), Some(&x));
            prop_assert_eq!(s.walk.end(), Some(&y));
            prop_assert!(s.walk.edges().all(|e| view.is_open(&e)));
            let profile = right_boundary(&s.walk).unwrap().with_open(&view);
            prop_assert_eq!(profile.open_count, Some(s.cost as usize));
            if !s.walk.is_empty() {
                prop_assert!(profile.boundary_edges.len() < 3 * s.walk.len());
            }
        }
    }

    #[test]
    fn almost_subadditive(seed in any::<u64>(), p in 0.6f64..=1.0, idx in proptest::collection::vec(0usize..81, 3)) {
        let w = Window::new(2, 4, 0).unwrap();
        let region = w.region();
        let field = EdgeField::generate(seed, 0, &w);
        let view = field.open_view(p);
        let v: Vec<Vertex> = idx.iter().map(|&i| region.vertex(i)).collect();
        let b = |s: &Vertex, t: &Vertex| b_distance(s, t, &view).unwrap();
        if let (Some(xy), Some(yz)) = (b(&v[0], &v[1]), b(&v[1], &v[2])) {
            prop_assert!(b(&v[0], &v[2]).unwrap() <= xy + yz + 4);
        }
    }
}

#[test]
fn full_lattice_bounds_and_determinism() {
    let w = Window::new(2, 12, 0).unwrap();
    let field = EdgeField::generate(0, 0, &w);
    let view = field.open_view(1.0);
    for n in 0..=12 {
        let b = b_distance(&Vertex::origin(2), &Vertex::new(vec![n, 0]), &view).unwrap().unwrap();
        assert!(b <= 3 * n as u64);
    }
    let est = beta_estimate(1.0, None, &Vertex::unit(2, 0), 6, 5, &Window::new(2, 6, 3).unwrap(), 1).unwrap();
    assert_eq!(est.stderr, 0.0);
    assert!(est.samples.iter().all(|&s| s == est.samples[0]));
}

#[test]
fn estimates_at_n_and_2n() {
    let e1 = Vertex::unit(2, 0);
    let a = beta_estimate(0.8, None, &e1, 10, 150, &Window::new(2, 10, 5).unwrap(), 2).unwrap();
    let b = beta_estimate(0.8, None, &e1, 20, 150, &Window::new(2, 20, 10).unwrap(), 2).unwrap();
    println!("{} +- {} vs {} +- {}", a.mean, a.stderr, b.mean, b.stderr);
    assert!(a.mean_se().agrees_with(&b.mean_se(), 3.0));
}
