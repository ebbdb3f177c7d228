mod common;

use fpplab::cluster::{regularize, ClusterAnalysis};
use fpplab::dist::DistributionSpec;
use fpplab::field::{EdgeField, FieldKey};
use fpplab::fpp::{mu_estimate_with, travel_time, truncation_sweep, MuRequest};
use fpplab::lattice::{Region, Vertex, Window};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn travel_time_matches_enumeration(seed in any::<u64>(), law in common::law_strategy(), a in 0usize..16, b in 0usize..16, square in any::<bool>()) {
        let region = if square { Region::new(vec![0, 0], vec![3, 3]).unwrap() } else { Window::new(2, 1, 0).unwrap().region() };
        let n = region.num_vertices();
        let (a, b) = (a % n, b % n);
        let field = EdgeField::generate_in(FieldKey::new(seed, 0), region.clone());
        let view = field.time_view(&law);
        let res = travel_time(&view, &region.vertex(a), &region.vertex(b)).unwrap();
        let oracle = common::exhaustive_travel_time(&region, &view.times(), a, b);
        prop_assert_eq!(res.time, oracle);
        match &res.geodesic {
            Some(g) => {
                let sum = g.edges().fold(0.0, |acc, e| acc + view.time_of(&e).unwrap());
                prop_assert_eq!(sum, res.time);
                prop_assert_eq!(g.start(), Some(&region.vertex(a)));
                prop_assert_eq!(g.end(), Some(&region.vertex(b)));
            }
            None => prop_assert!(res.time.is_infinite()),
        }
    }

    #[test]
    fn projected_points_satisfy_the_triangle_inequality(seed in any::<u64>(), pts in proptest::collection::vec((-8i64..=8, -8i64..=8), 3)) {
        let law = DistributionSpec::from_pairs("g", &[(1.0, 0.8), (f64::INFINITY, 0.2)]).unwrap();
        let w = Window::new(2, 8, 0).unwrap();
        let field = EdgeField::generate(seed, 0, &w);
        let view = field.time_view(&law);
        let analysis = ClusterAnalysis::analyze(&view.level_set(1.0));
        prop_assume!(analysis.giant().is_some());
        let p: Vec<Vertex> = pts.iter().map(|&(x, y)| regularize(&Vertex::new(vec![x, y]), &analysis).unwrap().projected).collect();
        let t = |a: &Vertex, b: &Vertex| travel_time(&view, a, b).unwrap().time;
        prop_assert!(t(&p[0], &p[2]) <= t(&p[0], &p[1]) + t(&p[1], &p[2]));
        prop_assert!(t(&p[0], &p[2]).is_finite());
    }

    #[test]
    fn constant_law_gives_l1_times(c in 0.25f64..8.0, x in -6i64..=6, y in -6i64..=6) {
        let law = DistributionSpec::dirac(c);
        let field = EdgeField::generate(1, 0, &Window::new(2, 6, 0).unwrap());
        let v = Vertex::new(vec![x, y]);
        let t = travel_time(&field.time_view(&law), &Vertex::origin(2), &v).unwrap();
        prop_assert!((t.time - c * v.l1() as f64).abs() <= 1e-12 * (1.0 + t.time));
        prop_assert_eq!(t.geodesic.unwrap().len() as i64, v.l1());
    }
}

fn request<'a>(law: &'a DistributionSpec, n: i64, replicas: usize, seed: u64) -> MuRequest<'a> {
    MuRequest::new(law, 1.0, Vertex::unit(2, 0), n, replicas, seed)
}

#[test]
fn means_are_ordered_with_the_laws() {
    let g = DistributionSpec::from_pairs("g", &[(1.0, 0.8), (2.0, 0.1), (f64::INFINITY, 0.1)]).unwrap();
    let h = DistributionSpec::from_pairs("h", &[(1.0, 0.8), (3.0, 0.1), (f64::INFINITY, 0.1)]).unwrap();
    assert!(g.is_dominated_by(&h));
    let (a, b) = (mu_estimate_with(&request(&g, 12, 40, 2)).unwrap(), mu_estimate_with(&request(&h, 12, 40, 2)).unwrap());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!(x <= y);
    }
    assert!(a.mean <= b.mean);
}

#[test]
fn dominating_cluster_gives_the_same_constant() {
    let g = DistributionSpec::from_pairs("g", &[(1.0, 0.8), (2.0, 0.1), (f64::INFINITY, 0.1)]).unwrap();
    let h = DistributionSpec::from_pairs("h", &[(1.0, 0.7), (2.0, 0.1), (f64::INFINITY, 0.2)]).unwrap();
    let native = mu_estimate_with(&request(&g, 20, 150, 3)).unwrap();
    let mut req = request(&g, 20, 150, 3);
    req.cluster_law = Some(&h);
    let borrowed = mu_estimate_with(&req).unwrap();
    assert!(native.mean_se().agrees_with(&borrowed.mean_se(), 3.0), "{} vs {}", native.mean, borrowed.mean);
}

#[test]
fn estimates_are_homogeneous_and_consistent_in_n() {
    let law = DistributionSpec::from_pairs("g", &[(1.0, 0.8), (f64::INFINITY, 0.2)]).unwrap();
    let e1 = mu_estimate_with(&request(&law, 20, 150, 4)).unwrap();
    assert!(e1.samples.iter().all(|t| t.is_finite()));
    let mut twice = MuRequest::new(&law, 1.0, Vertex::new(vec![2, 0]), 10, 150, 4);
    twice.max_enlargements = 2;
    let e2 = mu_estimate_with(&twice).unwrap();
    let scaled = fpplab::stats::MeanSe { mean: e2.mean / 2.0, stderr: e2.stderr / 2.0, count: e2.replicas };
    assert!(e1.mean_se().agrees_with(&scaled, 3.0), "{} vs {}", e1.mean, scaled.mean);
}

/// `T(0, nx)/n` carries an O(1/n) bias, so consecutive scales are compared
/// one-sidedly and through the extrapolations `2 mu(2n) - mu(n)`.
#[test]
fn estimates_converge_in_n() {
    let law = DistributionSpec::from_pairs("g", &[(1.0, 0.8), (f64::INFINITY, 0.2)]).unwrap();
    let est: Vec<_> = [20, 40, 80].iter().map(|&n| mu_estimate_with(&request(&law, n, 200, 4)).unwrap()).collect();
    for pair in est.windows(2) {
        assert!(pair[1].mean <= pair[0].mean + 3.0 * pair[0].mean_se().joint_stderr(&pair[1].mean_se()));
    }
    // Triangle bound on the stderr, valid whatever the correlation between scales.
    let extrapolate = |a: &fpplab::fpp::MuEstimate, b: &fpplab::fpp::MuEstimate| (2.0 * b.mean - a.mean, 2.0 * b.stderr + a.stderr);
    let (r1, s1) = extrapolate(&est[0], &est[1]);
    let (r2, s2) = extrapolate(&est[1], &est[2]);
    assert!((r1 - r2).abs() <= 3.0 * (s1 + s2), "{r1} +- {s1} vs {r2} +- {s2}");
}

#[test]
fn constant_law_has_exact_constant() {
    let law = DistributionSpec::dirac(1.0);
    for n in [1, 5, 9] {
        let est = mu_estimate_with(&request(&law, n, 8, 6)).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
    }
}

#[test]
fn truncations_above_the_support_coincide() {
    let law = DistributionSpec::from_pairs("g", &[(1.0, 0.6), (3.0, 0.4)]).unwrap();
    let e1 = Vertex::unit(2, 0);
    let window = Window::new(2, 8, 4).unwrap();
    let sweep = truncation_sweep(&law, 1.0, &[3.0, 5.0, 50.0], &e1, 8, 30, &window, 7).unwrap();
    for est in &sweep.per_level {
        assert_eq!(est.samples, sweep.base.samples);
    }
    assert_eq!(sweep.monotonicity_violations, 0);
}
