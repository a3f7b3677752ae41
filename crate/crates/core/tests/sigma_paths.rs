mod common;

use hypermu::blowup::{boundary_mu2_star, sigma_classify, CLASSIFY_TOL};
use hypermu::verify::{limit_along_path, PathSpec, Schedule};

#[test]
fn classification_matches_path_limits() {
    let mut failures = Vec::new();
    for i in 0..100 {
        let case = common::random_case(2024, i);
        let class = sigma_classify(&case.k, CLASSIFY_TOL).unwrap();
        assert_eq!(class.is_sigma(), case.expect_sigma, "case {i} ({}): {class:?}", case.label);
        let path = PathSpec::toward(&case.k).unwrap();
        let rep = limit_along_path(&path, Schedule::default()).unwrap();
        let at_one = (rep.limit - 1.0).abs() <= 1e-3;
        if at_one != class.is_sigma() {
            failures.push(format!("case {i} ({}): limit {} err {:e}", case.label, rep.limit, rep.error_estimate));
        }
        if let Ok(star) = boundary_mu2_star(&case.k) {
            if !class.is_sigma() && (rep.limit - star).abs() > 1e-6 {
                failures.push(format!("case {i} ({}): limit {} but extension {star}", case.label, rep.limit));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn named_paths_reach_their_limits() {
    let s1 = limit_along_path(&PathSpec::named("sigma1", 1.0).unwrap(), Schedule::default()).unwrap();
    assert!((s1.limit - 1.0).abs() <= 1e-4, "{s1:?}");
    let skew = limit_along_path(&PathSpec::named("skew:1:3", 1.0).unwrap(), Schedule::default()).unwrap();
    assert!((skew.limit - 0.75).abs() <= 1e-4, "{skew:?}");
    for name in ["sigma2", "sigma4"] {
        let r = limit_along_path(&PathSpec::named(name, 1.0).unwrap(), Schedule::default()).unwrap();
        assert!((r.limit - 1.0).abs() <= 1e-3, "{name}: {r:?}");
    }
    let inf = PathSpec::named("iinf-check", 1.0).unwrap();
    assert!(inf.eval((-20f64).exp2()).unwrap() <= 1e-6);
}
