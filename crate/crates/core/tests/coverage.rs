use stratdesign::pipeline::build_regions;
use stratdesign::sim::{four_strata_example, generate_observational, true_sigmas};
use stratdesign::DesignConfig;

/// Fraction of simulated studies whose region contains the true variances, per
/// stratum.
fn coverage(reps: u64, bootstrap_reps: usize) -> Vec<f64> {
    let mut hits = vec![0usize; 4];
    for rep in 0..reps {
        let spec = four_strata_example(1.2, 1000 + rep);
        let truth = true_sigmas(&spec);
        let data = generate_observational(&spec).unwrap();
        let config = DesignConfig { gamma: 1.2, alpha: 0.1, bootstrap_reps, seed: rep, ..Default::default() };
        for ((region, t), h) in build_regions(&data, &config).unwrap().iter().zip(&truth).zip(&mut hits) {
            if region.region.contains([t.control, t.treated]) {
                *h += 1;
            }
        }
    }
    hits.iter().map(|h| *h as f64 / reps as f64).collect()
}

#[test]
fn regions_cover_true_variances() {
    let start = std::time::Instant::now();
    let cov = coverage(200, 200);
    eprintln!("coverage {cov:?} in {:?}", start.elapsed());
    assert!(cov.iter().all(|c| *c >= 0.85), "{cov:?}");
}
