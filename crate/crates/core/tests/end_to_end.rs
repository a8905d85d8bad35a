use trifree::defect::{estimate_zw, HighDensityConfig};
use trifree::glauber_low::{LowDensityConfig, LowSampler};
use trifree::oracle::{tv_to_histogram, Histogram, Oracle};
use trifree::pipeline::{count_high, count_low, sample_high, ImbalanceTable, PipelineConfig};
use trifree::rng::Streams;
use trifree::{Partition, Rational};

#[test]
fn low_sampler_is_close_to_exact_law_on_four_vertices() {
    let (n, p, eps) = (4, 0.3, 0.05);
    let sampler = LowSampler::new(LowDensityConfig::new(n, p)).unwrap();
    let streams = Streams::new(3);
    let mut h = Histogram::new();
    for i in 0..3000 {
        let g = sampler.sample(eps, &mut streams.rng("it", i, "chain"));
        assert!(g.is_triangle_free());
        h.add(g.edge_mask());
    }
    let exact = Oracle::default().exact_mu_distribution(n, &p).unwrap();
    // 3000 exact draws over 41 states land near 0.04
    let tv = tv_to_histogram(&exact, &h);
    assert!(tv < 0.08, "tv = {tv}");
}

#[test]
fn oracle_agrees_across_scalars() {
    let o = Oracle::default();
    let q = o.exact_mu(5, &Rational::new(1.into(), 5.into())).unwrap();
    assert_eq!(q.to_string(), "9071104/9765625");
    let f = o.exact_mu(5, &0.2f64).unwrap();
    assert!((f - 0.92888104960).abs() < 1e-12);
    let s = o.exact_mu(5, &0.2f32).unwrap();
    assert!((s as f64 - f).abs() < 1e-5);
}

#[test]
fn low_counting_lands_near_exact() {
    let cfg = LowDensityConfig::new(5, 0.2);
    let est = count_low(&cfg, 0.1, 0.25, &mut Streams::new(5).rng("it", 0, "count")).unwrap();
    let truth = Oracle::default().exact_mu(5, &0.2f64).unwrap().ln();
    assert!((est.log_value - truth).abs() < 0.1, "{} vs {truth}", est.log_value);
}

#[test]
fn weak_normalizer_estimate_brackets_exact_value() {
    let part = Partition::canonical(8, 4);
    let mut cfg = HighDensityConfig::new(8, 0.3);
    cfg.cap = Some(1);
    let rep = estimate_zw(&part, &cfg, 0.1, 0.1, &mut Streams::new(8).rng("it", 0, "zw")).unwrap();
    let exact = Oracle::default()
        .exact_nu(&part, &0.3f64, 1)
        .unwrap()
        .1
        .ln();
    assert_eq!(rep.cap, 1);
    assert!((rep.estimate.log_value - exact).abs() < 0.1, "{} vs {exact}", rep.estimate.log_value);
}

#[test]
fn high_counting_matches_brute_force_with_cap_one() {
    let mut cfg = PipelineConfig::new(8, 0.3);
    cfg.defect.cap = Some(1);
    cfg.max_imbalance = Some(0);
    let c = count_high(&cfg, 0.1, 0.1, &mut Streams::new(9).rng("it", 0, "count")).unwrap();
    let exact = Oracle::default().exact_weak_normalizer(8, 1, 0).unwrap().eval(&0.3f64).ln();
    assert!((c.log_z_weak.log_value - exact).abs() < 0.1, "{} vs {exact}", c.log_z_weak.log_value);
}

#[test]
fn pipeline_samples_are_triangle_free_and_reproducible() {
    let cfg = PipelineConfig::new(30, 0.9);
    let streams = Streams::new(11);
    let table = ImbalanceTable::build(&cfg, 0.1, 0.1, &mut streams.rng("it", 0, "table")).unwrap();
    let draw = |i| sample_high(&cfg, &table, 0.1, &mut streams.rng("it", i, "sample")).unwrap();
    for i in 0..20 {
        let s = draw(i);
        assert!(s.graph.is_triangle_free());
        s.check().unwrap();
        assert_eq!(s.graph, draw(i).graph);
    }
}
