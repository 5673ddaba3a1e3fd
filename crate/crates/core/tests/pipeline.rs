use riesz_sphere::discrepancy::cap_discrepancy_with_centers;
use riesz_sphere::kernels::gap_from_energy;
use riesz_sphere::sphere::{format_config, parse_config, sample_uniform, separation};
use riesz_sphere::*;

#[test]
fn minimize_then_measure() {
    let opts = MinimizeOptions { max_iters: 400, init: Init::Spiral, ..MinimizeOptions::default() };
    let res: MinimizeResultF64 = minimize_energy(2, 1.0, 100, &opts).unwrap();
    let params = RieszParamsF64::new(2, 1.0).unwrap();
    assert_eq!(discrete_energy(&res.config, &params).unwrap(), res.energy);
    let stats = gap_from_energy(res.energy, 100, &params);
    assert!(stats.gap < 0.0);

    let random = sample_uniform::<f64>(2, 100, 0).unwrap();
    let sob_min = sobolev_discrepancy(&res.config, 1.0, 0.2, 1e-5).unwrap();
    let sob_rand = sobolev_discrepancy(&random, 1.0, 0.2, 1e-5).unwrap();
    assert!(sob_min.value < sob_rand.value);
    let cap_min = cap_discrepancy(&res.config, 500, 1).unwrap();
    let cap_rand = cap_discrepancy(&random, 500, 1).unwrap();
    assert!(cap_min.value < cap_rand.value);

    let report = discrepancy_report(&res.config, 1.0, 0.2, 1e-5, 500, 1).unwrap();
    assert_eq!(report.sobolev, sob_min);
    assert_eq!(report.cap_value, cap_min.value);
    assert!(separation(&res.config).unwrap().scaled >= 1.0);
}

#[test]
fn configuration_text_round_trip_keeps_energy() {
    let opts = MinimizeOptions { max_iters: 50, ..MinimizeOptions::default() };
    let res = minimize_energy(3, 0.0_f64, 40, &opts).unwrap();
    let text = format_config(&res.config);
    assert!(text.starts_with("# sphpts v1 d=3 n=40 s=log seed=0"));
    let back: ConfigurationF64 = parse_config(&text).unwrap();
    assert_eq!(back.coords(), res.config.coords());
    let params = RieszParams::from_exponent(3, Exponent::Log).unwrap();
    assert_eq!(discrete_energy(&back, &params).unwrap(), res.energy);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.sphpts");
    let c = sample_uniform::<f64>(4, 17, 3).unwrap();
    write_config(&c, &path).unwrap();
    let back: ConfigurationF64 = read_config(&path).unwrap();
    assert_eq!(back, c);
    assert!(read_config::<f64>(dir.path().join("missing")).is_err());
}

#[test]
fn explicit_centers_reproduce_budgeted_estimate() {
    let c = sample_uniform::<f64>(2, 30, 9).unwrap();
    let only_own = cap_discrepancy_with_centers(&c, &[]).unwrap();
    let with_budget = cap_discrepancy(&c, 100, 2).unwrap();
    assert!(with_budget.value >= only_own.value);
    assert_eq!(only_own.centers_tested, 60);
}

#[test]
fn spectral_table_csv() {
    let table = SpectralTableF64::with_radius(2, 1.0, 5, 0.3).unwrap();
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "ell,A,h,lambda");
    assert_eq!(lines.len(), 7);
    let a1: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    // A_{ℓ,d−1} = ω_d (d−1)/(2ℓ+d−1) on 𝕊²: 4π/3 at ℓ = 1.
    assert!((a1 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
}
