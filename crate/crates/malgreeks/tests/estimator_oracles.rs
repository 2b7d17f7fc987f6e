//! Estimator-level oracles: distributional checks on the driving noise,
//! duality and zero-expectation identities, closed-form reductions, and
//! cross-method agreement at moderate Monte Carlo scale. All runs use
//! frozen seeds; bands are 3-4 sigma as stated per check.

use malgreeks::greeks::{
    estimate, EstimatorConfig, Greek, Method, Payoff,
};
use malgreeks::greeks::weights::{delta_weight, WeightMode};
use malgreeks::malliavin::discrete::{theta_tangent, Perturbation};
use malgreeks::malliavin::{
    compute_cache, CacheRequest, MalliavinOptions, Region, WeightKernel,
};
use malgreeks::model::ModelSpec;
use malgreeks::path::{build_path, TimeGrid};
use malgreeks::rng::{draw_increments, RngStream};

fn bs() -> ModelSpec {
    ModelSpec::bs_constant(100.0, 0.2, 0.05)
}

fn scott() -> ModelSpec {
    ModelSpec::scott_exp(100.0, 0.0, 0.2, 0.3, -0.5, 0.05, 0.05, -0.2, 0.0)
}

fn cfg(n_paths: u64, n_steps: usize, seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        n_paths,
        n_steps,
        seed,
        ..EstimatorConfig::default()
    }
}

fn u1() -> WeightKernel {
    WeightKernel::default()
}

// --------------------------------------------------------- noise quality

#[test]
fn increment_moments_and_cross_correlation() {
    let grid = TimeGrid::build(1.0, 4).unwrap();
    let n_paths = 1_000_000u64;
    let dt = 0.25;
    let mut sum = [0.0f64; 4];
    let mut sumsq = [0.0f64; 4];
    let mut cross = [0.0f64; 4];
    let mut dw = vec![0.0; 4];
    let mut dwp = vec![0.0; 4];
    for idx in 0..n_paths {
        malgreeks::rng::draw_increments_into(&RngStream::new(31337, idx), &grid, &mut dw, &mut dwp);
        for i in 0..4 {
            sum[i] += dw[i];
            sumsq[i] += dw[i] * dw[i];
            cross[i] += dw[i] * dwp[i];
        }
    }
    let n = n_paths as f64;
    for i in 0..4 {
        let mean = sum[i] / n;
        // 4-sigma band for the mean of N(0, dt)
        assert!(
            mean.abs() <= 4.0 * (dt / n).sqrt(),
            "step {i} mean {mean}"
        );
        let var_ratio = (sumsq[i] / n) / dt;
        assert!(
            (0.994..=1.006).contains(&var_ratio),
            "step {i} variance ratio {var_ratio}"
        );
        let corr = (cross[i] / n) / dt;
        assert!(
            (-0.004..=0.004).contains(&corr),
            "step {i} cross-correlation {corr}"
        );
    }
}

#[test]
fn skorohod_delta_moments() {
    let model = scott();
    let grid = TimeGrid::build(1.0, 8).unwrap();
    let u = u1().discretize(&grid).unwrap();
    let n_paths = 1_000_000u64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut dw = vec![0.0; 8];
    let mut dwp = vec![0.0; 8];
    for idx in 0..n_paths {
        malgreeks::rng::draw_increments_into(&RngStream::new(5150, idx), &grid, &mut dw, &mut dwp);
        let delta: f64 = (0..8).map(|i| u[i] * dw[i]).sum();
        sum += delta;
        sumsq += delta * delta;
    }
    let _ = model;
    let n = n_paths as f64;
    let mean = sum / n;
    let var = sumsq / n;
    let t = 1.0;
    assert!(mean.abs() <= 4.0 * (t / n).sqrt(), "delta(u) mean {mean}");
    // variance of the sample variance of N(0, T) is about 2 T^2 / n
    assert!(
        (var - t).abs() <= 4.0 * t * (2.0 / n).sqrt(),
        "delta(u) variance {var}"
    );
}

// ----------------------------------------------------- scheme-level laws

#[test]
fn bs_zero_rate_martingale() {
    let model = ModelSpec::bs_constant(100.0, 0.2, 0.0);
    let est = estimate(
        &model,
        Payoff::Identity,
        Greek::Price,
        Method::Malliavin,
        &u1(),
        &cfg(200_000, 16, 777),
    )
    .unwrap();
    assert!(
        (est.value - 100.0).abs() <= 4.0 * est.stderr,
        "E[S_T] = {} +- {}",
        est.value,
        est.stderr
    );
}

#[test]
fn bs_scheme_is_exact_in_law_for_any_step_count() {
    let payoff = Payoff::Call { strike: 100.0 };
    let coarse = estimate(&bs(), payoff, Greek::Price, Method::Malliavin, &u1(), &cfg(200_000, 1, 11)).unwrap();
    let fine = estimate(&bs(), payoff, Greek::Price, Method::Malliavin, &u1(), &cfg(200_000, 256, 12)).unwrap();
    let band = 4.0 * (coarse.stderr.powi(2) + fine.stderr.powi(2)).sqrt();
    assert!(
        (coarse.value - fine.value).abs() <= band,
        "{} vs {} (band {band})",
        coarse.value,
        fine.value
    );
}

// ---------------------------------------------------- duality identities

#[test]
fn duality_of_skorohod_and_derivative() {
    // E[S_T delta(u)] = E[S_T I], paired per path, both models
    for (model, seed) in [(bs(), 21u64), (scott(), 22u64)] {
        let n = 32;
        let grid = TimeGrid::build(1.0, n).unwrap();
        let u = u1().discretize(&grid).unwrap();
        let opts = MalliavinOptions::default();
        let n_paths = 100_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for idx in 0..n_paths {
            let (dw, dwp) = draw_increments(&RngStream::new(seed, idx), &grid);
            let path = build_path(&model, &grid, &dw, &dwp).unwrap();
            let cache = compute_cache(&path, &u, &opts, &CacheRequest::default()).unwrap();
            let d = cache.s_t * cache.sko - cache.s_t * cache.i_int;
            sum += d;
            sumsq += d * d;
        }
        let m = n_paths as f64;
        let mean = sum / m;
        let se = (((sumsq - sum * sum / m) / (m - 1.0)) / m).sqrt();
        assert!(
            mean.abs() <= 4.0 * se,
            "duality gap {mean} +- {se} ({})",
            if model.rho == 0.0 { "bs" } else { "scott" }
        );
    }
}

#[test]
fn weights_have_zero_expectation_on_constant_payoff() {
    // IBP applied to a constant: every weight has mean 0 (4 sigma)
    let mut cfg0 = cfg(100_000, 16, 910);
    cfg0.discount = false;
    for model in [bs(), scott()] {
        for (greek, method) in [
            (Greek::Delta, Method::Malliavin),
            (Greek::Gamma, Method::Malliavin),
            (Greek::Rho, Method::Malliavin),
            (Greek::Vega, Method::Malliavin),
        ] {
            let est = estimate(&model, Payoff::ConstantOne, greek, method, &u1(), &cfg0).unwrap();
            assert!(
                est.value.abs() <= 4.0 * est.stderr,
                "{} weight mean {} +- {}",
                greek.name(),
                est.value,
                est.stderr
            );
            assert_eq!(est.n_excluded, 0);
        }
    }
}

// ------------------------------------------------- closed-form reduction

#[test]
fn bs_delta_gamma_match_closed_form_at_test_scale() {
    let payoffs = [
        Payoff::Call { strike: 100.0 },
        Payoff::Put { strike: 100.0 },
        Payoff::DigitalCall { strike: 100.0 },
    ];
    for payoff in payoffs {
        let mc = estimate(&bs(), payoff, Greek::Delta, Method::Malliavin, &u1(), &cfg(100_000, 16, 314)).unwrap();
        let cf = estimate(&bs(), payoff, Greek::Delta, Method::ClosedForm, &u1(), &cfg(1, 16, 314)).unwrap();
        assert!(
            (mc.value - cf.value).abs() <= 3.0 * mc.stderr,
            "{} delta {} vs {} (se {})",
            payoff.name(),
            mc.value,
            cf.value,
            mc.stderr
        );
        let mcg = estimate(&bs(), payoff, Greek::Gamma, Method::Malliavin, &u1(), &cfg(200_000, 16, 315)).unwrap();
        let cfg_ = estimate(&bs(), payoff, Greek::Gamma, Method::ClosedForm, &u1(), &cfg(1, 16, 315)).unwrap();
        assert!(
            (mcg.value - cfg_.value).abs() <= 3.0 * mcg.stderr,
            "{} gamma {} vs {} (se {})",
            payoff.name(),
            mcg.value,
            cfg_.value,
            mcg.stderr
        );
    }
}

#[test]
fn bs_rho_and_vega_match_closed_form() {
    let payoff = Payoff::Call { strike: 100.0 };
    let rho = estimate(&bs(), payoff, Greek::Rho, Method::Malliavin, &u1(), &cfg(100_000, 16, 316)).unwrap();
    let rho_cf = estimate(&bs(), payoff, Greek::Rho, Method::ClosedForm, &u1(), &cfg(1, 16, 316)).unwrap();
    assert!(
        (rho.value - rho_cf.value).abs() <= 4.0 * rho.stderr,
        "rho {} vs {} (se {})",
        rho.value,
        rho_cf.value,
        rho.stderr
    );
    // vega is reported in the multiplicative-scale convention everywhere
    let vega = estimate(&bs(), payoff, Greek::Vega, Method::Malliavin, &u1(), &cfg(100_000, 16, 317)).unwrap();
    let vega_cf = estimate(&bs(), payoff, Greek::Vega, Method::ClosedForm, &u1(), &cfg(1, 16, 317)).unwrap();
    assert!(
        (vega.value - vega_cf.value).abs() <= 4.0 * vega.stderr,
        "vega {} vs {} (se {})",
        vega.value,
        vega_cf.value,
        vega.stderr
    );
    assert!((vega_cf.value - 0.2 * 37.52403469169379).abs() < 1e-10);
}

#[test]
fn identity_payoff_calibration() {
    // undiscounted: E[S_T pi_Delta] = d/dx E[S_T] = e^{rT}
    let mut c = cfg(200_000, 16, 41);
    c.discount = false;
    let est = estimate(&bs(), Payoff::Identity, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let target = (0.05f64).exp();
    assert!(
        (est.value - target).abs() <= 4.0 * est.stderr,
        "E[S pi_D] = {} +- {} vs {target}",
        est.value,
        est.stderr
    );
    let gam = estimate(&bs(), Payoff::Identity, Greek::Gamma, Method::Malliavin, &u1(), &c).unwrap();
    assert!(
        gam.value.abs() <= 4.0 * gam.stderr,
        "E[S pi_G] = {} +- {}",
        gam.value,
        gam.stderr
    );
}

#[test]
fn put_call_delta_difference_is_discounted_forward() {
    // shared seed: Delta(call) - Delta(put) = 1 within the combined band
    let c = cfg(100_000, 16, 99);
    let call = estimate(&bs(), Payoff::Call { strike: 100.0 }, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let put = estimate(&bs(), Payoff::Put { strike: 100.0 }, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let band = 4.0 * (call.stderr.powi(2) + put.stderr.powi(2)).sqrt();
    assert!(
        (call.value - put.value - 1.0).abs() <= band,
        "{} - {} vs 1 (band {band})",
        call.value,
        put.value
    );
}

// ------------------------------------------------ cross-method agreement

#[test]
fn scott_delta_malliavin_agrees_with_crn_fd() {
    let payoff = Payoff::Call { strike: 100.0 };
    let c = cfg(50_000, 32, 2024);
    let mal = estimate(&scott(), payoff, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let fd = estimate(&scott(), payoff, Greek::Delta, Method::FiniteDifference, &u1(), &c).unwrap();
    let band = 3.0 * (mal.stderr.powi(2) + fd.stderr.powi(2)).sqrt();
    assert!(
        (mal.value - fd.value).abs() <= band,
        "{} vs {} (band {band})",
        mal.value,
        fd.value
    );
}

#[test]
fn scott_rho_malliavin_agrees_with_crn_fd() {
    let payoff = Payoff::Call { strike: 100.0 };
    let c = cfg(50_000, 32, 2025);
    let mal = estimate(&scott(), payoff, Greek::Rho, Method::Malliavin, &u1(), &c).unwrap();
    let fd = estimate(&scott(), payoff, Greek::Rho, Method::FiniteDifference, &u1(), &c).unwrap();
    let band = 3.0 * (mal.stderr.powi(2) + fd.stderr.powi(2)).sqrt();
    assert!(
        (mal.value - fd.value).abs() <= band,
        "{} vs {} (band {band})",
        mal.value,
        fd.value
    );
}

#[test]
fn scott_vega_malliavin_agrees_with_crn_fd() {
    let payoff = Payoff::Call { strike: 100.0 };
    let c = cfg(50_000, 32, 2026);
    let mal = estimate(&scott(), payoff, Greek::Vega, Method::Malliavin, &u1(), &c).unwrap();
    let fd = estimate(&scott(), payoff, Greek::Vega, Method::FiniteDifference, &u1(), &c).unwrap();
    let band = 3.0 * (mal.stderr.powi(2) + fd.stderr.powi(2)).sqrt();
    assert!(
        (mal.value - fd.value).abs() <= band,
        "{} vs {} (band {band})",
        mal.value,
        fd.value
    );
}

#[test]
fn pathwise_delta_agrees_on_smooth_payoffs() {
    let payoff = Payoff::Call { strike: 100.0 };
    let c = cfg(100_000, 16, 2027);
    let pw = estimate(&bs(), payoff, Greek::Delta, Method::PathwiseTangent, &u1(), &c).unwrap();
    let cf = estimate(&bs(), payoff, Greek::Delta, Method::ClosedForm, &u1(), &c).unwrap();
    assert!(
        (pw.value - cf.value).abs() <= 4.0 * pw.stderr,
        "{} vs {}",
        pw.value,
        cf.value
    );
}

// ------------------------------------------------------- digital variance

#[test]
fn malliavin_beats_fd_variance_on_digital_delta() {
    let payoff = Payoff::DigitalCall { strike: 100.0 };
    let c = cfg(100_000, 16, 700);
    let mal = estimate(&bs(), payoff, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let fd = estimate(&bs(), payoff, Greek::Delta, Method::FiniteDifference, &u1(), &c).unwrap();
    assert!(
        mal.stderr < fd.stderr,
        "malliavin se {} should beat fd se {}",
        mal.stderr,
        fd.stderr
    );
}

// ------------------------------------------------------ tangent oracles

#[test]
fn bs_parameter_tangents_in_closed_form() {
    let model = bs();
    let grid = TimeGrid::build(1.0, 16).unwrap();
    let u = u1().discretize(&grid).unwrap();
    let (dw, dwp) = draw_increments(&RngStream::new(3, 0), &grid);
    let path = build_path(&model, &grid, &dw, &dwp).unwrap();
    let w_t: f64 = dw.iter().sum();
    let rate = theta_tangent(&path, &u, Perturbation::RateShift);
    assert!((rate.theta_l - 1.0).abs() < 1e-13, "dS/deps = S_T * T");
    let vol = theta_tangent(&path, &u, Perturbation::VolScale);
    assert!(
        (vol.theta_l - (0.2 * w_t - 0.04)).abs() < 1e-13,
        "dS/deps = S_T (sigma W_T - sigma^2 T), got theta_l {}",
        vol.theta_l
    );
}

#[test]
fn parameter_tangents_match_eps_finite_differences() {
    let model = ModelSpec::scott_exp(100.0, 0.1, 0.2, 0.3, -0.5, 0.05, 0.08, -0.2, 0.1);
    let grid = TimeGrid::build(1.0, 24).unwrap();
    let u = u1().discretize(&grid).unwrap();
    let (dw, dwp) = draw_increments(&RngStream::new(4, 1), &grid);
    let path = build_path(&model, &grid, &dw, &dwp).unwrap();
    let h = 1e-6;

    // rate shift
    let mut up = model.clone();
    up.rate = malgreeks::model::TimeFn::Constant(0.05 + h);
    let mut dn = model.clone();
    dn.rate = malgreeks::model::TimeFn::Constant(0.05 - h);
    let s_up = build_path(&up, &grid, &dw, &dwp).unwrap().s_t();
    let s_dn = build_path(&dn, &grid, &dw, &dwp).unwrap().s_t();
    let fd = (s_up - s_dn) / (2.0 * h);
    let exact = path.s_t() * theta_tangent(&path, &u, Perturbation::RateShift).theta_l;
    assert!(((fd - exact) / exact).abs() <= 1e-6, "rate: fd {fd} vs {exact}");

    // vol scale
    let scale = |factor: f64| {
        let mut m = model.clone();
        let inner = model.sigma.clone();
        m.sigma = malgreeks::model::Surface::Custom(std::sync::Arc::new(move |t, y, k| {
            factor * inner.eval(t, y, k)
        }));
        build_path(&m, &grid, &dw, &dwp).unwrap().s_t()
    };
    let fd_v = (scale(1.0 + h) - scale(1.0 - h)) / (2.0 * h);
    let exact_v = path.s_t() * theta_tangent(&path, &u, Perturbation::VolScale).theta_l;
    assert!(
        ((fd_v - exact_v) / exact_v).abs() <= 1e-6,
        "vol: fd {fd_v} vs {exact_v}"
    );
}

// ------------------------------------------------------ mode discrepancy

#[test]
fn literal_minus_corrected_is_the_assembled_extra_term_pathwise() {
    let model = scott();
    let grid = TimeGrid::build(1.0, 32).unwrap();
    let u = u1().discretize(&grid).unwrap();
    let opts = MalliavinOptions::default();
    for idx in 0..50u64 {
        let (dw, dwp) = draw_increments(&RngStream::new(55, idx), &grid);
        let path = build_path(&model, &grid, &dw, &dwp).unwrap();
        let cache = compute_cache(&path, &u, &opts, &CacheRequest::default()).unwrap();
        let corr = delta_weight(&cache, 100.0, WeightMode::Corrected, Region::FullSquare).unwrap();
        let lit = delta_weight(&cache, 100.0, WeightMode::PaperLiteral, Region::FullSquare).unwrap();
        let i = cache.i_int;
        let extra = (-cache.s_t + cache.s_t * cache.du_i_paper / (i * i)
            - cache.du_i_full / (i * i))
            / 100.0;
        assert!(
            (lit - corr - extra).abs() <= 1e-12 * extra.abs().max(1.0),
            "path {idx}: {lit} - {corr} != {extra}"
        );
    }
}

// ------------------------------------------------------------ reliability

#[test]
fn degenerate_kernel_flags_unreliable() {
    // antisymmetric u gives I = 0 under constant vol: every path excluded
    let kernel = WeightKernel::Step {
        times: vec![0.5],
        values: vec![1.0, -1.0],
    };
    let est = estimate(
        &bs(),
        Payoff::DigitalCall { strike: 100.0 },
        Greek::Delta,
        Method::Malliavin,
        &kernel,
        &cfg(2_000, 8, 1),
    )
    .unwrap();
    assert_eq!(est.n_excluded, 2_000);
    assert!(!est.reliable);
    assert!(est.value.is_nan());
}

#[test]
fn antithetic_flag_runs_and_matches_plain_in_expectation() {
    let payoff = Payoff::Call { strike: 100.0 };
    let mut c = cfg(50_000, 8, 64);
    c.antithetic = true;
    let anti = estimate(&bs(), payoff, Greek::Price, Method::Malliavin, &u1(), &c).unwrap();
    let cf = estimate(&bs(), payoff, Greek::Price, Method::ClosedForm, &u1(), &c).unwrap();
    assert!(
        (anti.value - cf.value).abs() <= 4.0 * anti.stderr,
        "{} vs {}",
        anti.value,
        cf.value
    );
    // antithetic pairing reduces the price variance for monotone payoffs
    c.antithetic = false;
    let plain = estimate(&bs(), payoff, Greek::Price, Method::Malliavin, &u1(), &c).unwrap();
    assert!(anti.stderr < plain.stderr);
}
