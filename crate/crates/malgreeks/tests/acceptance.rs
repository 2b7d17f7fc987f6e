//! Acceptance suite. One test per criterion; each prints a PASS line with
//! the measured numbers (visible with `--nocapture`). Tolerances are fixed
//! here, not tuned at runtime.
//!
//! Numbered criteria:
//!  1. constant-vol Delta reduction (3 sigma against N(d1), 2e5 paths)
//!  2. constant-vol Gamma reduction (3 sigma, 1e6 paths)
//!  3. digital Delta reduction (3 sigma, 1e6 paths) + variance advantage
//!  4. stochastic-vol Delta/Gamma vs common-random-numbers FD
//!  5. analytic backend converges to the exact scheme tangents (G, dG, d2G)
//!  6. duality and zero-expectation identities, both models
//!  7. identity-payoff calibration (undiscounted forward)
//!  8. the printed final Delta formula is biased (erratum demonstration)
//!  9. byte-identical reports for identical configs, single worker

use std::time::Instant;

use malgreeks::greeks::{estimate, EstimatorConfig, Greek, Method, Payoff};
use malgreeks::malliavin::analytic::AnalyticKernel;
use malgreeks::malliavin::discrete::DiscreteKernel;
use malgreeks::malliavin::WeightKernel;
use malgreeks::model::{Convention, ModelSpec};
use malgreeks::path::{build_path, PathBundle, TimeGrid};
use malgreeks::report::{to_csv, ReportRow};
use malgreeks::rng::{draw_increments, RngStream};

const BS_DELTA: f64 = 0.6368306511756191;
const BS_GAMMA: f64 = 0.01876201734584689;
const DIGITAL_DELTA: f64 = 0.01876201734584689;
const GROWTH: f64 = 1.0512710963760241; // e^{0.05}

fn bs() -> ModelSpec {
    ModelSpec::bs_constant(100.0, 0.2, 0.05)
}

fn scott() -> ModelSpec {
    ModelSpec::scott_exp(100.0, 0.0, 0.2, 0.3, -0.5, 0.05, 0.05, -0.2, 0.0)
}

fn u1() -> WeightKernel {
    WeightKernel::default()
}

fn cfg(n_paths: u64, n_steps: usize, seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        n_paths,
        n_steps,
        seed,
        ..EstimatorConfig::default()
    }
}

#[test]
fn criterion_1_bs_delta_reduction() {
    let start = Instant::now();
    let est = estimate(
        &bs(),
        Payoff::Call { strike: 100.0 },
        Greek::Delta,
        Method::Malliavin,
        &u1(),
        &cfg(200_000, 64, 101),
    )
    .unwrap();
    let z = est.z_score_against(BS_DELTA);
    let secs = start.elapsed().as_secs_f64();
    assert!(
        z.abs() <= 3.0,
        "criterion 1 FAIL: delta {} +- {} vs {BS_DELTA} (z = {z:.2})",
        est.value,
        est.stderr
    );
    assert!(secs <= 30.0, "criterion 1 FAIL: runtime {secs:.1}s > 30s");
    println!(
        "criterion 1 PASS: bs delta {:.6} +- {:.6} vs {:.6} (|z| = {:.2}, {:.1}s)",
        est.value,
        est.stderr,
        BS_DELTA,
        z.abs(),
        secs
    );
}

#[test]
fn criterion_2_bs_gamma_reduction() {
    let start = Instant::now();
    let est = estimate(
        &bs(),
        Payoff::Call { strike: 100.0 },
        Greek::Gamma,
        Method::Malliavin,
        &u1(),
        &cfg(1_000_000, 64, 102),
    )
    .unwrap();
    let z = est.z_score_against(BS_GAMMA);
    let secs = start.elapsed().as_secs_f64();
    assert!(
        z.abs() <= 3.0,
        "criterion 2 FAIL: gamma {} +- {} vs {BS_GAMMA} (z = {z:.2})",
        est.value,
        est.stderr
    );
    assert!(secs <= 180.0, "criterion 2 FAIL: runtime {secs:.1}s > 180s");
    println!(
        "criterion 2 PASS: bs gamma {:.7} +- {:.7} vs {:.7} (|z| = {:.2}, {:.1}s)",
        est.value,
        est.stderr,
        BS_GAMMA,
        z.abs(),
        secs
    );
}

#[test]
fn criterion_3_digital_delta_and_variance_advantage() {
    let payoff = Payoff::DigitalCall { strike: 100.0 };
    let c = cfg(1_000_000, 64, 103);
    let mal = estimate(&bs(), payoff, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let z = mal.z_score_against(DIGITAL_DELTA);
    assert!(
        z.abs() <= 3.0,
        "criterion 3 FAIL: digital delta {} +- {} vs {DIGITAL_DELTA} (z = {z:.2})",
        mal.value,
        mal.stderr
    );
    let fd = estimate(&bs(), payoff, Greek::Delta, Method::FiniteDifference, &u1(), &c).unwrap();
    assert!(
        mal.stderr < fd.stderr,
        "criterion 3 FAIL: malliavin se {} not below fd se {}",
        mal.stderr,
        fd.stderr
    );
    println!(
        "criterion 3 PASS: digital delta {:.7} +- {:.7} vs {:.7} (|z| = {:.2}); se {:.2e} < fd se {:.2e}",
        mal.value,
        mal.stderr,
        DIGITAL_DELTA,
        z.abs(),
        mal.stderr,
        fd.stderr
    );
}

#[test]
fn criterion_4_stochastic_vol_cross_check() {
    let payoff = Payoff::Call { strike: 100.0 };
    let cd = cfg(200_000, 128, 104);
    let mal_d = estimate(&scott(), payoff, Greek::Delta, Method::Malliavin, &u1(), &cd).unwrap();
    let fd_d = estimate(&scott(), payoff, Greek::Delta, Method::FiniteDifference, &u1(), &cd).unwrap();
    let band_d = 3.0 * (mal_d.stderr.powi(2) + fd_d.stderr.powi(2)).sqrt();
    assert!(
        (mal_d.value - fd_d.value).abs() <= band_d,
        "criterion 4 FAIL (delta): {} vs {} (band {band_d})",
        mal_d.value,
        fd_d.value
    );

    let cg = cfg(1_000_000, 128, 105);
    let mal_g = estimate(&scott(), payoff, Greek::Gamma, Method::Malliavin, &u1(), &cg).unwrap();
    let fd_g = estimate(&scott(), payoff, Greek::Gamma, Method::FiniteDifference, &u1(), &cg).unwrap();
    let band_g = 4.0 * (mal_g.stderr.powi(2) + fd_g.stderr.powi(2)).sqrt();
    assert!(
        (mal_g.value - fd_g.value).abs() <= band_g,
        "criterion 4 FAIL (gamma): {} vs {} (band {band_g})",
        mal_g.value,
        fd_g.value
    );
    println!(
        "criterion 4 PASS: scott delta {:.5} vs fd {:.5} (band {:.5}); gamma {:.6} vs fd {:.6} (band {:.6})",
        mal_d.value, fd_d.value, band_d, mal_g.value, fd_g.value, band_g
    );
}

struct RmsAcc {
    num: f64,
    den: f64,
}

impl RmsAcc {
    fn new() -> Self {
        RmsAcc { num: 0.0, den: 0.0 }
    }
    fn push(&mut self, a: f64, b: f64) {
        self.num += (a - b) * (a - b);
        self.den += b * b;
    }
    fn rel(&self) -> f64 {
        (self.num / self.den).sqrt()
    }
}

/// Relative RMS gap between the analytic kernel and the exact scheme
/// tangents over many paths: (G, dG on the strict lower triangle, d2G on a
/// strided set of strictly ordered triples).
fn backend_gaps(model: &ModelSpec, n: usize, n_paths: u64, seed: u64) -> (f64, f64, f64) {
    let grid = TimeGrid::build(model.maturity, n).unwrap();
    let mut g_acc = RmsAcc::new();
    let mut dg_acc = RmsAcc::new();
    let mut d2g_acc = RmsAcc::new();
    let stride = (n / 16).max(1);
    for idx in 0..n_paths {
        let (dw, dwp) = draw_increments(&RngStream::new(seed, idx), &grid);
        let path: PathBundle = build_path(model, &grid, &dw, &dwp).unwrap();
        let ana = AnalyticKernel::new(&path, Convention::ChainRule);
        let dis = DiscreteKernel::new(&path, Convention::ChainRule);
        for i in 0..n {
            g_acc.push(ana.g[i], dis.g[i]);
            for s in 0..i {
                dg_acc.push(ana.dg(s, i), dis.dg(s, i));
            }
        }
        let marks: Vec<usize> = (0..n).step_by(stride).collect();
        for (ai, &r) in marks.iter().enumerate() {
            for (bi, &s) in marks.iter().enumerate().skip(ai + 1) {
                for &i in marks.iter().skip(bi + 1) {
                    d2g_acc.push(ana.d2g(r, s, i), dis.d2g(r, s, i));
                }
            }
        }
    }
    (g_acc.rel(), dg_acc.rel(), d2g_acc.rel())
}

#[test]
fn criterion_5_backend_convergence() {
    let model = scott();
    let (g_256, dg_256, d2g_128) = {
        let (g, dg, _) = backend_gaps(&model, 256, 384, 505);
        let (_, _, d2g) = backend_gaps(&model, 128, 384, 506);
        (g, dg, d2g)
    };
    let (g_512, dg_512, d2g_256) = {
        let (g, dg, _) = backend_gaps(&model, 512, 384, 505);
        let (_, _, d2g) = backend_gaps(&model, 256, 384, 506);
        (g, dg, d2g)
    };
    assert!(g_512 <= 0.02, "criterion 5 FAIL: G rel RMS {g_512} > 2% at n=512");
    assert!(dg_512 <= 0.05, "criterion 5 FAIL: dG rel RMS {dg_512} > 5% at n=512");
    assert!(d2g_256 <= 0.10, "criterion 5 FAIL: d2G rel RMS {d2g_256} > 10% at n=256");
    for (name, coarse, fine) in [
        ("G", g_256, g_512),
        ("dG", dg_256, dg_512),
        ("d2G", d2g_128, d2g_256),
    ] {
        let ratio = coarse / fine;
        assert!(
            (1.4..=2.8).contains(&ratio),
            "criterion 5 FAIL: {name} error ratio {ratio} outside [1.4, 2.8]"
        );
    }
    println!(
        "criterion 5 PASS: rel RMS G {:.3}% (ratio {:.3}), dG {:.3}% (ratio {:.3}), d2G {:.3}% (ratio {:.3})",
        100.0 * g_512,
        g_256 / g_512,
        100.0 * dg_512,
        dg_256 / dg_512,
        100.0 * d2g_256,
        d2g_128 / d2g_256
    );
}

#[test]
fn criterion_6_duality_and_zero_expectation_suite() {
    use malgreeks::malliavin::{compute_cache, CacheRequest, MalliavinOptions};
    let mut lines = Vec::new();
    for (model, name, seed) in [(bs(), "bs", 601u64), (scott(), "scott", 602u64)] {
        // paired duality gap E[S delta(u) - S I]
        let n = 64;
        let grid = TimeGrid::build(1.0, n).unwrap();
        let u = u1().discretize(&grid).unwrap();
        let opts = MalliavinOptions::default();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        let n_paths = 100_000u64;
        for idx in 0..n_paths {
            let (dw, dwp) = draw_increments(&RngStream::new(seed, idx), &grid);
            let path = build_path(&model, &grid, &dw, &dwp).unwrap();
            let c = compute_cache(&path, &u, &opts, &CacheRequest::default()).unwrap();
            let d = c.s_t * (c.sko - c.i_int);
            sum += d;
            sumsq += d * d;
        }
        let m = n_paths as f64;
        let mean = sum / m;
        let se = (((sumsq - sum * sum / m) / (m - 1.0)) / m).sqrt();
        assert!(
            mean.abs() <= 4.0 * se,
            "criterion 6 FAIL: duality gap {mean} +- {se} on {name}"
        );
        lines.push(format!("{name} duality z = {:.2}", mean / se));

        // zero expectation of each weight against f = 1
        let mut c0 = cfg(100_000, 16, seed + 10);
        c0.discount = false;
        for greek in [Greek::Delta, Greek::Gamma, Greek::Rho, Greek::Vega] {
            let est = estimate(&model, Payoff::ConstantOne, greek, Method::Malliavin, &u1(), &c0)
                .unwrap();
            assert!(
                est.value.abs() <= 4.0 * est.stderr,
                "criterion 6 FAIL: E[{} weight] = {} +- {} on {name}",
                greek.name(),
                est.value,
                est.stderr
            );
            lines.push(format!(
                "{name} {} z = {:.2}",
                greek.name(),
                est.value / est.stderr
            ));
        }
    }
    println!("criterion 6 PASS: {}", lines.join("; "));
}

#[test]
fn criterion_7_identity_payoff_calibration() {
    let mut c = cfg(200_000, 64, 107);
    c.discount = false;
    let delta = estimate(&bs(), Payoff::Identity, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    assert!(
        (delta.value - GROWTH).abs() <= 4.0 * delta.stderr,
        "criterion 7 FAIL: E[S pi_D] = {} +- {} vs {GROWTH}",
        delta.value,
        delta.stderr
    );
    let gamma = estimate(&bs(), Payoff::Identity, Greek::Gamma, Method::Malliavin, &u1(), &c).unwrap();
    assert!(
        gamma.value.abs() <= 4.0 * gamma.stderr,
        "criterion 7 FAIL: E[S pi_G] = {} +- {}",
        gamma.value,
        gamma.stderr
    );
    println!(
        "criterion 7 PASS: E[S pi_D] = {:.5} +- {:.5} vs {:.5}; E[S pi_G] = {:.5} +- {:.5}",
        delta.value, delta.stderr, GROWTH, gamma.value, gamma.stderr
    );
}

#[test]
fn criterion_8_paper_literal_erratum() {
    let payoff = Payoff::DigitalCall { strike: 100.0 };
    let c = cfg(1_000_000, 64, 108);
    let literal = estimate(&bs(), payoff, Greek::Delta, Method::MalliavinPaperLiteral, &u1(), &c)
        .unwrap();
    let z_lit = literal.z_score_against(DIGITAL_DELTA);
    assert!(
        z_lit.abs() > 5.0,
        "criterion 8 FAIL: paper-literal digital delta {} +- {} is not visibly biased (z = {z_lit:.2})",
        literal.value,
        literal.stderr
    );
    let corrected = estimate(&bs(), payoff, Greek::Delta, Method::Malliavin, &u1(), &c).unwrap();
    let z_corr = corrected.z_score_against(DIGITAL_DELTA);
    assert!(
        z_corr.abs() <= 3.0,
        "criterion 8 FAIL: corrected digital delta off (z = {z_corr:.2})"
    );
    println!(
        "criterion 8 PASS: paper-literal digital delta {:.4} (|z| = {:.0}) vs corrected {:.7} (|z| = {:.2})",
        literal.value,
        z_lit.abs(),
        corrected.value,
        z_corr.abs()
    );
}

#[test]
fn criterion_9_single_worker_reports_are_byte_identical() {
    let run = || {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        pool.install(|| {
            let c = cfg(20_000, 32, 109);
            let rows: Vec<ReportRow> = [
                (Greek::Price, Method::Malliavin),
                (Greek::Delta, Method::Malliavin),
                (Greek::Delta, Method::FiniteDifference),
                (Greek::Gamma, Method::Malliavin),
            ]
            .iter()
            .map(|&(greek, method)| {
                let est = estimate(
                    &scott(),
                    Payoff::Call { strike: 100.0 },
                    greek,
                    method,
                    &u1(),
                    &c,
                )
                .unwrap();
                let mut row = ReportRow::new(&est, "call", Some(100.0), "scott_exp");
                row.runtime_ms = 0; // wall time is not part of the contract
                row
            })
            .collect();
            to_csv(&rows)
        })
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "criterion 9 FAIL: reports differ between identical runs");
    println!("criterion 9 PASS: {} bytes, byte-identical across runs", a.len());
}
