use std::path::Path;

use approx::assert_relative_eq;
use ccr_quant::exposure::{
    ee_analytic, ee_mc, ee_numerical, ee_quantized_djs, ee_quantized_tree, ee_sobol, error_metrics,
    pfe_quantized, ExposureTask, RectangleRule, SimulationMode, Target,
};
use ccr_quant::market::{BucketGrid, MarketParams, OptionKind, OptionSpec, Portfolio, Side};
use ccr_quant::quantizer::{
    build_grid, QuantizationTree, QuantizerGrid, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use ccr_quant::Error;
use proptest::prelude::*;

fn grid(n: usize) -> QuantizerGrid {
    build_grid(n, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap()
}

fn call(spot: f64, vol: f64) -> ExposureTask {
    let o = OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 1.0).unwrap();
    ExposureTask::new(
        Target::Option(o),
        MarketParams::new(spot, 0.03, vol).unwrap(),
        BucketGrid::default(),
    )
    .unwrap()
}

fn book() -> Portfolio {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../portfolios/netting10.txt");
    Portfolio::load(&path).unwrap()
}

fn book_task(spot: f64, vol: f64) -> ExposureTask {
    ExposureTask::new(
        Target::Portfolio(book()),
        MarketParams::new(spot, 0.03, vol).unwrap(),
        BucketGrid::default(),
    )
    .unwrap()
}

#[test]
fn netting_set_file_has_ten_positions() {
    let b = book();
    assert_eq!(b.len(), 10);
    assert_eq!(b.min_maturity(), Some(1.0));
    let again = Portfolio::parse(&b.to_text(), Path::new("roundtrip")).unwrap();
    assert_eq!(again, b);
}

#[test]
fn portfolio_parse_errors_carry_line_numbers() {
    let err =
        Portfolio::parse("call buy 100 1\n\ncall hold 100 1\n", Path::new("book.txt")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("book.txt") && msg.contains(":3"), "{msg}");
    assert!(Portfolio::parse("call buy -5 1\n", Path::new("b")).is_err());
    assert!(Portfolio::parse("call buy 100\n", Path::new("b")).is_err());
}

#[test]
fn huge_collateral_removes_all_exposure() {
    let g = grid(200);
    let task = book_task(100.0, 0.25).with_collateral(1e6).unwrap();
    let q = ee_quantized_djs(&task, std::slice::from_ref(&g)).unwrap();
    assert!(q.ee.iter().all(|&e| e == 0.0));
    assert_eq!(q.epe, 0.0);
    assert!(matches!(ee_analytic(&task), Err(Error::NotApplicable(_))));
    let s = ee_sobol(&task, 1024).unwrap();
    assert_eq!(s.epe, 0.0);
}

#[test]
fn collateral_lowers_exposure_monotonically() {
    let g = grid(200);
    let mut last = f64::INFINITY;
    for v in [0.0, 1.0, 5.0, 20.0] {
        let t = call(100.0, 0.25).with_collateral(v).unwrap();
        let epe = ee_quantized_djs(&t, std::slice::from_ref(&g)).unwrap().epe;
        assert!(epe < last);
        last = epe;
    }
}

#[test]
fn pruned_tree_stays_close_to_unpruned() {
    let g = grid(100);
    let task = book_task(100.0, 0.25);
    let times = task.buckets.times().to_vec();
    let full = QuantizationTree::build(&times, vec![g.clone(); times.len()], None).unwrap();
    let exact = ee_quantized_tree(&task, &full).unwrap().epe;
    // Cutting each step's increment at ±z shrinks its variance, and the
    // loss compounds along the chain: about 1.9% of EPE at z = 3.
    for (z, bound) in [(3.0, 0.02), (4.0, 1e-3)] {
        let pruned =
            QuantizationTree::build(&times, vec![g.clone(); times.len()], Some(z)).unwrap();
        assert!(
            pruned
                .transitions()
                .iter()
                .map(|t| t.pruned_count())
                .sum::<usize>()
                > 0
        );
        let epe = ee_quantized_tree(&task, &pruned).unwrap().epe;
        assert!(epe < exact);
        assert_relative_eq!(epe, exact, max_relative = bound);
    }
}

#[test]
fn tree_marginals_match_the_grids() {
    let g = grid(50);
    let times = BucketGrid::default().times().to_vec();
    let tree = QuantizationTree::build(&times, vec![g.clone(); times.len()], None).unwrap();
    for q in tree.marginals().unwrap() {
        for (a, b) in q.iter().zip(g.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn all_estimators_agree_on_the_netting_set() {
    let task = book_task(100.0, 0.25);
    let reference = ee_sobol(&task, 1 << 17).unwrap();
    let q = ee_quantized_djs(&task, &[grid(500)]).unwrap();
    let n = ee_numerical(
        &task,
        RectangleRule {
            nodes: 4000,
            half_width: 8.0,
        },
    )
    .unwrap();
    let mc = ee_mc(&task, 20_000, SimulationMode::Djs, 7).unwrap();
    assert_relative_eq!(q.epe, reference.epe, max_relative = 1e-3);
    assert_relative_eq!(n.epe, reference.epe, max_relative = 1e-3);
    assert!((mc.epe - reference.epe).abs() < 4.0 * mc.epe_stderr.unwrap());
}

#[test]
fn monte_carlo_relative_error_grows_out_of_the_money() {
    let rsd = |spot: f64| {
        let p = ee_mc(&call(spot, 0.25), 5000, SimulationMode::Pds, 11).unwrap();
        error_metrics(&p, &p).unwrap().epe_rsd.unwrap()
    };
    let (itm, atm, otm) = (rsd(110.0), rsd(100.0), rsd(90.0));
    assert!(itm < atm && atm < otm, "{itm} {atm} {otm}");
}

#[test]
fn pfe_exceeds_ee_and_grows_with_level() {
    let task = call(100.0, 0.25);
    let g = grid(400);
    let ee = ee_quantized_djs(&task, std::slice::from_ref(&g))
        .unwrap()
        .ee;
    let p90 = pfe_quantized(&task, std::slice::from_ref(&g), 0.90).unwrap();
    let p99 = pfe_quantized(&task, std::slice::from_ref(&g), 0.99).unwrap();
    for k in 0..ee.len() {
        assert!(p90[k] > ee[k] && p99[k] > p90[k]);
    }
}

#[test]
fn maturity_before_horizon_is_rejected() {
    let o = OptionSpec::new(OptionKind::Call, Side::Buy, 100.0, 0.5).unwrap();
    let m = MarketParams::new(100.0, 0.03, 0.2).unwrap();
    assert!(ExposureTask::new(Target::Option(o), m, BucketGrid::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quantized_call_exposure_is_a_lower_bound(spot in 60.0..140.0f64, vol in 0.05..0.6f64) {
        let g = grid(100);
        let task = call(spot, vol);
        let a = ee_analytic(&task).unwrap();
        let q = ee_quantized_djs(&task, std::slice::from_ref(&g)).unwrap();
        for (x, y) in q.ee.iter().zip(&a.ee) {
            prop_assert!(*x <= y + 1e-9);
            prop_assert!(y - x <= 2e-3 * y + 1e-3);
        }
    }

    #[test]
    fn netting_set_exposure_is_bounded_by_gross_exposure(spot in 80.0..120.0f64, vol in 0.1..0.4f64) {
        let g = grid(100);
        let net = ee_quantized_djs(&book_task(spot, vol), std::slice::from_ref(&g)).unwrap();
        let mut gross = vec![0.0; net.ee.len()];
        for p in book().positions() {
            let t = ExposureTask::new(
                Target::Option(*p),
                MarketParams::new(spot, 0.03, vol).unwrap(),
                BucketGrid::default(),
            )
            .unwrap();
            let e = ee_quantized_djs(&t, std::slice::from_ref(&g)).unwrap();
            for (s, x) in gross.iter_mut().zip(&e.ee) {
                *s += x;
            }
        }
        for (n, g) in net.ee.iter().zip(&gross) {
            prop_assert!(*n <= g + 1e-9);
        }
    }
}
