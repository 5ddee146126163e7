use lenglart::bdg::{bdg_ratio, BmKind, MartingaleSpec, BIAS_LIMIT};
use lenglart::montecarlo::EstimatorMethod;
use lenglart::oracles::{constant, ConstantKind};

fn specs(q: f64) -> [MartingaleSpec; 2] {
    [
        MartingaleSpec {
            kind: BmKind::FixedTime { t: 1.0 },
            step: 1e-3,
            q,
        },
        MartingaleSpec {
            kind: BmKind::Hitting { a: -1.0, b: 1.0 },
            step: 1e-3,
            q,
        },
    ]
}

#[test]
fn monotone_constant_bounds_every_spec() {
    for q in [0.5, 1.0, 1.5] {
        for spec in specs(q) {
            let r = bdg_ratio(&spec, 20_000, EstimatorMethod::Plain, 31).unwrap();
            let c = constant(ConstantKind::Monotone, q / 2.0).unwrap();
            assert!(r.ratio.ratio <= c + 3.0 * r.ratio.sigma(), "{spec:?}: {:?}", r.ratio);
            assert!(r.monotone_bound_holds);
            assert!(r.step_bias < BIAS_LIMIT);
            let weakest = constant(ConstantKind::Lenglart, q / 2.0).unwrap();
            assert!(r.ratio.ratio < weakest);
            if q == 1.0 {
                assert!(r.ratio.ratio < weakest / 2.0);
            }
            let consts: Vec<f64> = r.gaps.iter().map(|g| g.constant).collect();
            assert!(consts.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.reverse_ratio > 0.0);
        }
    }
}

#[test]
fn exit_time_ratio_below_one() {
    let spec = specs(1.0)[1];
    let r = bdg_ratio(&spec, 20_000, EstimatorMethod::Plain, 8).unwrap();
    // sup|M| at the exit from (-1, 1) is 1, and E[sqrt(tau)] < sqrt(E[tau]) = 1
    assert_eq!(r.ratio.denominator.value, 1.0);
    assert!(r.ratio.ratio < 1.0 && r.ratio.ratio > 0.7, "{:?}", r.ratio);
}
