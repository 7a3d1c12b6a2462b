//! Property suites, shared by the `properties` and `acceptance` targets.
//!
//! Every suite runs [`CASES`] randomized cases through a proptest runner and panics with
//! the minimal failing input on violation.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use tokprune::geometry::{aggregate_patches, edge_magnitude, geometric_prior, sobel_gradients};
use tokprune::io::{manifest, netpbm, tensor, trace, Image, RunManifest, Tensor};
use tokprune::motion::{
    gaussian_smooth, morph_dilate, morph_erode, motion_prior, StructuringElement,
};
use tokprune::selection::{gather_final, priority_score};
use tokprune::semantic::{cross_modal_softmax, semantic_prior, spatial_avg_pool};
use tokprune::strategy::{binarize_adaptive, mask_iou, retention_set};
use tokprune::types::{mean_std, minmax_normalize};
use tokprune::{
    sim, BinaryMask, BudgetPolicy, EpisodeSpec, FeatureMatrix, GrayImage, IndexSet, Mode,
    ModeDecision, MotionState, Pruner, PrunerConfig, RgbImage, ScalarGrid, Scenario, ScoreVector,
    SelectionConfig, StrategyConfig, TextEmbedding, TokenGrid,
};

use super::oracle::run_oracle;
use super::{pruner_config, random_instance};

pub const CASES: u32 = 128;

fn check<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>)
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    if let Err(e) = runner.run(&strategy, test) {
        panic!("property `{name}` failed: {e}");
    }
}

fn line(n: usize) -> TokenGrid {
    TokenGrid::new(1, n, 1).unwrap()
}

fn scores(values: Vec<f64>) -> ScoreVector {
    ScoreVector::new(line(values.len()), values).unwrap()
}

fn grid_dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=7, 1usize..=7)
}

fn unit_scores_on(rows: usize, cols: usize) -> impl Strategy<Value = ScoreVector> {
    prop::collection::vec(0.0f64..=1.0, rows * cols)
        .prop_map(move |v| ScoreVector::new(TokenGrid::new(rows, cols, 1).unwrap(), v).unwrap())
}

fn score_pair() -> impl Strategy<Value = (ScoreVector, ScoreVector)> {
    grid_dims().prop_flat_map(|(r, c)| (unit_scores_on(r, c), unit_scores_on(r, c)))
}

fn mask_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn rgb_image(w: usize, h: usize) -> impl Strategy<Value = RgbImage> {
    prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |b| RgbImage::new(w, h, b).unwrap())
}

fn close(m: &ScalarGrid) -> ScalarGrid {
    morph_erode(&morph_dilate(m, &StructuringElement), &StructuringElement)
}

fn features(grid: TokenGrid, dim: usize, v: Vec<f64>) -> FeatureMatrix {
    FeatureMatrix::new(grid, dim, v).unwrap()
}

/// Exactly representable values, so that linear sequences stay exact.
fn dyadic(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_map(|k| f64::from(k) / 1024.0)
}

fn run_pruner(
    cfg: PrunerConfig,
    grid: TokenGrid,
    images: &[RgbImage],
    feats: &[FeatureMatrix],
    text: &TextEmbedding,
) -> Vec<tokprune::PruneResult> {
    let mut p = Pruner::new(cfg, grid).unwrap();
    images
        .iter()
        .zip(feats)
        .map(|(i, f)| p.step(i, f, text).unwrap())
        .collect()
}

// ---------------------------------------------------------------- core types

pub fn minmax_is_idempotent() {
    check(
        "minmax idempotent",
        prop::collection::vec(-1e3f64..1e3, 1..50),
        |v| {
            let once = minmax_normalize(&scores(v)).unwrap();
            let twice = minmax_normalize(&once).unwrap();
            prop_assert_eq!(once.values(), twice.values());
            Ok(())
        },
    );
}

pub fn minmax_ignores_positive_affine_maps() {
    let s = (
        prop::collection::vec(-10.0f64..10.0, 2..40),
        0.5f64..50.0,
        -50.0f64..50.0,
    );
    check("minmax affine invariance", s, |(v, a, b)| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi - lo > 1e-2);
        let base = minmax_normalize(&scores(v.clone())).unwrap();
        let moved = minmax_normalize(&scores(v.iter().map(|x| a * x + b).collect())).unwrap();
        for (x, y) in base.values().iter().zip(moved.values()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
        Ok(())
    });
}

pub fn mean_std_under_shift() {
    let s = (
        prop::collection::vec(-100.0f64..100.0, 1..50),
        -100.0f64..100.0,
    );
    check("mean_std shift", s, |(v, c)| {
        let (m0, s0) = mean_std(&scores(v.clone()));
        let (m1, s1) = mean_std(&scores(v.iter().map(|x| x + c).collect()));
        prop_assert!((m1 - (m0 + c)).abs() <= 1e-9);
        prop_assert!((s1 - s0).abs() <= 1e-9);
        prop_assert!(s0 >= 0.0);
        Ok(())
    });
}

pub fn pipeline_scores_are_unit_range() {
    check("pipeline outputs in [0,1]", any::<u64>(), |seed| {
        let inst = random_instance(seed);
        let cfg = pruner_config(&inst.config);
        for r in run_pruner(cfg, inst.grid, &inst.images, &inst.features, &inst.text) {
            for v in [&r.e, &r.s_sem, &r.s_temp] {
                prop_assert!(v.values().iter().all(|x| (0.0..=1.0).contains(x)));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- geometry

pub fn constant_images_have_no_edges() {
    let s = (3usize..12, 3usize..12, any::<[u8; 3]>());
    check("constant image zero gradient", s, |(w, h, rgb)| {
        let img = RgbImage::filled(w, h, rgb).unwrap();
        let g = sobel_gradients(&tokprune::geometry::to_grayscale(&img)).unwrap();
        prop_assert!(g.gx.values().iter().all(|&v| v == 0.0));
        prop_assert!(g.gy.values().iter().all(|&v| v == 0.0));
        Ok(())
    });
}

pub fn edge_magnitude_ignores_negation() {
    let s = (3usize..10, 3usize..10)
        .prop_flat_map(|(w, h)| (Just((w, h)), prop::collection::vec(0u8..=255, w * h)));
    check("negation invariance", s, |((w, h), px)| {
        let img = GrayImage::new(w, h, px.iter().map(|&p| f64::from(p)).collect()).unwrap();
        let neg = GrayImage::new(w, h, px.iter().map(|&p| 255.0 - f64::from(p)).collect()).unwrap();
        let a = edge_magnitude(&sobel_gradients(&img).unwrap()).unwrap();
        let b = edge_magnitude(&sobel_gradients(&neg).unwrap()).unwrap();
        prop_assert_eq!(a.values(), b.values());
        Ok(())
    });
}

pub fn geometric_prior_commutes_with_mirroring() {
    let s = (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(r, c, p)| {
        let (w, h) = (c * p.max(3), r * p.max(3));
        (
            Just((r, c, p.max(3), w, h)),
            prop::collection::vec(any::<u8>(), w * h * 3),
        )
    });
    check("mirror equivariance", s, |((r, c, p, w, h), px)| {
        let grid = TokenGrid::new(r, c, p).unwrap();
        let flip = |f: &dyn Fn(usize, usize) -> usize| {
            let mut out = vec![0u8; w * h * 3];
            for y in 0..h {
                for x in 0..w {
                    let src = f(x, y) * 3;
                    out[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&px[src..src + 3]);
                }
            }
            RgbImage::new(w, h, out).unwrap()
        };
        let e = geometric_prior(&RgbImage::new(w, h, px.clone()).unwrap(), &grid).unwrap();
        let ev = geometric_prior(&flip(&|x, y| (h - 1 - y) * w + x), &grid).unwrap();
        let eh = geometric_prior(&flip(&|x, y| y * w + (w - 1 - x)), &grid).unwrap();
        for i in 0..r {
            for j in 0..c {
                prop_assert_eq!(ev.values()[(r - 1 - i) * c + j], e.values()[i * c + j]);
                prop_assert_eq!(eh.values()[i * c + (c - 1 - j)], e.values()[i * c + j]);
            }
        }
        Ok(())
    });
}

pub fn patch_means_preserve_mass() {
    let s = (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(r, c, p)| {
        (
            Just((r, c, p)),
            prop::collection::vec(0.0f64..1000.0, r * c * p * p),
        )
    });
    check("aggregate mass", s, |((r, c, p), v)| {
        let grid = TokenGrid::new(r, c, p).unwrap();
        let total: f64 = v.iter().sum();
        let edges = GrayImage::new(c * p, r * p, v).unwrap();
        let e = aggregate_patches(&edges, &grid).unwrap();
        let mass: f64 = e.values().iter().map(|x| x * (p * p) as f64).sum();
        prop_assert!((mass - total).abs() <= 1e-9 * total.max(1.0));
        Ok(())
    });
}

pub fn geometric_prior_spans_unit_range() {
    let s = (1usize..6, 1usize..6, 3usize..6).prop_flat_map(|(r, c, p)| {
        (
            Just(TokenGrid::new(r, c, p).unwrap()),
            rgb_image(c * p, r * p),
        )
    });
    check("geometric prior range", s, |(grid, img)| {
        let e = geometric_prior(&img, &grid).unwrap();
        let raw = aggregate_patches(
            &edge_magnitude(&sobel_gradients(&tokprune::geometry::to_grayscale(&img)).unwrap())
                .unwrap(),
            &grid,
        )
        .unwrap();
        let v = e.values();
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        let constant = raw.values().iter().all(|&x| x == raw.values()[0]);
        if !constant {
            prop_assert!(v.contains(&0.0) && v.contains(&1.0));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- semantic

pub fn softmax_sums_to_one_and_commutes_with_permutation() {
    let s = (1usize..20, 1usize..8).prop_flat_map(|(n, d)| {
        (
            Just((n, d)),
            prop::collection::vec(-5.0f64..5.0, n * d),
            prop::collection::vec(-1.0f64..1.0, d),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            prop_oneof![Just(0.01), Just(0.1), Just(1.0)],
        )
    });
    check(
        "softmax sum and equivariance",
        s,
        |((n, d), v, t, perm, tau)| {
            let g = line(n);
            let text = TextEmbedding::new(t).unwrap();
            let p = cross_modal_softmax(&features(g, d, v.clone()), &text, tau).unwrap();
            prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let permuted: Vec<f64> = perm
                .iter()
                .flat_map(|&i| v[i * d..(i + 1) * d].to_vec())
                .collect();
            let q = cross_modal_softmax(&features(g, d, permuted), &text, tau).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((q.get(k) - p.get(i)).abs() <= 1e-9);
            }
            Ok(())
        },
    );
}

pub fn pooling_is_bounded_and_keeps_interior_mass() {
    let s = (
        1usize..8,
        1usize..8,
        prop_oneof![Just(1usize), Just(3), Just(5)],
    )
        .prop_flat_map(|(r, c, w)| (Just((r, c, w)), prop::collection::vec(0.0f64..1.0, r * c)));
    check("avg pool bounds and mass", s, |((r, c, w), v)| {
        let g = TokenGrid::new(r, c, 1).unwrap();
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        let out = spatial_avg_pool(&ScoreVector::new(g, v.clone()).unwrap(), w).unwrap();
        for &x in out.values() {
            prop_assert!(x <= hi + 1e-12 && x >= lo - 1e-12);
        }
        // zero a border ring of width w/2: mass must then be preserved exactly up to rounding
        let h = w / 2;
        let interior: Vec<f64> = (0..r * c)
            .map(|i| {
                let (y, x) = (i / c, i % c);
                if y < h || x < h || y + h >= r || x + h >= c {
                    0.0
                } else {
                    v[i]
                }
            })
            .collect();
        let before: f64 = interior.iter().sum();
        let after: f64 = spatial_avg_pool(&ScoreVector::new(g, interior).unwrap(), w)
            .unwrap()
            .values()
            .iter()
            .sum();
        prop_assert!((before - after).abs() <= 1e-9);
        Ok(())
    });
}

pub fn semantic_prior_ignores_feature_scale() {
    let s = (grid_dims(), 1usize..8).prop_flat_map(|((r, c), d)| {
        (
            Just((r, c, d)),
            prop::collection::vec(-3.0f64..3.0, r * c * d),
            prop::collection::vec(-1.0f64..1.0, d),
            0.01f64..100.0,
        )
    });
    check("semantic scale invariance", s, |((r, c, d), v, t, a)| {
        let g = TokenGrid::new(r, c, 1).unwrap();
        let text = TextEmbedding::new(t).unwrap();
        let base = semantic_prior(&features(g, d, v.clone()), &text, 0.01, 3).unwrap();
        let scaled = semantic_prior(
            &features(g, d, v.iter().map(|x| x * a).collect()),
            &text,
            0.01,
            3,
        )
        .unwrap();
        for (x, y) in base.values().iter().zip(scaled.values()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- motion

pub fn linear_drift_is_rejected() {
    let s = (grid_dims(), 1usize..16, 3usize..9).prop_flat_map(|((r, c), d, t)| {
        let n = r * c * d;
        (
            Just((r, c, d, t)),
            prop::collection::vec(dyadic(-4096, 4096), n),
            prop::collection::vec(dyadic(-256, 256), n),
        )
    });
    check("linear drift rejection", s, |((r, c, d, t), a, b)| {
        let g = TokenGrid::new(r, c, 1).unwrap();
        let mut st = MotionState::new();
        for step in 0..t {
            let x: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + step as f64 * b).collect();
            let s = motion_prior(&features(g, d, x), &mut st, 0.7, 1.0).unwrap();
            prop_assert!(s.values().iter().all(|&v| v == 0.0), "step {}", step);
        }
        Ok(())
    });
}

pub fn closing_is_idempotent() {
    let s = grid_dims()
        .prop_flat_map(|(r, c)| (Just((r, c)), prop::collection::vec(-5.0f64..5.0, r * c)));
    check("closing idempotent", s, |((r, c), v)| {
        let m = ScalarGrid::new(r, c, v).unwrap();
        let once = close(&m);
        let twice = close(&once);
        prop_assert_eq!(twice.data(), once.data());
        Ok(())
    });
}

pub fn gaussian_preserves_constants() {
    let s = (grid_dims(), -1e3f64..1e3, 0.1f64..3.0);
    check("gaussian constant", s, |((r, c), k, sigma)| {
        let m = ScalarGrid::new(r, c, vec![k; r * c]).unwrap();
        let out = gaussian_smooth(&m, sigma).unwrap();
        prop_assert!(out
            .data()
            .iter()
            .all(|v| (v - k).abs() <= 1e-9 * k.abs().max(1.0)));
        Ok(())
    });
}

pub fn motion_state_is_deterministic() {
    let s = (grid_dims(), 1usize..6, 1usize..8).prop_flat_map(|((r, c), d, t)| {
        (
            Just((r, c, d)),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, r * c * d), t),
        )
    });
    check("motion determinism", s, |((r, c, d), seq)| {
        let g = TokenGrid::new(r, c, 1).unwrap();
        let run = || {
            let mut st = MotionState::new();
            seq.iter()
                .map(|x| motion_prior(&features(g, d, x.clone()), &mut st, 0.7, 1.0).unwrap())
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
        Ok(())
    });
}

// ---------------------------------------------------------------- strategy

pub fn gate_is_strict() {
    let s = (0.0f64..=1.0, 0.0f64..=1.0, any::<bool>());
    check("mode gate", s, |(iou, theta, equal)| {
        let theta = if equal { iou } else { theta };
        let d = ModeDecision::gate(iou, theta);
        prop_assert_eq!(d.mode == Mode::Aggressive, iou > theta);
        prop_assert_eq!(d.iou, iou);
        Ok(())
    });
}

pub fn binarize_shrinks_with_k() {
    let s = (
        prop::collection::vec(0.0f64..1.0, 1..50),
        -2.0f64..2.0,
        0.0f64..2.0,
    );
    check("monotone shrinkage", s, |(v, k, dk)| {
        let sv = scores(v);
        let lo = binarize_adaptive(&sv, k);
        let hi = binarize_adaptive(&sv, k + dk);
        for (a, b) in lo.bits().iter().zip(hi.bits()) {
            prop_assert!(!*b || *a);
        }
        Ok(())
    });
}

fn cfg_with(k: f64, theta: f64) -> StrategyConfig {
    StrategyConfig {
        k,
        theta_iou: theta,
        ..StrategyConfig::default()
    }
}

pub fn aggressive_set_is_bracketed() {
    let s = (score_pair(), -0.5f64..1.0, 0.5f64..4.0);
    check("aggressive bounds", s, |((sem, temp), k, r)| {
        let cfg = StrategyConfig {
            radius_r: r,
            ..cfg_with(k, 0.0)
        };
        let (kept, d) = retention_set(&sem, &temp, &cfg).unwrap();
        if d.mode == Mode::Aggressive {
            let bs = binarize_adaptive(&sem, k);
            let bt = binarize_adaptive(&temp, k);
            for i in 0..sem.len() {
                if bt.get(i) {
                    prop_assert!(kept.contains(i));
                }
                if kept.contains(i) {
                    prop_assert!(bs.get(i) || bt.get(i));
                }
            }
        }
        Ok(())
    });
}

pub fn conservative_set_keeps_both_masks() {
    let s = (score_pair(), -0.5f64..1.5, -2.0f64..-0.01);
    check("conservative superset", s, |((sem, temp), k, k_bg)| {
        prop_assume!(k >= k_bg);
        let cfg = StrategyConfig {
            k_bg,
            ..cfg_with(k, 1.0)
        };
        let (kept, d) = retention_set(&sem, &temp, &cfg).unwrap();
        prop_assert_eq!(d.mode, Mode::Conservative);
        let bs = binarize_adaptive(&sem, k);
        let bt = binarize_adaptive(&temp, k);
        for i in 0..sem.len() {
            if bs.get(i) || bt.get(i) {
                prop_assert!(kept.contains(i));
            }
        }
        Ok(())
    });
}

pub fn iou_is_symmetric_and_one_only_on_equality() {
    check("iou symmetry", mask_pair(), |(a, b)| {
        let g = line(a.len());
        let ma = BinaryMask::new(g, a.clone()).unwrap();
        let mb = BinaryMask::new(g, b.clone()).unwrap();
        let x = mask_iou(&ma, &mb).unwrap();
        prop_assert_eq!(x, mask_iou(&mb, &ma).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x == 1.0, a == b && a.iter().any(|&v| v));
        prop_assert_eq!(mask_iou(&ma, &ma).unwrap() == 1.0, !ma.is_empty());
        Ok(())
    });
}

// ---------------------------------------------------------------- selection

fn selection_case() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..3.0, n),
            prop::collection::vec(0..n, 0..n),
        )
    })
}

fn sel(theta: f64, budget: Option<usize>, policy: BudgetPolicy) -> SelectionConfig {
    SelectionConfig {
        w_edge: 1.0,
        theta_geo: theta,
        budget,
        budget_policy: policy,
    }
}

pub fn lower_theta_geo_never_drops() {
    let s = (selection_case(), -1.0f64..4.0, 0.0f64..2.0);
    check("theta_geo monotone", s, |((v, base), theta, dt)| {
        let sv = scores(v);
        let base = IndexSet::from_unsorted(base, &sv.grid()).unwrap();
        let hi = gather_final(&base, &sv, &sel(theta, None, BudgetPolicy::Off)).unwrap();
        let lo = gather_final(&base, &sv, &sel(theta - dt, None, BudgetPolicy::Off)).unwrap();
        for i in hi.iter() {
            prop_assert!(lo.contains(i));
        }
        for i in base.iter() {
            prop_assert!(hi.contains(i));
        }
        Ok(())
    });
}

pub fn budget_policies_respect_budget() {
    let s = selection_case().prop_flat_map(|(v, b)| {
        let n = v.len();
        (Just(v), Just(b), 1..=n, -1.0f64..4.0)
    });
    check("budget sizes", s, |(v, base, budget, theta)| {
        let sv = scores(v);
        let base = IndexSet::from_unsorted(base, &sv.grid()).unwrap();
        let exact =
            gather_final(&base, &sv, &sel(theta, Some(budget), BudgetPolicy::Exact)).unwrap();
        prop_assert_eq!(exact.len(), budget);
        let cap =
            gather_final(&base, &sv, &sel(theta, Some(budget), BudgetPolicy::CapOnly)).unwrap();
        prop_assert!(cap.len() <= budget);
        Ok(())
    });
}

pub fn priority_is_linear_in_edges() {
    let s = (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            0.0f64..3.0,
        )
    });
    check("priority linearity", s, |(a, b, e, w)| {
        let n = a.len();
        let zero = scores(vec![0.0; n]);
        let once = priority_score(&zero, &zero, &scores(e.clone()), w).unwrap();
        let twice = priority_score(
            &zero,
            &zero,
            &scores(e.iter().map(|x| 2.0 * x).collect()),
            w,
        )
        .unwrap();
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert_eq!(2.0 * x, *y);
        }
        let full = priority_score(
            &scores(a.clone()),
            &scores(b.clone()),
            &scores(e.clone()),
            w,
        )
        .unwrap();
        for i in 0..n {
            prop_assert!((full.get(i) - (a[i] + b[i] + w * e[i])).abs() <= 1e-12);
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- pipeline

pub fn pipeline_is_deterministic() {
    check("pipeline determinism", any::<u64>(), |seed| {
        let inst = random_instance(seed);
        let cfg = pruner_config(&inst.config);
        let a = run_pruner(cfg, inst.grid, &inst.images, &inst.features, &inst.text);
        let b = run_pruner(cfg, inst.grid, &inst.images, &inst.features, &inst.text);
        prop_assert_eq!(&a, &b);
        for r in &a {
            prop_assert_eq!(r.retention, r.kept.len() as f64 / inst.grid.total() as f64);
            prop_assert_eq!(
                r.mode.mode == Mode::Aggressive,
                r.mode.iou > inst.config.theta_iou
            );
        }
        Ok(())
    });
}

pub fn failed_steps_leave_no_trace() {
    check(
        "no mutation on error",
        (any::<u64>(), 0usize..3),
        |(seed, bad_kind)| {
            let inst = random_instance(seed);
            prop_assume!(inst.images.len() >= 2);
            let cfg = pruner_config(&inst.config);
            let g = inst.grid;
            let mut clean = Pruner::new(cfg, g).unwrap();
            let mut dirty = Pruner::new(cfg, g).unwrap();
            let bad_feats = FeatureMatrix::new(
                g,
                inst.features[0].dim() + 1,
                vec![0.0; g.total() * (inst.features[0].dim() + 1)],
            )
            .unwrap();
            let bad_img =
                RgbImage::filled(g.image_width() + 1, g.image_height(), [1, 2, 3]).unwrap();
            let bad_text = TextEmbedding::new(vec![1.0; inst.text.dim() + 1]).unwrap();
            for (t, (img, f)) in inst.images.iter().zip(&inst.features).enumerate() {
                if t == 1 {
                    let err = match bad_kind {
                        0 => dirty.step(img, &bad_feats, &inst.text),
                        1 => dirty.step(&bad_img, f, &inst.text),
                        _ => dirty.step(img, f, &bad_text),
                    };
                    prop_assert!(err.is_err());
                }
                prop_assert_eq!(
                    clean.step(img, f, &inst.text).unwrap(),
                    dirty.step(img, f, &inst.text).unwrap()
                );
            }
            Ok(())
        },
    );
}

pub fn pipeline_matches_oracle() {
    check("oracle equivalence", any::<u64>(), |seed| {
        let inst = random_instance(seed);
        let frames: Vec<_> = inst
            .images
            .iter()
            .zip(&inst.features)
            .map(|(i, f)| super::oracle_frame(i, f))
            .collect();
        let g = inst.grid;
        let want = run_oracle(
            &frames,
            inst.text.values(),
            g.rows(),
            g.cols(),
            g.patch_size(),
            &inst.config,
        );
        let got = run_pruner(
            pruner_config(&inst.config),
            g,
            &inst.images,
            &inst.features,
            &inst.text,
        );
        for (a, b) in got.iter().zip(&want) {
            prop_assert_eq!(a.kept.as_slice(), &b.kept[..]);
            prop_assert_eq!(a.mode.mode == Mode::Aggressive, b.aggressive);
            for (x, y) in [
                (&a.e, &b.e),
                (&a.s_sem, &b.s_sem),
                (&a.s_temp, &b.s_temp),
                (&a.score, &b.score),
            ] {
                for (u, v) in x.values().iter().zip(y.iter()) {
                    prop_assert!((u - v).abs() <= 1e-9);
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- simulator

fn spec_strategy(scenario: Scenario) -> impl Strategy<Value = EpisodeSpec> {
    (
        any::<u64>(),
        4usize..=8,
        4usize..=8,
        1usize..=4,
        2usize..=16,
        4usize..=10,
    )
        .prop_map(move |(seed, r, c, p, d, t)| {
            let p = p.max(1);
            EpisodeSpec::new(seed, t, TokenGrid::new(r, c, p).unwrap(), d, scenario)
        })
}

pub fn episodes_are_reproducible() {
    let s = (
        prop_oneof![
            Just(Scenario::Static),
            Just(Scenario::LinearPan),
            Just(Scenario::Approach)
        ],
        any::<u64>(),
        0u32..4,
    )
        .prop_flat_map(|(sc, seed, noise)| {
            spec_strategy(sc).prop_map(move |mut s| {
                s.seed = seed;
                s.noise_scale = f64::from(noise) * 0.05;
                s
            })
        });
    check("episode determinism", s, |spec| {
        let a = sim::generate(&spec).unwrap();
        let b = sim::generate(&spec).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    });
}

pub fn linear_pan_has_no_motion() {
    check("linear pan", spec_strategy(Scenario::LinearPan), |spec| {
        let ep = sim::generate(&spec).unwrap();
        let res = run_pruner(
            PrunerConfig::default(),
            ep.grid,
            &ep.images,
            &ep.features,
            &ep.text,
        );
        for r in &res {
            prop_assert!(r.s_temp.values().iter().all(|&v| v == 0.0));
            prop_assert_eq!(r.mode.mode, Mode::Conservative);
        }
        Ok(())
    });
}

pub fn approach_keeps_the_target() {
    check(
        "approach recall",
        spec_strategy(Scenario::Approach),
        |spec| {
            let ep = sim::generate(&spec).unwrap();
            let res = run_pruner(
                PrunerConfig::default(),
                ep.grid,
                &ep.images,
                &ep.features,
                &ep.text,
            );
            for (t, (r, truth)) in res.iter().zip(&ep.truth).enumerate() {
                prop_assert_eq!(sim::target_recall(r, truth), 1.0, "step {}", t);
            }
            Ok(())
        },
    );
}

// ---------------------------------------------------------------- formats and CLI

pub fn tensors_round_trip() {
    let s = prop::collection::vec(1usize..5, 1..4).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        (
            Just(dims),
            prop::collection::vec(any::<u32>().prop_map(f32::from_bits), n),
        )
    });
    check("iapt round trip", s, |(dims, data)| {
        let t = Tensor::new(dims, data).unwrap();
        let bytes = tensor::encode_tensor(&t);
        let back = tensor::decode_tensor(&bytes).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(tensor::encode_tensor(&back), bytes);
        Ok(())
    });
}

pub fn netpbm_round_trips() {
    let s = (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            rgb_image(w, h),
            prop::collection::vec(any::<u8>(), w * h).prop_map(move |v| (w, h, v)),
        )
    });
    check("netpbm round trip", s, |(rgb, (w, h, g))| {
        let bytes = netpbm::encode_ppm(&rgb);
        prop_assert_eq!(netpbm::decode_image(&bytes).unwrap(), Image::Rgb(rgb));
        let gray = GrayImage::new(w, h, g.iter().map(|&v| f64::from(v)).collect()).unwrap();
        let bytes = netpbm::encode_pgm(&gray);
        let back = netpbm::decode_image(&bytes).unwrap();
        prop_assert_eq!(&back, &Image::Gray(gray));
        let Image::Gray(back) = back else {
            unreachable!()
        };
        prop_assert_eq!(netpbm::encode_pgm(&back), bytes);
        Ok(())
    });
}

pub fn manifests_and_traces_round_trip() {
    let s = (any::<u64>(), 1usize..30);
    check("manifest and trace round trip", s, |(seed, steps)| {
        let inst = random_instance(seed);
        let cfg = pruner_config(&inst.config);
        let m = RunManifest::with_defaults(cfg, inst.grid, steps, seed % 2 == 0);
        let text = m.to_text();
        let back = RunManifest::parse(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_text(), text);

        let res = run_pruner(cfg, inst.grid, &inst.images, &inst.features, &inst.text);
        let rows = tokprune::cli::trace_rows(&res, None);
        let csv = trace::trace_to_csv(&rows);
        let parsed = trace::parse_trace(&csv).unwrap();
        prop_assert_eq!(&parsed, &rows);
        for (i, r) in parsed.iter().enumerate() {
            prop_assert_eq!(r.step, i as u64);
        }
        let truth: Vec<sim::StepTruth> = (0..steps)
            .map(|t| sim::StepTruth {
                target: vec![t % inst.grid.total()],
                mover: (0..inst.grid.total())
                    .filter(|i| (i + t) % 3 == 0)
                    .collect(),
            })
            .collect();
        let back = manifest::parse_truth(&manifest::truth_to_text(&truth), &inst.grid).unwrap();
        prop_assert_eq!(back, truth);
        Ok(())
    });
}

fn tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn cli_outputs_are_pure() {
    let s = (
        prop_oneof![Just("static"), Just("linearpan"), Just("approach")],
        any::<u64>(),
        4usize..=6,
        1usize..=3,
        2usize..=6,
        4usize..=6,
        any::<bool>(),
    );
    check("cli purity", s, |(scenario, seed, g, p, d, t, masks)| {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        let run = |args: Vec<String>| {
            let mut o = Vec::new();
            let mut e = Vec::new();
            let code = tokprune::cli::run(args, &mut o, &mut e);
            (code, o, e)
        };
        let grid = format!("{g}x{g}");
        let mut outs = Vec::new();
        for k in 0..2 {
            let ep = root.join(format!("ep{k}"));
            let gen: Vec<String> = [
                "tokprune",
                "gen",
                "--scenario",
                scenario,
                "--seed",
                &seed.to_string(),
                "--grid",
                &grid,
                "--patch",
                &p.to_string(),
                "--dim",
                &d.to_string(),
                "--steps",
                &t.to_string(),
                "--out",
                ep.to_str().unwrap(),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let (code, _, err) = run(gen);
            prop_assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
            let out = root.join(format!("out{k}"));
            let mut prune = vec![
                "tokprune".to_string(),
                "prune".into(),
                "--manifest".into(),
                ep.join("manifest.txt").to_string_lossy().into_owned(),
                "--out".into(),
                out.to_string_lossy().into_owned(),
            ];
            if masks {
                prune.push("--masks".into());
            }
            let (code, stdout, err) = run(prune);
            prop_assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
            outs.push((tree(&ep), tree(&out), stdout));
        }
        prop_assert!(outs[0] == outs[1]);
        Ok(())
    });
}

/// Every suite, in a fixed order.
pub const SUITES: &[(&str, fn())] = &[
    ("minmax_is_idempotent", minmax_is_idempotent),
    (
        "minmax_ignores_positive_affine_maps",
        minmax_ignores_positive_affine_maps,
    ),
    ("mean_std_under_shift", mean_std_under_shift),
    (
        "pipeline_scores_are_unit_range",
        pipeline_scores_are_unit_range,
    ),
    (
        "constant_images_have_no_edges",
        constant_images_have_no_edges,
    ),
    (
        "edge_magnitude_ignores_negation",
        edge_magnitude_ignores_negation,
    ),
    (
        "geometric_prior_commutes_with_mirroring",
        geometric_prior_commutes_with_mirroring,
    ),
    ("patch_means_preserve_mass", patch_means_preserve_mass),
    (
        "geometric_prior_spans_unit_range",
        geometric_prior_spans_unit_range,
    ),
    (
        "softmax_sums_to_one_and_commutes_with_permutation",
        softmax_sums_to_one_and_commutes_with_permutation,
    ),
    (
        "pooling_is_bounded_and_keeps_interior_mass",
        pooling_is_bounded_and_keeps_interior_mass,
    ),
    (
        "semantic_prior_ignores_feature_scale",
        semantic_prior_ignores_feature_scale,
    ),
    ("linear_drift_is_rejected", linear_drift_is_rejected),
    ("closing_is_idempotent", closing_is_idempotent),
    ("gaussian_preserves_constants", gaussian_preserves_constants),
    (
        "motion_state_is_deterministic",
        motion_state_is_deterministic,
    ),
    ("gate_is_strict", gate_is_strict),
    ("binarize_shrinks_with_k", binarize_shrinks_with_k),
    ("aggressive_set_is_bracketed", aggressive_set_is_bracketed),
    (
        "conservative_set_keeps_both_masks",
        conservative_set_keeps_both_masks,
    ),
    (
        "iou_is_symmetric_and_one_only_on_equality",
        iou_is_symmetric_and_one_only_on_equality,
    ),
    ("lower_theta_geo_never_drops", lower_theta_geo_never_drops),
    (
        "budget_policies_respect_budget",
        budget_policies_respect_budget,
    ),
    ("priority_is_linear_in_edges", priority_is_linear_in_edges),
    ("pipeline_is_deterministic", pipeline_is_deterministic),
    ("failed_steps_leave_no_trace", failed_steps_leave_no_trace),
    ("pipeline_matches_oracle", pipeline_matches_oracle),
    ("episodes_are_reproducible", episodes_are_reproducible),
    ("linear_pan_has_no_motion", linear_pan_has_no_motion),
    ("approach_keeps_the_target", approach_keeps_the_target),
    ("tensors_round_trip", tensors_round_trip),
    ("netpbm_round_trips", netpbm_round_trips),
    (
        "manifests_and_traces_round_trip",
        manifests_and_traces_round_trip,
    ),
    ("cli_outputs_are_pure", cli_outputs_are_pure),
];
