//! Property tests for invariants that must hold on any input.

use proptest::prelude::*;

use satsr_core::datasetio::{split, tile, SplitManifest, TileConfig};
use satsr_core::deteval::{
    average_precision, class_curves, evaluate, match_detections, sigma_diff, BBox, Category, Detection, EvalConfig,
    GroundTruthBox,
};
use satsr_core::raster::{Bands, Raster};
use satsr_core::sensorsim::{degrade, SensorSpec};
use satsr_core::synthetic;

fn arb_box() -> impl Strategy<Value = BBox> {
    (0u32..40, 0u32..40, 1u32..12, 1u32..12)
        .prop_map(|(x, y, w, h)| BBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64).unwrap())
}

fn arb_category() -> impl Strategy<Value = Category> {
    prop::sample::select(Category::ALL.to_vec())
}

fn arb_gts() -> impl Strategy<Value = Vec<GroundTruthBox>> {
    prop::collection::vec((0usize..3, arb_category(), arb_box()), 1..12).prop_map(|v| {
        v.into_iter()
            .map(|(img, c, b)| GroundTruthBox::new(format!("i{img}"), c, b))
            .collect()
    })
}

fn arb_dets() -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec((0usize..3, arb_category(), arb_box(), 0u32..=100), 0..16).prop_map(|v| {
        v.into_iter()
            .map(|(img, c, b, conf)| Detection::new(format!("i{img}"), c, b, conf as f64 / 100.0).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_in_unit_interval(dets in arb_dets(), gts in arb_gts()) {
        let report = evaluate(&dets, &gts, 0).unwrap();
        for ap in report.per_class_ap.values() {
            prop_assert!((0.0..=1.0).contains(ap));
        }
        prop_assert!((0.0..=1.0).contains(&report.map_value));
        prop_assert!(report.sigma >= 0.0);
    }

    #[test]
    fn removing_isolated_false_positive_never_lowers_ap(
        dets in arb_dets(),
        gts in arb_gts(),
        class in arb_category(),
        conf in 0u32..=100,
    ) {
        let cfg = EvalConfig::default();
        let far = BBox::new(1000.0, 1000.0, 1010.0, 1010.0).unwrap();
        let mut with_fp = dets.clone();
        with_fp.push(Detection::new("i0", class, far, conf as f64 / 100.0).unwrap());
        let before = class_curves(&with_fp, &gts, &cfg);
        let after = class_curves(&dets, &gts, &cfg);
        for (c, curve) in &after {
            let a = average_precision(curve).unwrap();
            let b = average_precision(&before[c]).unwrap();
            prop_assert!(a >= b, "{c:?}: {a} < {b}");
        }
    }

    #[test]
    fn map_invariant_under_class_relabelling(
        dets in arb_dets(),
        gts in arb_gts(),
        perm in Just(Category::ALL.to_vec()).prop_shuffle(),
    ) {
        let relabel = |c: Category| perm[Category::ALL.iter().position(|&x| x == c).unwrap()];
        let dets2: Vec<Detection> = dets
            .iter()
            .map(|d| Detection::new(d.image_id.clone(), relabel(d.category), d.bbox, d.confidence()).unwrap())
            .collect();
        let gts2: Vec<GroundTruthBox> = gts
            .iter()
            .map(|g| GroundTruthBox::new(g.image_id.clone(), relabel(g.category), g.bbox))
            .collect();
        let a = evaluate(&dets, &gts, 0).unwrap();
        let b = evaluate(&dets2, &gts2, 0).unwrap();
        prop_assert!((a.map_value - b.map_value).abs() < 1e-12);
        for (c, ap) in &a.per_class_ap {
            prop_assert_eq!(*ap, b.per_class_ap[&relabel(*c)]);
        }
    }

    #[test]
    fn matching_ignores_input_order(
        boxes in prop::collection::vec((arb_box(), 0u32..=20), 0..8),
        gt_boxes in prop::collection::vec(arb_box(), 0..6),
        seed in any::<u64>(),
    ) {
        let dets: Vec<Detection> = boxes
            .iter()
            .map(|(b, c)| Detection::new("a", Category::Boat, *b, *c as f64 / 20.0).unwrap())
            .collect();
        let gts: Vec<GroundTruthBox> = gt_boxes.iter().map(|b| GroundTruthBox::new("a", Category::Boat, *b)).collect();
        let base = match_detections(&dets, &gts, 0.25);
        prop_assert_eq!(base.tp + base.fp, dets.len() as u64);
        prop_assert_eq!(base.tp + base.fn_, gts.len() as u64);

        let (mut d2, mut g2) = (dets.clone(), gts.clone());
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(d2.as_mut_slice(), &mut rng);
        rand::seq::SliceRandom::shuffle(g2.as_mut_slice(), &mut rng);
        prop_assert_eq!(match_detections(&d2, &g2, 0.25), base);
    }

    #[test]
    fn sigma_diff_is_antisymmetric(
        y1 in 0.0f64..1.0, s1 in 0.0f64..0.1, y2 in 0.0f64..1.0, s2 in 0.0f64..0.1,
    ) {
        let ab = sigma_diff(y1, s1, y2, s2).unwrap();
        let ba = sigma_diff(y2, s2, y1, s1).unwrap();
        match (ab.sigma_diff, ba.sigma_diff) {
            (Some(a), Some(b)) => prop_assert_eq!(a, -b),
            (None, None) => {}
            other => prop_assert!(false, "asymmetric definedness {other:?}"),
        }
        prop_assert_eq!(ab.sigma_tot, ba.sigma_tot);
    }

    #[test]
    fn split_partitions_items(n in 1usize..200, ratio in 0.01f64..0.99, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (train, test) = split(&items, ratio, seed).unwrap();
        prop_assert_eq!(train.len(), (ratio * n as f64).round() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items);

        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let m = SplitManifest::from_ids(&ids, ratio, seed).unwrap();
        prop_assert_eq!(m.train.len() + m.test.len(), n);
        prop_assert!(m.train.iter().all(|id| !m.test.contains(id)));
    }

    #[test]
    fn tiles_partition_image_and_box_area(
        nx in 1usize..4,
        ny in 1usize..4,
        seed in any::<u64>(),
        raw in prop::collection::vec((0u32..1000, 0u32..1000, 1u32..60, 1u32..60), 0..10),
    ) {
        let size = 32;
        let (w, h) = (nx * size, ny * size);
        let img = synthetic::noise_image(w, h, Bands::Luma, seed);
        let boxes: Vec<GroundTruthBox> = raw
            .iter()
            .map(|&(x, y, bw, bh)| {
                let x0 = (x as usize % (w - 1)) as f64;
                let y0 = (y as usize % (h - 1)) as f64;
                let b = BBox::new(x0, y0, (x0 + bw as f64).min(w as f64), (y0 + bh as f64).min(h as f64)).unwrap();
                GroundTruthBox::new("p", Category::Boat, b)
            })
            .collect();
        let cfg = TileConfig { size, overlap: 0, min_retained: 0.0 };
        let tiles = tile(&img, "p", &boxes, &cfg).unwrap();
        prop_assert_eq!(tiles.len(), nx * ny);

        let mut covered = vec![0u8; w * h];
        for t in &tiles {
            prop_assert!(!t.padded);
            for y in 0..size {
                for x in 0..size {
                    let (px, py) = (t.origin_x + x, t.origin_y + y);
                    covered[py * w + px] += 1;
                    prop_assert_eq!(t.raster.get(x, y, 0), img.get(px, py, 0));
                }
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1));

        let total: f64 = boxes.iter().map(|b| b.bbox.area()).sum();
        let clipped: f64 = tiles.iter().flat_map(|t| &t.boxes).map(|b| b.bbox.area()).sum();
        prop_assert!((total - clipped).abs() < 1e-9 * total.max(1.0), "{total} vs {clipped}");
    }

    #[test]
    fn degrade_stays_within_input_range(seed in any::<u64>(), factor in prop::sample::select(vec![2usize, 4, 8])) {
        let img = synthetic::noise_image(64, 64, Bands::Rgb, seed).to_real();
        let out = degrade(&img, &SensorSpec::new(30.0, 30.0 * factor as f64).unwrap()).unwrap();
        prop_assert_eq!((out.width(), out.height()), (64 / factor, 64 / factor));
        for b in 0..3 {
            let (lo, hi) = plane_range(&img.plane(b));
            let (olo, ohi) = plane_range(&out.plane(b));
            prop_assert!(olo >= lo - 1e-9 && ohi <= hi + 1e-9);
        }
    }
}

fn plane_range(p: &[f64]) -> (f64, f64) {
    p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

#[test]
fn constant_raster_survives_degradation_exactly() {
    let img = Raster::filled(48, 48, Bands::Luma, 42.5).unwrap();
    let out = degrade(&img, &SensorSpec::new(30.0, 120.0).unwrap()).unwrap();
    assert!(out.to_real_vec().iter().all(|&v| v == 42.5));
}
