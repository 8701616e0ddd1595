use forcecast::config::RunConfig;
use forcecast::encoders::FeatureVector;
use forcecast::eval::{mae, pearson_r};
use forcecast::geometry::{downsample_uniform, normalize_unit_sphere, prepare_cloud, unproject, CameraIntrinsics, PointCloud};
use forcecast::io::manifest::parse_manifest;
use forcecast::io::DepthImage;
use forcecast::nn::{Checkpoint, Linear, Params};
use forcecast::tcn::{build_windows, window_centers};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn depth_image() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
        let px = prop_oneof![1 => Just(0.0), 6 => 200.0f64..3000.0];
        (Just(w), Just(h), proptest::collection::vec(px, w * h))
    })
}

fn intrinsics() -> impl Strategy<Value = CameraIntrinsics> {
    (1.0f64..50.0, 1.0f64..50.0, -5.0f64..15.0, -5.0f64..15.0)
        .prop_map(|(fx, fy, cx, cy)| CameraIntrinsics::new(fx, fy, cx, cy).unwrap())
}

fn cloud(n: usize) -> impl Strategy<Value = PointCloud> {
    proptest::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..n).prop_map(|points| PointCloud {
        points,
        centroid: [0.0; 3],
        scale: 1.0,
        normalized: false,
    })
}

proptest! {
    #[test]
    fn unprojected_cloud_is_centered((w, h, d) in depth_image(), k in intrinsics()) {
        let img = DepthImage::new(w, h, d.clone()).unwrap();
        match unproject(&img, &k) {
            Ok(pc) => {
                prop_assert_eq!(pc.len(), d.iter().filter(|&&z| z > 0.0).count());
                for axis in 0..3 {
                    let mean = pc.points.iter().map(|p| p[axis]).sum::<f64>() / pc.len() as f64;
                    let spread = pc.points.iter().map(|p| p[axis].abs()).fold(1.0, f64::max);
                    prop_assert!(mean.abs() <= 1e-9 * spread, "axis {} mean {}", axis, mean);
                }
            }
            Err(_) => prop_assert!(d.iter().all(|&z| z == 0.0)),
        }
    }

    #[test]
    fn normalization_is_idempotent_and_bounded(pc in cloud(200)) {
        let once = normalize_unit_sphere(&pc).unwrap();
        let twice = normalize_unit_sphere(&once).unwrap();
        prop_assert!(once.max_norm() <= 1.0 + 1e-9);
        for (a, b) in once.points.iter().zip(&twice.points) {
            for i in 0..3 {
                prop_assert!((a[i] - b[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn downsampling_is_an_ordered_subsequence(n in 1usize..3000, m in 1usize..600) {
        let pc = PointCloud {
            points: (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(),
            centroid: [0.0; 3],
            scale: 1.0,
            normalized: false,
        };
        let out = downsample_uniform(&pc, m).unwrap();
        prop_assert_eq!(out.len(), n.min(m));
        prop_assert!(out.points.windows(2).all(|w| w[0][0] < w[1][0]));
        if n <= m {
            prop_assert_eq!(out.points, pc.points);
        }
    }

    #[test]
    fn preprocessing_is_deterministic((w, h, d) in depth_image(), k in intrinsics(), m in 1usize..40) {
        let img = DepthImage::new(w, h, d).unwrap();
        let a = prepare_cloud(&img, &k, m);
        let b = prepare_cloud(&img, &k, m);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.len(), m);
                let bits = |pc: &PointCloud| pc.points.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&a), bits(&b));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "nondeterministic failure"),
        }
    }

    #[test]
    fn windows_cover_valid_centers(len in 1usize..60, n in 0usize..8, width in 1usize..4) {
        let feats: Vec<FeatureVector> = (0..len)
            .map(|i| FeatureVector { t: i as f64, values: vec![i as f64; width], rgb_width: width, point_width: 0 })
            .collect();
        let labels: Vec<f64> = (0..len).map(|i| -(i as f64)).collect();
        match build_windows(&feats, &labels, n) {
            Ok(ws) => {
                let centers = window_centers(len, n).unwrap();
                prop_assert_eq!(ws.len(), centers.clone().count());
                for (w, c) in ws.iter().zip(centers) {
                    prop_assert_eq!(w.center, c);
                    prop_assert_eq!(w.label, -(c as f64));
                    prop_assert_eq!(w.len(), 2 * n + 1);
                    prop_assert_eq!(w.features[0], (c - n) as f64);
                    prop_assert_eq!(w.features[w.features.len() - 1], (c + n) as f64);
                }
            }
            Err(_) => prop_assert!(len < 2 * n + 1),
        }
    }

    #[test]
    fn correlation_is_bounded_and_scale_free(
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson_r(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = pearson_r(&xs, &y).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
        prop_assert!(mae(&x, &y).unwrap() >= 0.0);
        prop_assert_eq!(mae(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn config_text_round_trips(seed in 0u64..1000, lr in 1e-6f64..1.0, epochs in 1usize..5000) {
        let text = format!("seed = {seed}\nlr = {lr}\nepochs = {epochs} # trailing comment\n");
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.require::<f64>("lr").unwrap(), lr);
    }

    #[test]
    fn checkpoints_round_trip(inputs in 1usize..6, outputs in 1usize..6, seed in 0u64..100) {
        let lin = Linear::init(inputs, outputs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ck = Checkpoint::from_model(&lin, "seed = 1\n".into(), vec![("k".into(), "v".into())]);
        let bytes = ck.encode().unwrap();
        let back = Checkpoint::decode(&bytes).unwrap();
        let mut restored = Linear::zeros(inputs, outputs).unwrap();
        back.apply_to(&mut restored).unwrap();
        prop_assert_eq!(restored.flatten(), lin.flatten());
        prop_assert_eq!(back.meta("k"), Some("v"));
        let mut wrong = Linear::zeros(inputs + 1, outputs).unwrap();
        prop_assert!(back.apply_to(&mut wrong).is_err());
    }

    #[test]
    fn truncated_checkpoints_are_rejected(cut in 0usize..1000) {
        let lin = Linear::init(3, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let bytes = Checkpoint::from_model(&lin, String::new(), Vec::new()).encode().unwrap();
        let cut = cut % bytes.len();
        prop_assert!(Checkpoint::decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn manifest_parser_never_panics(text in "\\PC{0,300}") {
        let _ = parse_manifest(&text);
    }
}
