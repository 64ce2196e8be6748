use csvae_core::data::{load_dataset, make_swiss_roll, save_dataset, split, LabeledDataset, Proportions, Split};
use csvae_core::io::checkpoint::{parse_echo, TensorRecord};
use csvae_core::io::{Checkpoint, RunConfig};
use csvae_core::manipulate::{eigen_sym2, w_grid};
use csvae_core::models::{ModelKind, ModelSpec};
use csvae_core::numerics::linalg::{gemm, gemm_seq};
use csvae_core::numerics::{Graph, LrSchedule, Tensor};
use csvae_core::stochastic::{kl_diag_gaussians, DiagGaussian};
use proptest::prelude::*;

fn naive_matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                c[i * n + j] += a[i * k + p] * b[p * n + j];
            }
        }
    }
    c
}

fn transpose(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

fn gaussian(dim: usize) -> impl Strategy<Value = DiagGaussian> {
    (prop::collection::vec(-3.0..3.0f64, dim), prop::collection::vec(-2.0..2.0f64, dim))
        .prop_map(|(mu, lv)| DiagGaussian::new(mu, lv).unwrap())
}

fn dataset() -> impl Strategy<Value = LabeledDataset> {
    (1usize..20, 1usize..5, 0usize..3).prop_flat_map(|(n, d, k)| {
        (
            prop::collection::vec(-1e3f32..1e3, n * d),
            prop::collection::vec(0u8..2, n * k),
            prop::collection::vec(0u8..3, n),
        )
            .prop_map(move |(x, y, s)| {
                let names = (0..k).map(|i| format!("a{i}")).collect();
                let mut ds = LabeledDataset::new(vec![d], x, y, names).unwrap();
                ds.split = s.iter().map(|&c| Split::from_code(c).unwrap()).collect();
                ds
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gemm_matches_naive_product(m in 1usize..9, k in 1usize..9, n in 1usize..9, seed in any::<u64>()) {
        let mut r = csvae_core::rng::StreamRng::new(seed, csvae_core::rng::domain::MISC, 1);
        let a = r.normals(m * k);
        let b = r.normals(k * n);
        let want = naive_matmul(m, k, n, &a, &b);
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, &a, false, &b, false, &mut c, false);
        for (x, y) in c.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        let mut ct = vec![0.0; m * n];
        gemm_seq(m, k, n, &transpose(m, k, &a), true, &transpose(k, n, &b), true, &mut ct, false);
        for (x, y) in ct.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_itself(q in gaussian(3), p in gaussian(3)) {
        prop_assert!(kl_diag_gaussians(&q, &p).unwrap() >= -1e-12);
        prop_assert!(kl_diag_gaussians(&q, &q).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn log_softmax_rows_normalise(v in prop::collection::vec(-30.0..30.0f64, 12)) {
        let g = Graph::new();
        let x = g.constant(Tensor::new(vec![3, 4], v).unwrap());
        let out = g.value(g.log_softmax(x));
        for r in 0..3 {
            let total: f64 = out.row(r).iter().map(|l| l.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn datasets_round_trip_byte_identically(d in dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csvd"), dir.path().join("b.csvd"));
        save_dataset(&d, &a).unwrap();
        let back = load_dataset(&a).unwrap();
        prop_assert_eq!(&back, &d);
        save_dataset(&back, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn checkpoint_corruption_is_detected(vals in prop::collection::vec(-10.0f32..10.0, 1..40), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let ck = Checkpoint {
            kind: 3,
            config: "model.kind = csvae\n".into(),
            tensors: vec![TensorRecord { name: "t".into(), dims: vec![vals.len()], data: vals }],
            optimizer: None,
        };
        let bytes = ck.encode();
        prop_assert_eq!(Checkpoint::decode(&bytes).unwrap(), ck);
        let mut bad = bytes.clone();
        let i = pos.index(bad.len());
        bad[i] ^= 1 << bit;
        prop_assert!(Checkpoint::decode(&bad).is_err());
    }

    #[test]
    fn splits_partition_every_example(n in 10usize..300, seed in any::<u64>()) {
        let d = split(make_swiss_roll(n, 0.0, seed).unwrap(), Proportions::default(), seed).unwrap();
        let counts: Vec<usize> = Split::ALL.iter().map(|&s| d.indices(s).len()).collect();
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let again = split(make_swiss_roll(n, 0.0, seed).unwrap(), Proportions::default(), seed).unwrap();
        prop_assert_eq!(d.split, again.split);
    }

    #[test]
    fn swiss_roll_labels_follow_the_first_coordinate(n in 1usize..200, seed in any::<u64>()) {
        let d = make_swiss_roll(n, 0.0, seed).unwrap();
        for i in 0..n {
            prop_assert_eq!(d.label(i)[0], u8::from(f64::from(d.example(i)[0]) >= 10.0));
        }
    }

    #[test]
    fn w_grid_has_one_point_per_step_combination(s1 in 1usize..6, s2 in 1usize..6) {
        let spec = ModelSpec::vector(ModelKind::Csvae, 3, 1);
        let g = w_grid(&spec, 0, &[s1, s2], None).unwrap();
        let blocks = g.blocks();
        prop_assert_eq!(blocks.len(), s1 * s2);
        for b in &blocks {
            for (j, v) in b.iter().enumerate() {
                prop_assert!((v - spec.prior.on_mean[j]).abs() <= 2.0 * spec.prior.on_sigma[j] + 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_eigenpairs_satisfy_the_definition(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let (vals, vecs) = eigen_sym2(a, b, c);
        prop_assert!(vals[0] >= vals[1]);
        for (l, v) in vals.iter().zip(&vecs) {
            let av = [a * v[0] + b * v[1], b * v[0] + c * v[1]];
            prop_assert!((av[0] - l * v[0]).abs() < 1e-9 && (av[1] - l * v[1]).abs() < 1e-9);
            prop_assert!(((v[0] * v[0] + v[1] * v[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn learning_rate_never_increases(e in 0usize..1000) {
        let s = LrSchedule::standard();
        prop_assert!(s.lr_at(e + 1) <= s.lr_at(e));
        prop_assert!(s.lr_at(e) >= 5e-5 * (1.0 - 1e-12));
    }

    #[test]
    fn config_text_round_trips(seed in any::<u64>(), z in 1usize..16, lr in 1e-5..1e-2f64, epochs in 1usize..500) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.z_dim = z;
        c.lr = lr;
        c.epochs = epochs;
        prop_assert_eq!(parse_echo(&c.to_text()).unwrap(), c);
    }
}
