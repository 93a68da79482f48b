use pcsinit_core::data::{self, Dataset, LabelColumn, SyntheticKind, SyntheticParams};
use pcsinit_core::linalg::Matrix;
use pcsinit_core::pca::{self, ComponentSelection};
use proptest::prelude::*;
use std::io::Write;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in 1usize..12,
        cols in 1usize..6,
        values in proptest::collection::vec(finite(), 72),
        labels in proptest::collection::vec(0usize..4, 12),
        header in any::<bool>(),
    ) {
        let x = Matrix::from_fn(rows, cols, |i, j| values[i * cols + j]);
        let y = labels[..rows].to_vec();
        let n_classes = y.iter().max().unwrap() + 1;
        let mut ds = Dataset::new(x, y, n_classes).unwrap();
        if header {
            ds.feature_names = Some((0..cols).map(|j| format!("f{j}")).collect());
        }
        let mut buf = Vec::new();
        data::write_csv(&ds, &mut buf).unwrap();
        let back = data::read_csv(buf.as_slice(), &LabelColumn::Last, header).unwrap();
        let same_bits = back.features.as_slice().iter().zip(ds.features.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same_bits);
        prop_assert_eq!(back.labels, ds.labels);
        prop_assert_eq!(back.feature_names, ds.feature_names);
    }

    #[test]
    fn split_ignores_feature_columns(seed in any::<u64>(), shift in 1usize..5) {
        let ds = data::make_synthetic(SyntheticKind::GaussianBlobs, 40, 5, 2, SyntheticKind::GaussianBlobs.default_params(), 1).unwrap();
        let order: Vec<usize> = (0..5).map(|j| (j + shift) % 5).collect();
        let mut permuted = ds.clone();
        permuted.features = Matrix::from_fn(40, 5, |i, j| ds.features.get(i, order[j]));
        let (a, _) = data::split(&ds, 0.7, seed).unwrap();
        let (b, _) = data::split(&permuted, 0.7, seed).unwrap();
        prop_assert_eq!(a.row_ids, b.row_ids);
    }
}

#[test]
fn negative_zero_survives_round_trip() {
    let ds = Dataset::new(Matrix::from_rows(&[vec![-0.0, 1e-300, 123456.789e10]]).unwrap(), vec![0], 1).unwrap();
    let mut buf = Vec::new();
    data::write_csv(&ds, &mut buf).unwrap();
    let back = data::read_csv(buf.as_slice(), &LabelColumn::Last, false).unwrap();
    for (a, b) in back.features.as_slice().iter().zip(ds.features.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn heart_shaped_file() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let header: Vec<String> = (0..44).map(|j| format!("f{j}")).chain(["class".to_string()]).collect();
    writeln!(file, "{}", header.join(",")).unwrap();
    for i in 0..267 {
        let row: Vec<String> = (0..44).map(|j| ((i * 7 + j * 3) % 5).to_string()).chain([(i % 2).to_string()]).collect();
        writeln!(file, "{}", row.join(",")).unwrap();
    }
    let ds = data::load_csv(file.path(), &LabelColumn::Name("class".into()), true).unwrap();
    assert_eq!((ds.n_rows(), ds.n_features(), ds.n_classes), (267, 44, 2));
}

#[test]
fn separated_blobs_are_linearly_separable() {
    let params = SyntheticParams { separation: 12.0, noise_std: 1.0, rank: 0 };
    let ds = data::make_synthetic(SyntheticKind::GaussianBlobs, 600, 30, 4, params, 2).unwrap();
    let (train, _) = data::split(&ds, 0.7, 2).unwrap();
    // nearest class centroid
    let p = train.n_features();
    let mut centroids = vec![vec![0.0; p]; 4];
    let mut counts = [0usize; 4];
    for i in 0..train.n_rows() {
        counts[train.labels[i]] += 1;
        for (c, v) in centroids[train.labels[i]].iter_mut().zip(train.features.row(i)) {
            *c += v;
        }
    }
    for (c, n) in centroids.iter_mut().zip(counts) {
        c.iter_mut().for_each(|v| *v /= n as f64);
    }
    let correct = (0..train.n_rows())
        .filter(|&i| {
            let row = train.features.row(i);
            let d = |c: &Vec<f64>| c.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = (0..4).min_by(|&a, &b| d(&centroids[a]).total_cmp(&d(&centroids[b]))).unwrap();
            best == train.labels[i]
        })
        .count();
    assert!(correct as f64 / train.n_rows() as f64 >= 0.99);
}

#[test]
fn low_rank_data_keeps_few_components() {
    let ds = data::make_synthetic(SyntheticKind::LowRankPlusNoise, 150, 200, 3, SyntheticKind::LowRankPlusNoise.default_params(), 5).unwrap();
    let model = pca::fit(&ds.features, ComponentSelection::VarianceThreshold(0.95)).unwrap();
    let r = model.n_components();
    assert!((3..=10).contains(&r), "r = {r}");
}
