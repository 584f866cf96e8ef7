//! File formats read back exactly what was written.

use std::fs;

use proptest::prelude::*;
use survkan::export::{export_edge_samples, read_edge_samples};
use survkan::io::{load_csv, load_dataset, write_csv, write_dataset_dir, CsvSchema};
use survkan::core::{generate, init_network, BaseFn, ColumnMeta, Dataset, GeneratorSpec, Matrix, SurvivalOutcome, SyntheticFormula};

fn schema_with(categorical: &[&str]) -> CsvSchema {
    CsvSchema { categorical: categorical.iter().map(|s| s.to_string()).collect(), ..CsvSchema::default() }
}

#[test]
fn categorical_labels_are_coded_by_first_appearance() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    fs::write(&path, "site,duration,event\nFH,1,1\nUH,2,0\nFH,3,1\n").unwrap();
    let ds = load_csv(&path, &schema_with(&["site"])).unwrap();
    assert_eq!(ds.x.column(0), vec![0.0, 1.0, 0.0]);
    assert_eq!(ds.labels()[0], vec!["FH".to_string(), "UH".to_string()]);
}

#[test]
fn known_labels_keep_their_codes_and_reject_new_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    fs::write(&path, "site,duration,event\nUH,1,1\nFH,2,0\n").unwrap();
    let mut schema = schema_with(&["site"]);
    schema.labels.insert("site".into(), vec!["FH".into(), "UH".into()]);
    assert_eq!(load_csv(&path, &schema).unwrap().x.column(0), vec![1.0, 0.0]);
    fs::write(&path, "site,duration,event\nXX,1,1\n").unwrap();
    assert!(load_csv(&path, &schema).unwrap_err().to_string().contains("row 1"));
}

#[test]
fn malformed_rows_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    for (body, needle) in [
        ("a,duration,event\n1,0,1\n", "positive"),
        ("a,duration,event\n1,1,1\nx,1,0\n", "row 2"),
        ("a,time,event\n1,1,1\n", "duration"),
        ("a,duration,event\n", "no data rows"),
    ] {
        fs::write(&path, body).unwrap();
        let err = load_csv(&path, &CsvSchema::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains(needle), "{err}");
    }
}

#[test]
fn generated_data_round_trips_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = GeneratorSpec::new(SyntheticFormula::Shallow, 300, 100, 11);
    let (train, test) = generate(&spec).unwrap();
    write_dataset_dir(tmp.path(), &[("train.csv", &train), ("test.csv", &test)], Some(&spec)).unwrap();
    let back = load_dataset(&tmp.path().join("train.csv"), &CsvSchema::default()).unwrap();
    assert_eq!(back, train);
    assert!(back.true_theta().is_some());

    // an edited file keeps its values but loses the generator's theta
    let path = tmp.path().join("test.csv");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen(",1\n", ",0\n", 1)).unwrap();
    assert!(load_dataset(&path, &CsvSchema::default()).unwrap().true_theta().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in prop::collection::vec((any::<f64>(), -1e300f64..1e300, 1e-300f64..1e300, any::<bool>(), 0usize..3), 1..40)
    ) {
        let rows: Vec<_> = rows.into_iter().filter(|r| r.0.is_finite()).collect();
        prop_assume!(!rows.is_empty());
        let labels = vec!["a b".to_string(), "c,d".to_string(), "e\"f".to_string()];
        let x: Vec<f64> = rows.iter().flat_map(|r| [r.0, r.1, r.4 as f64]).collect();
        let ds = Dataset::new(
            Matrix::from_vec(rows.len(), 3, x).unwrap(),
            vec![ColumnMeta::continuous("u"), ColumnMeta::continuous("v"), ColumnMeta::categorical("w", labels.clone())],
            SurvivalOutcome::new(rows.iter().map(|r| r.2).collect(), rows.iter().map(|r| r.3).collect()).unwrap(),
        ).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.csv");
        write_csv(&ds, &path).unwrap();
        let mut schema = schema_with(&["w"]);
        schema.labels.insert("w".into(), labels);
        let back = load_csv(&path, &schema).unwrap();
        let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.x.as_slice()), bits(ds.x.as_slice()));
        prop_assert_eq!(bits(back.outcome.durations()), bits(ds.outcome.durations()));
        prop_assert_eq!(back.outcome.events(), ds.outcome.events());
        prop_assert_eq!(back.columns, ds.columns);
    }
}

#[test]
fn edge_samples_round_trip() {
    let net = init_network(&[3, 2, 1], BaseFn::Silu, 5, 3, 0.1, 0.1, 4).unwrap();
    let x = Matrix::from_rows(&(0..50).map(|i| {
        let t = i as f64 / 49.0;
        vec![t - 0.5, (3.0 * t).sin(), t * t]
    }).collect::<Vec<_>>()).unwrap();
    let (_, cache) = net.forward(&x).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let paths = export_edge_samples(&net, &cache, tmp.path()).unwrap();
    assert_eq!(paths.len(), 3 * 2 + 2);
    assert!(paths[0].ends_with("layer0_in0_out0.csv"));
    let (xs, ys) = read_edge_samples(&tmp.path().join("layer1_in1_out0.csv")).unwrap();
    assert_eq!(xs, cache.nodes[1][1]);
    assert_eq!(ys, cache.post[1][1]);
}
