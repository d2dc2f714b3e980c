//! CSV ingestion round trips.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackgp::problems::{gen_synthetic_classification, load_csv, write_csv, ProblemData};

#[test]
fn csv_round_trip_is_exact() {
    let p = gen_synthetic_classification(300, 9, &mut ChaCha8Rng::seed_from_u64(8));
    let ProblemData::Real(original) = p.data() else { panic!() };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cases.csv");
    write_csv(original, &path).unwrap();
    let back = load_csv(&path, 9, "1").unwrap();
    let ProblemData::Real(reloaded) = back.data() else { panic!() };
    assert_eq!(reloaded, original);
}

#[test]
fn whitespace_separated_statlog_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shuttle.trn");
    std::fs::write(&path, "50 21 77 0 28 0 27 48 22 2\n55 0 92 0 0 26 36 92 56 4\n53 0 82 0 52 -5 29 30 2 1\n").unwrap();
    let p = load_csv(&path, 9, "1").unwrap();
    let ProblemData::Real(d) = p.data() else { panic!() };
    assert_eq!(d.num_cases(), 3);
    assert_eq!(d.targets(), &[0.0, 0.0, 1.0]);
    assert_eq!(d.value(5, 2), -5.0);
    // only the second row carries label 4
    let four = load_csv(&path, 9, "4").unwrap();
    let ProblemData::Real(d) = four.data() else { panic!() };
    assert_eq!(d.targets().iter().sum::<f64>(), 1.0);
}
