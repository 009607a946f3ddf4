use cauchylab::czd::{audit, decompose, verify};
use cauchylab::ensemble::{random_model, random_simple_measure, stream, MeasureSpec};
use cauchylab::transforms::{sweep, ConeSampling, MaximalOperator, SweepGrid};
use cauchylab::{Complex64, Interval, OpMeasure, SchattenIndex, ScatteringModel, SimpleOpMeasure, Which};
use tempfile::TempDir;

#[test]
fn measures_round_trip_through_json() {
    let dir = TempDir::new().unwrap();
    for i in 0..5 {
        let mu = random_simple_measure(&mut stream(11, i), &MeasureSpec::default()).unwrap();
        let m = OpMeasure::from(mu.clone());
        let path = dir.path().join(format!("m{i}.json"));
        m.save_json(&path).unwrap();
        assert_eq!(OpMeasure::load_json(&path).unwrap(), m);
        assert_eq!(SimpleOpMeasure::load_json(&path).unwrap(), mu);
    }
}

#[test]
fn models_round_trip_through_json() {
    let dir = TempDir::new().unwrap();
    let model = random_model(&mut stream(3, 0), 6, 2).unwrap();
    let path = dir.path().join("model.json");
    model.save_json(&path).unwrap();
    let back = ScatteringModel::load_json(&path).unwrap();
    assert_eq!(back.h(Which::H0), model.h(Which::H0));
    assert_eq!(back.g(), model.g());
    assert_eq!(back.j(), model.j());
    let z = Complex64::new(0.3, 0.7);
    let a = model.sandwiched_resolvent(Which::H1, z).unwrap();
    let b = back.sandwiched_resolvent(Which::H1, z).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_json_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"simple\": 3}").unwrap();
    assert!(OpMeasure::load_json(&path).is_err());
    assert!(ScatteringModel::load_json(&path).is_err());
    assert!(OpMeasure::load_json(&dir.path().join("missing.json")).is_err());
}

#[test]
fn decomposition_of_a_random_measure_verifies() {
    let mu = random_simple_measure(&mut stream(5, 1), &MeasureSpec::default()).unwrap();
    let p = SchattenIndex::HILBERT_SCHMIDT;
    let tv = mu.total_variation(&Interval::real_line(), p).unwrap();
    let dec = decompose(&mu, 2.0 * tv, p).unwrap();
    assert!(verify(&mu, &dec).unwrap().all_pass());
    let (_, report) = audit(&mu, 2.0 * tv, p, 20).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.intervals, dec.intervals);
}

#[test]
fn hardy_littlewood_on_two_separated_atoms() {
    // δ₋₅₀ + δ₅₀. For 1/100 ≤ t ≤ 3/200 the sets around each atom merge with
    // the middle one, |{M > t}| = 100 + 1/t, and t·|{M > t}| peaks at 5/2.
    let mu = SimpleOpMeasure::scalar(&[(-50.0, 1.0), (50.0, 1.0)]).unwrap();
    let grid = SweepGrid::centered(0.0, 400.0, 40_000).unwrap();
    let m = sweep(MaximalOperator::HardyLittlewood, &mu, SchattenIndex::OPERATOR, &grid, &ConeSampling::coarse())
        .unwrap()
        .quasinorm()
        .unwrap();
    assert!((m - 2.5).abs() < 1e-3, "{m}");
}
