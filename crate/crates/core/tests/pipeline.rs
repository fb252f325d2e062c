use std::fs::File;

use mlspl::dataio::{load_arff, load_csv, split, write_arff, LabelSpec, SplitSpec};
use mlspl::synth::{generate, SyntheticSpec};
use mlspl::{MlsplModel, TrainConfig};
use tempfile::TempDir;

#[test]
fn arff_round_trip_then_train_save_load_predict() {
    let dir = TempDir::new().unwrap();
    let ds = generate(&SyntheticSpec { n: 80, d: 5, l: 3, seed: 4, ..Default::default() }).unwrap();
    let path = dir.path().join("data.arff");
    write_arff(&ds, "roundtrip", &mut File::create(&path).unwrap()).unwrap();
    let back = load_arff(&path, &LabelSpec::LastK(3)).unwrap();
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.features(), ds.features());

    let (train, test) = split(&back, &SplitSpec::new(0.5, 1).unwrap()).unwrap();
    let model = MlsplModel::fit(&train, &TrainConfig { m: 2, max_outer: 8, ..Default::default() }).unwrap();
    let ckpt = dir.path().join("model.json");
    model.save(&ckpt).unwrap();
    let loaded = MlsplModel::load(&ckpt).unwrap();
    let (p1, r1) = model.evaluate(&test).unwrap();
    let (p2, r2) = loaded.evaluate(&test).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(r1, r2);
    assert!(r1.within_ranges(3));
}

#[test]
fn csv_and_arff_give_the_same_dataset() {
    let dir = TempDir::new().unwrap();
    let arff = "@relation t\n@attribute a numeric\n@attribute b numeric\n@attribute y1 {0,1}\n@attribute y2 {0,1}\n@data\n\
                0.5,1,1,0\n-1,2,0,1\n3,0.25,1,1\n";
    let (ap, xp, yp) = (dir.path().join("t.arff"), dir.path().join("x.csv"), dir.path().join("y.csv"));
    std::fs::write(&ap, arff).unwrap();
    std::fs::write(&xp, "a,b\n0.5,1\n-1,2\n3,0.25\n").unwrap();
    std::fs::write(&yp, "y1,y2\n1,0\n0,1\n1,1\n").unwrap();
    let from_arff = load_arff(&ap, &"y1,y2".parse().unwrap()).unwrap();
    let from_csv = load_csv(&xp, &yp).unwrap();
    assert_eq!(from_arff.features(), from_csv.features());
    assert_eq!(from_arff.labels(), from_csv.labels());
    assert_eq!(from_arff.label_names(), from_csv.label_names());
}

#[test]
fn missing_file_is_an_error() {
    assert!(load_arff("/nonexistent/x.arff", &LabelSpec::LastK(1)).is_err());
    assert!(MlsplModel::load("/nonexistent/model.json").is_err());
}
