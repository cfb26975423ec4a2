use sacnet::data::{load_dataset, synth_dataset, write_dataset, SynthConfig};
use sacnet::Error;

#[test]
fn dataset_survives_disk_roundtrip() {
    let cfg = SynthConfig {
        count: 6,
        size: 24,
        seed: 5,
        ..SynthConfig::default()
    };
    let samples = synth_dataset(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &samples).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), samples);
}

#[test]
fn missing_mask_names_the_path() {
    let samples = synth_dataset(&SynthConfig { count: 2, size: 16, ..SynthConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &samples).unwrap();
    std::fs::remove_file(dir.path().join("masks").join("s00001.pgm")).unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("s00001.pgm"), "{err}");
}

#[test]
fn empty_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.txt"), "\n\n").unwrap();
    assert!(load_dataset(dir.path()).is_err());
    assert!(load_dataset(&dir.path().join("absent")).is_err());
}
