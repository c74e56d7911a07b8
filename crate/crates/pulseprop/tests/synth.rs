use pulseprop::ingest::save_waveform_csv;
use pulseprop::synth::{generate_ppg, generate_three_bands, load_truth_csv, save_truth_csv, ArtifactKind, SynthSpec};

#[test]
fn same_seed_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::beats(200, 11);
    let mut files = Vec::new();
    for run in 0..2 {
        let out = generate_ppg(&spec).unwrap();
        let (w, t) = (dir.path().join(format!("w{run}.csv")), dir.path().join(format!("t{run}.csv")));
        save_waveform_csv(&out.record, &w).unwrap();
        save_truth_csv(&out.beats, &t).unwrap();
        files.push((std::fs::read(w).unwrap(), std::fs::read(t).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn flagged_count_for_500_beats() {
    for seed in 0..20 {
        let out = generate_ppg(&SynthSpec::beats(500, seed)).unwrap();
        let flagged = out.beats.iter().filter(|b| b.flag).count();
        assert!((80..=100).contains(&flagged), "seed {seed}: {flagged}");
    }
}

#[test]
fn sixty_seconds_at_75_bpm() {
    let spec = SynthSpec {
        duration_s: 60.0,
        ..Default::default()
    };
    let n = generate_ppg(&spec).unwrap().beats.len();
    assert!((73..=77).contains(&n), "{n}");
}

#[test]
fn every_kind_can_be_requested() {
    for kind in ArtifactKind::ALL {
        let spec = SynthSpec {
            artifact_kinds: vec![kind],
            artifact_fraction: 0.5,
            ..SynthSpec::beats(40, 1)
        };
        let out = generate_ppg(&spec).unwrap();
        assert!(out.beats.iter().filter(|b| b.flag).all(|b| b.kind == Some(kind)));
        assert!(out.record.samples.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn truth_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_ppg(&SynthSpec::beats(30, 2)).unwrap();
    let path = dir.path().join("t.csv");
    save_truth_csv(&out.beats, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("beat_onset_index,flag\n"));
    let back = load_truth_csv(&path).unwrap();
    assert_eq!(back.len(), 30);
    for (a, b) in back.iter().zip(&out.beats) {
        assert_eq!((a.onset_index, a.flag), (b.onset_index, b.flag));
    }
}

#[test]
fn three_bands_geometry() {
    let tb = generate_three_bands(60, 4).unwrap();
    assert_eq!(tb.points.len(), 180);
    assert_eq!(tb.labeled.len(), 3);
    // Gap between bands at least 3× the along-band spacing.
    let min_gap = (0..180)
        .flat_map(|i| (0..180).map(move |j| (i, j)))
        .filter(|&(i, j)| tb.bands[i] != tb.bands[j])
        .map(|(i, j)| (tb.points[i][1] - tb.points[j][1]).abs())
        .fold(f64::MAX, f64::min);
    assert!(min_gap >= 3.0 * 1.2, "{min_gap}");
    assert!(generate_three_bands(1, 0).is_err());
}
