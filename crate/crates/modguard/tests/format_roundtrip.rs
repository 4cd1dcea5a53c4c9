//! Property tests for the binary and CSV formats.

use modguard::csvio::{read_curves, write_curves, ArtifactMeta, CurveRow};
use modguard::io::{decode_dataset, encode_dataset, decode_model, encode_model};
use modguard_core::nn::{LayerSpec, Model};
use modguard_core::rng::stream;
use modguard_core::signal::{Dataset, IQFrame, Modulation, Record, Split};
use proptest::prelude::*;

fn arb_modulation() -> impl Strategy<Value = Modulation> {
    (0..Modulation::ALL.len()).prop_map(|i| Modulation::ALL[i])
}

/// Frames whose SNR sits on the centi-dB grid, the format's native
/// resolution.
fn arb_record(n: usize) -> impl Strategy<Value = (Modulation, i16, bool, bool, Vec<f32>)> {
    (
        arb_modulation(),
        -2000i16..2000i16,
        any::<bool>(),
        any::<bool>(),
        proptest::collection::vec(-1.0f32..1.0f32, 2 * n),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip_is_identity(
        records in proptest::collection::vec(arb_record(16), 1..20)
    ) {
        let classes = Modulation::ALL.to_vec();
        let records: Vec<Record> = records
            .into_iter()
            .map(|(label, centi, test, adversarial, samples)| Record {
                frame: IQFrame {
                    samples,
                    label,
                    snr_db: f64::from(centi) / 100.0,
                },
                split: if test { Split::Test } else { Split::Train },
                adversarial,
            })
            .collect();
        let d = Dataset { classes, frame_len: 16, records };
        let bytes = encode_dataset(&d).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn curve_rows_round_trip_via_csv(
        rows in proptest::collection::vec(
            (0u8..6, proptest::option::of(-40.0f64..10.0), 1usize..5000, 0u32..=1000),
            1..30
        )
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let rows: Vec<CurveRow> = rows
            .into_iter()
            .map(|(v, pnr, n, acc_milli)| CurveRow {
                variant: format!("variant{v}"),
                pnr_db: pnr.unwrap_or(f64::NEG_INFINITY),
                snr_db: 10.0,
                n,
                accuracy: f64::from(acc_milli) / 1000.0,
            })
            .collect();
        write_curves(&path, &rows, &ArtifactMeta::default()).unwrap();
        let back = read_curves(&path).unwrap();
        prop_assert_eq!(back, rows);
    }
}

#[test]
fn model_checkpoint_save_is_idempotent_across_architectures() {
    let mut rng = stream(9, "fmt", 0);
    let archs: Vec<Model> = vec![
        Model::desk_cnn(32, 11, &mut rng).unwrap(),
        Model::build(
            (1, 1, 5),
            &[LayerSpec::Flatten, LayerSpec::Dense { out_dim: 3 }],
            None,
            &mut rng,
        )
        .unwrap(),
        modguard_core::reject::ae_arch(16, &mut rng).unwrap(),
    ];
    for m in archs {
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(encode_model(&back), bytes);
        assert_eq!(back.layers.len(), m.layers.len());
    }
}
