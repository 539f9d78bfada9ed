use magpsido::persist::{content_hash, decode_header, decode_operator, encode_operator, HEADER_LEN};
use magpsido::{load_operator, op_weyl, save_operator, Error, GaugeData, Grid, MagneticField, SymbolCatalog};
use proptest::prelude::*;

fn sample(d: usize, n: usize, l: f64) -> magpsido::OperatorMatrix {
    let grid = Grid::new(d, l, n).unwrap();
    let g = if d == 2 {
        magpsido::gauge::transversal_gauge(&MagneticField::constant_2d(0.7))
    } else {
        GaugeData::free(1)
    };
    op_weyl(&SymbolCatalog::relativistic(d), &g, &grid).unwrap()
}

#[test]
fn header_is_26_bytes_and_little_endian() {
    let h = sample(1, 8, 2.5).hermitize();
    let bytes = encode_operator(&h);
    assert_eq!(HEADER_LEN, 26);
    assert_eq!(bytes.len(), 26 + 16 * 64);
    assert_eq!(&bytes[..6], b"MPDO1\0");
    assert_eq!(&bytes[6..10], &[1, 0, 0, 0]);
    assert_eq!(&bytes[10..14], &[8, 0, 0, 0]);
    assert_eq!(&bytes[14..22], &2.5f64.to_le_bytes());
    assert_eq!(&bytes[22..26], &[1, 0, 0, 0]);
    let hdr = decode_header(&bytes).unwrap();
    assert_eq!((hdr.dim, hdr.points, hdr.half_length, hdr.flags), (1, 8, 2.5, 1));
}

#[test]
fn saved_file_loads_back_with_the_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.mpdo");
    let h = sample(2, 6, 3.0);
    let hash = save_operator(&h, &path).unwrap();
    let back = load_operator(&path).unwrap();
    assert_eq!(back.entries(), h.entries());
    assert_eq!(hash, content_hash(&std::fs::read(&path).unwrap()));
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec![std::ffi::OsString::from("op.mpdo")]);
}

#[test]
fn truncated_and_foreign_bytes_are_rejected() {
    let bytes = encode_operator(&sample(1, 8, 2.0));
    assert!(decode_operator(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_operator(&bad), Err(Error::Format(_))));
    assert!(decode_operator(&bytes[..10]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_is_bit_exact(half in 2usize..12, l in 0.5f64..40.0, two_d in any::<bool>(), herm in any::<bool>()) {
        let (d, n) = if two_d { (2, 2 * (half / 2).max(2)) } else { (1, 2 * half) };
        let h = sample(d, n, l);
        let h = if herm { h.hermitize() } else { h };
        let bytes = encode_operator(&h);
        let back = decode_operator(&bytes).unwrap();
        prop_assert_eq!(back.entries(), h.entries());
        prop_assert_eq!(back.grid(), h.grid());
        prop_assert_eq!(back.is_symmetrized(), h.is_symmetrized());
        prop_assert_eq!(content_hash(&encode_operator(&back)), content_hash(&bytes));
    }
}
