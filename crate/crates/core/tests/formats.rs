use proptest::prelude::*;
use sa2net::kv::KvFile;
use sa2net::tensor::io::{decode_tensor, encode_tensor, load_tensor, save_tensor, AnyTensor};
use sa2net::tensor::{DType, Tensor};
use sa2net::Error;

fn blob<T: sa2net::tensor::Float>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::new();
    encode_tensor(t, &mut out);
    out
}

#[test]
fn header_layout() {
    let t = Tensor::<f32>::new([2, 3], vec![1.0, -2.0, 0.5, 0.0, -0.0, 3.25]).unwrap();
    let b = blob(&t);
    assert_eq!(&b[..4], b"SA2T");
    assert_eq!(b[4], 1);
    assert_eq!(b[5], DType::F32.code());
    assert_eq!(b[6], 2);
    assert_eq!(&b[7..15], &[2, 0, 0, 0, 3, 0, 0, 0]);
    assert_eq!(b.len(), 15 + 6 * 4);
    assert_eq!(&b[15..19], &1.0f32.to_le_bytes());
}

#[test]
fn special_values_survive() {
    let t = Tensor::<f64>::new([5], vec![f64::NAN, f64::INFINITY, -0.0, f64::MIN_POSITIVE / 4.0, f64::MAX]).unwrap();
    match decode_tensor(&blob(&t)).unwrap() {
        AnyTensor::F64(back) => {
            for (a, b) in back.data().iter().zip(t.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn corruption_is_reported_with_offsets() {
    let b = blob(&Tensor::<f64>::ones([2, 2]).unwrap());
    let cases: Vec<(Vec<u8>, u64)> = vec![
        (b"SA2X".iter().chain(&b[4..]).copied().collect(), 0),
        ([&b[..4], &[9], &b[5..]].concat(), 4),
        ([&b[..5], &[7], &b[6..]].concat(), 5),
        ([&b[..7], &[0, 0, 0, 0], &b[11..]].concat(), 7),
        (b[..b.len() - 1].to_vec(), 15),
        ([&b[..], &[0]].concat(), b.len() as u64),
    ];
    for (bytes, want) in cases {
        match decode_tensor(&bytes) {
            Err(Error::Integrity { offset, .. }) => assert_eq!(offset, want),
            other => panic!("expected integrity error at {want}: {other:?}"),
        }
    }
}

#[test]
fn exact_and_cast() {
    let t = Tensor::<f32>::full([3], 0.1).unwrap();
    let any = decode_tensor(&blob(&t)).unwrap();
    assert!(any.exact::<f32>().unwrap().bit_eq(&t));
    assert!(matches!(any.exact::<f64>(), Err(Error::DType { .. })));
    assert_eq!(any.cast::<f64>().data()[0], 0.1f32 as f64);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.sa2t");
    let t = Tensor::<f64>::from_f64([1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    save_tensor(&path, &t).unwrap();
    assert!(load_tensor(&path).unwrap().exact::<f64>().unwrap().bit_eq(&t));
}

#[test]
fn kv_examples() {
    let kv = KvFile::parse("# model\nchannels = 64  # width\nlsa.kernel_sizes = 1,3,5,7\n\nsa2 = false\n").unwrap();
    assert_eq!(kv.get::<usize>("channels").unwrap(), Some(64));
    assert_eq!(kv.list::<usize>("lsa.kernel_sizes").unwrap(), Some(vec![1, 3, 5, 7]));
    assert_eq!(kv.get::<bool>("sa2").unwrap(), Some(false));
    assert_eq!(kv.get::<usize>("missing").unwrap(), None);
    assert!(kv.get::<usize>("sa2").is_err());
    assert!(kv.reject_unknown(&["channels", "sa2"]).is_err());
    assert!(KvFile::parse("a = 1\na = 2").is_err());
    assert!(KvFile::parse("no equals sign").is_err());
    assert_eq!(KvFile::parse(&kv.render()).unwrap(), kv);
}

proptest! {
    #[test]
    fn f64_blobs_round_trip(dims in prop::collection::vec(1usize..5, 0..5), seed in any::<u64>()) {
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n as u64).map(|i| f64::from_bits(sa2net::tensor::splitmix64(seed ^ i))).collect();
        let t = Tensor::new(dims, data).unwrap();
        let bytes = blob(&t);
        let back = decode_tensor(&bytes).unwrap().exact::<f64>().unwrap();
        prop_assert!(back.bit_eq(&t));
        prop_assert_eq!(blob(&back), bytes);
    }

    #[test]
    fn f32_blobs_round_trip(dims in prop::collection::vec(1usize..6, 1..4), seed in any::<u64>()) {
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n as u64).map(|i| f32::from_bits(sa2net::tensor::splitmix64(seed ^ i) as u32)).collect();
        let t = Tensor::new(dims, data).unwrap();
        let back = decode_tensor(&blob(&t)).unwrap().exact::<f32>().unwrap();
        prop_assert!(back.bit_eq(&t));
    }

    #[test]
    fn every_truncation_fails_cleanly(cut in 0usize..60) {
        let b = blob(&Tensor::<f64>::ones([2, 3]).unwrap());
        prop_assume!(cut < b.len());
        let is_integrity = matches!(decode_tensor(&b[..cut]), Err(Error::Integrity { .. }));
        prop_assert!(is_integrity);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_tensor(&bytes);
        let _ = KvFile::parse(&String::from_utf8_lossy(&bytes));
    }
}
