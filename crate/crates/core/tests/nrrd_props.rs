use echosim_core::nrrd::{parse_nrrd, write_nrrd, Encoding};
use echosim_core::{Geometry, Vec3, VolumeFrame, VolumeSequence};
use proptest::prelude::*;

fn sequence() -> impl Strategy<Value = VolumeSequence> {
    (1usize..=16, 1usize..=16, 1usize..=16, 1usize..=8, 0.1f64..4.0, 1.0f64..200.0, any::<u64>()).prop_map(
        |(nx, ny, nz, nt, sp, period, seed)| {
            let g = Geometry::new([nx, ny, nz], [sp, sp * 1.5, sp * 0.5], Vec3::new(-3.0, 1.25, 7.5)).unwrap();
            let mut x = seed | 1;
            let frames = (0..nt)
                .map(|_| {
                    VolumeFrame::from_fn(g, |_, _, _| {
                        x ^= x << 13;
                        x ^= x >> 7;
                        x ^= x << 17;
                        x as u8
                    })
                    .unwrap()
                })
                .collect();
            VolumeSequence::new(frames, period).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn write_then_parse_is_voxel_exact(seq in sequence(), gz in any::<bool>()) {
        let enc = if gz { Encoding::Gzip } else { Encoding::Raw };
        let back = parse_nrrd(&write_nrrd(&seq, enc)).unwrap();
        prop_assert_eq!(back.len(), seq.len());
        prop_assert_eq!(back.geometry().dims, seq.geometry().dims);
        for (a, b) in back.frames().iter().zip(seq.frames()) {
            prop_assert_eq!(a.voxels(), b.voxels());
        }
        prop_assert!((back.frame_period_ms() - seq.frame_period_ms()).abs() < 1e-9 * seq.frame_period_ms());
    }

    #[test]
    fn writer_is_deterministic(seq in sequence()) {
        prop_assert_eq!(write_nrrd(&seq, Encoding::Gzip), write_nrrd(&seq, Encoding::Gzip));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_nrrd(&bytes);
    }

    #[test]
    fn mutated_files_never_panic(
        seed in any::<u64>(),
        edits in proptest::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8),
        cut in any::<prop::sample::Index>(),
        gz in any::<bool>(),
    ) {
        let g = Geometry::isotropic([3, 2, 2], 1.0).unwrap();
        let f = VolumeFrame::from_fn(g, |x, y, z| (seed as usize + x * 7 + y * 3 + z) as u8).unwrap();
        let seq = VolumeSequence::new(vec![f.clone(), f], 40.0).unwrap();
        let mut bytes = write_nrrd(&seq, if gz { Encoding::Gzip } else { Encoding::Raw });
        for (i, b) in edits {
            let i = i.index(bytes.len());
            bytes[i] = b;
        }
        bytes.truncate(cut.index(bytes.len() + 1));
        let _ = parse_nrrd(&bytes);
    }
}

/// Builds a 4D file whose axes are stored in `order` (fastest first),
/// where 0..3 are x, y, z and 3 is time.
fn permuted_file(dims: [usize; 4], order: [usize; 4], value: impl Fn([usize; 4]) -> u8, time_marker: &str) -> Vec<u8> {
    let sizes: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    let mut strides = [0usize; 4];
    let mut acc = 1;
    for (pos, &a) in order.iter().enumerate() {
        strides[a] = acc;
        acc *= sizes[pos];
    }
    let mut payload = vec![0u8; acc];
    for t in 0..dims[3] {
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let idx = [x, y, z, t];
                    let off: usize = (0..4).map(|a| idx[a] * strides[a]).sum();
                    payload[off] = value(idx);
                }
            }
        }
    }
    let size_str: Vec<String> = sizes.iter().map(ToString::to_string).collect();
    let mut header = format!(
        "NRRD0004\ntype: unsigned char\ndimension: 4\nsizes: {}\nencoding: raw\n",
        size_str.join(" ")
    );
    if time_marker == "kinds" {
        let kinds: Vec<&str> = order.iter().map(|&a| if a == 3 { "list" } else { "domain" }).collect();
        header.push_str(&format!("kinds: {}\n", kinds.join(" ")));
    } else {
        let dirs: Vec<&str> = order
            .iter()
            .map(|&a| match a {
                0 => "(1,0,0)",
                1 => "(0,1,0)",
                2 => "(0,0,1)",
                _ => "none",
            })
            .collect();
        header.push_str(&format!("space dimension: 3\nspace directions: {}\n", dirs.join(" ")));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn list_axis_position_does_not_change_frames(
        nx in 1usize..5, ny in 1usize..5, nz in 1usize..5, nt in 1usize..5,
        time_pos in 0usize..4,
        by_kinds in any::<bool>(),
        salt in any::<u8>(),
    ) {
        let dims = [nx, ny, nz, nt];
        let mut order = vec![0, 1, 2];
        order.insert(time_pos, 3);
        let order = [order[0], order[1], order[2], order[3]];
        let value = |i: [usize; 4]| (i[0] * 31 + i[1] * 17 + i[2] * 7 + i[3] * 101) as u8 ^ salt;
        let bytes = permuted_file(dims, order, value, if by_kinds { "kinds" } else { "directions" });
        let seq = parse_nrrd(&bytes).unwrap();
        prop_assert_eq!(seq.len(), nt);
        prop_assert_eq!(seq.geometry().dims, [nx, ny, nz]);
        for t in 0..nt {
            let f = seq.frame(t).unwrap();
            for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        prop_assert_eq!(f.voxel(x, y, z), value([x, y, z, t]));
                    }
                }
            }
        }
    }
}
