use std::collections::BTreeMap;

use echosim::assets::{build_assets, gif_file_name, load_manifest, synthetic_tilt, AssetError, AssetManifest, AssetSource};
use echosim::io::{encode_pgm, load_volume, read_nrrd, LoadError};
use echosim::phantom::{phantom, PhantomSpec};
use echosim::planes::default_planes;
use echosim_core::nrrd::{write_nrrd, Encoding};
use echosim_core::{decode_gif, slice, AssetKey, Geometry, TiltClass, View, VolumeFrame, VolumeSequence};

fn tiny(t: u8) -> VolumeSequence {
    let g = Geometry::isotropic([3, 4, 5], 0.5).unwrap();
    let f = VolumeFrame::from_fn(g, |x, y, z| (x + 3 * y + 12 * z) as u8 ^ t).unwrap();
    VolumeSequence::single(f)
}

#[test]
fn detached_data_file_is_read_relative_to_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let seq = tiny(0);
    let attached = write_nrrd(&seq, Encoding::Raw);
    let split = attached.windows(2).position(|w| w == b"\n\n").unwrap() + 2;
    let header = String::from_utf8(attached[..split - 1].to_vec()).unwrap();
    std::fs::create_dir(dir.path().join("data")).unwrap();
    std::fs::write(dir.path().join("data/vol.raw"), &attached[split..]).unwrap();
    std::fs::write(dir.path().join("vol.nhdr"), format!("{header}data file: data/vol.raw\n")).unwrap();
    let back = read_nrrd(&dir.path().join("vol.nhdr")).unwrap();
    assert_eq!(back.frames(), seq.frames());
}

#[test]
fn directory_of_frames_stacks_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for t in 0..3u8 {
        std::fs::write(dir.path().join(format!("f{t:02}.nrrd")), write_nrrd(&tiny(t), Encoding::Gzip)).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let seq = load_volume(dir.path()).unwrap();
    assert_eq!(seq.len(), 3);
    for t in 0..3u8 {
        assert_eq!(seq.frame(t as usize).unwrap(), tiny(t).frame(0).unwrap());
    }
}

#[test]
fn directory_failures() {
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(load_volume(empty.path()), Err(LoadError::NoFiles)));

    let mixed = tempfile::tempdir().unwrap();
    std::fs::write(mixed.path().join("a.nrrd"), write_nrrd(&tiny(0), Encoding::Raw)).unwrap();
    let other = VolumeSequence::single(VolumeFrame::filled(Geometry::isotropic([2, 2, 2], 1.0).unwrap(), 1).unwrap());
    std::fs::write(mixed.path().join("b.nrrd"), write_nrrd(&other, Encoding::Raw)).unwrap();
    assert!(matches!(load_volume(mixed.path()), Err(LoadError::Volume { .. })));

    assert!(matches!(load_volume(&mixed.path().join("missing.nrrd")), Err(LoadError::Io { .. })));
}

#[test]
fn pgm_layout() {
    let seq = tiny(0);
    let planes = default_planes(seq.geometry());
    let img = slice(seq.frame(0).unwrap(), &planes[&View::Apical]);
    let pgm = encode_pgm(&img);
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    assert!(pgm.starts_with(header.as_bytes()));
    assert_eq!(&pgm[header.len()..], &img.pixels[..]);
}

fn synthetic_sources(seq: &VolumeSequence) -> BTreeMap<AssetKey, AssetSource> {
    let mut sources = BTreeMap::new();
    for view in View::ALL {
        for class in [TiltClass::NormalView, TiltClass::TiltView] {
            sources.insert(
                AssetKey { view, class },
                AssetSource { id: "phantom".into(), sequence: seq.clone(), tilt_deg: synthetic_tilt(view, class) },
            );
        }
    }
    sources
}

#[test]
fn asset_library_round_trip() {
    let seq = phantom(&PhantomSpec { size: 16, frames: 3, ..Default::default() });
    let planes = default_planes(seq.geometry());
    let sensors: BTreeMap<View, usize> = View::ALL.iter().map(|&v| (v, v.default_sensor())).collect();
    let sources = synthetic_sources(&seq);

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = build_assets(&sources, &planes, &sensors, a.path()).unwrap();
    build_assets(&sources, &planes, &sensors, b.path()).unwrap();
    assert_eq!(manifest.entries.len(), 10);
    for entry in manifest.entries.values() {
        let x = std::fs::read(a.path().join(&entry.gif_path)).unwrap();
        let y = std::fs::read(b.path().join(&entry.gif_path)).unwrap();
        assert_eq!(x, y, "rebuild is byte-identical");
        assert_eq!(decode_gif(&x).unwrap().frame_count(), 3);
    }
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );

    let loaded = load_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(loaded.manifest(), &manifest);
    assert_eq!(loaded.len(), 10);
    let key = AssetKey { view: View::Plax, class: TiltClass::Overshot };
    let (resolved, _) = loaded.resolve(key).unwrap();
    assert_eq!(resolved, AssetKey { view: View::Plax, class: TiltClass::TiltView });
    assert_eq!(loaded.sensor_for(View::Psax), Some(View::Psax.default_sensor()));
    assert_eq!(gif_file_name(&key), "plax_overshot.gif");

    let text = manifest.to_json();
    assert_eq!(AssetManifest::from_json(&text).unwrap(), manifest);

    std::fs::remove_file(a.path().join("apical_tilt_view.gif")).unwrap();
    match load_manifest(&a.path().join("manifest.json")) {
        Err(AssetError::MissingAsset { key, .. }) => assert_eq!(key, AssetKey { view: View::Apical, class: TiltClass::TiltView }),
        other => panic!("{other:?}"),
    }
}

#[test]
fn manifest_schema_errors() {
    let seq = tiny(0);
    let planes = default_planes(seq.geometry());
    let sensors = View::ALL.iter().map(|&v| (v, v.default_sensor())).collect();
    let mut sources = BTreeMap::new();
    sources.insert(
        AssetKey { view: View::Apical, class: TiltClass::NormalView },
        AssetSource { id: "t".into(), sequence: seq, tilt_deg: 0.0 },
    );
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_assets(&sources, &planes, &sensors, dir.path()).unwrap();
    let good = manifest.to_json();

    let cases = [
        good.replace("\"version\": 1", "\"version\": 2"),
        good.replace("apical:normal_view", "apical:sideways"),
        good.replace("\"gif_path\"", "\"extra\": 1, \"gif_path\""),
        good.replace("apical_normal_view.gif", "../escape.gif"),
        good.replace("\"frame_period_ms\": 50.0", "\"frame_period_ms\": -1.0"),
        good.replace("\"apical\": 0", "\"apical\": 9"),
        "{".to_owned(),
    ];
    for bad in cases {
        assert_ne!(bad, good);
        assert!(matches!(AssetManifest::from_json(&bad), Err(AssetError::SchemaError(_))), "{bad}");
    }
    assert!(matches!(
        build_assets(&BTreeMap::new(), &planes, &sensors, dir.path()),
        Err(AssetError::NoEntries)
    ));
}
