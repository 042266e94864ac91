use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roiquant_core::detections::{filter_confidence, plane_region, union_area, BoundingBox, DetectionSet, Manifest};
use roiquant_core::frame::{encode_raw_frame, read_sequence, PixelFormat, SequenceSpec};
use roiquant_core::pipeline::{
    background_zero_fraction, preprocess_frame, preprocess_image_dir, preprocess_sequence,
    working_space, OutputColorSpace, PipelineConfig,
};
use roiquant_core::quantizer::{select_level, Level, MatrixBank, QuantMatrix};
use roiquant_core::synth::natural_scene;
use roiquant_core::transform::PadMode;
use roiquant_core::{colorspace, ColorSpace, Frame, Plane, Subsampling};

fn as_format(rgb: &Frame, format: PixelFormat) -> Frame {
    match format {
        PixelFormat::Rgb24 => rgb.clone(),
        PixelFormat::Yuv444p => colorspace::rgb_to_yuv(rgb).unwrap(),
        PixelFormat::Yuv420p => {
            let yuv = colorspace::rgb_to_yuv(rgb).unwrap();
            let (w, h) = (yuv.width(), yuv.height());
            let (cw, ch) = Subsampling::S420.chroma_dims(w, h);
            let mut planes = vec![yuv.plane(0).clone()];
            for i in 1..3 {
                let p = yuv.plane(i);
                planes.push(Plane::from_fn(cw, ch, |x, y| p.get((2 * x).min(w - 1), (2 * y).min(h - 1))));
            }
            Frame::new(planes, ColorSpace::Yuv, Subsampling::S420).unwrap()
        }
    }
}

type RawBox = (u32, u32, u32, u32, f64);

fn config_strategy() -> impl Strategy<Value = (usize, usize, u64, PixelFormat, Vec<RawBox>, bool, bool)> {
    (8usize..72, 8usize..72, any::<u64>(), 0usize..3, any::<bool>(), any::<bool>()).prop_flat_map(
        |(w, h, seed, fmt, zero_pad, align)| {
            let format = [PixelFormat::Rgb24, PixelFormat::Yuv444p, PixelFormat::Yuv420p][fmt];
            let boxes = prop::collection::vec(
                (0..w as u32, 0..h as u32, 1..=w as u32, 1..=h as u32, 0.0f64..1.0),
                0..6,
            );
            (Just(w), Just(h), Just(seed), Just(format), boxes, Just(zero_pad), Just(align))
        },
    )
}

fn make_boxes(raw: &[(u32, u32, u32, u32, f64)], w: usize, h: usize) -> Vec<BoundingBox> {
    raw.iter()
        .filter_map(|&(x, y, bw, bh, c)| {
            let (x, y, bw, bh) =
                BoundingBox::clipped(x as i64, y as i64, bw as i64, bh as i64, w as u32, h as u32)?;
            let mut b = BoundingBox::new(x, y, bw, bh);
            b.confidence = c;
            Some(b)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn roi_is_preserved_in_working_space((w, h, seed, format, raw, zero_pad, align) in config_strategy()) {
        let src = as_format(&natural_scene(w, h, seed), format);
        let set = DetectionSet::new(0, make_boxes(&raw, w, h));
        let cfg = PipelineConfig {
            output_colorspace: OutputColorSpace::Yuv,
            pad: if zero_pad { PadMode::ZeroFill } else { PadMode::ReplicateEdge },
            align_blocks: align,
            ..Default::default()
        };
        let (out, report) = preprocess_frame(&src, &set, &cfg).unwrap();
        let working = working_space(&src, cfg.color_matrix).unwrap();
        let kept = filter_confidence(&set, cfg.confidence_threshold);
        prop_assert_eq!(report.bypassed, kept.is_empty());
        prop_assert_eq!(out.subsampling(), src.subsampling());
        for b in &kept.boxes {
            for i in 0..out.planes().len() {
                let (x0, y0, bw, bh) = plane_region(b, out.plane_scale(i), out.plane(i));
                for y in y0..y0 + bh {
                    for x in x0..x0 + bw {
                        prop_assert_eq!(out.plane(i).get(x, y), working.plane(i).get(x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn reported_level_matches_area((w, h, seed, format, raw, _z, _a) in config_strategy()) {
        let src = as_format(&natural_scene(w, h, seed), format);
        let set = DetectionSet::new(3, make_boxes(&raw, w, h));
        let cfg = PipelineConfig::default();
        let (_, report) = preprocess_frame(&src, &set, &cfg).unwrap();
        let kept = filter_confidence(&set, cfg.confidence_threshold);
        prop_assert_eq!(report.frame_index, 3);
        prop_assert_eq!(report.object_area, union_area(&kept.boxes));
        prop_assert!(report.object_area <= report.frame_area);
        if report.bypassed {
            prop_assert_eq!(report.level, None);
        } else {
            prop_assert_eq!(report.level, Some(select_level((w * h) as u64, union_area(&kept.boxes)).unwrap()));
        }
    }
}

#[test]
fn empty_detections_bypass_every_format() {
    for format in [PixelFormat::Rgb24, PixelFormat::Yuv444p, PixelFormat::Yuv420p] {
        let src = as_format(&natural_scene(37, 29, 2), format);
        let (out, report) = preprocess_frame(&src, &DetectionSet::default(), &PipelineConfig::default()).unwrap();
        assert_eq!(out, src);
        assert!(report.bypassed);
        assert!(report.zero_fraction.is_empty());
    }
}

#[test]
fn full_frame_box_restores_everything() {
    let src = as_format(&natural_scene(40, 24, 3), PixelFormat::Yuv444p);
    let set = DetectionSet::new(0, vec![BoundingBox::new(0, 0, 40, 24)]);
    let (out, report) = preprocess_frame(&src, &set, &PipelineConfig::default()).unwrap();
    assert_eq!(report.level, Some(Level::new(0).unwrap()));
    assert_eq!(out, src);
}

#[test]
fn unit_bank_error_outside_boxes_is_small() {
    let bank = MatrixBank::uniform(QuantMatrix::flat(1).unwrap());
    let b = BoundingBox::new(10, 6, 20, 14);
    let set = DetectionSet::new(0, vec![b.clone()]);
    for format in [PixelFormat::Rgb24, PixelFormat::Yuv444p] {
        let src = as_format(&natural_scene(64, 48, 4), format);
        let cfg = PipelineConfig {
            bank: bank.clone(),
            output_colorspace: OutputColorSpace::Yuv,
            ..Default::default()
        };
        let (out, _) = preprocess_frame(&src, &set, &cfg).unwrap();
        let working = working_space(&src, cfg.color_matrix).unwrap();
        let mut worst = 0i32;
        for i in 0..3 {
            for y in 0..48 {
                for x in 0..64 {
                    let d = (out.plane(i).get(x, y) as i32 - working.plane(i).get(x, y) as i32).abs();
                    if b.contains(x as u32, y as u32) {
                        assert_eq!(d, 0);
                    }
                    worst = worst.max(d);
                }
            }
        }
        assert!(worst <= 2, "{format:?}: worst {worst}");
    }
}

#[test]
fn background_gains_zeros_after_processing() {
    let bank = MatrixBank::default();
    for seed in 0..5 {
        let src = natural_scene(96, 96, 0x5eed_0000 + seed);
        let b = BoundingBox::new(24, 24, 32, 32);
        let set = DetectionSet::new(0, vec![b.clone()]);
        for m in [0u8, 1, 2] {
            let level = Level::new(m).unwrap();
            let cfg = PipelineConfig {
                output_colorspace: OutputColorSpace::Yuv,
                level_override: Some(level),
                ..Default::default()
            };
            let (out, _) = preprocess_frame(&src, &set, &cfg).unwrap();
            let before = working_space(&src, cfg.color_matrix).unwrap();
            let zf = |f: &Frame| {
                background_zero_fraction(f, std::slice::from_ref(&b), bank.luma(level), bank.chroma(level), 127, PadMode::ReplicateEdge)
                    .unwrap()
            };
            for (a, z) in zf(&before).iter().zip(zf(&out)) {
                assert!(z.unwrap() >= a.unwrap(), "seed {seed} m {m}: {a:?} -> {z:?}");
            }
        }
    }
}

fn write_sequence(path: &std::path::Path, frames: &[Frame], format: PixelFormat) {
    let mut bytes = Vec::new();
    for f in frames {
        bytes.extend(encode_raw_frame(f, format).unwrap());
    }
    std::fs::write(path, bytes).unwrap();
}

fn clip(n: usize, w: usize, h: usize, format: PixelFormat) -> Vec<Frame> {
    (0..n).map(|i| as_format(&natural_scene(w, h, 50 + i as u64), format)).collect()
}

#[test]
fn empty_manifest_sequence_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    for format in [PixelFormat::Yuv420p, PixelFormat::Yuv444p, PixelFormat::Rgb24] {
        let input = dir.path().join("in.raw");
        let output = dir.path().join("out.raw");
        write_sequence(&input, &clip(3, 34, 18, format), format);
        let spec = SequenceSpec::open(&input, 34, 18, format).unwrap();
        let manifest = Manifest::from_json(r#"{"version":1,"width":34,"height":18,"frames":[]}"#).unwrap();
        let reports = preprocess_sequence(&spec, &manifest, &PipelineConfig::default(), &output).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&output).unwrap());
    }
}

#[test]
fn detections_on_one_frame_only() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.yuv");
    let output = dir.path().join("out.yuv");
    let format = PixelFormat::Yuv420p;
    write_sequence(&input, &clip(3, 48, 32, format), format);
    let manifest = Manifest::from_json(
        r#"{"version":1,"width":48,"height":32,"frames":[
            {"index":1,"boxes":[{"label":"x","confidence":0.9,"x":5,"y":3,"w":17,"h":11}]}]}"#,
    )
    .unwrap();
    let spec = SequenceSpec::open(&input, 48, 32, format).unwrap();
    let cfg = PipelineConfig {
        jobs: 2,
        ..Default::default()
    };
    let reports = preprocess_sequence(&spec, &manifest, &cfg, &output).unwrap();
    assert_eq!(reports.iter().map(|r| r.bypassed).collect::<Vec<_>>(), [true, false, true]);
    let out_spec = SequenceSpec::open(&output, 48, 32, format).unwrap();
    for i in [0, 2] {
        assert_eq!(read_sequence(&spec, i).unwrap(), read_sequence(&out_spec, i).unwrap());
    }
    let (src, got) = (read_sequence(&spec, 1).unwrap(), read_sequence(&out_spec, 1).unwrap());
    assert_ne!(src, got);
    let b = &manifest.detections(1).boxes[0];
    for i in 0..3 {
        let (x0, y0, w, h) = plane_region(b, src.plane_scale(i), src.plane(i));
        assert_eq!(src.plane(i).crop(x0, y0, w, h).unwrap(), got.plane(i).crop(x0, y0, w, h).unwrap());
    }
}

#[test]
fn sequence_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.yuv");
    let format = PixelFormat::Yuv444p;
    write_sequence(&input, &clip(4, 40, 40, format), format);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut json = String::from(r#"{"version":1,"width":40,"height":40,"frames":["#);
    for i in 0..4 {
        let (x, y) = (rng.gen_range(0..30), rng.gen_range(0..30));
        json.push_str(&format!(
            r#"{}{{"index":{i},"boxes":[{{"label":"o","confidence":0.8,"x":{x},"y":{y},"w":9,"h":7}}]}}"#,
            if i > 0 { "," } else { "" }
        ));
    }
    json.push_str("]}");
    let manifest = Manifest::from_json(&json).unwrap();
    let spec = SequenceSpec::open(&input, 40, 40, format).unwrap();
    let outputs: Vec<Vec<u8>> = [1usize, 3, 0]
        .iter()
        .map(|&jobs| {
            let out = dir.path().join(format!("out{jobs}.yuv"));
            let cfg = PipelineConfig {
                jobs,
                ..Default::default()
            };
            preprocess_sequence(&spec, &manifest, &cfg, &out).unwrap();
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn manifest_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.yuv");
    write_sequence(&input, &clip(2, 16, 16, PixelFormat::Yuv444p), PixelFormat::Yuv444p);
    let manifest = Manifest::from_json(
        r#"{"version":1,"width":16,"height":16,"frames":[{"index":5,"boxes":[]}]}"#,
    )
    .unwrap();
    let spec = SequenceSpec::open(&input, 16, 16, PixelFormat::Yuv444p).unwrap();
    let out = dir.path().join("out.yuv");
    assert!(preprocess_sequence(&spec, &manifest, &PipelineConfig::default(), &out).is_err());
    assert!(!out.exists());
}

#[test]
fn image_directory_round() {
    let dir = tempfile::tempdir().unwrap();
    let (inp, outp) = (dir.path().join("in"), dir.path().join("out"));
    std::fs::create_dir(&inp).unwrap();
    for (i, f) in clip(2, 24, 16, PixelFormat::Rgb24).iter().enumerate() {
        roiquant_core::frame::save_image(f, inp.join(format!("frame{i:03}.ppm")), roiquant_core::frame::ImageFormat::Ppm)
            .unwrap();
    }
    let manifest = Manifest::from_json(
        r#"{"version":1,"width":24,"height":16,"frames":[{"index":1,"boxes":[{"label":"a","confidence":1,"x":0,"y":0,"w":8,"h":8}]}]}"#,
    )
    .unwrap();
    let reports = preprocess_image_dir(&inp, &manifest, &PipelineConfig::default(), &outp).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(
        std::fs::read(inp.join("frame000.ppm")).unwrap(),
        std::fs::read(outp.join("000000.ppm")).unwrap()
    );
    assert!(outp.join("000001.ppm").exists());
}

#[test]
fn invalid_config_is_rejected() {
    let src = natural_scene(16, 16, 1);
    let set = DetectionSet::new(0, vec![BoundingBox::new(0, 0, 4, 4)]);
    for cfg in [
        PipelineConfig { confidence_threshold: 1.5, ..Default::default() },
        PipelineConfig { shift: 300, ..Default::default() },
    ] {
        assert!(preprocess_frame(&src, &set, &cfg).is_err());
    }
}
