mod support;

use std::path::Path;

use roiquant_core::frame::PixelFormat;
use support::*;

#[test]
fn help_documents_every_subcommand() {
    let out = roiquant(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["process", "metrics", "sweep", "stub-detect", "ROIQUANT_TMPDIR"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    let out = roiquant(&["process", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--quality-bank", "--threshold", "--pad", "--shift", "--align-blocks", "--output-colorspace"] {
        assert!(text.contains(flag), "{flag} missing from process help");
    }
}

#[test]
fn process_empty_manifest_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out, manifest) = (dir.path().join("in.yuv"), dir.path().join("out.yuv"), dir.path().join("e.json"));
    write_clip(&input, 64, 64, 3, PixelFormat::Yuv444p, 1);
    write_manifest(&manifest, 64, 64, &[]);
    let run = roiquant(&["process", "--input", s(&input), "--size", "64x64", "--format", "yuv444p",
        "--detections", s(&manifest), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());

    let report = std::fs::read_to_string(dir.path().join("out.yuv.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["config"]["L0"], "q20");
    assert!(lines[1..].iter().all(|l| l["bypassed"] == true));
}

#[test]
fn process_report_levels_follow_detections() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out, manifest) = (dir.path().join("in.yuv"), dir.path().join("out.yuv"), dir.path().join("m.json"));
    write_clip(&input, 64, 48, 3, PixelFormat::Yuv420p, 2);
    // Frame 1 is fully covered, frame 2 has a low-confidence box only.
    write_manifest(&manifest, 64, 48, &[(1, &[(0, 0, 64, 48, 0.9)]), (2, &[(0, 0, 8, 8, 0.1)])]);
    let run = roiquant(&["process", "-i", s(&input), "-s", "64x48", "-d", s(&manifest), "-o", s(&out),
        "--report", s(&dir.path().join("r.jsonl"))]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(dir.path().join("r.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[1]["bypassed"], true);
    assert_eq!(lines[2]["level"], 0);
    assert_eq!(lines[2]["object_area"], 64 * 48);
    assert_eq!(lines[3]["bypassed"], true);
    assert!(lines[1].get("timings").is_none());
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.yuv");
    write_clip(&input, 16, 16, 1, PixelFormat::Yuv420p, 3);
    let run = roiquant(&["process", "-i", s(&input), "-s", "16x16", "-d", s(&dir.path().join("none.json")),
        "-o", s(&dir.path().join("o.yuv"))]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("manifest not found"), "{}", stderr(&run));
    assert!(!dir.path().join("o.yuv").exists());
}

#[test]
fn malformed_bank_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, bank) = (dir.path().join("in.yuv"), dir.path().join("m.json"), dir.path().join("b.bank"));
    write_clip(&input, 16, 16, 1, PixelFormat::Yuv420p, 3);
    write_manifest(&manifest, 16, 16, &[]);
    std::fs::write(&bank, "# bank\nL0 quality 20\nL1 qualty 35\n").unwrap();
    let run = roiquant(&["process", "-i", s(&input), "-s", "16x16", "-d", s(&manifest), "-o",
        s(&dir.path().join("o.yuv")), "--quality-bank", s(&bank)]);
    assert_ne!(code(&run), 0);
    assert!(stderr(&run).contains("line 3"), "{}", stderr(&run));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, cfg) = (dir.path().join("in.yuv"), dir.path().join("m.json"), dir.path().join("c.toml"));
    write_clip(&input, 16, 16, 1, PixelFormat::Yuv420p, 3);
    write_manifest(&manifest, 16, 16, &[]);
    let o = dir.path().join("o.yuv");
    let base = ["process", "-i", s(&input), "-s", "16x16", "-d", s(&manifest), "-o", s(&o)];

    assert_eq!(code(&roiquant(&[&base[..], &["--threshold", "1.5"]].concat())), 1);
    assert_eq!(code(&roiquant(&[&base[..], &["--shift", "300"]].concat())), 1);
    assert_eq!(code(&roiquant(&[&base[..], &["--level", "4"]].concat())), 1);
    assert_eq!(code(&roiquant(&["process", "-i", s(&input)])), 1);

    std::fs::write(&cfg, "[process]\nthreshhold = 0.2\n").unwrap();
    let run = roiquant(&[&base[..], &["--config", s(&cfg)]].concat());
    assert_eq!(code(&run), 1, "{}", stderr(&run));
    std::fs::write(&cfg, "[process]\nthreshold = 7.0\n").unwrap();
    assert_eq!(code(&roiquant(&[&base[..], &["--config", s(&cfg)]].concat())), 1);
}

#[test]
fn cli_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, cfg) = (dir.path().join("in.yuv"), dir.path().join("m.json"), dir.path().join("c.toml"));
    write_clip(&input, 32, 32, 1, PixelFormat::Yuv420p, 4);
    write_manifest(&manifest, 32, 32, &[(0, &[(0, 0, 16, 16, 0.4)])]);
    std::fs::write(&cfg, "[process]\nthreshold = 0.3\n").unwrap();
    let report = dir.path().join("r.jsonl");
    let o = dir.path().join("o.yuv");
    let run = |extra: &[&str]| {
        let args = [&["process", "-i", s(&input), "-s", "32x32", "-d", s(&manifest), "-o", s(&o),
            "--report", s(&report), "--config", s(&cfg)][..], extra].concat();
        assert_eq!(code(&roiquant(&args)), 0);
        let text = std::fs::read_to_string(&report).unwrap();
        let frame: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        frame["bypassed"].as_bool().unwrap()
    };
    assert!(!run(&[]), "config threshold 0.3 admits the 0.4 box");
    assert!(run(&["--threshold", "0.5"]), "flag threshold 0.5 rejects it");
}

#[test]
fn manifest_frame_out_of_range_names_the_problem_and_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = (dir.path().join("in.yuv"), dir.path().join("m.json"));
    write_clip(&input, 16, 16, 2, PixelFormat::Yuv420p, 5);
    write_manifest(&manifest, 16, 16, &[(5, &[(0, 0, 8, 8, 0.9)])]);
    let o = dir.path().join("o.yuv");
    let run = roiquant(&["process", "-i", s(&input), "-s", "16x16", "-d", s(&manifest), "-o", s(&o)]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("frame 5"), "{}", stderr(&run));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 2, "{leftovers:?}");
}

#[test]
fn process_frame_directory() {
    use roiquant_core::frame::{save_image, ImageFormat};
    let dir = tempfile::tempdir().unwrap();
    let frames_in = dir.path().join("in");
    std::fs::create_dir(&frames_in).unwrap();
    for (i, f) in roiquant_core::synth::panning_clip(24, 16, 2, 6).iter().enumerate() {
        save_image(f, frames_in.join(format!("{i:03}.ppm")), ImageFormat::Ppm).unwrap();
    }
    let manifest = dir.path().join("m.json");
    write_manifest(&manifest, 24, 16, &[(0, &[(0, 0, 8, 8, 0.9)])]);
    let out = dir.path().join("out");
    let run = roiquant(&["process", "-i", s(&frames_in), "-d", s(&manifest), "-o", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(std::fs::read(out.join("000001.ppm")).unwrap(), std::fs::read(frames_in.join("001.ppm")).unwrap());
    assert!(out.join("000000.ppm").exists());
}

fn metrics_inputs(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let a = dir.join("a.yuv");
    let b = dir.join("b.yuv");
    write_clip(&a, 64, 64, 2, PixelFormat::Yuv420p, 7);
    write_clip(&b, 64, 64, 2, PixelFormat::Yuv420p, 8);
    (a, b)
}

#[test]
fn metrics_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = metrics_inputs(dir.path());
    let out = dir.path().join("m.csv");
    let run = roiquant(&["metrics", "-r", s(&a), "-d", s(&a), "-s", "64x64", "-o", s(&out)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(csv_header(&out), ["frame", "psnr", "ms_ssim", "roi_psnr", "roi_ms_ssim", "bpp"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r[1], "inf");
        assert_eq!(r[2], "1.000000");
    }
}

#[test]
fn metrics_columns_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = metrics_inputs(dir.path());
    let out = dir.path().join("m.csv");
    let run = roiquant(&["metrics", "-r", s(&a), "-d", s(&b), "-s", "64x64", "-o", s(&out), "--columns",
        "--compare", s(&a)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let cols = dir.path().join("m_columns.csv");
    assert_eq!(csv_header(&cols), ["x", "profile_a", "profile_b"]);
    let rows = csv_rows(&cols);
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r[2] == "1.000000"));
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() < 1.0));
    let svg = std::fs::read_to_string(dir.path().join("m_columns.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("profile_b"));
}

#[test]
fn metrics_empty_roi_warns() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = metrics_inputs(dir.path());
    let (out, manifest) = (dir.path().join("m.csv"), dir.path().join("roi.json"));
    write_manifest(&manifest, 64, 64, &[]);
    let run = roiquant(&["metrics", "-r", s(&a), "-d", s(&b), "-s", "64x64", "-o", s(&out), "--roi", s(&manifest)]);
    assert_eq!(code(&run), 0);
    assert!(stderr(&run).contains("ROI"), "{}", stderr(&run));
    assert!(csv_rows(&out).iter().all(|r| r[3].is_empty() && r[4].is_empty()));
}

#[test]
fn metrics_roi_and_stream_bpp() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = metrics_inputs(dir.path());
    let (out, manifest, stream) = (dir.path().join("m.csv"), dir.path().join("roi.json"), dir.path().join("s.bin"));
    write_manifest(&manifest, 64, 64, &[(0, &[(8, 8, 32, 32, 0.9)]), (1, &[(8, 8, 32, 32, 0.9)])]);
    std::fs::write(&stream, vec![0u8; 1024]).unwrap();
    let run = roiquant(&["metrics", "-r", s(&a), "-d", s(&b), "-s", "64x64", "-o", s(&out), "--roi",
        s(&manifest), "--stream", s(&stream)]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let rows = csv_rows(&out);
    let expected = 8.0 * 1024.0 / (64.0 * 64.0 * 2.0);
    assert!(rows.iter().all(|r| (r[5].parse::<f64>().unwrap() - expected).abs() < 1e-6));
    assert!(rows.iter().all(|r| !r[3].is_empty() && !r[4].is_empty()));
}

#[test]
fn metrics_geometry_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = metrics_inputs(dir.path());
    let short = dir.path().join("short.yuv");
    write_clip(&short, 64, 64, 1, PixelFormat::Yuv420p, 7);
    let run = roiquant(&["metrics", "-r", s(&a), "-d", s(&short), "-s", "64x64", "-o", s(&dir.path().join("m.csv"))]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("geometry mismatch"));
}

#[test]
fn stub_detect_examples() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    let args = |p: &Path| {
        ["stub-detect", "--size", "64x48", "--frames", "3", "--box", "10,10,20,20@0.9", "--out"]
            .into_iter()
            .map(String::from)
            .chain([s(p).to_string()])
            .collect::<Vec<_>>()
    };
    let a1 = args(&m1);
    let a2 = args(&m2);
    assert_eq!(code(&roiquant(&a1.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    assert_eq!(code(&roiquant(&a2.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&m1).unwrap()).unwrap();
    let frames = doc["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 3);
    for f in frames {
        assert_eq!(f["boxes"][0]["x"], 10);
        assert_eq!(f["boxes"][0]["confidence"], 0.9);
    }

    let out = roiquant(&["stub-detect", "--size", "64x48", "--frames", "2"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["frames"].as_array().unwrap().iter().all(|f| f["boxes"].as_array().unwrap().is_empty()));

    let out = roiquant(&["stub-detect", "--size", "64x48", "--box", "50,40,30,30"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("clipped"));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((doc["frames"][0]["boxes"][0]["w"].clone(), doc["frames"][0]["boxes"][0]["h"].clone()), (14.into(), 8.into()));
}

fn sweep_fixture(dir: &Path, bitrates: &[u32]) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    let (input, manifest, spec) = (dir.join("in.yuv"), dir.join("m.json"), dir.join("sweep.toml"));
    write_clip(&input, 64, 48, 3, PixelFormat::Yuv420p, 9);
    let boxes: &[(i64, i64, i64, i64, f64)] = &[(16, 8, 24, 24, 0.9)];
    write_manifest(&manifest, 64, 48, &[(0, boxes), (1, boxes), (2, boxes)]);
    mjpeg_spec(&spec, bitrates);
    (input, manifest, spec)
}

#[test]
fn sweep_cells_and_bpp() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, spec) = sweep_fixture(dir.path(), &[300, 900]);
    let scratch = dir.path().join("scratch");
    std::fs::create_dir(&scratch).unwrap();
    let out = dir.path().join("sweep.csv");
    let run = roiquant_env(
        &["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-d", s(&manifest), "-o", s(&out),
            "--keep-temp", "--plot"],
        &[("ROIQUANT_TMPDIR", &scratch)],
    );
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(csv_header(&out), ["encoder", "variant", "bitrate_kbps", "bytes", "bpp", "psnr", "ms_ssim",
        "roi_psnr", "roi_ms_ssim"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    assert!(!dir.path().join("sweep_skipped.csv").exists());
    assert!(dir.path().join("sweep_rd.svg").exists());

    // Recompute bpp from the kept streams.
    let mut streams: Vec<u64> = Vec::new();
    for entry in walk(&scratch) {
        if entry.extension().is_some_and(|e| e == "mjpeg") {
            streams.push(std::fs::metadata(&entry).unwrap().len());
        }
    }
    assert_eq!(streams.len(), 4);
    for r in &rows {
        let bytes: u64 = r[3].parse().unwrap();
        assert!(streams.contains(&bytes));
        let bpp: f64 = r[4].parse().unwrap();
        assert!((bpp - 8.0 * bytes as f64 / (64.0 * 48.0 * 3.0)).abs() < 1e-6);
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn sweep_missing_encoder_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, spec) = sweep_fixture(dir.path(), &[300, 900]);
    let text = std::fs::read_to_string(&spec).unwrap().replace("roiquant-mjpeg encode", "no-such-encoder-xyz encode");
    std::fs::write(&spec, text).unwrap();
    let out = dir.path().join("sweep.csv");
    let run = roiquant(&["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-d", s(&manifest), "-o", s(&out)]);
    assert_eq!(code(&run), 0);
    assert!(stderr(&run).contains("no-such-encoder-xyz"));
    assert!(csv_rows(&out).is_empty());
    let skipped = csv_rows(&dir.path().join("sweep_skipped.csv"));
    assert_eq!(skipped.len(), 4);
    assert!(skipped.iter().all(|r| r[3] == "skipped"));
}

#[test]
fn sweep_encoder_failure_exits_three_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, spec) = sweep_fixture(dir.path(), &[300]);
    let text = std::fs::read_to_string(&spec).unwrap();
    let broken = format!("{text}\n[[encoders]]\nname = \"broken\"\ncommand = \"false {{input}}\"\ndecode = \"false\"\n");
    std::fs::write(&spec, broken).unwrap();
    let out = dir.path().join("sweep.csv");
    let run = roiquant(&["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-d", s(&manifest), "-o", s(&out)]);
    assert_eq!(code(&run), 3, "{}", stderr(&run));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[0] == "mjpeg"));
    let skipped = csv_rows(&dir.path().join("sweep_skipped.csv"));
    assert_eq!(skipped.len(), 2);
    assert!(skipped.iter().all(|r| r[0] == "broken" && r[3] == "failed"));
}

#[test]
fn sweep_is_independent_of_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, spec) = sweep_fixture(dir.path(), &[300, 600, 900]);
    let run = |jobs: &str, out: &Path| {
        let r = roiquant(&["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-d", s(&manifest),
            "-o", s(out), "--jobs", jobs]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        std::fs::read(out).unwrap()
    };
    let a = run("1", &dir.path().join("a.csv"));
    let b = run("4", &dir.path().join("b.csv"));
    assert_eq!(a, b);
}

#[test]
fn sweep_spec_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest, spec) = sweep_fixture(dir.path(), &[300, 300]);
    let out = dir.path().join("sweep.csv");
    let run = roiquant(&["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-d", s(&manifest), "-o", s(&out)]);
    assert_eq!(code(&run), 1);
    mjpeg_spec(&spec, &[300]);
    let run = roiquant(&["sweep", "--spec", s(&spec), "-i", s(&input), "-s", "64x48", "-o", s(&out)]);
    assert_eq!(code(&run), 1, "preprocessed variant without detections");
}
