use std::collections::BTreeMap;

use roiquant_core::detections::{BoundingBox, DetectionSet, Manifest};
use roiquant_core::fsutil::write_atomic;

use crate::args::StubArgs;
use crate::exit::usage;

/// Parses `x,y,w,h[@confidence][:label]`. Coordinates may be negative or run
/// past the frame; clipping happens later.
pub fn parse_box(spec: &str) -> anyhow::Result<(i64, i64, i64, i64, f64, String)> {
    let (rest, label) = match spec.split_once(':') {
        Some((r, l)) => (r, l.to_string()),
        None => (spec, String::new()),
    };
    let (coords, conf) = match rest.split_once('@') {
        Some((c, p)) => (
            c,
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("box `{spec}`: bad confidence `{p}`")))?,
        ),
        None => (rest, 1.0),
    };
    if !(0.0..=1.0).contains(&conf) {
        return Err(usage(format!("box `{spec}`: confidence {conf} outside [0, 1]")));
    }
    let v: Vec<i64> = coords
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("box `{spec}`: expected x,y,w,h integers")))?;
    let [x, y, w, h] = v[..] else {
        return Err(usage(format!("box `{spec}`: expected x,y,w,h")));
    };
    if w <= 0 || h <= 0 {
        return Err(usage(format!("box `{spec}`: width and height must be positive")));
    }
    Ok((x, y, w, h, conf, label))
}

pub fn build(args: &StubArgs) -> anyhow::Result<Manifest> {
    let (fw, fh) = (args.size.width as u32, args.size.height as u32);
    let mut boxes = Vec::new();
    for spec in &args.boxes {
        let (x, y, w, h, confidence, label) = parse_box(spec)?;
        match BoundingBox::clipped(x, y, w, h, fw, fh) {
            Some((cx, cy, cw, ch)) => {
                if (cx as i64, cy as i64, cw as i64, ch as i64) != (x, y, w, h) {
                    log::warn!("box `{spec}` clipped to {cx},{cy},{cw},{ch}");
                }
                boxes.push(BoundingBox {
                    x: cx,
                    y: cy,
                    w: cw,
                    h: ch,
                    confidence,
                    label,
                });
            }
            None => log::warn!("box `{spec}` lies outside the {fw}x{fh} frame and was dropped"),
        }
    }
    let frames: BTreeMap<usize, DetectionSet> = (0..args.frames)
        .map(|i| (i, DetectionSet::new(i, boxes.clone())))
        .collect();
    Ok(Manifest {
        width: fw,
        height: fh,
        frames,
    })
}

pub fn run(args: &StubArgs) -> anyhow::Result<()> {
    let json = build(args)?.to_json();
    match &args.out {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}
