use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use dcmot::metrics::{clear_metrics, gt_track_set, idf1, results_track_set, ClearReport, IdReport};
use dcmot::mot_io::{self, RunConfig};
use dcmot::sim;
use dcmot::tracker::{run_sequence, run_sequence_byte, TrackerConfig};

use crate::manifest::ManifestBuilder;
use crate::overlay::render_frame;
use crate::seq;

fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(mot_io::load_config(p)?),
        None => Ok(RunConfig::default()),
    }
}

pub fn track(
    seq_dir: &Path,
    config: &Path,
    warps: Option<&Path>,
    baseline: bool,
    out: &Path,
) -> Result<()> {
    let build = ManifestBuilder::new(if baseline {
        "track --baseline byte"
    } else {
        "track"
    });
    let mut cfg = mot_io::load_config(config)?.tracker;

    // the sequence's own declared geometry wins over the config file
    let info = seq::seq_info(seq_dir)?;
    if let Some(h) = info.image_height {
        cfg.image_height = h;
    }

    let warp_map = match warps {
        Some(p) => {
            cfg.use_warp = true;
            Some(mot_io::parse_warps(p)?)
        }
        None => None,
    };

    let (dets, det_path) = seq::load_detections(seq_dir, cfg.image_height)?;
    let results = if baseline {
        run_sequence_byte(&dets, warp_map.as_ref(), &cfg)?
    } else {
        run_sequence(&dets, warp_map.as_ref(), &cfg)?
    };
    mot_io::write_results(out, &results)?;

    let mut b = build.input(&det_path).input(config).config(&cfg);
    if let Some(p) = warps {
        b = b.input(p);
    }
    b.output(out).write_next_to(out)?;

    let emitted: usize = results.iter().map(|r| r.outputs.len()).sum();
    println!(
        "tracked {} frames, wrote {} rows to {}",
        results.len(),
        emitted,
        out.display()
    );
    Ok(())
}

pub fn simulate(config: &Path, seeds: u64, out: &Path) -> Result<()> {
    let build = ManifestBuilder::new("simulate");
    let base = mot_io::load_config(config)?.simulator;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let dirs: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let cfg = sim::SimulatorConfig {
                seed: base.seed + i,
                ..base.clone()
            };
            let dir = out.join(format!("seq_{:05}", cfg.seed));
            let output = sim::generate(&cfg)?;
            sim::write_sequence(&dir, &cfg, &output)?;
            anyhow::Ok(dir)
        })
        .collect::<Result<_>>()?;

    let mut b = build.input(config).config(&base);
    for d in &dirs {
        b = b.output(d);
    }
    b.write_next_to(&out.join("run"))?;
    println!("wrote {} sequences under {}", dirs.len(), out.display());
    Ok(())
}

fn score_files(gt: &Path, res: &Path) -> Result<(ClearReport, IdReport)> {
    let gt_rows = mot_io::parse_ground_truth(gt)?;
    let res_rows = mot_io::parse_results(res)?;
    let gt_set = gt_track_set(&gt_rows);
    let pred_set = results_track_set(&res_rows);
    let clear = clear_metrics(&gt_set, &pred_set)?;
    let id = idf1(&gt_set, &pred_set)?;
    Ok((clear, id))
}

pub fn eval(gt: &Path, res: &Path, json: bool) -> Result<()> {
    let (clear, id) = score_files(gt, res)?;
    if json {
        let report = serde_json::json!({ "clear": clear, "identity": id });
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        let mut table = String::new();
        let _ = writeln!(table, "{:<16} {:>10}", "metric", "value");
        let _ = writeln!(table, "{:<16} {:>10.4}", "MOTA", clear.mota);
        let _ = writeln!(table, "{:<16} {:>10.4}", "IDF1", id.idf1);
        let _ = writeln!(table, "{:<16} {:>10}", "FP", clear.false_positives);
        let _ = writeln!(table, "{:<16} {:>10}", "FN", clear.false_negatives);
        let _ = writeln!(table, "{:<16} {:>10}", "IDSW", clear.id_switches);
        let _ = writeln!(table, "{:<16} {:>10}", "GT boxes", clear.gt_count);
        let _ = writeln!(table, "{:<16} {:>10}", "IDTP", id.idtp);
        let _ = writeln!(table, "{:<16} {:>10}", "IDFP", id.idfp);
        let _ = writeln!(table, "{:<16} {:>10}", "IDFN", id.idfn);
        print!("{table}");
    }
    Ok(())
}

/// One sequence scored at one depth-level setting.
struct SweepRow {
    k: usize,
    sequence: String,
    idf1: f64,
    mota: f64,
    idsw: u64,
}

pub fn sweep(set: &Path, ks: &[usize], out: &Path, config: Option<&Path>) -> Result<()> {
    anyhow::ensure!(!ks.is_empty(), "at least one k value is required");
    let build = ManifestBuilder::new("sweep");
    let base = load_run_config(config)?.tracker;
    let seq_dirs = seq::sequence_dirs(set)?;

    let jobs: Vec<(usize, &std::path::PathBuf)> = ks
        .iter()
        .flat_map(|&k| seq_dirs.iter().map(move |s| (k, s)))
        .collect();

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(k, seq_dir)| {
            let mut cfg = TrackerConfig {
                k_low: k,
                ..base.clone()
            };
            let info = seq::seq_info(seq_dir)?;
            if let Some(h) = info.image_height {
                cfg.image_height = h;
            }
            let (dets, _) = seq::load_detections(seq_dir, cfg.image_height)?;
            let results = run_sequence(&dets, None, &cfg)?;

            let gt_rows = mot_io::parse_ground_truth(&seq::gt_file(seq_dir)?)?;
            let gt_set = gt_track_set(&gt_rows);
            let pred_set = dcmot::metrics::frame_results_track_set(&results);
            let clear = clear_metrics(&gt_set, &pred_set)?;
            let id = idf1(&gt_set, &pred_set)?;
            anyhow::Ok(SweepRow {
                k,
                sequence: seq_dir
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                idf1: id.idf1,
                mota: clear.mota,
                idsw: clear.id_switches,
            })
        })
        .collect::<Result<_>>()?;

    // raw per-sequence values
    let mut raw = String::from("k,sequence,idf1,mota,idsw\n");
    for r in &rows {
        let _ = writeln!(
            raw,
            "{},{},{:.6},{:.6},{}",
            r.k, r.sequence, r.idf1, r.mota, r.idsw
        );
    }
    let raw_path = out.with_file_name(format!(
        "{}_raw.csv",
        out.file_stem().unwrap_or_default().to_string_lossy()
    ));
    std::fs::write(&raw_path, raw).with_context(|| format!("writing {}", raw_path.display()))?;

    // aggregate per k
    let mean_std = |vals: &[f64]| -> (f64, f64) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, std)
    };
    let mut csv = String::from("k,mean_idf1,std_idf1,mean_mota,std_mota,mean_idsw,std_idsw\n");
    let mut table = format!(
        "{:<4} {:>10} {:>10} {:>10} {:>10}\n",
        "k", "IDF1", "±", "MOTA", "IDSW"
    );
    for &k in ks {
        let of = |f: fn(&SweepRow) -> f64| -> Vec<f64> {
            rows.iter().filter(|r| r.k == k).map(f).collect()
        };
        let (mi, si) = mean_std(&of(|r| r.idf1));
        let (mm, sm) = mean_std(&of(|r| r.mota));
        let (ms, ss) = mean_std(&of(|r| r.idsw as f64));
        let _ = writeln!(csv, "{k},{mi:.6},{si:.6},{mm:.6},{sm:.6},{ms:.6},{ss:.6}");
        let _ = writeln!(table, "{k:<4} {mi:>10.4} {si:>10.4} {mm:>10.4} {ms:>10.2}");
    }
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    print!("{table}");

    build
        .input(set)
        .config(&base)
        .output(out)
        .output(&raw_path)
        .write_next_to(out)?;
    Ok(())
}

pub fn overlay_cmd(seq_dir: &Path, res: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let build = ManifestBuilder::new("overlay");
    let cfg = load_run_config(config)?.tracker;
    let info = seq::seq_info(seq_dir)?;
    let width = info.image_width.unwrap_or(1920.0);
    let height = info.image_height.unwrap_or(cfg.image_height);

    let results = mot_io::parse_results(res)?;
    let last = results.keys().next_back().copied().unwrap_or(0);
    let length = info.length.map(|l| l as u32).unwrap_or(last).max(last);

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let empty = Vec::new();
    for frame in 1..=length {
        let rows = results.get(&frame).unwrap_or(&empty);
        let svg = render_frame(rows, width, height, cfg.k_low);
        let path = out.join(format!("frame_{frame:06}.svg"));
        std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    build
        .input(seq_dir)
        .input(res)
        .config(&cfg)
        .output(out)
        .write_next_to(&out.join("run"))?;
    println!("wrote {length} overlay frames to {}", out.display());
    Ok(())
}
