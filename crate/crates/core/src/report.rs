//! Run artifacts: CSV logs, PGM maps, SVG plots, run summaries and
//! seed-paired comparisons between runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Policy, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::{frontier_reduction, image_quality, map_quality, MapQuality};
use crate::server::Assignment;
use crate::sim::{Event, MetricsLog, RunOutput};
use crate::world::{pgm_header, to_pgm, OccupancyGrid};

/// Per-run headline numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub policy: Policy,
    pub seed: u64,
    pub ticks: u64,
    pub robots: usize,
    pub final_coverage: f64,
    pub robot_coverage: Vec<f64>,
    pub reloc: Vec<usize>,
    pub closures: usize,
    pub free_area: f64,
    /// Mean over post-transient ticks of the mean pairwise overlap area (m²).
    pub mean_iou_area: f64,
    /// Mean per-tick frontier reduction over ticks with any raw frontier (%).
    pub mean_reduction: f64,
    /// Post-transient fraction of robot samples on the safe side of `D_MAX`.
    pub safe_fraction: f64,
    pub quality: MapQuality,
}

fn post_transient(cfg: &ScenarioConfig, tick: u64) -> bool {
    tick as f64 > cfg.transient * cfg.ticks as f64
}

pub fn summarize(out: &RunOutput) -> Result<RunSummary> {
    let cfg = &out.config;
    let log = &out.log;
    let res = out.world.resolution();
    let last = log.rows.last();
    let post: Vec<_> = log.rows.iter().filter(|r| post_transient(cfg, r.tick)).collect();
    let mean_iou_area = if post.is_empty() || log.pairs.is_empty() {
        0.0
    } else {
        post.iter()
            .map(|r| r.iou_area.iter().sum::<f64>() / r.iou_area.len() as f64)
            .sum::<f64>()
            / post.len() as f64
    };
    let raw: Vec<usize> = log.rows.iter().map(|r| r.raw).collect();
    let filtered: Vec<usize> = log.rows.iter().map(|r| r.filtered).collect();
    let reduction = frontier_reduction(&raw, &filtered)?;
    let trigger = cfg.reloc_trigger();
    let samples: Vec<bool> = post
        .iter()
        .flat_map(|r| r.d_opti.iter().map(|d| !trigger.breached(*d, cfg.d_max)))
        .collect();
    let safe_fraction = if samples.is_empty() {
        1.0
    } else {
        samples.iter().filter(|s| **s).count() as f64 / samples.len() as f64
    };
    Ok(RunSummary {
        policy: cfg.policy,
        seed: cfg.seed,
        ticks: cfg.ticks,
        robots: log.robots,
        final_coverage: last.map_or(0.0, |r| r.merged_coverage),
        robot_coverage: last.map_or_else(Vec::new, |r| r.robot_coverage.clone()),
        reloc: out.agents.iter().map(|a| a.reloc).collect(),
        closures: out.agents.iter().map(|a| a.graph.closures().len()).sum(),
        free_area: out.world.free_count() as f64 * res * res,
        mean_iou_area,
        mean_reduction: reduction.mean_active(&raw),
        safe_fraction,
        quality: map_quality(&out.merged, &out.truth())?,
    })
}

impl RunSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        kv("policy", self.policy.to_string());
        kv("seed", self.seed.to_string());
        kv("ticks", self.ticks.to_string());
        kv("robots", self.robots.to_string());
        kv("final_coverage", format!("{:.6}", self.final_coverage));
        for (i, c) in self.robot_coverage.iter().enumerate() {
            kv(&format!("coverage_r{i}"), format!("{c:.6}"));
        }
        for (i, r) in self.reloc.iter().enumerate() {
            kv(&format!("reloc_r{i}"), r.to_string());
        }
        kv("reloc_total", self.reloc.iter().sum::<usize>().to_string());
        kv("closures", self.closures.to_string());
        kv("free_area", format!("{:.6}", self.free_area));
        kv("mean_iou_area", format!("{:.6}", self.mean_iou_area));
        kv("mean_reduction", format!("{:.6}", self.mean_reduction));
        kv("safe_fraction", format!("{:.6}", self.safe_fraction));
        kv("mse", format!("{:.6}", self.quality.mse));
        kv("ssim", format!("{:.6}", self.quality.ssim));
        kv("ncc", format!("{:.6}", self.quality.ncc));
        kv("cs", format!("{:.6}", self.quality.cs));
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for row in csv::Reader::from_reader(text.as_bytes()).records() {
            let row = row.map_err(|e| csv_error(Path::new("summary.csv"), e))?;
            let (Some(k), Some(v)) = (row.get(0), row.get(1)) else {
                return Err(Error::Compare("summary row needs a key and a value".into()));
            };
            map.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k)
                .ok_or_else(|| Error::Compare(format!("summary is missing {k:?}")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Compare(format!("summary field {k:?} has bad value {v:?}")))
        }
        let robots: usize = num("robots", get("robots")?)?;
        let per_robot = |prefix: &str| -> Result<Vec<String>> {
            (0..robots).map(|i| get(&format!("{prefix}{i}")).cloned()).collect()
        };
        Ok(RunSummary {
            policy: get("policy")?.parse()?,
            seed: num("seed", get("seed")?)?,
            ticks: num("ticks", get("ticks")?)?,
            robots,
            final_coverage: num("final_coverage", get("final_coverage")?)?,
            robot_coverage: per_robot("coverage_r")?
                .iter()
                .map(|v| num("coverage", v))
                .collect::<Result<_>>()?,
            reloc: per_robot("reloc_r")?.iter().map(|v| num("reloc", v)).collect::<Result<_>>()?,
            closures: num("closures", get("closures")?)?,
            free_area: num("free_area", get("free_area")?)?,
            mean_iou_area: num("mean_iou_area", get("mean_iou_area")?)?,
            mean_reduction: num("mean_reduction", get("mean_reduction")?)?,
            safe_fraction: num("safe_fraction", get("safe_fraction")?)?,
            quality: MapQuality {
                mse: num("mse", get("mse")?)?,
                ssim: num("ssim", get("ssim")?)?,
                ncc: num("ncc", get("ncc")?)?,
                cs: num("cs", get("cs")?)?,
            },
        })
    }
}

pub fn metrics_csv(log: &MetricsLog) -> String {
    let n = log.robots;
    let mut s = String::from("tick");
    for i in 0..n {
        let _ = write!(s, ",coverage_r{i}");
    }
    s.push_str(",coverage_merged");
    for (i, j) in &log.pairs {
        let _ = write!(s, ",iou_area_{i}_{j}");
    }
    s.push_str(",frontiers_raw,frontiers_filtered,frontiers_global,reduction");
    for i in 0..n {
        let _ = write!(s, ",d_opti_r{i}");
    }
    for i in 0..n {
        let _ = write!(s, ",reloc_r{i}");
    }
    for i in 0..n {
        let _ = write!(s, ",lost_r{i}");
    }
    s.push('\n');
    for r in &log.rows {
        let _ = write!(s, "{}", r.tick);
        for c in &r.robot_coverage {
            let _ = write!(s, ",{c:.6}");
        }
        let _ = write!(s, ",{:.6}", r.merged_coverage);
        for a in &r.iou_area {
            let _ = write!(s, ",{a:.6}");
        }
        let reduction = if r.raw > 0 {
            100.0 * (1.0 - r.filtered as f64 / r.raw as f64)
        } else {
            0.0
        };
        let _ = write!(s, ",{},{},{},{reduction:.6}", r.raw, r.filtered, r.global);
        for d in &r.d_opti {
            let _ = write!(s, ",{d:.6}");
        }
        for k in &r.reloc {
            let _ = write!(s, ",{k}");
        }
        for l in &r.lost {
            let _ = write!(s, ",{}", u8::from(*l));
        }
        s.push('\n');
    }
    s
}

pub fn events_csv(events: &[Event]) -> String {
    let mut s = format!("{}\n", Event::CSV_HEADER);
    for e in events {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

pub fn dopti_csv(log: &MetricsLog) -> String {
    let mut s = String::from("tick,robot_id,d_opti,event\n");
    for r in &log.dopti {
        let _ = writeln!(s, "{},{},{:.6},{}", r.tick, r.robot, r.d_opti, r.event);
    }
    s
}

pub fn assignments_csv(assignments: &[Assignment]) -> String {
    let mut s = format!("{}\n", Assignment::CSV_HEADER);
    for a in assignments {
        s.push_str(&a.csv_row());
        s.push('\n');
    }
    s
}

pub fn frontiers_csv(log: &MetricsLog) -> String {
    let mut s = String::from("tick,robot_id,x,y,source\n");
    for r in &log.frontiers {
        let row = crate::frontier::csv_rows(r.robot, std::slice::from_ref(&r.point));
        let _ = writeln!(s, "{},{}", r.tick, row[0]);
    }
    s
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_map(dir: &Path, name: &str, grid: &OccupancyGrid) -> Result<()> {
    write(&dir.join(format!("{name}.pgm")), to_pgm(grid))?;
    write(&dir.join(format!("{name}.txt")), pgm_header(grid))
}

/// Writes every artifact of a run into `dir` and returns its summary.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<RunSummary> {
    let maps = dir.join("maps");
    let plots = dir.join("plots");
    mkdir(&maps)?;
    mkdir(&plots)?;
    let summary = summarize(out)?;
    write(&dir.join("config.toml"), out.config.to_toml())?;
    write(&dir.join("metrics.csv"), metrics_csv(&out.log))?;
    write(&dir.join("events.csv"), events_csv(&out.log.events))?;
    write(&dir.join("dopti.csv"), dopti_csv(&out.log))?;
    write(&dir.join("assignments.csv"), assignments_csv(&out.log.assignments))?;
    write(&dir.join("frontiers.csv"), frontiers_csv(&out.log))?;
    write(&dir.join("summary.csv"), summary.to_csv())?;

    write_map(&maps, "merged", &out.merged)?;
    write_map(&maps, "truth", &out.truth())?;
    for (i, m) in out.local_maps.iter().enumerate() {
        write_map(&maps, &format!("robot_{i}"), m)?;
    }
    for ((i, j), m) in out.log.pairs.iter().zip(&out.ious) {
        write_map(&maps, &format!("iou_{i}_{j}"), m.map())?;
    }

    let log = &out.log;
    let ticks: Vec<f64> = log.rows.iter().map(|r| r.tick as f64).collect();
    let series = |f: &dyn Fn(&crate::sim::TickRow) -> f64| -> Vec<(f64, f64)> {
        ticks.iter().copied().zip(log.rows.iter().map(f)).collect()
    };
    let mut cov = vec![("merged".to_string(), series(&|r| r.merged_coverage))];
    for i in 0..log.robots {
        cov.push((format!("robot {i}"), series(&|r| r.robot_coverage[i])));
    }
    write(&plots.join("coverage.svg"), line_plot("Coverage", "tick", "% of reachable area", &cov, &[]))?;

    let iou: Vec<(String, Vec<(f64, f64)>)> = log
        .pairs
        .iter()
        .enumerate()
        .map(|(k, (i, j))| (format!("robots {i}-{j}"), series(&|r| r.iou_area[k])))
        .collect();
    write(&plots.join("iou_area.svg"), line_plot("Overlap map area", "tick", "m²", &iou, &[]))?;

    let dopt: Vec<(String, Vec<(f64, f64)>)> = (0..log.robots)
        .map(|i| (format!("robot {i}"), series(&|r| r.d_opti[i])))
        .collect();
    write(
        &plots.join("dopti.svg"),
        line_plot("Edge D-optimality", "tick", "D-Opti", &dopt, &[("D_MAX", out.config.d_max)]),
    )?;

    let raw: Vec<usize> = log.rows.iter().map(|r| r.raw).collect();
    let filtered: Vec<usize> = log.rows.iter().map(|r| r.filtered).collect();
    let red = frontier_reduction(&raw, &filtered)?;
    let zip = |v: &[f64]| ticks.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let fr = vec![
        ("raw".to_string(), series(&|r| r.raw as f64)),
        ("filtered".to_string(), series(&|r| r.filtered as f64)),
        ("raw (running mean)".to_string(), zip(&red.running_mean_raw)),
        ("filtered (running mean)".to_string(), zip(&red.running_mean_filtered)),
    ];
    write(&plots.join("frontiers.svg"), line_plot("Frontier points", "tick", "points", &fr, &[]))?;
    Ok(summary)
}

/// Reads an 8-bit greyscale PGM.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            message: format!("{}: {e}", path.display()),
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

/// Map quality of `maps/merged.pgm` against `maps/truth.pgm` in a run directory.
pub fn quality_from_run(dir: &Path) -> Result<MapQuality> {
    let (w, h, merged) = read_pgm(&dir.join("maps").join("merged.pgm"))?;
    let (tw, th, truth) = read_pgm(&dir.join("maps").join("truth.pgm"))?;
    if (w, h) != (tw, th) {
        return Err(Error::DimensionMismatch(format!("{w}x{h} vs {tw}x{th}")));
    }
    image_quality(&merged, &truth, w, h)
}

/// A run directory as read back from disk.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub ticks: Vec<u64>,
    pub coverage: Vec<f64>,
}

pub fn read_run(dir: &Path) -> Result<RunRecord> {
    let summary_path = dir.join("summary.csv");
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary = RunSummary::from_csv(&text)?;
    let metrics_path = dir.join("metrics.csv");
    let mut reader = csv::Reader::from_path(&metrics_path).map_err(|e| csv_error(&metrics_path, e))?;
    let col = reader
        .headers()
        .map_err(|e| csv_error(&metrics_path, e))?
        .iter()
        .position(|h| h == "coverage_merged")
        .ok_or_else(|| Error::Compare(format!("{} has no coverage_merged column", metrics_path.display())))?;
    let (mut ticks, mut coverage) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(&metrics_path, e))?;
        let bad = || Error::Compare(format!("bad row in {}", metrics_path.display()));
        ticks.push(row.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?);
        coverage.push(row.get(col).and_then(|v| v.parse().ok()).ok_or_else(bad)?);
    }
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        summary,
        ticks,
        coverage,
    })
}

/// One seed's paired difference `b − a`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDelta {
    pub policy_a: Policy,
    pub policy_b: Policy,
    pub seed: u64,
    pub coverage: f64,
    pub iou_area: f64,
    pub reloc: i64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub deltas: Vec<PairedDelta>,
    /// Per policy, mean merged-coverage series over its seeds.
    pub mean_coverage: Vec<(Policy, Vec<(f64, f64)>)>,
}

/// Pairs runs by seed. The policy of the first run is the reference; every
/// other policy is compared against it. A single policy is compared with
/// itself.
pub fn compare_runs(runs: &[RunRecord]) -> Result<Comparison> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Compare("no runs to compare".into()))?;
    for r in runs {
        if r.ticks != first.ticks {
            return Err(Error::Compare(format!(
                "{} and {} do not share a tick grid",
                first.dir.display(),
                r.dir.display()
            )));
        }
    }
    let mut groups: Vec<(Policy, BTreeMap<u64, &RunRecord>)> = Vec::new();
    for r in runs {
        let p = r.summary.policy;
        let idx = match groups.iter().position(|(q, _)| *q == p) {
            Some(i) => i,
            None => {
                groups.push((p, BTreeMap::new()));
                groups.len() - 1
            }
        };
        if let Some(prev) = groups[idx].1.insert(r.summary.seed, r) {
            if prev.summary == r.summary && prev.coverage == r.coverage {
                continue;
            }
            return Err(Error::Compare(format!(
                "policy {p} has seed {} more than once",
                r.summary.seed
            )));
        }
    }
    let (ref_policy, reference) = &groups[0];
    let others: Vec<&(Policy, BTreeMap<u64, &RunRecord>)> = if groups.len() == 1 {
        vec![&groups[0]]
    } else {
        groups[1..].iter().collect()
    };
    let mut deltas = Vec::new();
    for (policy, set) in others {
        for seed in reference.keys().chain(set.keys()) {
            if !reference.contains_key(seed) {
                return Err(Error::Compare(format!("seed {seed} is missing for policy {ref_policy}")));
            }
            if !set.contains_key(seed) {
                return Err(Error::Compare(format!("seed {seed} is missing for policy {policy}")));
            }
        }
        for (seed, a) in reference {
            let b = set[seed];
            let (sa, sb) = (&a.summary, &b.summary);
            deltas.push(PairedDelta {
                policy_a: *ref_policy,
                policy_b: *policy,
                seed: *seed,
                coverage: sb.final_coverage - sa.final_coverage,
                iou_area: sb.mean_iou_area - sa.mean_iou_area,
                reloc: sb.reloc.iter().sum::<usize>() as i64 - sa.reloc.iter().sum::<usize>() as i64,
            });
        }
    }
    let mean_coverage = groups
        .iter()
        .map(|(p, set)| {
            let n = set.len() as f64;
            let series = first
                .ticks
                .iter()
                .enumerate()
                .map(|(k, t)| (*t as f64, set.values().map(|r| r.coverage[k]).sum::<f64>() / n))
                .collect();
            (*p, series)
        })
        .collect();
    Ok(Comparison { deltas, mean_coverage })
}

pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut s = String::from("policy_a,policy_b,seed,delta_coverage,delta_iou_area,delta_reloc\n");
    for d in &cmp.deltas {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{}",
            d.policy_a, d.policy_b, d.seed, d.coverage, d.iou_area, d.reloc
        );
    }
    s
}

pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<()> {
    let plots = dir.join("plots");
    mkdir(&plots)?;
    write(&dir.join("comparison.csv"), comparison_csv(cmp))?;
    let series: Vec<(String, Vec<(f64, f64)>)> = cmp
        .mean_coverage
        .iter()
        .map(|(p, s)| (p.to_string(), s.clone()))
        .collect();
    write(
        &plots.join("coverage_compare.svg"),
        line_plot("Mean merged coverage", "tick", "% of reachable area", &series, &[]),
    )
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

/// Minimal SVG line chart.
fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            line,
            column: 1,
            message: format!("{}: {kind:?}", path.display()),
        },
    }
}

pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    hlines: &[(&str, f64)],
) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 40.0);
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for (_, y) in hlines {
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y1.is_finite() {
        y1 = 1.0;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="14">{}</text>"#, left, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 4.0,
            sy(fy) + 4.0,
            tick_label(fy)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            top + ph + 14.0,
            tick_label(fx)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 6.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (name, y) in hlines {
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-dasharray="4 3"/>"##,
            sy(*y),
            left + pw,
            sy(*y)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 6.0,
            sy(*y) + 4.0,
            escape(name)
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in pts {
            let _ = write!(path, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let ly = top + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 6.0,
            left + pw + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 28.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
