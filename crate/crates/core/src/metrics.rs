//! Exploration and map-quality metrics.

use crate::error::{Error, Result};
use crate::world::{OccupancyGrid, WorldModel, UNKNOWN};

/// Known-cell coverage over the part of the world a ground robot can sense.
#[derive(Clone, Debug)]
pub struct Coverage {
    width: usize,
    height: usize,
    resolution: f64,
    region: Vec<bool>,
    total: usize,
}

impl Coverage {
    pub fn new(truth: &WorldModel) -> Self {
        let region = truth.reachable_region();
        let total = region.iter().filter(|r| **r).count();
        Self {
            width: truth.width(),
            height: truth.height(),
            resolution: truth.resolution(),
            region,
            total,
        }
    }

    pub fn region(&self) -> &[bool] {
        &self.region
    }

    pub fn percent(&self, map: &OccupancyGrid) -> Result<f64> {
        if map.width() != self.width
            || map.height() != self.height
            || map.resolution() != self.resolution
            || map.origin().x != 0.0
            || map.origin().y != 0.0
        {
            return Err(Error::DimensionMismatch(format!(
                "map {}x{} @ {} vs world {}x{} @ {}",
                map.width(),
                map.height(),
                map.resolution(),
                self.width,
                self.height,
                self.resolution
            )));
        }
        let known = map
            .cells()
            .iter()
            .zip(&self.region)
            .filter(|(v, r)| **r && **v != UNKNOWN)
            .count();
        Ok(100.0 * known as f64 / self.total as f64)
    }
}

/// Percent of the reachable region (largest free component plus the
/// obstacles bordering it) known in `map`.
pub fn coverage_percent(map: &OccupancyGrid, truth: &WorldModel) -> Result<f64> {
    Coverage::new(truth).percent(map)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapQuality {
    pub mse: f64,
    pub ssim: f64,
    pub ncc: f64,
    pub cs: f64,
}

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Compares the intensity renderings (free 255, occupied 0, unknown 127).
pub fn map_quality(map: &OccupancyGrid, truth: &OccupancyGrid) -> Result<MapQuality> {
    if map.width() != truth.width() || map.height() != truth.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            map.width(),
            map.height(),
            truth.width(),
            truth.height()
        )));
    }
    image_quality(&map.intensities(), &truth.intensities(), map.width(), map.height())
}

pub fn image_quality(a: &[u8], b: &[u8], width: usize, height: usize) -> Result<MapQuality> {
    if a.len() != width * height || b.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "images of {} and {} pixels for {width}x{height}",
            a.len(),
            b.len()
        )));
    }
    let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    Ok(MapQuality {
        mse: mse(&a, &b),
        ssim: ssim(&a, &b, width, height),
        ncc: ncc(&a, &b),
        cs: cosine(&a, &b),
    })
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean SSIM over all 8x8 windows (stride 1) with population statistics.
/// Images smaller than a window in either direction use one whole-image window.
pub fn ssim(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let (ww, wh) = if width < SSIM_WINDOW || height < SSIM_WINDOW {
        (width, height)
    } else {
        (SSIM_WINDOW, SSIM_WINDOW)
    };
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=height - wh {
        for x0 in 0..=width - ww {
            total += window_ssim(a, b, width, x0, y0, ww, wh);
            count += 1;
        }
    }
    total / count as f64
}

fn window_ssim(a: &[f64], b: &[f64], width: usize, x0: usize, y0: usize, ww: usize, wh: usize) -> f64 {
    let n = (ww * wh) as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    for y in y0..y0 + wh {
        for x in x0..x0 + ww {
            sa += a[y * width + x];
            sb += b[y * width + x];
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for y in y0..y0 + wh {
        for x in x0..x0 + ww {
            let da = a[y * width + x] - ma;
            let db = b[y * width + x] - mb;
            vaa += da * da;
            vbb += db * db;
            vab += da * db;
        }
    }
    let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
    ((2.0 * ma * mb + C1) * (2.0 * vab + C2)) / ((ma * ma + mb * mb + C1) * (vaa + vbb + C2))
}

/// Pearson correlation mapped to `[0, 1]` by `(r + 1) / 2`. Two constant
/// images score 1 when equal and 0.5 otherwise.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let r = if saa == 0.0 || sbb == 0.0 {
        if a == b {
            1.0
        } else {
            0.0
        }
    } else {
        sab / (saa * sbb).sqrt()
    };
    (r + 1.0) / 2.0
}

/// Cosine of the angle between the flattened images.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return if aa == bb { 1.0 } else { 0.0 };
    }
    ab / (aa * bb).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierReduction {
    /// `100 (1 − filtered/raw)` per tick, 0 where `raw` is 0.
    pub per_tick: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_mean_raw: Vec<f64>,
    pub running_mean_filtered: Vec<f64>,
}

impl FrontierReduction {
    /// Mean reduction over the ticks that had any raw frontier.
    pub fn mean_active(&self, raw: &[usize]) -> f64 {
        let active: Vec<f64> = self
            .per_tick
            .iter()
            .zip(raw)
            .filter(|(_, r)| **r > 0)
            .map(|(p, _)| *p)
            .collect();
        if active.is_empty() {
            0.0
        } else {
            active.iter().sum::<f64>() / active.len() as f64
        }
    }
}

fn running_mean(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

pub fn frontier_reduction(raw: &[usize], filtered: &[usize]) -> Result<FrontierReduction> {
    if raw.len() != filtered.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} raw counts vs {} filtered",
            raw.len(),
            filtered.len()
        )));
    }
    let per_tick: Vec<f64> = raw
        .iter()
        .zip(filtered)
        .map(|(&r, &f)| {
            if r > 0 {
                100.0 * (1.0 - f as f64 / r as f64)
            } else {
                0.0
            }
        })
        .collect();
    Ok(FrontierReduction {
        running_mean: running_mean(per_tick.iter().copied()),
        running_mean_raw: running_mean(raw.iter().map(|&v| v as f64)),
        running_mean_filtered: running_mean(filtered.iter().map(|&v| v as f64)),
        per_tick,
    })
}
