//! Map-to-map comparison metrics and their per-frame median aggregate.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::DeformMap;
use crate::sensor::SensingGrid;
use crate::signals::{compute_signals, contact_mask, ContactSignals, ForceModel};

fn check_shapes(a: &DeformMap, b: &DeformMap) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )))
    }
}

/// Intersection over union of the two contact masks. Two empty masks agree
/// perfectly and score 1.
pub fn deform_iou(a: &DeformMap, b: &DeformMap, tau: f64) -> Result<f64> {
    check_shapes(a, b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&da, &db) in a.depths.iter().zip(&b.depths) {
        let (ma, mb) = (da > tau, db > tau);
        inter += (ma && mb) as usize;
        union += (ma || mb) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Median relative depth error `|a − ref| / ref` over pixels active in both
/// maps.
pub fn depth_error(a: &DeformMap, reference: &DeformMap, tau: f64) -> Result<f64> {
    check_shapes(a, reference)?;
    let ma = contact_mask(a, tau);
    let mr = contact_mask(reference, tau);
    let rel: Vec<f64> = (0..a.len())
        .filter(|&i| ma.active[i] && mr.active[i])
        .map(|i| (a.depths[i] - reference.depths[i]).abs() / reference.depths[i])
        .collect();
    median(&rel).ok_or_else(|| Error::Metric("depth error undefined: contact masks do not overlap".into()))
}

fn centroids(a: &ContactSignals, b: &ContactSignals) -> Result<([f64; 3], [f64; 3])> {
    match (a.centroid_point_m, b.centroid_point_m) {
        (Some(pa), Some(pb)) => Ok((pa, pb)),
        _ => Err(Error::Metric("position error undefined: a frame has no contact centroid".into())),
    }
}

/// Euclidean distance between the metric contact centroids.
pub fn position_error(a: &ContactSignals, b: &ContactSignals) -> Result<f64> {
    let (pa, pb) = centroids(a, b)?;
    Ok(pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Distance between the pixel-space centroids, in pixels.
pub fn position_error_px(a: &ContactSignals, b: &ContactSignals) -> Result<f64> {
    match (a.centroid_pixel, b.centroid_pixel) {
        (Some(pa), Some(pb)) => Ok(((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()),
        _ => Err(Error::Metric("position error undefined: a frame has no contact centroid".into())),
    }
}

pub fn force_l2(a: &ContactSignals, b: &ContactSignals) -> f64 {
    (a.net_force() - b.net_force()).norm()
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower + upper))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub frame: usize,
    pub name: String,
    pub iou: f64,
    pub depth_error: Option<f64>,
    pub position_error_m: Option<f64>,
    pub position_error_px: Option<f64>,
    pub force_l2_n: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MedianSummary {
    pub iou: Option<f64>,
    pub depth_error: Option<f64>,
    pub position_error_m: Option<f64>,
    pub position_error_px: Option<f64>,
    pub force_l2_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tau_m: f64,
    pub frames: Vec<FrameComparison>,
    /// Each metric's median over the frames where it is defined.
    pub median: MedianSummary,
}

/// Compares map `a` against reference `b` for every frame. Metric-space
/// position and force need the sensing grid; without it they are omitted.
pub fn compare_sequences(
    frames: &[(String, DeformMap, DeformMap)],
    tau: f64,
    grid: Option<(&SensingGrid, &ForceModel)>,
) -> Result<ComparisonReport> {
    let mut out = Vec::with_capacity(frames.len());
    for (i, (name, a, b)) in frames.iter().enumerate() {
        let iou = deform_iou(a, b, tau)?;
        let depth = depth_error(a, b, tau).ok();
        let sig = |m: &DeformMap, g: &SensingGrid, f: &ForceModel| compute_signals(m, g, tau, f);
        let (pos_m, pos_px, force) = match grid {
            Some((g, f)) => {
                let (sa, sb) = (sig(a, g, f)?, sig(b, g, f)?);
                (
                    position_error(&sa, &sb).ok(),
                    position_error_px(&sa, &sb).ok(),
                    Some(force_l2(&sa, &sb)),
                )
            }
            None => (None, pixel_centroid_distance(a, b, tau), None),
        };
        out.push(FrameComparison {
            frame: i,
            name: name.clone(),
            iou,
            depth_error: depth,
            position_error_m: pos_m,
            position_error_px: pos_px,
            force_l2_n: force,
        });
    }
    let collect = |f: fn(&FrameComparison) -> Option<f64>| median(&out.iter().filter_map(f).collect::<Vec<_>>());
    let median = MedianSummary {
        iou: collect(|f| Some(f.iou)),
        depth_error: collect(|f| f.depth_error),
        position_error_m: collect(|f| f.position_error_m),
        position_error_px: collect(|f| f.position_error_px),
        force_l2_n: collect(|f| f.force_l2_n),
    };
    Ok(ComparisonReport {
        tau_m: tau,
        frames: out,
        median,
    })
}

fn pixel_centroid_distance(a: &DeformMap, b: &DeformMap, tau: f64) -> Option<f64> {
    let c = |m: &DeformMap| {
        let mask = contact_mask(m, tau);
        let n = mask.count();
        (n > 0).then(|| {
            let (r, c) = mask
                .pixels()
                .fold((0.0, 0.0), |(r, c), (pr, pc)| (r + pr as f64, c + pc as f64));
            [r / n as f64, c / n as f64]
        })
    };
    let (pa, pb) = (c(a)?, c(b)?);
    Some(((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt())
}

impl ComparisonReport {
    /// CSV with columns `frame,iou,depth_error,position_error_m,force_l2_N`;
    /// undefined values are empty cells.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("frame,iou,depth_error,position_error_m,force_l2_N\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for f in &self.frames {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                f.frame,
                f.iou,
                cell(f.depth_error),
                cell(f.position_error_m),
                cell(f.force_l2_n)
            ));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
