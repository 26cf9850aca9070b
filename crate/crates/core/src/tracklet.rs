//! Deterministic preprocessing that turns raw tracklets and frame counts into
//! action and scene token candidates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::token::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedFrame {
    pub frame_index: u64,
    pub bbox: BBox,
}

/// A temporally contiguous tracked region. Frame indices are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub id: String,
    pub frames: Vec<TrackedFrame>,
}

impl Tracklet {
    pub fn new(id: impl Into<String>, frames: Vec<TrackedFrame>) -> Self {
        Tracklet { id: id.into(), frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_ordered(&self) -> bool {
        self.frames.windows(2).all(|w| w[0].frame_index < w[1].frame_index)
    }

    /// Frame index at the temporal middle of the tracklet.
    pub fn middle_frame(&self) -> Option<u64> {
        self.frames.get(self.frames.len() / 2).map(|f| f.frame_index)
    }
}

/// Length bounds applied to tracklets: shorter than `l_min` is dropped,
/// longer than `l_max` is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackletRules {
    pub l_min: usize,
    pub l_max: usize,
}

impl TrackletRules {
    pub fn new(l_min: usize, l_max: usize) -> Result<Self> {
        if l_min == 0 || l_min > l_max {
            return Err(Error::InvalidConfig(format!(
                "tracklet rules need 1 <= l_min <= l_max, got ({l_min}, {l_max})"
            )));
        }
        Ok(TrackletRules { l_min, l_max })
    }
}

impl Default for TrackletRules {
    fn default() -> Self {
        TrackletRules { l_min: 8, l_max: 16 }
    }
}

/// Drops short tracklets and chunks long ones into pieces of `l_max` frames.
///
/// A trailing chunk shorter than `l_max` survives only if it still meets
/// `l_min`. Chunk ids are `<id>#<chunk_index>`; tracklets that need no
/// splitting keep their id. Input order is preserved.
pub fn filter_split_tracklets(tracklets: &[Tracklet], rules: TrackletRules) -> Vec<Tracklet> {
    let mut out = Vec::new();
    for tracklet in tracklets {
        let len = tracklet.len();
        if len < rules.l_min {
            continue;
        }
        if len <= rules.l_max {
            out.push(tracklet.clone());
            continue;
        }
        for (chunk_index, chunk) in tracklet.frames.chunks(rules.l_max).enumerate() {
            if chunk.len() < rules.l_min {
                continue;
            }
            out.push(Tracklet {
                id: format!("{}#{}", tracklet.id, chunk_index),
                frames: chunk.to_vec(),
            });
        }
    }
    out
}

/// Smallest rectangle enclosing every per-frame box.
pub fn spatial_union(tracklet: &Tracklet) -> Result<BBox> {
    let (first, rest) = tracklet.frames.split_first().ok_or(Error::EmptyTracklet)?;
    Ok(rest.iter().fold(first.bbox, |acc, f| BBox {
        x0: acc.x0.min(f.bbox.x0),
        y0: acc.y0.min(f.bbox.y0),
        x1: acc.x1.max(f.bbox.x1),
        y1: acc.y1.max(f.bbox.y1),
    }))
}

/// `n_scene` floor-spaced frame indices starting at zero:
/// `index_i = floor(i * frame_count / n_scene)`.
pub fn uniform_scene_indices(frame_count: usize, n_scene: usize) -> Result<Vec<usize>> {
    if n_scene < 1 || n_scene > frame_count {
        return Err(Error::InvalidCount { count: n_scene, available: frame_count });
    }
    Ok(floor_spaced(frame_count, n_scene))
}

pub(crate) fn floor_spaced(total: usize, picks: usize) -> Vec<usize> {
    (0..picks)
        .map(|i| ((i as u128 * total as u128) / picks as u128) as usize)
        .collect()
}
