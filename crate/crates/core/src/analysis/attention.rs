//! Anatomical-band attention analysis of normalized heatmaps.
//!
//! The band geometry approximates a vertically oriented left-hand radiograph,
//! fingers at the top. It is a configurable approximation, not an anatomical
//! segmentation.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::cam::Heatmap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Phalanges,
    Metacarpals,
    Carpals,
    Radius,
    Ulna,
}

impl Region {
    pub const ALL: [Region; 5] =
        [Region::Phalanges, Region::Metacarpals, Region::Carpals, Region::Radius, Region::Ulna];

    pub fn name(self) -> &'static str {
        match self {
            Region::Phalanges => "phalanges",
            Region::Metacarpals => "metacarpals",
            Region::Carpals => "carpals",
            Region::Radius => "radius",
            Region::Ulna => "ulna",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type RegionSet = BTreeSet<Region>;

/// Vertical band boundaries as fractions of the height, plus attention thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionBands {
    pub metacarpals_start: f64,
    pub carpals_start: f64,
    pub forearm_start: f64,
    /// Column fraction separating radius (left) from ulna (right).
    pub forearm_split: f64,
    /// Swap radius and ulna (dorsal-view right hand or mirrored scan).
    pub mirror: bool,
    /// Binarization threshold on the normalized heatmap.
    pub tau: f64,
    /// Minimum attended fraction of a region's pixels.
    pub rho: f64,
}

impl Default for RegionBands {
    fn default() -> Self {
        RegionBands {
            metacarpals_start: 0.45,
            carpals_start: 0.65,
            forearm_start: 0.82,
            forearm_split: 0.5,
            mirror: false,
            tau: 0.5,
            rho: 0.02,
        }
    }
}

impl RegionBands {
    pub fn validate(&self) -> Result<()> {
        let b = [0.0, self.metacarpals_start, self.carpals_start, self.forearm_start, 1.0];
        if b.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan()) {
            return Err(Error::InvalidArgument(format!(
                "band starts must satisfy 0 < {} < {} < {} < 1",
                self.metacarpals_start, self.carpals_start, self.forearm_start
            )));
        }
        for (name, v) in [("forearm_split", self.forearm_split), ("tau", self.tau), ("rho", self.rho)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Region of the pixel whose center sits at fractional coordinates `(fx, fy)`.
    pub fn region_at(&self, fx: f64, fy: f64) -> Region {
        if fy < self.metacarpals_start {
            Region::Phalanges
        } else if fy < self.carpals_start {
            Region::Metacarpals
        } else if fy < self.forearm_start {
            Region::Carpals
        } else if (fx < self.forearm_split) != self.mirror {
            Region::Radius
        } else {
            Region::Ulna
        }
    }
}

/// Regions whose attended pixels (value >= tau) cover at least `rho` of the region.
pub fn attention_regions(heatmap: &Heatmap, bands: &RegionBands) -> Result<RegionSet> {
    bands.validate()?;
    let (w, h) = (heatmap.width, heatmap.height);
    let mut area = [0usize; 5];
    let mut hot = [0usize; 5];
    for y in 0..h {
        let fy = (y as f64 + 0.5) / h as f64;
        for x in 0..w {
            let fx = (x as f64 + 0.5) / w as f64;
            let r = bands.region_at(fx, fy).index();
            area[r] += 1;
            if heatmap.values[y * w + x] as f64 >= bands.tau {
                hot[r] += 1;
            }
        }
    }
    Ok(Region::ALL
        .into_iter()
        .filter(|r| {
            let i = r.index();
            area[i] > 0 && hot[i] > 0 && hot[i] as f64 >= bands.rho * area[i] as f64
        })
        .collect())
}

/// Region groupings reported alongside single regions.
pub const COMBINATIONS: [&[Region]; 4] = [
    &[Region::Carpals, Region::Radius],
    &[Region::Ulna, Region::Carpals, Region::Radius],
    &[Region::Ulna, Region::Carpals, Region::Radius, Region::Metacarpals],
    &Region::ALL,
];

/// Regions below the palm, where wrist and forearm bones sit.
pub const BOTTOM_BAND: [Region; 3] = [Region::Carpals, Region::Radius, Region::Ulna];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttentionHistogram {
    pub images: usize,
    /// Indexed like [`Region::ALL`].
    pub region_counts: [usize; 5],
    /// Images attending every region of the group, indexed like [`COMBINATIONS`].
    pub combination_counts: [usize; 4],
    /// Images attending at least one region of [`BOTTOM_BAND`].
    pub bottom_band: usize,
}

impl AttentionHistogram {
    pub fn record(&mut self, regions: &RegionSet) {
        self.images += 1;
        for r in regions {
            self.region_counts[r.index()] += 1;
        }
        for (count, group) in self.combination_counts.iter_mut().zip(COMBINATIONS) {
            if group.iter().all(|r| regions.contains(r)) {
                *count += 1;
            }
        }
        if BOTTOM_BAND.iter().any(|r| regions.contains(r)) {
            self.bottom_band += 1;
        }
    }

    pub fn count(&self, region: Region) -> usize {
        self.region_counts[region.index()]
    }

    /// `group,count` rows: total images, single regions, combinations, bottom band.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,count\n");
        writeln!(out, "images,{}", self.images).unwrap();
        for r in Region::ALL {
            writeln!(out, "{},{}", r.name(), self.count(r)).unwrap();
        }
        for (group, count) in COMBINATIONS.iter().zip(self.combination_counts) {
            writeln!(out, "{},{count}", group_name(group)).unwrap();
        }
        writeln!(out, "{},{}", BOTTOM_BAND.map(Region::name).join("|"), self.bottom_band).unwrap();
        out
    }
}

pub fn group_name(group: &[Region]) -> String {
    if group.len() == Region::ALL.len() {
        "all".into()
    } else {
        group.iter().map(|r| r.name()).collect::<Vec<_>>().join("+")
    }
}

pub fn aggregate_attention<'a>(
    heatmaps: impl IntoIterator<Item = &'a Heatmap>,
    bands: &RegionBands,
) -> Result<AttentionHistogram> {
    let mut hist = AttentionHistogram::default();
    for h in heatmaps {
        hist.record(&attention_regions(h, bands)?);
    }
    if hist.images == 0 {
        return Err(Error::InvalidArgument("attention needs at least one heatmap".into()));
    }
    Ok(hist)
}
