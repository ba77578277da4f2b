use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::raster::{BBox, ClassMask, DamageClass};

/// Pixel adjacency used when grouping mask pixels into objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(format!("connectivity must be 4 or 8, got {v}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<u8>().map_err(|e| e.to_string())?.try_into()
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Maximal connected set of nonzero mask pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Member pixels in raster order.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let up = parent[parent[i as usize] as usize];
        parent[i as usize] = up;
        i = up;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // The smaller provisional label is always the earlier one in raster order.
    if ra < rb {
        parent[rb as usize] = ra;
    } else if rb < ra {
        parent[ra as usize] = rb;
    }
}

/// Labels the nonzero pixels of `mask` with a two-pass union-find scan.
///
/// Components come back ordered by their first pixel in raster order,
/// that is by (min row, min column of that row).
pub fn connected_components(mask: &ClassMask, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let data = mask.data();
    const UNSET: u32 = u32::MAX;
    let mut labels = vec![UNSET; w * h];
    let mut parent: Vec<u32> = Vec::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if data[i] == 0 {
                continue;
            }
            let mut neighbors = [UNSET; 4];
            if x > 0 {
                neighbors[0] = labels[i - 1];
            }
            if y > 0 {
                neighbors[1] = labels[i - w];
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        neighbors[2] = labels[i - w - 1];
                    }
                    if x + 1 < w {
                        neighbors[3] = labels[i - w + 1];
                    }
                }
            }
            let mut label = UNSET;
            for &n in neighbors.iter().filter(|&&n| n != UNSET) {
                if label == UNSET {
                    label = n;
                } else {
                    union(&mut parent, label, n);
                }
            }
            if label == UNSET {
                label = parent.len() as u32;
                parent.push(label);
            }
            labels[i] = label;
        }
    }

    let mut compact = vec![UNSET; parent.len()];
    let mut components: Vec<Component> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == UNSET {
                continue;
            }
            let root = find(&mut parent, l) as usize;
            let (px, py) = (x as u32, y as u32);
            if compact[root] == UNSET {
                compact[root] = components.len() as u32;
                components.push(Component { pixels: vec![(px, py)], bbox: BBox::point(px, py) });
            } else {
                let c = &mut components[compact[root] as usize];
                c.pixels.push((px, py));
                c.bbox.include(px, py);
            }
        }
    }
    components
}

/// Result of a per-component damage vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    pub label: DamageClass,
    /// Every damage-mask pixel under the component was background.
    pub degenerate: bool,
}

/// Most frequent non-background damage class under `component`.
///
/// Ties go to the more severe class. A component with only background
/// damage pixels votes no-damage and is flagged degenerate.
pub fn majority_vote_label(component: &Component, dam: &ClassMask) -> Vote {
    let mut histogram = [0usize; 5];
    for &(x, y) in &component.pixels {
        histogram[dam.code(x, y) as usize] += 1;
    }
    let mut best = 0usize;
    for code in (1..=4).rev() {
        if histogram[code] > 0 && (best == 0 || histogram[code] > histogram[best]) {
            best = code;
        }
    }
    match best {
        0 => Vote { label: DamageClass::NoDamage, degenerate: true },
        code => Vote { label: DamageClass::from_code(code as u8).unwrap(), degenerate: false },
    }
}
