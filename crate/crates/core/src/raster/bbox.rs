use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle with inclusive corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        debug_assert!(x0 <= x1 && y0 <= y1);
        Self { x0, y0, x1, y1 }
    }

    pub fn point(x: u32, y: u32) -> Self {
        Self { x0: x, y0: y, x1: x, y1: y }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    /// Pixel count of the box.
    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn include(&mut self, x: u32, y: u32) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 <= x1 && y0 <= y1).then_some(BBox { x0, y0, x1, y1 })
    }

    /// Grows the box by `margin` on every side, clipped to a `width` x `height` frame.
    pub fn expand(&self, margin: u32, width: u32, height: u32) -> BBox {
        BBox {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1.saturating_add(margin)).min(width - 1),
            y1: (self.y1.saturating_add(margin)).min(height - 1),
        }
    }

    /// Tight box around a set of pixel coordinates; `None` if empty.
    pub fn around<I: IntoIterator<Item = (u32, u32)>>(pixels: I) -> Option<BBox> {
        let mut it = pixels.into_iter();
        let (x, y) = it.next()?;
        let mut b = BBox::point(x, y);
        for (x, y) in it {
            b.include(x, y);
        }
        Some(b)
    }

    /// COCO `[x, y, w, h]`.
    pub fn to_xywh(&self) -> [u32; 4] {
        [self.x0, self.y0, self.width(), self.height()]
    }

    pub fn from_xywh(xywh: [u32; 4]) -> Option<BBox> {
        let [x, y, w, h] = xywh;
        (w > 0 && h > 0).then(|| BBox { x0: x, y0: y, x1: x + w - 1, y1: y + h - 1 })
    }
}
