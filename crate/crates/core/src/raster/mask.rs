use std::path::Path;

use super::{rasterize::polygon_pixels, DamageClass, ImageBuffer, RasterError, SceneAnnotation};

/// Per-pixel class codes, row-major. Damage masks use 0..=4; collapsed
/// masks reuse the same container with 0..=2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ClassMask {
    pub const MAX_CODE: u8 = 4;

    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize] }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(RasterError::BufferLength { expected, actual: data.len() });
        }
        if let Some(&bad) = data.iter().find(|&&v| v > Self::MAX_CODE) {
            return Err(RasterError::InvalidMaskCode(bad));
        }
        Ok(Self { width, height, data })
    }

    /// Any nonzero input becomes 1; for localization masks stored as 0/255.
    pub fn binary_from_raw(width: u32, height: u32, data: &[u8]) -> Result<Self, RasterError> {
        Self::from_raw(width, height, data.iter().map(|&v| (v != 0) as u8).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn same_size(&self, other: &ClassMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn code(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set_code(&mut self, x: u32, y: u32, code: u8) {
        debug_assert!(code <= Self::MAX_CODE);
        self.data[y as usize * self.width as usize + x as usize] = code;
    }

    pub fn class_at(&self, x: u32, y: u32) -> DamageClass {
        DamageClass::from_code(self.code(x, y)).expect("codes validated on construction")
    }

    /// Binary localization view: 1 where the code is nonzero.
    pub fn localization(&self) -> ClassMask {
        ClassMask { width: self.width, height: self.height, data: self.data.iter().map(|&v| (v != 0) as u8).collect() }
    }

    pub fn count(&self, code: u8) -> usize {
        self.data.iter().filter(|&&v| v == code).count()
    }

    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::from_raw(self.width, self.height, 1, self.data.clone()).expect("length matches")
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_image().save_png(path)
    }

    /// Loads a class-coded single-channel PNG; codes above 4 are rejected.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = Self::load_gray(path.as_ref())?;
        Self::from_raw(img.width(), img.height(), img.into_raw())
    }

    /// Loads a localization PNG; any nonzero value counts as building.
    pub fn load_binary_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = Self::load_gray(path.as_ref())?;
        Self::binary_from_raw(img.width(), img.height(), img.data())
    }

    fn load_gray(path: &Path) -> Result<ImageBuffer, RasterError> {
        let img = ImageBuffer::load_png(path)?;
        if img.channels() != 1 {
            return Err(RasterError::NotSingleChannel(path.display().to_string()));
        }
        Ok(img)
    }
}

/// Ground-truth rasters for one scene.
#[derive(Debug, Clone)]
pub struct TargetMasks {
    pub loc: ClassMask,
    pub dam: ClassMask,
    /// Pixels painted by an unclassified building; excluded from scoring.
    pub ignore: Vec<bool>,
    pub unclassified_buildings: usize,
    /// Uids of buildings that covered no pixel center.
    pub empty_buildings: Vec<String>,
}

impl TargetMasks {
    pub fn ignore_count(&self) -> usize {
        self.ignore.iter().filter(|&&b| b).count()
    }
}

/// Rasterizes every building with its label in annotation order.
pub fn build_target_masks(annotation: &SceneAnnotation) -> TargetMasks {
    let (w, h) = (annotation.width, annotation.height);
    let mut dam = ClassMask::new(w, h);
    let mut ignore = vec![false; w as usize * h as usize];
    let mut unclassified_buildings = 0;
    let mut empty_buildings = Vec::new();
    for b in &annotation.buildings {
        let pixels = polygon_pixels(&b.ring, w, h);
        if pixels.is_empty() {
            empty_buildings.push(b.uid.clone());
        }
        let unclassified = b.label == DamageClass::Unclassified;
        unclassified_buildings += unclassified as usize;
        let code = b.label.mask_code();
        for (x, y) in pixels {
            dam.set_code(x, y, code);
            ignore[y as usize * w as usize + x as usize] = unclassified;
        }
    }
    TargetMasks { loc: dam.localization(), dam, ignore, unclassified_buildings, empty_buildings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BuildingPolygon;

    fn scene(buildings: Vec<BuildingPolygon>) -> SceneAnnotation {
        SceneAnnotation { scene_id: "s".into(), width: 16, height: 16, buildings }
    }

    #[test]
    fn empty_annotation() {
        let t = build_target_masks(&scene(vec![]));
        assert!(t.dam.data().iter().all(|&v| v == 0));
        assert!(t.loc.data().iter().all(|&v| v == 0));
        assert_eq!(t.ignore_count(), 0);
    }

    #[test]
    fn destroyed_square_localization() {
        let t = build_target_masks(&scene(vec![BuildingPolygon::rect("a", 2.0, 2.0, 6.0, 5.0, DamageClass::Destroyed)]));
        assert_eq!(t.dam.count(4), 12);
        for (l, d) in t.loc.data().iter().zip(t.dam.data()) {
            assert_eq!(*l != 0, *d == 4);
        }
    }

    #[test]
    fn unclassified_painted_as_no_damage_and_ignored() {
        let t = build_target_masks(&scene(vec![BuildingPolygon::rect("u", 1.0, 1.0, 3.0, 3.0, DamageClass::Unclassified)]));
        assert_eq!(t.unclassified_buildings, 1);
        assert_eq!(t.dam.count(1), 4);
        assert_eq!(t.ignore_count(), 4);
    }

    #[test]
    fn overlap_pixels_follow_last_building() {
        let t = build_target_masks(&scene(vec![
            BuildingPolygon::rect("u", 1.0, 1.0, 5.0, 5.0, DamageClass::Unclassified),
            BuildingPolygon::rect("d", 3.0, 3.0, 7.0, 7.0, DamageClass::Destroyed),
        ]));
        assert_eq!(t.dam.code(4, 4), 4);
        assert!(!t.ignore[4 * 16 + 4]);
        assert!(t.ignore[16 + 1]);
        assert_eq!(t.ignore_count(), 16 - 4);
    }

    #[test]
    fn invalid_codes_rejected() {
        assert!(matches!(ClassMask::from_raw(2, 1, vec![0, 5]), Err(RasterError::InvalidMaskCode(5))));
        assert_eq!(ClassMask::binary_from_raw(3, 1, &[0, 255, 7]).unwrap().data(), &[0, 1, 1]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = ClassMask::from_raw(3, 2, vec![0, 1, 2, 3, 4, 0]).unwrap();
        m.save_png(dir.path().join("m.png")).unwrap();
        assert_eq!(ClassMask::load_png(dir.path().join("m.png")).unwrap(), m);
    }
}
