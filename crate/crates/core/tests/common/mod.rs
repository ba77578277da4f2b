//! Synthetic xBD-layout scenes for integration tests.
#![allow(dead_code)]

use std::path::Path;

use xfbd_core::raster::{BuildingPolygon, DamageClass, ImageBuffer, SceneAnnotation};

pub const SIZE: u32 = 64;

pub struct FixtureScene {
    pub id: String,
    pub buildings: Vec<BuildingPolygon>,
    pub secondary: bool,
}

impl FixtureScene {
    pub fn new(id: &str, buildings: Vec<BuildingPolygon>) -> Self {
        Self { id: id.to_string(), buildings, secondary: true }
    }
}

pub fn square(uid: &str, x: f64, y: f64, side: f64, label: DamageClass) -> BuildingPolygon {
    BuildingPolygon::rect(uid, x, y, x + side, y + side, label)
}

fn seed_of(id: &str) -> u32 {
    id.bytes().fold(7u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32))
}

/// Smooth ground texture, distinct per scene.
pub fn pre_image(id: &str) -> ImageBuffer {
    let s = seed_of(id);
    ImageBuffer::from_fn(SIZE, SIZE, 3, |x, y, c| (60 + (x * 3 + y * 2 + c as u32 * 17 + s) % 80) as u8).unwrap()
}

/// Pre image with every building footprint repainted as rubble.
pub fn post_image(id: &str, buildings: &[BuildingPolygon]) -> ImageBuffer {
    let mut img = pre_image(id);
    for b in buildings {
        for (x, y) in xfbd_core::raster::polygon_pixels(&b.ring, SIZE, SIZE) {
            for c in 0..3 {
                img.set(x, y, c, (150 + (x * 7 + y * 13 + c as u32 * 5) % 100) as u8);
            }
        }
    }
    img
}

pub fn secondary_image(id: &str) -> ImageBuffer {
    let s = seed_of(id);
    ImageBuffer::from_fn(SIZE, SIZE, 3, |x, y, c| (30 + (x * y + c as u32 * 11 + s) % 120) as u8).unwrap()
}

pub fn annotation(scene: &FixtureScene) -> SceneAnnotation {
    let mut a = SceneAnnotation::new(scene.id.clone(), SIZE, SIZE);
    a.buildings = scene.buildings.clone();
    a
}

/// Writes `<root>/<split>/{images,labels}` and `<secondary_dir>/<id>_pre_disaster.png`.
pub fn write_split(root: &Path, split: &str, secondary_dir: &Path, scenes: &[FixtureScene]) {
    let images = root.join(split).join("images");
    let labels = root.join(split).join("labels");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::create_dir_all(&labels).unwrap();
    std::fs::create_dir_all(secondary_dir).unwrap();
    for s in scenes {
        pre_image(&s.id).save_png(images.join(format!("{}_pre_disaster.png", s.id))).unwrap();
        post_image(&s.id, &s.buildings).save_png(images.join(format!("{}_post_disaster.png", s.id))).unwrap();
        let json = serde_json::to_string_pretty(&annotation(s).to_label_json()).unwrap();
        std::fs::write(labels.join(format!("{}_post_disaster.json", s.id)), json).unwrap();
        if s.secondary {
            secondary_image(&s.id).save_png(secondary_dir.join(format!("{}_pre_disaster.png", s.id))).unwrap();
        }
    }
}

/// Two scenes with three and two blendable buildings, plus undamaged and
/// border buildings that must not be blended.
pub fn two_scene_fixture() -> Vec<FixtureScene> {
    use DamageClass::*;
    vec![
        FixtureScene::new(
            "alpha_00000001",
            vec![
                square("a-d1", 6.0, 6.0, 8.0, Destroyed),
                square("a-n1", 20.0, 6.0, 8.0, NoDamage),
                square("a-m1", 36.0, 8.0, 9.0, MajorDamage),
                square("a-d2", 10.0, 40.0, 10.0, Destroyed),
                square("a-edge", 0.0, 26.0, 6.0, Destroyed),
            ],
        ),
        FixtureScene::new(
            "beta_00000002",
            vec![
                square("b-mi", 8.0, 8.0, 7.0, MinorDamage),
                square("b-n1", 30.0, 30.0, 10.0, NoDamage),
                square("b-d1", 44.0, 44.0, 8.0, Destroyed),
            ],
        ),
    ]
}
