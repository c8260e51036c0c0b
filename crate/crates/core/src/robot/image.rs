//! Synthetic front-camera frames.
//!
//! A frame is a binary PGM (`P5`) of [`WIDTH`]x[`HEIGHT`] 8-bit gray pixels.
//! Row 0 holds the caption bytes followed by zeros; every other pixel is
//! `(7*row + 3*col + s) mod 256` where `s` is the byte sum of the caption.
//! Frames are a pure function of the caption, hence of the pose.

use serde::Serialize;

pub const WIDTH: usize = 128;
pub const HEIGHT: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontImage {
    #[serde(skip)]
    pub bytes: Vec<u8>,
    pub caption: String,
}

pub fn pose_caption(x: f64, y: f64, heading: f64) -> String {
    format!("pose=({x:.2}, {y:.2}, {heading:.2})")
}

pub fn render(caption: &str) -> FrontImage {
    let header = format!("P5\n{WIDTH} {HEIGHT}\n255\n");
    let mut bytes = Vec::with_capacity(header.len() + WIDTH * HEIGHT);
    bytes.extend_from_slice(header.as_bytes());
    let seed = caption.bytes().fold(0usize, |a, b| a + b as usize);
    let text = caption.as_bytes();
    for row in 0..HEIGHT {
        for col in 0..WIDTH {
            let px = if row == 0 {
                text.get(col).copied().unwrap_or(0)
            } else {
                ((7 * row + 3 * col + seed) % 256) as u8
            };
            bytes.push(px);
        }
    }
    FrontImage {
        bytes,
        caption: caption.to_string(),
    }
}
