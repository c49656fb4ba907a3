//! Pick keyframes from a frame sequence by color-histogram change.
//!
//! The "video" cuts between three scenes and lingers on each with small
//! brightness flicker, so three keyframes come out at the default threshold.

use vidgeo::image::ImageGrid;
use vidgeo::keyframes::{manhattan, rgb_histogram, select_keyframes, KeyframeConfig};
use vidgeo::Result;

fn scene(sky: [u8; 3], ground: [u8; 3], flicker: u8) -> Result<ImageGrid> {
    ImageGrid::from_fn(48, 32, |_, y| {
        let c = if y < 14 { sky } else { ground };
        c.map(|v| v.saturating_add(flicker))
    })
}

fn main() -> Result<()> {
    let scenes = [([90, 150, 230], [70, 70, 70]), ([200, 200, 210], [150, 40, 30]), ([20, 20, 40], [230, 200, 30])];
    let mut frames = Vec::new();
    for (sky, ground) in scenes {
        for f in 0..8 {
            frames.push(scene(sky, ground, (f % 3) as u8 * 4)?);
        }
    }

    let cfg = KeyframeConfig::default();
    let picked = select_keyframes(&frames, &cfg)?;
    println!("{} frames, threshold {} on normalized histograms", frames.len(), cfg.threshold);
    println!("keyframes: {picked:?}");

    let h: Vec<_> = frames.iter().map(rgb_histogram).collect::<Result<_>>()?;
    println!("distance within a scene: {:.3}", manhattan(&h[0], &h[1], true));
    println!("distance across a cut:   {:.3}", manhattan(&h[7], &h[8], true));
    Ok(())
}
