//! Which image regions matter to a descriptor: slide a black patch over the
//! query and record how far its descriptor moves.

use vidgeo::descriptor::{occlusion_heatmap, DescriptorFunction};
use vidgeo::image::ImageGrid;
use vidgeo::synth::sweep::HalvesHistogram;
use vidgeo::Result;

fn main() -> Result<()> {
    // gray street, a red storefront on the left, a blue sign up right
    let query = ImageGrid::from_fn(64, 48, |x, y| {
        if (6..26).contains(&x) && (16..40).contains(&y) {
            [200, 40, 40]
        } else if (44..60).contains(&x) && (4..14).contains(&y) {
            [40, 60, 220]
        } else {
            [120, 120, 120]
        }
    })?;
    let reference = HalvesHistogram.describe(&query)?;
    let map = occlusion_heatmap(&query, &reference, &HalvesHistogram, 8, 8)?;
    println!("{} x {} cells of {} px", map.rows, map.cols, map.cell_size);
    for r in 0..map.rows {
        let row: String = (0..map.cols)
            .map(|c| match map.get(r, c) {
                v if v > 0.75 => '#',
                v if v > 0.4 => '+',
                v if v > 0.1 => '.',
                _ => ' ',
            })
            .collect();
        println!("|{row}|");
    }
    println!("most salient cell: {:?}", map.argmax());
    Ok(())
}
