//! How far a position-sensitive histogram descriptor drifts as the image is
//! rotated or shrunk.

use vidgeo::synth::sweep::{invariance_sweep, test_card, HalvesHistogram, Transform};
use vidgeo::Result;

fn main() -> Result<()> {
    let card = test_card(64)?;
    for t in [Transform::rotation(), Transform::scale()] {
        println!("{}:", t.name());
        for p in invariance_sweep(&HalvesHistogram, &card, t)? {
            let bar = "*".repeat((p.distance * 40.0).round() as usize);
            println!("  {:>5.1} {:.3} {bar}", p.parameter, p.distance);
        }
    }
    Ok(())
}
