//! Prints the angular metrics for a few classic two-ship geometries.

use dogfight::geometry::{angle_off, aspect_angle, ata, distance, turn_sign, HeadingDeg, Vec2};

fn main() {
    let cases = [
        ("saddled: A sits on B's six", Vec2::new(0.0, 0.0), 0.0, Vec2::new(0.0, 2.0), 0.0),
        ("head-on merge", Vec2::new(0.0, 0.0), 0.0, Vec2::new(0.0, 5.0), 180.0),
        ("beam: B crosses left to right", Vec2::new(0.0, 0.0), 0.0, Vec2::new(0.0, 4.0), 90.0),
        ("defensive: B on A's six", Vec2::new(0.0, 2.0), 0.0, Vec2::new(0.0, 0.0), 0.0),
        ("offset pursuit", Vec2::new(0.0, 0.0), 20.0, Vec2::new(3.0, 3.0), 300.0),
    ];
    println!("{:<30} {:>6} {:>7} {:>9} {:>7} {:>5}", "case", "range", "ATA", "aspect", "AO", "turn");
    for (name, a, ha, b, hb) in cases {
        let (ha, hb) = (HeadingDeg::new(ha), HeadingDeg::new(hb));
        // +1 means B lies left of A's nose
        let side = turn_sign(a, a + Vec2::from_heading(ha), b);
        println!(
            "{name:<30} {:>6.2} {:>7.1} {:>9.1} {:>7.1} {:>5}",
            distance(a, b),
            ata(a, ha, b),
            aspect_angle(a, b, hb),
            angle_off(ha, hb),
            side
        );
    }
}
