//! Word → finger trajectory → DAC codes → I2C frames, with a reduced
//! output range on the thumb channel.
//!
//!     cargo run --example command_frames

use kws::command::{trajectory_to_codes, Decision};
use kws::{GestureClass, GestureTable};

fn main() -> kws::Result<()> {
    let mut table = GestureTable::default();
    for class in GestureClass::ALL {
        let d = Decision::new(0, class, 1.0, &table)?;
        let frames: Vec<String> = d
            .frames
            .iter()
            .map(|f| format!("{:02X} {:02X} {:02X}", f.bytes()[0], f.bytes()[1], f.bytes()[2]))
            .collect();
        match d.trajectory {
            Some(t) => println!("{:<8} {:?} -> [{}]", class.name(), t.to_array(), frames.join(" | ")),
            None => println!("{:<8} no command", class.name()),
        }
    }

    // Cap the thumb actuator at 60% of full scale.
    table.max_fraction[0] = 0.6;
    let fist = table.lookup(GestureClass::Zero).expect("zero has a row");
    println!("capped fist codes: {:?}", trajectory_to_codes(&fist, &table.channel_map, &table.max_fraction)?);

    let two = Decision::new(1500, GestureClass::Two, 0.93, &GestureTable::default())?;
    println!("{}", two.to_json());
    Ok(())
}
