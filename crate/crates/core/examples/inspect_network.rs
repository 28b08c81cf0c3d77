//! Build the classifier and print its layer table.
//!
//!     cargo run --example inspect_network

use kws::cli::inspect_table;
use kws::Network;

fn main() {
    let net = Network::<f32>::reference(17);
    let (table, ok) = inspect_table(&net);
    print!("{table}");
    let p = net.count_params();
    println!("matches reference counts: {ok} ({} stored values)", p.total());
}
