//! Regenerates `data/wsq_quantiles.csv`, the upper-tail quantile table of
//! `int_0^1 W(r)^2 dr`, from the exact tail formula in `gcpr::wsq`.
//!
//! cargo run --release -p gcpr --example gen_wsq_table > crates/core/data/wsq_quantiles.csv

use gcpr::wsq::{exact_quantile, table_grid};

fn main() {
    println!("# generator: gen_wsq_table (Smirnov inversion formula, 64-node Gauss-Legendre); seed: none");
    println!("tail_prob,quantile");
    for p in table_grid(5e-5, 1000) {
        println!("{p:.12e},{:.12e}", exact_quantile(p));
    }
}
