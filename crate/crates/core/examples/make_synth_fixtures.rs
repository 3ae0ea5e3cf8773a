//! Writes the synthetic dataset suite and its matching embedding table into
//! a directory, ready to use as `DESMINE_DATA_DIR`:
//!
//! ```text
//! cargo run --example make_synth_fixtures -- target/fixtures [n] [seed]
//! ```

use desmine::corpus::save_jsonl;
use desmine::synth::{synth_suite, write_synth_embeddings};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "target/fixtures".to_string());
    let n: usize = args.next().map(|a| a.parse().expect("n must be an integer")).unwrap_or(240);
    let seed: u64 = args.next().map(|a| a.parse().expect("seed must be an integer")).unwrap_or(11);

    std::fs::create_dir_all(&dir).expect("fixture directory");
    for dataset in synth_suite(n, seed) {
        let path = format!("{dir}/{}.jsonl", dataset.name);
        save_jsonl(&dataset, &path).expect("dataset written");
        println!("wrote {path} ({} docs, {} design)", dataset.len(), dataset.design_count());
    }
    write_synth_embeddings(format!("{dir}/embeddings.vec"), 3).expect("embeddings written");
    println!("wrote {dir}/embeddings.vec");
}
