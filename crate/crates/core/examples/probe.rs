use mdforge::imaging::read_pgm;
use mdforge::nn::{reference_model_spec, train, LabeledSet, TrainConfig};
use mdforge::pipeline::{Manifest, SplitSet};
use mdforge::seed::{derive_seed, tags};
use std::path::Path;

fn main() {
    let out = Path::new("/tmp/run3");
    let manifest = Manifest::read(&out.join("manifest.csv")).unwrap();
    let mut train_items = Vec::new();
    let mut val_items = Vec::new();
    for entry in &manifest.entries {
        let img = read_pgm(&out.join(&entry.path)).unwrap();
        match entry.split {
            SplitSet::Train => train_items.push((img, entry.material.index())),
            SplitSet::Val => val_items.push((img, entry.material.index())),
            _ => {}
        }
    }
    let train_set = LabeledSet::from_images(&train_items, 64).unwrap();
    let val_set = LabeledSet::from_images(&val_items, 64).unwrap();
    let spec = reference_model_spec(64);

    let derived = derive_seed(7, tags::TRAIN, &[]);
    let mut seeds = vec![derived];
    seeds.extend(1..=7u64);
    for seed in seeds {
        let cfg = TrainConfig { epochs: 30, seed, ..Default::default() };
        let (_, h) = train(&spec, &train_set, &val_set, &cfg).unwrap();
        let tail: Vec<String> =
            h.records[24..].iter().map(|r| format!("{:.2}", r.val_acc)).collect();
        println!("seed {seed:>20}: val acc last 6 epochs {}", tail.join(" "));
    }
}
