//! Dataset manifest: one row per image on disk, with class, origin, split
//! assignment, and resolution.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::SplitConfig;
use crate::seed::{derive_seed, tags};
use crate::synth::Material;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Original,
    /// Generated from original `parent` (global index) as variant `variant`.
    Augmented { parent: usize, variant: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSet {
    Unassigned,
    Train,
    Val,
    Test,
}

impl SplitSet {
    pub fn name(self) -> &'static str {
        match self {
            SplitSet::Unassigned => "unassigned",
            SplitSet::Train => "train",
            SplitSet::Val => "val",
            SplitSet::Test => "test",
        }
    }

    fn parse(text: &str) -> Result<SplitSet> {
        match text {
            "unassigned" => Ok(SplitSet::Unassigned),
            "train" => Ok(SplitSet::Train),
            "val" => Ok(SplitSet::Val),
            "test" => Ok(SplitSet::Test),
            other => Err(Error::argument(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub material: Material,
    pub origin: Origin,
    pub split: SplitSet,
    pub resolution: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn count_split(&self, split: SplitSet) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn count_material(&self, material: Material) -> usize {
        self.entries.iter().filter(|e| e.material == material).count()
    }

    pub fn entries_in(&self, split: SplitSet) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Assigns splits with per-entry counts resolved as
    /// `val = round(n * val_fraction)`, `test = round(n * test_fraction)`,
    /// `train = n - val - test`. Stratified mode applies that rule class by
    /// class; unstratified mode shuffles the whole manifest at once.
    pub fn assign_splits(&mut self, split: &SplitConfig, master_seed: u64) -> Result<()> {
        split.validate()?;
        if self.entries.is_empty() {
            return Err(Error::precondition("manifest has no entries".to_string()));
        }
        if split.stratified {
            for material in Material::ALL {
                let indices: Vec<usize> = self
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.material == material)
                    .map(|(i, _)| i)
                    .collect();
                let seed = derive_seed(master_seed, tags::SPLIT, &[material.index() as u64]);
                self.assign_group(&indices, split, seed);
            }
        } else {
            let indices: Vec<usize> = (0..self.entries.len()).collect();
            let seed = derive_seed(master_seed, tags::SPLIT, &[]);
            self.assign_group(&indices, split, seed);
        }
        Ok(())
    }

    fn assign_group(&mut self, indices: &[usize], split: &SplitConfig, seed: u64) {
        let mut order = indices.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n = order.len();
        let val = (n as f64 * split.val_fraction).round() as usize;
        let test = (n as f64 * split.test_fraction).round() as usize;
        for (rank, &entry_index) in order.iter().enumerate() {
            self.entries[entry_index].split = if rank < val {
                SplitSet::Val
            } else if rank < val + test {
                SplitSet::Test
            } else {
                SplitSet::Train
            };
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,class,origin,parent,variant,split,resolution\n");
        for e in &self.entries {
            let (origin, parent, variant) = match e.origin {
                Origin::Original => ("original", String::new(), String::new()),
                Origin::Augmented { parent, variant } => {
                    ("augmented", parent.to_string(), variant.to_string())
                }
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.path,
                e.material.name(),
                origin,
                parent,
                variant,
                e.split.name(),
                e.resolution
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Manifest> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header))
                if header.trim() == "path,class,origin,parent,variant,split,resolution" => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "bad or missing manifest header".to_string(),
                })
            }
        }
        let mut entries = Vec::new();
        for (index, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| Error::Parse { line: index + 1, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(fail(format!("expected 7 fields, got {}", fields.len())));
            }
            let origin = match fields[2] {
                "original" => Origin::Original,
                "augmented" => Origin::Augmented {
                    parent: fields[3]
                        .parse()
                        .map_err(|_| fail(format!("bad parent '{}'", fields[3])))?,
                    variant: fields[4]
                        .parse()
                        .map_err(|_| fail(format!("bad variant '{}'", fields[4])))?,
                },
                other => return Err(fail(format!("unknown origin '{other}'"))),
            };
            entries.push(ManifestEntry {
                path: fields[0].to_string(),
                material: Material::from_name(fields[1]).map_err(|e| fail(e.to_string()))?,
                origin,
                split: SplitSet::parse(fields[5]).map_err(|e| fail(e.to_string()))?,
                resolution: fields[6]
                    .parse()
                    .map_err(|_| fail(format!("bad resolution '{}'", fields[6])))?,
            });
        }
        Ok(Manifest { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        Manifest::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_manifest(per_class: usize, per_original: usize) -> Manifest {
        let mut entries = Vec::new();
        for material in Material::ALL {
            for index in 0..per_class {
                let parent = material.index() * per_class + index;
                entries.push(ManifestEntry {
                    path: format!("originals/{}_{index:02}.pgm", material.name()),
                    material,
                    origin: Origin::Original,
                    split: SplitSet::Unassigned,
                    resolution: 256,
                });
                for variant in 0..per_original {
                    entries.push(ManifestEntry {
                        path: format!(
                            "dataset/{}_{index:02}_aug{variant:02}.pgm",
                            material.name()
                        ),
                        material,
                        origin: Origin::Augmented { parent, variant },
                        split: SplitSet::Unassigned,
                        resolution: 64,
                    });
                }
            }
        }
        Manifest { entries }
    }

    #[test]
    fn default_split_counts_are_210_27_27() {
        let mut manifest = synthetic_manifest(8, 10);
        assert_eq!(manifest.entries.len(), 264);
        manifest.assign_splits(&SplitConfig::default(), 7).unwrap();
        assert_eq!(manifest.count_split(SplitSet::Train), 210);
        assert_eq!(manifest.count_split(SplitSet::Val), 27);
        assert_eq!(manifest.count_split(SplitSet::Test), 27);
        assert_eq!(manifest.count_split(SplitSet::Unassigned), 0);

        // Stratification: each class contributes 70/9/9.
        for material in Material::ALL {
            for (split, expected) in
                [(SplitSet::Train, 70), (SplitSet::Val, 9), (SplitSet::Test, 9)]
            {
                let count = manifest
                    .entries
                    .iter()
                    .filter(|e| e.material == material && e.split == split)
                    .count();
                assert_eq!(count, expected, "{} {}", material.name(), split.name());
            }
        }
    }

    #[test]
    fn split_assignment_is_seed_deterministic() {
        let mut a = synthetic_manifest(8, 10);
        let mut b = synthetic_manifest(8, 10);
        a.assign_splits(&SplitConfig::default(), 3).unwrap();
        b.assign_splits(&SplitConfig::default(), 3).unwrap();
        assert_eq!(a, b);

        let mut c = synthetic_manifest(8, 10);
        c.assign_splits(&SplitConfig::default(), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unstratified_mode_partitions_everything() {
        let mut manifest = synthetic_manifest(8, 10);
        let split = SplitConfig { stratified: false, ..Default::default() };
        manifest.assign_splits(&split, 11).unwrap();
        assert_eq!(manifest.count_split(SplitSet::Unassigned), 0);
        let total = manifest.count_split(SplitSet::Train)
            + manifest.count_split(SplitSet::Val)
            + manifest.count_split(SplitSet::Test);
        assert_eq!(total, 264);
    }

    #[test]
    fn csv_roundtrip() {
        let mut manifest = synthetic_manifest(2, 3);
        manifest.assign_splits(&SplitConfig::default(), 1).unwrap();
        let csv = manifest.to_csv();
        let parsed = Manifest::from_csv(&csv).unwrap();
        assert_eq!(parsed, manifest);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = "path,class,origin,parent,variant,split,resolution\nx.pgm,Brass,original,,\n";
        match Manifest::from_csv(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Manifest::from_csv("wrong,header\n").is_err());
    }
}
