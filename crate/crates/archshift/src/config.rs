//! Run configuration: one TOML file describing the search space, binning,
//! data source, and training knobs. Every section has defaults, unknown
//! keys are rejected, and everything is validated before a run touches it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DataSource;
use crate::error::{Error, Result};
use crate::space::{CandidateSet, ResourceBinning, SearchSpace};
use crate::trainer::TrainConfig;

/// Everything a run needs, as parsed from one TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub space: SpaceSection,
    pub binning: BinningSection,
    pub data: DataSection,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("runs/default"),
            space: SpaceSection::default(),
            binning: BinningSection::default(),
            data: DataSection::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Search-space description: either the homogeneous shorthand
/// (`depth` + `candidates`, unit-priced) or an explicit `ops` list.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    pub depth: Option<usize>,
    pub candidates: Option<Vec<usize>>,
    pub ops: Option<Vec<OpSpec>>,
    /// Resource unit label for reports (defaults to MACs).
    pub units: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub candidates: Vec<usize>,
    /// Per-unit prices; omitted means every unit costs 1.
    pub unit_costs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningSection {
    /// Bin width in resource units; omitted derives one from the range.
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Blobs,
    Delimited,
    Idx,
}

/// Data source plus split. File-backed kinds need their path fields; the
/// synthetic kind uses the generator knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataKind,
    pub split_fraction: f64,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub separation: f64,
    pub path: Option<PathBuf>,
    pub delimiter: Option<String>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataKind::Blobs,
            split_fraction: 0.8,
            n_samples: 2000,
            n_features: 16,
            n_classes: 4,
            separation: 0.55,
            path: None,
            delimiter: None,
            features: None,
            labels: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read {}: {}", path.display(), e))
        })?;
        RunConfig::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Check every section; a config that validates will build.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.data.split_fraction > 0.0 && self.data.split_fraction < 1.0) {
            return Err(Error::config("split_fraction must be in (0, 1)"));
        }
        match self.data.source {
            DataKind::Blobs => {
                if self.data.n_samples == 0
                    || self.data.n_features == 0
                    || self.data.n_classes < 2
                {
                    return Err(Error::config(
                        "blobs need n_samples > 0, n_features > 0, n_classes >= 2",
                    ));
                }
            }
            DataKind::Delimited => {
                if self.data.path.is_none() {
                    return Err(Error::config("delimited source needs `path`"));
                }
                if let Some(d) = &self.data.delimiter {
                    if d.chars().count() != 1 {
                        return Err(Error::config("delimiter must be one character"));
                    }
                }
            }
            DataKind::Idx => {
                if self.data.features.is_none() || self.data.labels.is_none() {
                    return Err(Error::config("idx source needs `features` and `labels`"));
                }
            }
        }
        let space = self.build_space()?;
        self.build_binning(&space)?;
        Ok(())
    }

    pub fn build_space(&self) -> Result<SearchSpace> {
        let units = self.space.units.as_deref().unwrap_or("MACs");
        match (&self.space.ops, self.space.depth, &self.space.candidates) {
            (Some(ops), None, None) => {
                let sets = ops
                    .iter()
                    .enumerate()
                    .map(|(i, op)| match &op.unit_costs {
                        Some(costs) => CandidateSet::new(i, op.candidates.clone(), costs.clone()),
                        None => CandidateSet::unit_priced(i, op.candidates.clone()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                SearchSpace::new(sets, units)
            }
            (None, Some(depth), Some(candidates)) => {
                let mut space = SearchSpace::homogeneous(depth, candidates)?;
                space.resource_name = units.to_string();
                Ok(space)
            }
            (None, None, None) => Ok(SearchSpace::toy()),
            _ => Err(Error::config(
                "space: give either `ops` or both `depth` and `candidates`",
            )),
        }
    }

    pub fn build_binning(&self, space: &SearchSpace) -> Result<ResourceBinning> {
        match self.binning.step {
            Some(step) => {
                ResourceBinning::new(space.min_resource(), space.max_resource(), step)
            }
            None => ResourceBinning::auto(space),
        }
    }

    pub fn build_source(&self) -> Result<DataSource> {
        Ok(match self.data.source {
            DataKind::Blobs => DataSource::SyntheticBlobs {
                n_samples: self.data.n_samples,
                n_features: self.data.n_features,
                n_classes: self.data.n_classes,
                separation: self.data.separation,
            },
            DataKind::Delimited => DataSource::DelimitedText {
                path: self
                    .data
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::config("delimited source needs `path`"))?
                    .to_string_lossy()
                    .into_owned(),
                delimiter: self
                    .data
                    .delimiter
                    .as_ref()
                    .map(|d| d.chars().next().unwrap())
                    .unwrap_or(','),
            },
            DataKind::Idx => DataSource::IdxBinary {
                features: self
                    .data
                    .features
                    .as_ref()
                    .ok_or_else(|| Error::config("idx source needs `features`"))?
                    .to_string_lossy()
                    .into_owned(),
                labels: self
                    .data
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::config("idx source needs `labels`"))?
                    .to_string_lossy()
                    .into_owned(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::BaselineMode;

    #[test]
    fn empty_toml_is_the_default_run() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.train.epochs, 20);
        assert_eq!(c.train.q, 100);
        assert_eq!(c.data.source, DataKind::Blobs);
        let space = c.build_space().unwrap();
        assert_eq!(space.depth(), 6);
        let binning = c.build_binning(&space).unwrap();
        assert_eq!(binning.k(), 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("optimizer = \"adam\"").is_err());
        assert!(RunConfig::from_toml_str("[train]\nlearning_rate = 0.1").is_err());
    }

    #[test]
    fn partial_train_section_keeps_other_defaults() {
        let c = RunConfig::from_toml_str("[train]\nepochs = 12\nbaseline = \"uniform-bins\"")
            .unwrap();
        assert_eq!(c.train.epochs, 12);
        assert_eq!(c.train.baseline, BaselineMode::UniformBins);
        assert_eq!(c.train.batch_size, 64);
    }

    #[test]
    fn explicit_ops_with_costs() {
        let text = r#"
[space]
[[space.ops]]
candidates = [1, 2]
[[space.ops]]
candidates = [0, 2, 4]
unit_costs = [2.0, 2.0, 1.0, 1.0]
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        let space = c.build_space().unwrap();
        assert_eq!(space.depth(), 2);
        assert!(space.op(1).is_skippable());
        assert_eq!(space.op(1).candidate_cost(2), 6.0);
    }

    #[test]
    fn homogeneous_shorthand() {
        let c =
            RunConfig::from_toml_str("[space]\ndepth = 4\ncandidates = [1, 2, 3]").unwrap();
        assert_eq!(c.build_space().unwrap().depth(), 4);
    }

    #[test]
    fn mixed_space_spec_is_rejected() {
        let text = "[space]\ndepth = 4\ncandidates = [1, 2]\n[[space.ops]]\ncandidates = [1, 2]";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn file_sources_need_their_paths() {
        assert!(RunConfig::from_toml_str("[data]\nsource = \"delimited\"").is_err());
        assert!(RunConfig::from_toml_str("[data]\nsource = \"idx\"").is_err());
        let ok = RunConfig::from_toml_str("[data]\nsource = \"delimited\"\npath = \"x.csv\"");
        assert!(ok.is_ok());
    }

    #[test]
    fn binning_step_override() {
        let c = RunConfig::from_toml_str("[binning]\nstep = 10.0").unwrap();
        let space = c.build_space().unwrap();
        let binning = c.build_binning(&space).unwrap();
        assert_eq!(binning.k(), 11);
    }

    #[test]
    fn bad_values_fail_validation() {
        assert!(RunConfig::from_toml_str("[train]\nepochs = 0").is_err());
        assert!(RunConfig::from_toml_str("[data]\nsplit_fraction = 1.5").is_err());
        assert!(RunConfig::from_toml_str("[binning]\nstep = -1.0").is_err());
    }

    #[test]
    fn toml_roundtrip_preserves_config() {
        let text = r#"
output_dir = "runs/a"
[train]
epochs = 7
q = 25
[space]
depth = 3
candidates = [2, 4]
[binning]
step = 2.0
"#;
        let c = RunConfig::from_toml_str(text).unwrap();
        let echoed = c.to_toml_string().unwrap();
        let c2 = RunConfig::from_toml_str(&echoed).unwrap();
        assert_eq!(c2.train.epochs, 7);
        assert_eq!(c2.train.q, 25);
        assert_eq!(c2.output_dir, PathBuf::from("runs/a"));
        assert_eq!(c2.binning.step, Some(2.0));
    }
}
