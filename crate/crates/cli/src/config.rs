use crate::error::CliError;
use awe_core::audit::AuditConfig;
use awe_core::data::DatasetSpec;
use awe_core::losses::Method;
use awe_core::train::{table, table1, GridEntry, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which comparison to run and how often to repeat each trained row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    /// Comparison table number, 1 to 4.
    pub table: usize,
    pub repeats: usize,
    /// Subset of the method rows of table 1, in the given order.
    pub methods: Option<Vec<Method>>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            table: 1,
            repeats: 3,
            methods: None,
        }
    }
}

impl GridOptions {
    pub fn entries(&self) -> Result<Vec<GridEntry>, CliError> {
        if self.repeats == 0 {
            return Err(CliError::Usage("grid.repeats must be at least 1".into()));
        }
        match (&self.methods, self.table) {
            (Some(_), t) if t != 1 => Err(CliError::Usage(
                "grid.methods selects rows of table 1 only".into(),
            )),
            (Some(methods), _) => {
                if methods.is_empty() {
                    return Err(CliError::Usage("grid.methods is empty".into()));
                }
                let all = table1();
                Ok(methods
                    .iter()
                    .map(|m| {
                        let i = Method::TABLE1
                            .iter()
                            .position(|x| x == m)
                            .expect("every method is a table-1 row");
                        all[i].clone()
                    })
                    .collect())
            }
            (None, t) => table(t)
                .ok_or_else(|| CliError::Usage(format!("grid.table must be 1 to 4, got {t}"))),
        }
    }
}

/// The structured config file. Every section and field is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub grid: GridOptions,
    pub audit: AuditConfig,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
