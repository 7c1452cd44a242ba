use std::io::Write;

use rand::RngCore;
use serde::Deserialize;

use super::{run, HarnessError, MetricsRow, ScenarioConfig};
use crate::channel::stream_rng;

/// Column order of every CSV the harness writes.
pub const CSV_HEADER: [&str; 28] = [
    "topology",
    "mode",
    "w",
    "recovery",
    "dependent_rows",
    "feedback",
    "verification",
    "g",
    "l",
    "s",
    "R",
    "q",
    "epsilon",
    "epsilon_hop2",
    "data_rate",
    "trials",
    "seed",
    "total_transmissions",
    "total_transmissions_sd",
    "corrupted",
    "recovered",
    "false_recoveries",
    "recovery_ratio",
    "add",
    "completion_time_model_s",
    "completion_time_wall_s",
    "goodput_bps",
    "decode_failures",
];

fn record(sc: &ScenarioConfig, m: &MetricsRow) -> Vec<String> {
    vec![
        sc.topology.to_string(),
        sc.mode.to_string(),
        sc.w.to_string(),
        sc.recovery.to_string(),
        sc.uses_dependent_rows().to_string(),
        sc.feedback.to_string(),
        sc.verification.to_string(),
        sc.g.to_string(),
        sc.l.to_string(),
        sc.s.to_string(),
        sc.r.to_string(),
        sc.q.to_string(),
        sc.epsilon.to_string(),
        sc.epsilon_hop2().to_string(),
        sc.data_rate.to_string(),
        sc.trials.to_string(),
        sc.seed.to_string(),
        m.total_transmissions.to_string(),
        m.total_transmissions_sd.to_string(),
        m.corrupted.to_string(),
        m.recovered.to_string(),
        m.false_recoveries.to_string(),
        m.recovery_ratio.to_string(),
        m.add.to_string(),
        m.completion_time_model.to_string(),
        m.completion_time_wall
            .map(|x| x.to_string())
            .unwrap_or_default(),
        m.goodput.to_string(),
        m.decode_failures.to_string(),
    ]
}

/// Writes a header and one row per scenario.
pub fn write_csv<W: Write>(
    out: W,
    rows: &[(ScenarioConfig, MetricsRow)],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (sc, m) in rows {
        w.write_record(record(sc, m))?;
    }
    w.flush()?;
    Ok(())
}

/// A base scenario and the values each swept key takes.
///
/// ```toml
/// [base]
/// g = 50
/// [grid]
/// s = [2, 5, 10, 25]
/// epsilon = [1e-4, 5e-5]
/// ```
///
/// Cells are the Cartesian product of the axes, axes taken in key order
/// with the last axis varying fastest. A grid without axes, or with an
/// empty axis, has no cells.
#[derive(Debug, Clone, Default)]
pub struct GridSpec {
    pub base: ScenarioConfig,
    pub axes: Vec<(String, Vec<toml::Value>)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    base: toml::Table,
    #[serde(default)]
    grid: toml::Table,
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let file: GridFile = toml::from_str(text).map_err(|e| HarnessError::Grid(e.to_string()))?;
        let base: ScenarioConfig = toml::Value::Table(file.base)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let axes = file
            .grid
            .into_iter()
            .map(|(k, v)| match v {
                toml::Value::Array(vals) => Ok((k, vals)),
                other => Ok((k, vec![other])),
            })
            .collect::<Result<_, HarnessError>>()?;
        Ok(Self { base, axes })
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scenario for each cell, seeds derived from the base seed and the cell
    /// index.
    pub fn cells(&self) -> Result<Vec<ScenarioConfig>, HarnessError> {
        let base =
            toml::Value::try_from(&self.base).map_err(|e| HarnessError::Grid(e.to_string()))?;
        let mut out = Vec::with_capacity(self.len());
        for cell in 0..self.len() {
            let mut v = base.clone();
            let table = v.as_table_mut().expect("scenario is a table");
            let mut rem = cell;
            for (key, vals) in self.axes.iter().rev() {
                table.insert(key.clone(), vals[rem % vals.len()].clone());
                rem /= vals.len();
            }
            let mut sc: ScenarioConfig = v
                .try_into()
                .map_err(|e: toml::de::Error| HarnessError::Grid(format!("cell {cell}: {e}")))?;
            sc.seed = stream_rng(self.base.seed, cell as u64, 0xFF).next_u64();
            sc.validate()?;
            out.push(sc);
        }
        Ok(out)
    }
}

/// Runs every cell and writes one CSV row per cell in cell order.
pub fn sweep<W: Write>(
    grid: &GridSpec,
    out: W,
) -> Result<Vec<(ScenarioConfig, MetricsRow)>, HarnessError> {
    let rows = grid
        .cells()?
        .into_iter()
        .map(|sc| run(&sc).map(|sim| (sc, sim.metrics)))
        .collect::<Result<Vec<_>, _>>()?;
    write_csv(out, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "[base]\ng = 10\nl = 20\ns = 2\nR = 4\ntrials = 3\nepsilon = 1e-3\n";

    #[test]
    fn empty_grid_writes_header_only() {
        let grid = GridSpec::from_toml(SMALL).unwrap();
        let mut buf = Vec::new();
        assert!(sweep(&grid, &mut buf).unwrap().is_empty());
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
        let grid = GridSpec::from_toml(&format!("{SMALL}[grid]\ns = []\n")).unwrap();
        assert!(grid.is_empty());
    }

    #[test]
    fn two_by_two_grid_in_stable_order() {
        let grid =
            GridSpec::from_toml(&format!("{SMALL}[grid]\ns = [1, 2]\nR = [3, 4]\n")).unwrap();
        let cells = grid.cells().unwrap();
        let got: Vec<(usize, usize)> = cells.iter().map(|c| (c.r, c.s)).collect();
        assert_eq!(got, vec![(3, 1), (3, 2), (4, 1), (4, 2)]);
        let seeds: std::collections::BTreeSet<u64> = cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds.len(), 4);
        let mut buf = Vec::new();
        sweep(&grid, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    #[test]
    fn repeated_sweep_is_byte_identical() {
        let grid =
            GridSpec::from_toml(&format!("{SMALL}[grid]\nepsilon = [1e-3, 3e-3]\n")).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        sweep(&grid, &mut a).unwrap();
        sweep(&grid, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_cell_is_a_config_error() {
        let grid = GridSpec::from_toml(&format!("{SMALL}[grid]\ns = [3]\n")).unwrap();
        assert!(grid.cells().is_err());
        assert!(GridSpec::from_toml("[grid]\nnope = [1]\n")
            .unwrap()
            .cells()
            .is_err());
    }
}
