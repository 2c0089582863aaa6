use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use super::{run_episode, ConfigError, EpisodeLabels, EpisodeRecord, EpisodeSetup, RunConfig};
use crate::actor::ActorMemory;
use crate::dsl::NodeLibrary;
use crate::rng::{episode_seed, keyed_seed};
use crate::scoring::{aggregate, MetricTable, MetricsRecord};

/// Root seed of one (field, seed) lineage. Depends on the field label, not
/// on its position in the config, so the same field sees the same worlds in
/// every campaign.
pub fn lineage_seed(seed: u64, field_label: &str) -> u64 {
    keyed_seed(seed, field_label)
}

/// Episodes of one (field, seed) pair, in order.
#[derive(Debug, Clone)]
pub struct Lineage {
    pub config_label: String,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub lineages: Vec<Lineage>,
    pub tables: Vec<MetricTable>,
}

impl CampaignOutput {
    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.lineages.iter().flat_map(|l| l.records.iter())
    }

    /// Writes `records.jsonl`, `notifications.jsonl` and one metrics CSV per
    /// metric into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut records = String::new();
        let mut notes = String::new();
        for r in self.records() {
            records.push_str(&serde_json::to_string(r)?);
            records.push('\n');
            for n in &r.notifications {
                notes.push_str(&serde_json::to_string(n)?);
                notes.push('\n');
            }
        }
        fs::write(dir.join("records.jsonl"), records)?;
        fs::write(dir.join("notifications.jsonl"), notes)?;
        write_tables(&self.tables, dir)
    }
}

fn write_tables(tables: &[MetricTable], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        fs::write(dir.join(format!("{}.csv", t.metric.file_stem())), t.to_csv())?;
    }
    Ok(())
}

fn tables<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>) -> Result<Vec<MetricTable>, String> {
    let mut by_config: BTreeMap<String, Vec<MetricsRecord>> = BTreeMap::new();
    for r in records {
        by_config.entry(r.config_label.clone()).or_default().push(r.metrics.clone());
    }
    for v in by_config.values_mut() {
        v.sort_by_key(|m| m.episode_index);
    }
    aggregate(&by_config).map_err(|e| e.to_string())
}

/// Aggregates stored records into metric CSVs in `dir`.
pub fn write_report(records: &[EpisodeRecord], dir: &Path) -> io::Result<Vec<MetricTable>> {
    let t = tables(records).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    write_tables(&t, dir)?;
    Ok(t)
}

fn run_lineage(
    cfg: &RunConfig,
    field: &crate::sim::FieldConfig,
    seed: u64,
    config_label: String,
) -> Result<Lineage, ConfigError> {
    let library = NodeLibrary::warehouse();
    let mut critic = cfg.build_critic()?;
    let mut actor = cfg.build_actor()?;
    let mut tree = cfg.initial_tree(field, &library)?;
    let mut memory = ActorMemory::default();
    let root = lineage_seed(seed, &field.field_seed_label);
    let mut records = Vec::new();
    for k in 0..cfg.episodes_per_config {
        let setup = EpisodeSetup {
            field: field.clone(),
            faults: cfg.fault_model.clone(),
            scoring: cfg.scoring.clone(),
            seed: episode_seed(root, k),
        };
        let labels = EpisodeLabels {
            run_id: cfg.run_id.clone(),
            config_label: config_label.clone(),
            episode_index: k + 1,
        };
        let (record, next) = run_episode(
            &tree,
            &setup,
            &labels,
            &library,
            critic.as_mut(),
            actor.as_mut(),
            &mut memory,
            cfg.block_info(),
        )?;
        records.push(record);
        tree = next;
    }
    Ok(Lineage {
        config_label,
        records,
    })
}

/// Runs every (field, seed) lineage. Lineages run on separate threads;
/// results come back in config order, so output does not depend on
/// scheduling.
pub fn run_campaign(cfg: &RunConfig) -> Result<CampaignOutput, ConfigError> {
    cfg.check()?;
    let fields = cfg.resolve_fields()?;
    let jobs: Vec<_> = fields
        .iter()
        .flat_map(|f| {
            cfg.seeds.iter().map(move |&s| {
                let label = if cfg.seeds.len() == 1 {
                    f.field_seed_label.clone()
                } else {
                    format!("{}/seed-{s}", f.field_seed_label)
                };
                (f, s, label)
            })
        })
        .collect();
    let lineages = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(f, s, label)| scope.spawn(move || run_lineage(cfg, f, s, label)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("lineage thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let tables = tables(lineages.iter().flat_map(|l| l.records.iter())).map_err(ConfigError::Invalid)?;
    Ok(CampaignOutput { lineages, tables })
}
