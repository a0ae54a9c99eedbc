use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cnnmil::{
    build_meta_dataset_with, evaluate_model, evolve_with, predict_bag, tune_stack_with, Bag, Label, MetaFeatures,
    ParetoFront, StackedModel,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{self, DatasetFile, FrontFile, ModelFile, Provenance, StackFrontFile};
use crate::config::RunConfig;
use crate::report;

const STACK_ESTIMATE: &str = "leave-one-row-out over member out-of-fold predictions (optimistic)";

pub fn ingest(config: &RunConfig, input: Option<&Path>, stdout: &mut dyn Write) -> Result<PathBuf> {
    let path = match input {
        Some(p) => p,
        None => config.dataset_path()?,
    };
    let dataset = artifact::ingest_dataset(path, config.normalize)?;
    let target = config.out.join(artifact::DATASET_FILE);
    let file = DatasetFile { provenance: Some(Provenance::new(config, config.stage_seed(&config.stage1))), dataset };
    artifact::write_json(&target, &file)?;
    writeln!(stdout, "{}", artifact::summary_line(&file.dataset))?;
    Ok(target)
}

pub fn optimize(config: &RunConfig, stdout: &mut dyn Write) -> Result<PathBuf> {
    let train = artifact::load_dataset(config.dataset_path()?, config.normalize)?;
    let seed = config.stage_seed(&config.stage1);
    let outcome = evolve_with(&train, &config.stage1, seed, config.validation)?;

    let target = config.out.join(artifact::FRONT_FILE);
    let file = FrontFile {
        provenance: Provenance::new(config, seed),
        validation: config.validation,
        front: outcome.front.members.clone(),
    };
    artifact::write_json(&target, &file)?;

    let rows = report::table_rows(&outcome.front.objectives());
    let md = report::markdown("Citation-kNN front (NSGA-II)", &rows);
    artifact::write_text(&config.out.join(format!("{}.md", artifact::FRONT_TABLE)), &md)?;
    artifact::write_text(&config.out.join(format!("{}.csv", artifact::FRONT_TABLE)), &report::csv(&rows))?;
    write!(stdout, "{md}")?;
    writeln!(
        stdout,
        "\n{} front members, {} distinct configurations evaluated",
        file.front.len(),
        outcome.evaluations
    )?;
    Ok(target)
}

pub fn stack(config: &RunConfig, front_path: &Path, kind: MetaFeatures, stdout: &mut dyn Write) -> Result<PathBuf> {
    let front_file: FrontFile = artifact::read_json(front_path)?;
    if front_file.front.is_empty() {
        bail!("front file {} has no members", front_path.display());
    }
    let train = artifact::load_dataset(config.dataset_path()?, config.normalize)?;
    let front = ParetoFront { members: front_file.front };
    let meta = build_meta_dataset_with(&train, &front, config.validation)?;
    let seed = config.stage_seed(&config.stage2);
    let stacked = tune_stack_with(&meta, &config.stage2, seed, kind)?;
    let chosen = stacked.most_balanced().context("stacking produced an empty front")?;
    let model = StackedModel::fit(&meta, chosen, train.normalization().cloned(), kind)?;

    let provenance = Provenance::new(config, seed);
    artifact::write_json(
        &config.out.join(artifact::STACK_FILE),
        &StackFrontFile {
            provenance: provenance.clone(),
            validation: config.validation,
            meta_features: kind,
            estimate: STACK_ESTIMATE.to_string(),
            front: stacked.members.clone(),
        },
    )?;
    let target = config.out.join(artifact::MODEL_FILE);
    artifact::write_json(&target, &ModelFile { provenance, model })?;

    let rows = report::table_rows(&stacked.objectives());
    let md = report::markdown("Stacked ensemble front", &rows);
    artifact::write_text(&config.out.join(format!("{}.md", artifact::STACK_TABLE)), &md)?;
    artifact::write_text(&config.out.join(format!("{}.csv", artifact::STACK_TABLE)), &report::csv(&rows))?;
    write!(stdout, "{md}")?;
    writeln!(
        stdout,
        "\nAccuracies: {STACK_ESTIMATE}.\nSaved model: {} members, gamma {:.4}, c {:.4}, Class 0 {}, Class 1 {}",
        chosen.columns.len(),
        chosen.gamma,
        chosen.c,
        report::percent(chosen.acc_neg),
        report::percent(chosen.acc_pos)
    )?;
    Ok(target)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub provenance: Provenance,
    /// `resampled` re-estimates on the training set, `holdout` scores a separate bag file.
    pub mode: String,
    pub acc_pos: f64,
    pub acc_neg: f64,
    pub bags: Vec<String>,
    pub truth: Vec<Label>,
    pub predictions: Vec<Label>,
}

pub fn evaluate(config: &RunConfig, model_path: &Path, test: Option<&Path>, stdout: &mut dyn Write) -> Result<PathBuf> {
    let model = artifact::read_json::<ModelFile>(model_path)?.model;
    let train = artifact::load_dataset(config.dataset_path()?, config.normalize)?;
    let (mode, bags, truth, predictions) = match test {
        None => {
            let r = evaluate_model(&train, &model, config.validation)?;
            ("resampled", train.bags().to_vec(), train.labels(), r.predictions)
        }
        Some(path) => {
            let bags = artifact::load_query_bags(path, &model)?;
            let predictions = bags.iter().map(|b| predict_bag(&model, &train, b)).collect::<cnnmil::Result<_>>()?;
            let truth = bags.iter().map(Bag::label).collect();
            ("holdout", bags, truth, predictions)
        }
    };
    let acc = cnnmil::stacking::accuracies(&truth, &predictions);
    let file = EvaluationFile {
        provenance: Provenance::new(config, config.stage_seed(&config.stage2)),
        mode: mode.to_string(),
        acc_pos: acc.acc_pos,
        acc_neg: acc.acc_neg,
        bags: bags.iter().map(|b| b.id().to_string()).collect(),
        truth,
        predictions,
    };
    let target = config.out.join(artifact::EVALUATION_FILE);
    artifact::write_json(&target, &file)?;

    let rows = vec![report::TableRow { class0: acc.acc_neg, class1: acc.acc_pos, models: model.members.len() }];
    write!(stdout, "{}", report::markdown(&format!("Stacked model ({mode})"), &rows))?;
    Ok(target)
}

/// Which bags `predict` classifies.
pub enum Query<'a> {
    Ids(&'a [String]),
    File(&'a Path),
}

pub fn predict(config: &RunConfig, model_path: &Path, query: Query<'_>, stdout: &mut dyn Write) -> Result<()> {
    let model = artifact::read_json::<ModelFile>(model_path)?.model;
    let train = artifact::load_dataset(config.dataset_path()?, config.normalize)?;
    let bags: Vec<Bag> = match query {
        Query::Ids(ids) => ids
            .iter()
            .map(|id| train.bag(id).cloned().with_context(|| format!("unknown bag id {id:?}")))
            .collect::<Result<_>>()?,
        Query::File(path) => artifact::load_query_bags(path, &model)?,
    };
    // classify everything first so an error leaves no partial output
    let labels = bags.iter().map(|b| predict_bag(&model, &train, b)).collect::<cnnmil::Result<Vec<_>>>()?;
    for (bag, label) in bags.iter().zip(labels) {
        writeln!(stdout, "{}\t{}", bag.id(), label)?;
    }
    Ok(())
}
