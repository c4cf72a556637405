use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use latent_debias::autoencoder::{train, write_checkpoint, ParallelCorpus, TrainConfig};
use latent_debias::debias::DebiasTransform;
use latent_debias::diagnostics::{mean_parallel_cosine, project_2d, retrieval_accuracy};
use latent_debias::evaluation::aggregate;
use latent_debias::inlp::{InlpConfig, ProbeDataset, ProjectionMatrix};
use latent_debias::sentdebias::{BiasSubspace, GroupKind};
use latent_debias::store::annotations::{groups_for, labels_for, read_annotations};
use latent_debias::store::attributes::read_attribute_list;
use latent_debias::store::embeddings::read_embeddings_with_dim;
use latent_debias::store::pairs::{build_pairs_for_sets, read_pairs};
use latent_debias::store::transform::{read_transform, write_transform};
use latent_debias::store::workspace::{AttributeEntry, DebiasEntry, EmbeddingEntry, ModelEntry, TransformEntry};
use latent_debias::store::{
    read_embeddings, read_scores, Alignment, BiasType, EmbeddingSet, LanguageId, SpaceTag, Split, Technique, Workspace,
};
use latent_debias::synthetic::{
    write_offset_langs, write_planted_bias, write_reference_table_fixture, PresetSizes, SyntheticWorld, WorldConfig,
};
use latent_debias::Error;

use crate::util::{copy_in, encode_sets, file_name, print_json, warn_all, workspace_model, write_text};
use crate::{
    Cli, Command, DiagnoseArgs, EvaluateArgs, ExportArgs, FitCommon, FitInlpArgs, FitSentDebiasArgs, IngestArgs,
    Preset, SyntheticArgs, TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::TrainAe(a) => train_ae(cli, a),
        Command::FitSentdebias(a) => fit_sentdebias(cli, a),
        Command::FitInlp(a) => fit_inlp(cli, a),
        Command::ExportTransform(a) => export_transform(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Diagnose(a) => diagnose(cli, a),
        Command::Synthetic(a) => synthetic(cli, a),
    }
}

fn usage(msg: String) -> anyhow::Error {
    Error::Parameter(msg).into()
}

/// Splits `spec` on ':' into `min..=max` fields.
fn spec_fields(spec: &str, min: usize, max: usize, shape: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = spec.split(':').map(str::to_string).collect();
    if parts.len() < min || parts.len() > max || parts.iter().any(String::is_empty) {
        return Err(usage(format!("'{spec}' does not match {shape}")));
    }
    Ok(parts)
}

fn pairing_warnings(ws: &Workspace) -> Result<Vec<String>> {
    let alignment = ws.alignment()?;
    let mut out = Vec::new();
    for split in Split::ALL {
        let sets: Vec<EmbeddingSet> =
            ws.languages().iter().filter_map(|l| ws.load_embeddings(l, *split).ok()).collect();
        if sets.len() < 2 {
            continue;
        }
        let refs: Vec<&EmbeddingSet> = sets.iter().collect();
        let ds = build_pairs_for_sets(&refs, &alignment)?;
        out.extend(ds.report.warnings().into_iter().map(|w| format!("{split}: {w}")));
    }
    Ok(out)
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let mut ws = Workspace::open_or_create(&a.workspace)?;
    let mut added = Vec::new();

    for p in &a.embeddings {
        let set = read_embeddings(p).with_context(|| format!("reading {}", p.display()))?;
        ws.claim_dim(set.dim()).with_context(|| p.display().to_string())?;
        let rel = format!("{}.{}.xleb", set.language, set.split);
        copy_in(&ws, p, &rel)?;
        ws.upsert_embedding(EmbeddingEntry {
            language: set.language.clone(),
            split: set.split,
            file: rel.clone(),
            rows: set.len(),
        });
        added.push(rel);
    }

    if let Some(p) = &a.pairs {
        read_pairs(p).with_context(|| format!("reading {}", p.display()))?;
        copy_in(&ws, p, "pairs.tsv")?;
        ws.manifest.pairs = Some("pairs.tsv".into());
        added.push("pairs.tsv".into());
    }

    for p in &a.scores {
        let records = read_scores(p).with_context(|| format!("reading {}", p.display()))?;
        if records.is_empty() {
            eprintln!("warning: {} holds no records", p.display());
        }
        let rel = format!("scores/{}", file_name(p)?);
        copy_in(&ws, p, &rel)?;
        if !ws.manifest.scores.contains(&rel) {
            ws.manifest.scores.push(rel.clone());
        }
        added.push(rel);
    }

    for spec in &a.debias {
        let f = spec_fields(spec, 4, 4, "LANG:TYPE:EMBEDDINGS:ANNOTATIONS")?;
        let (lang, bias): (LanguageId, BiasType) = (f[0].parse()?, f[1].parse()?);
        let set = read_embeddings(&f[2]).with_context(|| format!("reading {}", f[2]))?;
        if set.language != lang {
            bail!(Error::Data(format!("{} holds '{}' embeddings, not '{lang}'", f[2], set.language)));
        }
        ws.claim_dim(set.dim())?;
        let ann = read_annotations(&f[3]).with_context(|| format!("reading {}", f[3]))?;
        // both views must resolve against the embedding ids
        let groups = groups_for(&set, &ann)?;
        let (_, labels, classes) = labels_for(&set, &ann)?;
        if groups.is_empty() && labels.is_empty() {
            eprintln!("warning: {} has neither labels nor groups", f[3]);
        }
        if !labels.is_empty() && classes.len() < 2 {
            eprintln!("warning: {} has a single label class; INLP cannot be fit from it", f[3]);
        }
        let emb = format!("{lang}.debias.{bias}.xleb");
        let tsv = format!("{lang}.debias.{bias}.tsv");
        copy_in(&ws, Path::new(&f[2]), &emb)?;
        copy_in(&ws, Path::new(&f[3]), &tsv)?;
        ws.upsert_debias(DebiasEntry { language: lang, bias_type: bias, embeddings: emb.clone(), annotations: tsv });
        added.push(emb);
    }

    for spec in &a.attributes {
        let f = spec_fields(spec, 3, 4, "LANG:TYPE:LIST[:PAIRING]")?;
        let (lang, bias): (LanguageId, BiasType) = (f[0].parse()?, f[1].parse()?);
        let pairing = f.get(3).map(Path::new);
        if let Some(p) = pairing {
            if !p.exists() {
                bail!(Error::Data(format!("pairing file {} does not exist", p.display())));
            }
        }
        let list = read_attribute_list(lang.clone(), bias, &f[2], pairing)?;
        if bias == BiasType::Gender && !list.is_paired() {
            eprintln!("warning: {lang} gender list has no pairing; counterfactual swaps are unavailable");
        }
        let file = format!("attributes/{lang}_{bias}.txt");
        copy_in(&ws, Path::new(&f[2]), &file)?;
        let pairing_rel = match pairing {
            Some(p) => {
                let rel = format!("attributes/{lang}_{bias}.pairs");
                copy_in(&ws, p, &rel)?;
                Some(rel)
            }
            None => None,
        };
        ws.manifest.attributes.retain(|e| !(e.language == lang && e.bias_type == bias));
        ws.manifest.attributes.push(AttributeEntry {
            language: lang,
            bias_type: bias,
            file: file.clone(),
            pairing: pairing_rel,
        });
        ws.manifest.attributes.sort_by(|x, y| (&x.language, x.bias_type).cmp(&(&y.language, y.bias_type)));
        added.push(file);
    }

    let warnings = pairing_warnings(&ws)?;
    warn_all(&warnings);
    ws.save()?;
    if cli.json {
        print_json(&json!({ "workspace": a.workspace, "added": added, "dim": ws.manifest.dim, "warnings": warnings }))?;
    } else {
        println!("ingested {} file(s) into {}", added.len(), a.workspace.display());
    }
    Ok(())
}

fn train_ae(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut ws = Workspace::open(&a.workspace)?;
    let languages: Vec<LanguageId> = if a.languages.is_empty() {
        ws.languages()
    } else {
        a.languages.iter().map(|l| l.parse()).collect::<latent_debias::Result<_>>()?
    };
    if languages.len() < 2 {
        return Err(usage(format!("need at least two languages, got {}", languages.len())));
    }
    let alignment = ws.alignment()?;
    let (train_corpus, r1) = ParallelCorpus::from_sets(&ws.load_split(&languages, Split::Train)?, &alignment)?;
    let (dev, r2) = ParallelCorpus::from_sets(&ws.load_split(&languages, Split::Dev)?, &alignment)?;
    warn_all(&r1.warnings());
    warn_all(&r2.warnings());

    let cfg = TrainConfig {
        epochs: a.epochs,
        patience: a.patience,
        lr: a.lr,
        batch_size: a.batch_size,
        seed: cli.seed,
        hidden_dims: a.hidden.clone(),
        latent_dim: a.latent,
        weight_decay: a.weight_decay,
    };
    let trained = train(&train_corpus, &dev, &cfg)?;
    write_checkpoint(&trained.model, ws.path("model.xlae"))?;
    let history = serde_json::to_string_pretty(&trained.history)?;
    write_text(&ws.path("history.json"), &history)?;
    ws.manifest.model = Some(ModelEntry { file: "model.xlae".into(), history: "history.json".into(), languages });
    ws.save()?;

    let h = &trained.history;
    let best = h.best().map(|e| e.dev_loss);
    if cli.json {
        print_json(&json!({
            "model": "model.xlae",
            "epochs": h.epochs.len(),
            "best_epoch": h.best_epoch,
            "best_dev_loss": best,
            "initial_dev_loss": h.initial_dev.total(),
            "stopped_early": h.stopped_early,
            "train_pairs": train_corpus.total_pairs(),
        }))?;
    } else {
        println!(
            "trained {} epoch(s) on {} pairs; best epoch {} (dev loss {:.4} from {:.4}){}",
            h.epochs.len(),
            train_corpus.total_pairs(),
            h.best_epoch,
            best.unwrap_or(f64::NAN),
            h.initial_dev.total(),
            if h.stopped_early { ", stopped early" } else { "" }
        );
    }
    Ok(())
}

/// Debias rows for `c`, encoded when fitting in the latent space.
fn fit_inputs(
    c: &FitCommon,
) -> Result<(
    Workspace,
    EmbeddingSet,
    Vec<latent_debias::store::Annotation>,
    Option<latent_debias::autoencoder::AutoencoderModel>,
)> {
    let ws = Workspace::open(&c.workspace)?;
    let (mut set, ann) = ws.load_debias(&c.lang, c.bias_type)?;
    let model = match SpaceTag::from(c.space) {
        SpaceTag::Original => None,
        SpaceTag::Latent => {
            let m = workspace_model(&ws)?;
            set = encode_sets(&m, vec![set])?.remove(0);
            Some(m)
        }
    };
    Ok((ws, set, ann, model))
}

fn store_transform(
    ws: &mut Workspace,
    c: &FitCommon,
    t: &DebiasTransform,
    model: Option<&latent_debias::autoencoder::AutoencoderModel>,
) -> Result<String> {
    let space = SpaceTag::from(c.space);
    let name = c.name.clone().unwrap_or_else(|| format!("{}-{}-{}-{}", t.technique(), space, c.lang, c.bias_type));
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(usage(format!("transform name '{name}' must be a plain file stem")));
    }
    let file = format!("transforms/{name}.xltf");
    std::fs::create_dir_all(ws.path("transforms"))?;
    write_transform(&t.to_transform_file(model)?, ws.path(&file))?;
    ws.upsert_transform(TransformEntry {
        name: name.clone(),
        file,
        technique: t.technique(),
        space,
        language: c.lang.clone(),
        bias_type: c.bias_type,
    });
    ws.save()?;
    Ok(name)
}

fn fit_sentdebias(cli: &Cli, a: &FitSentDebiasArgs) -> Result<()> {
    let c = &a.common;
    let (mut ws, set, ann, model) = fit_inputs(c)?;
    let groups: Vec<_> = groups_for(&set, &ann)?.iter().map(|rows| set.matrix.select_rows(rows)).collect();
    let kind = GroupKind::for_bias(c.bias_type);
    let sub = BiasSubspace::fit(&groups, kind, a.k, c.bias_type, c.space.into(), c.lang.clone())?;
    let t = DebiasTransform::Subspace(sub);
    let name = store_transform(&mut ws, c, &t, model.as_ref())?;
    if cli.json {
        print_json(
            &json!({ "name": name, "technique": Technique::SentDebias, "k": a.k, "dim": t.dim(), "groups": groups.len() }),
        )?;
    } else {
        println!("stored {name}: {} direction(s) in {} dims from {} groups", a.k, t.dim(), groups.len());
    }
    Ok(())
}

fn fit_inlp(cli: &Cli, a: &FitInlpArgs) -> Result<()> {
    let c = &a.common;
    let (mut ws, set, ann, model) = fit_inputs(c)?;
    let (idx, labels, classes) = labels_for(&set, &ann)?;
    let data = ProbeDataset::new(set.matrix.select_rows(&idx), &labels)?;
    let cfg = InlpConfig { n_iters: a.iters, stop_accuracy_margin: a.margin, seed: cli.seed };
    let (pm, fit) = ProjectionMatrix::fit(&data, &cfg, c.bias_type, c.space.into(), c.lang.clone())?;
    warn_all(&fit.warnings);
    let last = fit.probe_accuracies.len().saturating_sub(1);
    let (acc, maj) = (fit.probe_accuracies.get(last).copied(), fit.majority_rates.get(last).copied());
    if let (Some(acc), Some(maj)) = (acc, maj) {
        eprintln!(
            "final probe accuracy {acc:.3} vs majority {maj:.3} after {} iteration(s)",
            fit.probe_accuracies.len()
        );
    }
    let iterations = pm.iterations_used;
    let t = DebiasTransform::Projection(pm);
    let name = store_transform(&mut ws, c, &t, model.as_ref())?;
    if cli.json {
        print_json(&json!({
            "name": name,
            "technique": Technique::Inlp,
            "classes": classes,
            "iterations": iterations,
            "removed": fit.removed.rows(),
            "probe_accuracies": fit.probe_accuracies,
            "majority_rates": fit.majority_rates,
            "final_accuracy": acc,
            "majority": maj,
        }))?;
    } else {
        println!(
            "stored {name}: {iterations} iteration(s), {} direction(s) removed in {} dims",
            fit.removed.rows(),
            t.dim()
        );
    }
    Ok(())
}

fn export_transform(cli: &Cli, a: &ExportArgs) -> Result<()> {
    let ws = Workspace::open(&a.workspace)?;
    let entry = ws.transform(&a.name)?;
    // decode first so a damaged file is never exported
    let file = read_transform(ws.path(&entry.file))?;
    DebiasTransform::from_transform_file(&file)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_transform(&file, &a.out)?;
    if cli.json {
        print_json(
            &json!({ "name": a.name, "out": a.out, "self_contained": file.autoencoder.is_some() || entry.space == SpaceTag::Original }),
        )?;
    } else {
        println!("wrote {} to {}", a.name, a.out.display());
    }
    Ok(())
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let mut paths = a.scores.clone();
    if paths.is_empty() {
        let Some(w) = &a.workspace else {
            return Err(usage("give --scores files or a --workspace with ingested scores".into()));
        };
        let ws = Workspace::open(w)?;
        paths = ws.manifest.scores.iter().map(|s| ws.path(s)).collect();
        if paths.is_empty() {
            bail!(Error::Data(format!("workspace {} has no ingested scores", w.display())));
        }
    }
    let mut records = Vec::new();
    for p in &paths {
        records.extend(read_scores(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let report = aggregate(&records, a.alpha)?;
    if !report.missing.is_empty() {
        eprintln!("warning: {} grid cell(s) have no records; dependent averages are left empty", report.missing.len());
    }
    let json_text = report.to_json()?;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join("report.json"), &json_text)?;
        write_text(&dir.join("plot.csv"), &report.export_plot_data())?;
    }
    if cli.json {
        println!("{json_text}");
    } else {
        print!("{}", report.render_table(&a.debias_lang));
    }
    Ok(())
}

fn diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<()> {
    let ws = a.workspace.as_ref().map(Workspace::open).transpose()?;
    let mut sets: Vec<EmbeddingSet> = if a.sets.is_empty() {
        let ws = ws.as_ref().ok_or_else(|| usage("give --sets files or a --workspace".into()))?;
        ws.load_split(&ws.languages(), Split::Dev)?
    } else {
        let mut out: Vec<EmbeddingSet> = Vec::new();
        for p in &a.sets {
            let s = match out.first() {
                Some(f) => read_embeddings_with_dim(p, f.dim()),
                None => read_embeddings(p),
            }
            .with_context(|| format!("reading {}", p.display()))?;
            out.push(s);
        }
        out
    };
    if sets.len() < 2 {
        return Err(usage("diagnostics need at least two languages".into()));
    }
    let model = match (&a.model, a.latent) {
        (Some(p), _) => Some(latent_debias::autoencoder::read_checkpoint(p)?),
        (None, true) => {
            Some(workspace_model(ws.as_ref().ok_or_else(|| usage("--latent needs --workspace or --model".into()))?)?)
        }
        (None, false) => None,
    };
    if let Some(m) = &model {
        sets = encode_sets(m, sets)?;
    }
    let alignment = match (&a.pairs, &ws) {
        (Some(p), _) => Alignment::Manifest(read_pairs(p)?),
        (None, Some(ws)) => ws.alignment()?,
        (None, None) => Alignment::IdEquality,
    };
    let refs: Vec<&EmbeddingSet> = sets.iter().collect();
    let ds = build_pairs_for_sets(&refs, &alignment)?;
    warn_all(&ds.report.warnings());

    let mut rows = Vec::new();
    for (i, x) in sets.iter().enumerate() {
        for y in &sets[i + 1..] {
            let Some(pairs) = ds.get(&x.language, &y.language) else { continue };
            if pairs.is_empty() {
                eprintln!("warning: no parallel pairs between {} and {}", x.language, y.language);
                continue;
            }
            let r = retrieval_accuracy(x, y, &pairs)?;
            let cos = mean_parallel_cosine(x, y, &pairs)?;
            rows.push(json!({
                "lang_a": x.language, "lang_b": y.language, "pairs": pairs.len(),
                "retrieval": r.accuracy, "ties": r.ties, "cosine": cos,
            }));
        }
    }
    if rows.is_empty() {
        bail!(Error::Data("no language pair shares any parallel sentence".into()));
    }
    let mean = |k: &str| rows.iter().map(|r| r[k].as_f64().unwrap_or(0.0)).sum::<f64>() / rows.len() as f64;
    let (retrieval, cosine) = (mean("retrieval"), mean("cosine"));
    if let Some(csv) = &a.csv {
        write_text(csv, &project_2d(&sets)?)?;
    }
    let space = if model.is_some() { "latent" } else { "raw" };
    if cli.json {
        print_json(&json!({ "space": space, "pairs": rows, "mean_retrieval": retrieval, "mean_cosine": cosine }))?;
    } else {
        println!("space: {space}");
        for r in &rows {
            println!(
                "{}-{}  retrieval {:.3}  cosine {:.3}  ({} pairs)",
                r["lang_a"].as_str().unwrap_or("?"),
                r["lang_b"].as_str().unwrap_or("?"),
                r["retrieval"].as_f64().unwrap_or(f64::NAN),
                r["cosine"].as_f64().unwrap_or(f64::NAN),
                r["pairs"]
            );
        }
        println!("mean      retrieval {retrieval:.3}  cosine {cosine:.3}");
    }
    Ok(())
}

fn synthetic(cli: &Cli, a: &SyntheticArgs) -> Result<()> {
    let summary = match a.preset {
        Preset::ReferenceTable => {
            std::fs::create_dir_all(&a.out)?;
            let p = a.out.join("reference-table.scores.tsv");
            write_reference_table_fixture(&p)?;
            json!({ "preset": "reference-table", "scores": p })
        }
        Preset::OffsetLangs | Preset::PlantedBias => {
            let world = SyntheticWorld::new(WorldConfig {
                dim: a.dim,
                semantic_dim: a.semantic_dim,
                seed: cli.seed,
                ..WorldConfig::default()
            })?;
            let sizes =
                PresetSizes { train: a.train, dev: a.dev, debias_pairs: a.debias_pairs, ..PresetSizes::default() };
            let ws = if matches!(a.preset, Preset::OffsetLangs) {
                write_offset_langs(&a.out, &world, &sizes, cli.seed)?
            } else {
                write_planted_bias(&a.out, &world, &sizes, cli.seed)?
            };
            json!({
                "preset": if matches!(a.preset, Preset::OffsetLangs) { "offset-langs" } else { "planted-bias" },
                "workspace": a.out,
                "languages": ws.languages(),
                "dim": ws.manifest.dim,
            })
        }
    };
    if cli.json {
        print_json(&summary)?;
    } else {
        println!("wrote {} preset to {}", summary["preset"].as_str().unwrap_or("?"), a.out.display());
    }
    Ok(())
}
