use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde_json::{json, Value};
use vigilkit_core::eeg::features::feature_names;
use vigilkit_core::eeg::recording::{read_recording, read_recording_csv, write_recording};
use vigilkit_core::eeg::{BandSet, PipelineConfig, Recording, RestState, RoiMap, N_FEATURES};
use vigilkit_core::nn::{nn_search, NnConfig};
use vigilkit_core::relevance::regression::loocv_regress;
use vigilkit_core::relevance::search::{Criterion, MvpaConfig};
use vigilkit_core::relevance::{mvpa_search, screen_features, Dataset, Standardization};
use vigilkit_core::report::{render_heatmap, render_scatter, weight_heatmap, Heatmap, ScatterStats};
use vigilkit_core::scoring::{performance_summary, score_session, ScoringConfig};
use vigilkit_core::seed::derive;
use vigilkit_core::session::{label_trials, parse_event_log, write_event_log, ParadigmSpec};
use vigilkit_core::stats::significance_stars;
use vigilkit_core::synth::behavior::ARCHETYPES;
use vigilkit_core::synth::recording::{BandSource, OcularPlant, Topography};
use vigilkit_core::synth::{gen_cohort, gen_recording, gen_session, BehaviorProfile, PlantSpec, RecordingPlant};

use crate::args::{ExtractArgs, GlobalArgs, MvpaArgs, NnArgs, ReportArgs, ScoreArgs, ScreenArgs, StateArg, SynthArgs, TableArgs};
use crate::output::{csv_writer, num, Staging};
use crate::table::{self, Table};

/// What a command read and anything worth recording beside its outputs.
#[derive(Default)]
pub struct RunContext {
    pub inputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Map<String, Value>,
}

fn policy(g: &GlobalArgs) -> Standardization {
    if g.paper_compat {
        Standardization::Global
    } else {
        Standardization::PerFold
    }
}

fn load_dataset(t: &TableArgs, ctx: &mut RunContext) -> anyhow::Result<Dataset> {
    ctx.inputs.push(t.features.clone());
    let features = Table::read(&t.features)?;
    let targets = match &t.targets {
        Some(p) => {
            ctx.inputs.push(p.clone());
            Some(Table::read(p)?)
        }
        None => None,
    };
    let (ds, warnings) = table::dataset(&features, &t.target, targets.as_ref())?;
    ctx.warnings.extend(warnings);
    Ok(ds)
}

pub fn score(a: &ScoreArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    let cfg = ScoringConfig {
        window_trials: a.window,
        calib_trials: a.calib_trials,
        rt_lower_ms: a.rt_lower_ms,
        ..ScoringConfig::default()
    };
    let mut summary = csv_writer(&stage.path("summary.csv")?)?;
    summary.write_record([
        "participant",
        "ce_pct",
        "oe_pct",
        "cvs_mean",
        "cvs_var",
        "hrt_mean_ms",
        "hrt_var",
        "n_trials",
        "n_hits",
        "rt_lower_ms",
        "rt_upper_ms",
        "dropped_clicks",
    ])?;
    let mut trials = csv_writer(&stage.path("trials.csv")?)?;
    trials.write_record(["participant", "trial", "block", "digit", "outcome", "rt_ms", "multi_click", "tvs", "cvs"])?;
    for path in &a.logs {
        ctx.inputs.push(path.clone());
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let log = parse_event_log(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?;
        let labeled = label_trials(&log.trials, &log.paradigm);
        let (th, vs) = score_session(&labeled, &cfg).with_context(|| format!("scoring {}", path.display()))?;
        let s = performance_summary(&labeled, &vs, &log.paradigm)?;
        if log.dropped_clicks > 0 {
            ctx.warnings
                .push(format!("{}: {} clicks after the session were dropped", log.participant, log.dropped_clicks));
        }
        summary.write_record([
            log.participant.clone(),
            num(Some(s.ce_pct)),
            num(Some(s.oe_pct)),
            num(Some(s.cvs_mean)),
            num(s.cvs_var),
            num(s.hrt_mean_ms),
            num(s.hrt_var),
            s.n_trials.to_string(),
            s.n_hits.to_string(),
            num(Some(th.rt_lower_ms)),
            num(Some(th.rt_upper_ms)),
            log.dropped_clicks.to_string(),
        ])?;
        for (i, t) in labeled.iter().enumerate() {
            trials.write_record([
                log.participant.clone(),
                t.event.trial_index.to_string(),
                t.event.block.to_string(),
                t.event.digit.to_string(),
                t.outcome.as_str().to_string(),
                num(t.rt_ms),
                t.multi_click.to_string(),
                vs.tvs[i].to_string(),
                num(Some(vs.cvs[i])),
            ])?;
        }
    }
    summary.flush()?;
    trials.flush()?;
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn extract(a: &ExtractArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::default();
    if let Some(p) = &a.bands {
        ctx.inputs.push(p.clone());
        cfg.bands = BandSet::from_json(&std::fs::read_to_string(p)?).with_context(|| format!("band file {}", p.display()))?;
    }
    if let Some(p) = &a.roi_map {
        ctx.inputs.push(p.clone());
        cfg.rois = RoiMap::from_json(&std::fs::read_to_string(p)?).with_context(|| format!("region file {}", p.display()))?;
    }
    let state = match a.state {
        StateArg::Eo => RestState::EyesOpen,
        StateArg::Ec => RestState::EyesClosed,
    };
    let mut recs: Vec<Recording> = Vec::new();
    for path in &a.recordings {
        ctx.inputs.push(path.clone());
        let rec = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => {
                let fs = a.fs_hz.ok_or_else(|| anyhow!("--fs-hz is required for CSV recordings"))?;
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                read_recording_csv(file, fs, a.eog.clone(), state)
            }
            _ => read_recording(path, state),
        }
        .with_context(|| format!("reading {}", path.display()))?;
        recs.push(rec);
    }
    let results = vigilkit_core::eeg::pipeline::extract_many(&recs, &cfg, g.seed);

    let names = feature_names(&cfg.bands, &cfg.rois);
    let mut w = csv_writer(&stage.path("features.csv")?)?;
    w.write_record(std::iter::once("participant".to_string()).chain(names.iter().cloned()))?;
    let mut provenance = Vec::new();
    for (path, r) in a.recordings.iter().zip(results) {
        let (features, prov) = r.with_context(|| format!("extracting {}", path.display()))?;
        w.write_record(std::iter::once(stem(path)).chain(features.as_slice().iter().map(|v| num(Some(*v)))))?;
        for msg in &prov.warnings {
            ctx.warnings.push(format!("{}: {msg}", stem(path)));
        }
        provenance.push(json!({ "recording": stem(path), "provenance": prov }));
    }
    w.flush()?;
    stage.write("provenance.json", serde_json::to_string_pretty(&provenance)?)?;
    Ok(())
}

fn metric_cells(m: Option<&vigilkit_core::relevance::RegressionMetrics>) -> [String; 6] {
    match m {
        Some(m) => [
            num(Some(m.pearson_r)),
            num(Some(m.p_value)),
            num(Some(m.r2)),
            num(Some(m.r2_corr)),
            num(m.adj_r2),
            num(Some(m.rmse)),
        ],
        None => Default::default(),
    }
}

fn write_screen(
    ds: &Dataset,
    s: &vigilkit_core::relevance::search::ScreenResult,
    stage: &mut Staging,
    ctx: &mut RunContext,
) -> anyhow::Result<()> {
    let mut w = csv_writer(&stage.path("screen.csv")?)?;
    w.write_record(["feature", "r", "p", "r2", "r2_corr", "adj_r2", "rmse", "selected"])?;
    for (j, m) in s.per_feature.iter().enumerate() {
        let mut row = vec![ds.feature_names[j].clone()];
        row.extend(metric_cells(m.as_ref()));
        row.push(s.selected.contains(&j).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    if !s.skipped_constant.is_empty() {
        ctx.warnings.push(format!("{} constant features were skipped", s.skipped_constant.len()));
    }
    let names: Vec<&str> = s.selected.iter().map(|&j| ds.feature_names[j].as_str()).collect();
    ctx.summary.insert("selected".into(), json!(names));
    ctx.summary.insert("n_participants".into(), json!(ds.n()));
    Ok(())
}

pub fn screen(a: &ScreenArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    let ds = load_dataset(&a.table, ctx)?;
    let s = screen_features(&ds, a.alpha, policy(g))?;
    write_screen(&ds, &s, stage, ctx)
}

fn joined(ds: &Dataset, features: &[usize]) -> String {
    features.iter().map(|&j| ds.feature_names[j].as_str()).collect::<Vec<_>>().join(";")
}

pub fn mvpa(a: &MvpaArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    let ds = load_dataset(&a.table, ctx)?;
    let s = screen_features(&ds, a.alpha, policy(g))?;
    write_screen(&ds, &s, stage, ctx)?;

    let mut table = csv_writer(&stage.path("table.csv")?)?;
    table.write_record([
        "k", "n_subsets", "n_feasible", "features", "criteria", "r", "p", "r2", "r2_corr", "adj_r2", "rmse", "stars",
        "perm_p",
    ])?;
    let mut ranked = csv_writer(&stage.path("ranked.csv")?)?;
    ranked.write_record(["rank", "k", "features", "r", "p", "r2", "r2_corr", "adj_r2", "rmse", "perm_p"])?;
    if s.selected.is_empty() {
        ctx.warnings.push("no feature passed screening; the subset search was skipped".into());
        table.flush()?;
        ranked.flush()?;
        return Ok(());
    }
    let cfg = MvpaConfig {
        permutations: a.perms,
        seed: g.seed,
        subset_cap: a.subset_cap,
        standardization: policy(g),
        ..MvpaConfig::default()
    };
    let report = mvpa_search(&ds, &s.selected, &cfg)?;
    for row in &report.table {
        for b in &row.best {
            let crit: Vec<&str> = b.criteria.iter().map(|c| c.as_str()).collect();
            let m = &b.result.metrics;
            let mut rec = vec![
                row.k.to_string(),
                row.n_subsets.to_string(),
                row.n_feasible.to_string(),
                joined(&ds, &b.result.features),
                crit.join(";"),
            ];
            rec.extend(metric_cells(Some(m)));
            rec.push(significance_stars(m.p_value).to_string());
            rec.push(num(b.result.permutation_p));
            table.write_record(&rec)?;
        }
    }
    for (i, r) in report.ranked.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), r.features.len().to_string(), joined(&ds, &r.features)];
        rec.extend(metric_cells(Some(&r.metrics)));
        rec.push(num(r.permutation_p));
        ranked.write_record(&rec)?;
    }
    table.flush()?;
    ranked.flush()?;
    ctx.warnings.extend(report.diagnostics.iter().cloned());
    let best: Vec<Value> = report
        .best_adj_r2()
        .iter()
        .map(|r| {
            json!({
                "features": r.features.iter().map(|&j| ds.feature_names[j].clone()).collect::<Vec<_>>(),
                "adj_r2": r.metrics.adj_r2,
                "permutation_p": r.permutation_p,
            })
        })
        .collect();
    ctx.summary.insert("best_adj_r2".into(), json!(best));
    ctx.summary.insert("criteria".into(), json!([Criterion::AdjR2.as_str(), Criterion::PearsonR.as_str(), Criterion::Rmse.as_str()]));
    Ok(())
}

fn default_layout() -> (BandSet, RoiMap, Vec<String>) {
    let (bands, rois) = (BandSet::default(), RoiMap::default());
    let names = feature_names(&bands, &rois);
    (bands, rois, names)
}

pub fn nn_train(a: &NnArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    let mut ds = load_dataset(&a.table, ctx)?;
    if a.exclude_outliers {
        let (kept, removed) = ds.exclude_high_target_outliers()?;
        ctx.summary.insert("excluded".into(), json!(removed));
        ds = kept;
    }
    let cfg = NnConfig {
        hidden_units: a.units.clone(),
        max_epochs: a.max_epochs,
        runs: a.runs,
        seed: g.seed,
        standardization: policy(g),
        ..NnConfig::default()
    };
    let report = nn_search(&ds, &cfg)?;
    let mut per_units = Vec::new();
    for s in &report.searches {
        let mut w = csv_writer(&stage.path(&format!("err_surface_u{}.csv", s.units))?)?;
        w.write_record(["lr_index", "l2_index", "lr", "l2", "err"])?;
        for (i, row) in s.err.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                w.write_record([i.to_string(), j.to_string(), num(Some(s.lr_grid[i])), num(Some(s.l2_grid[j])), num(*e)])?;
            }
        }
        w.flush()?;
        if s.diverged_folds > 0 {
            ctx.warnings.push(format!("{} units: {} folds diverged", s.units, s.diverged_folds));
        }
        per_units.push(json!({
            "units": s.units,
            "lr": s.lr(),
            "l2": s.l2(),
            "err": s.best_err,
            "diverged_folds": s.diverged_folds,
            "successful_folds": s.weights.successful_folds,
        }));
    }
    let best = &report.searches[report.best];
    let normalized = best.weights.normalized();
    let mut w = csv_writer(&stage.path("weights.csv")?)?;
    w.write_record(["feature", "raw", "normalized"])?;
    for (j, name) in ds.feature_names.iter().enumerate() {
        w.write_record([name.clone(), num(Some(best.weights.values[j])), num(Some(normalized[j]))])?;
    }
    w.flush()?;
    let (bands, rois, names) = default_layout();
    if ds.feature_names == names {
        let map = weight_heatmap(&best.weights, &bands, &rois)?;
        let title = format!("{} units, lr {:.2e}, l2 {:.2e}", best.units, best.lr(), best.l2());
        stage.write("heatmap.svg", render_heatmap(&map, &title)?)?;
    } else {
        ctx.warnings.push("features are not the default region-by-band layout; no heat map".into());
    }
    ctx.summary.insert("best_units".into(), json!(best.units));
    ctx.summary.insert("searches".into(), json!(per_units));
    stage.write("nn_summary.json", serde_json::to_string_pretty(&Value::Object(ctx.summary.clone()))?)?;
    Ok(())
}

pub fn synth(a: &SynthArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    if a.profile != "all" && !ARCHETYPES.contains(&a.profile.as_str()) {
        bail!("unknown profile {:?}; expected one of {} or all", a.profile, ARCHETYPES.join(", "));
    }
    if a.participants == 0 {
        bail!("at least one participant is required");
    }
    let spec = ParadigmSpec::default();
    let mut people = Vec::new();
    for i in 0..a.participants {
        let id = format!("S{:02}", i + 1);
        let name = if a.profile == "all" { ARCHETYPES[i % ARCHETYPES.len()] } else { a.profile.as_str() };
        let seed = derive(g.seed, &[0, i as u64]);
        let profile = BehaviorProfile::archetype(name, seed).expect("validated name");
        let log = gen_session(&profile, &spec, &id)?;
        let mut buf = Vec::new();
        write_event_log(&log, &mut buf)?;
        stage.write(&format!("events/{id}.jsonl"), buf)?;
        people.push(json!({ "participant": id, "profile": profile }));
    }
    let mut truth = serde_json::Map::new();
    truth.insert("participants".into(), json!(people));

    if let Some(path) = &a.plant {
        ctx.inputs.push(path.clone());
        let plant: PlantSpec = serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("plant file {}", path.display()))?;
        let cohort = gen_cohort(&plant, derive(g.seed, &[1]))?;
        let ds = &cohort.dataset;
        let mut w = csv_writer(&stage.path("cohort.csv")?)?;
        w.write_record(
            std::iter::once("participant".to_string())
                .chain(ds.feature_names.iter().cloned())
                .chain(std::iter::once(plant.target_measure.clone())),
        )?;
        for (i, row) in ds.x.outer_iter().enumerate() {
            w.write_record(
                std::iter::once(ds.participant_ids[i].clone())
                    .chain(row.iter().map(|v| num(Some(*v))))
                    .chain(std::iter::once(num(Some(ds.y[i])))),
            )?;
        }
        w.flush()?;
        let planted: Vec<&str> = cohort.planted_indices.iter().map(|&j| ds.feature_names[j].as_str()).collect();
        truth.insert("plant".into(), json!(plant));
        truth.insert("planted_features".into(), json!(planted));
    }

    if a.recordings {
        let mut recs = Vec::new();
        for i in 0..a.participants {
            let id = format!("S{:02}", i + 1);
            let seed = derive(g.seed, &[2, i as u64]);
            // Posterior alpha strength varies across participants.
            let alpha_rms = 4.0 + 8.0 * (i as f64 + 0.5) / a.participants as f64;
            let mut plant = RecordingPlant::biosemi64();
            plant.sources.push(BandSource {
                lo_hz: 8.0,
                hi_hz: 12.0,
                rms_uv: alpha_rms,
                topography: Topography::Regions(vec!["LP".into(), "MP".into(), "RP".into()]),
            });
            plant.line_noise_uv = Some(3.0);
            plant.ocular = Some(OcularPlant {
                rms_uv: 30.0,
                eog_weights: vec![1.0, 0.7, 0.4],
                scalp_leak: Vec::new(),
            });
            let rec = gen_recording(&plant, a.duration_s, 256.0, RestState::EyesClosed, seed)?;
            let header = stage.path(&format!("recordings/{id}.json"))?;
            stage.path(&format!("recordings/{id}.bin"))?;
            write_recording(&rec, &header)?;
            recs.push(json!({ "participant": id, "seed": seed, "posterior_alpha_rms_uv": alpha_rms }));
        }
        truth.insert("recordings".into(), json!(recs));
    }
    stage.write("ground_truth.json", serde_json::to_string_pretty(&Value::Object(truth))?)?;
    Ok(())
}

pub fn report(a: &ReportArgs, g: &GlobalArgs, stage: &mut Staging, ctx: &mut RunContext) -> anyhow::Result<()> {
    if let Some(path) = &a.weights {
        ctx.inputs.push(path.clone());
        let t = Table::read(path)?;
        let col = if a.normalized { "normalized" } else { "raw" };
        let c = t.column(col).ok_or_else(|| anyhow!("{} has no {col} column", path.display()))?;
        let (bands, rois, names) = default_layout();
        if t.ids != names {
            bail!("{} does not list the {N_FEATURES} default features in order", path.display());
        }
        let values = t
            .rows
            .iter()
            .map(|r| r[c].ok_or_else(|| anyhow!("missing weight value")))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        let map = Heatmap::from_features(&values, &bands, &rois)?;
        stage.write("heatmap.svg", render_heatmap(&map, &a.title)?)?;
    }
    if let Some(features) = &a.features {
        let t = TableArgs {
            features: features.clone(),
            target: a.target.clone().expect("required by the parser"),
            targets: a.targets.clone(),
        };
        let ds = load_dataset(&t, ctx)?;
        let idx = a
            .subset
            .iter()
            .map(|n| ds.feature_names.iter().position(|f| f == n).ok_or_else(|| anyhow!("unknown feature {n:?}")))
            .collect::<anyhow::Result<Vec<usize>>>()?;
        let cv = loocv_regress(&ds.columns(&idx), &ds.y, policy(g))?;
        let mut w = csv_writer(&stage.path("predictions.csv")?)?;
        w.write_record(["participant", "true", "predicted"])?;
        for i in 0..ds.n() {
            w.write_record([ds.participant_ids[i].clone(), num(Some(ds.y[i])), num(Some(cv.predictions[i]))])?;
        }
        w.flush()?;
        let stats = ScatterStats {
            r: cv.metrics.pearson_r,
            p: cv.metrics.p_value,
        };
        let title = if a.title.is_empty() { a.subset.join(" + ") } else { a.title.clone() };
        stage.write("scatter.svg", render_scatter(&ds.y, &cv.predictions, stats, &title)?)?;
        ctx.summary.insert("metrics".into(), serde_json::to_value(cv.metrics)?);
    }
    Ok(())
}
