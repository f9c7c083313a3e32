use modelmap::bootstrap::{Bootstrap, ErrorConfig, ErrorReport, MinN, Normalization};
use modelmap::io::{digest_matrix, write_labelled};
use modelmap::mapalign::{add_models, align_trials, centrography, pca_embed, ModelRows};
use modelmap::matrix::{kl_estimate, pairwise_distances_with};
use modelmap::predict::{feature_matrix, nested_cv_predict, CvConfig};
use modelmap::sampling::{
    draw, draw_with, plan, replicate_rng, weighted_center_q, weighted_distance_with, AliasTable, CenteringOptions,
};
use modelmap::{DistanceMatrix, Execution, Method};
use ndarray::ArrayView2;

use crate::input::{prepare, read_raw, read_scores, read_trials, NGrid, Target};
use crate::report::{num, opt, Config, Report};
use crate::{CenteringArgs, Cli, Command, Failure, InputArgs};

pub fn run(cli: &Cli, exec: Execution) -> Result<(), Failure> {
    let report = match &cli.command {
        Command::Center { input } => center(cli, input)?,
        Command::Plan { input, method } => plan_cmd(cli, input, *method)?,
        Command::Sample { input, method, n } => sample(cli, input, *method, *n)?,
        Command::Distances {
            input,
            method,
            n,
            kl,
            centering,
        } => distances(cli, exec, input, *method, *n, *kl, centering)?,
        Command::Error {
            input,
            method,
            n_grid,
            replicates,
            epsilon0,
            normalization,
            centering,
        } => {
            let e = ErrorArgs {
                methods: methods_or_all(method),
                n_grid,
                replicates: *replicates as usize,
                epsilon0: *epsilon0,
                normalization: *normalization,
                centering,
            };
            error_sweep(cli, exec, input, &e)?
        }
        Command::MinN {
            input,
            method,
            m,
            n_grid,
            replicates,
            epsilon0,
            normalization,
            centering,
        } => {
            let e = ErrorArgs {
                methods: methods_or_all(method),
                n_grid,
                replicates: *replicates as usize,
                epsilon0: *epsilon0,
                normalization: *normalization,
                centering,
            };
            min_n(cli, exec, input, &e, *m)?
        }
        Command::Align { .. } => align(cli, exec)?,
        Command::AddModels {
            input,
            new,
            method,
            n,
            distances,
            centering,
        } => add_models_cmd(cli, exec, input, new, *method, *n, *distances, centering)?,
        Command::Predict { .. } => predict(cli, exec)?,
        Command::Verify => return verify(cli),
    };
    report.emit(cli.output.as_deref())?;
    Ok(())
}

fn methods_or_all(methods: &[Method]) -> Vec<Method> {
    if methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        methods.to_vec()
    }
}

fn input_config(cfg: &mut Config, cli: &Cli, input: &InputArgs) {
    cfg.set("seed", cli.seed);
    cfg.set("centered_input", input.centered);
    cfg.set("clip_pct", input.clip_pct.map(num).unwrap_or_else(|| "none".into()));
    cfg.set("threshold", input.threshold.map(num).unwrap_or_else(|| "none".into()));
}

fn centering_options(c: &CenteringArgs) -> CenteringOptions {
    CenteringOptions {
        weighting: c.weighting,
        row_centering: c.row_centering,
    }
}

fn centering_config(cfg: &mut Config, c: &CenteringArgs) {
    cfg.set("weighting", c.weighting);
    cfg.set("row_centering", c.row_centering);
}

fn labelled(report: &mut Report, corner: &str, rows: &[String], cols: &[String], values: ArrayView2<'_, f64>) {
    let mut buf = Vec::new();
    write_labelled(&mut buf, corner, rows, cols, values).expect("writing to memory");
    report.body_mut().push_str(std::str::from_utf8(&buf).expect("utf-8"));
}

fn center(cli: &Cli, input: &InputArgs) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    let mut r = Report::new("center", &cfg, &p.digest);
    r.meta("clip_threshold", opt(p.threshold));
    r.meta("output_digest", p.q.digest());
    labelled(&mut r, "model_id", p.q.model_ids(), p.q.text_ids(), p.q.values());
    Ok(r)
}

fn plan_cmd(cli: &Cli, input: &InputArgs, method: Method) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    cfg.set("method", method);
    let pl = plan(method, &p.q)?;
    let mut r = Report::new("plan", &cfg, &p.digest);
    r.meta("support", pl.support().len());
    r.row(["text_id", "prob"]);
    for (id, pi) in p.q.text_ids().iter().zip(pl.probs()) {
        r.row([id.clone(), num(*pi)]);
    }
    Ok(r)
}

fn sample(cli: &Cli, input: &InputArgs, method: Method, n: usize) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    cfg.set("method", method).set("n", n);
    let d = draw(&plan(method, &p.q)?, n, cli.seed)?;
    let mut r = Report::new("sample", &cfg, &p.digest);
    r.meta("population", d.population);
    r.meta("unique", d.unique_count());
    r.row(["text_id", "index", "count", "prob", "weight"]);
    for t in 0..d.unique_count() {
        let s = d.unique_indices[t];
        r.row([
            p.q.text_ids()[s].clone(),
            s.to_string(),
            d.counts[t].to_string(),
            num(d.probs[t]),
            num(d.weights[t]),
        ]);
    }
    Ok(r)
}

fn emit_distances(r: &mut Report, ids: &[String], g: &DistanceMatrix, kl: bool, n_texts: usize) -> Result<(), Failure> {
    if kl {
        let k = kl_estimate(g, n_texts)?;
        labelled(r, "model_id", ids, ids, k.view());
    } else {
        labelled(r, "model_id", ids, ids, g.values.view());
    }
    Ok(())
}

fn distances(
    cli: &Cli,
    exec: Execution,
    input: &InputArgs,
    method: Method,
    n: Option<usize>,
    kl: bool,
    centering: &CenteringArgs,
) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    cfg.set("quantity", if kl { "kl" } else { "g" });
    let g = match n {
        None => {
            cfg.set("kind", "exact");
            pairwise_distances_with(&p.q, 1.0, exec)?
        }
        Some(n) => {
            cfg.set("kind", "resampled").set("method", method).set("n", n);
            centering_config(&mut cfg, centering);
            let d = draw(&plan(method, &p.q)?, n, cli.seed)?;
            let wc = weighted_center_q(&p.q, &d, centering_options(centering))?;
            weighted_distance_with(&wc, exec)
        }
    };
    let mut r = Report::new("distances", &cfg, &p.digest);
    emit_distances(&mut r, p.q.model_ids(), &g, kl, p.q.n_texts())?;
    Ok(r)
}

struct ErrorArgs<'a> {
    methods: Vec<Method>,
    n_grid: &'a NGrid,
    replicates: usize,
    epsilon0: f64,
    normalization: Normalization,
    centering: &'a CenteringArgs,
}

impl ErrorArgs<'_> {
    fn config(&self, cli: &Cli, exec: Execution) -> ErrorConfig {
        ErrorConfig {
            replicates: self.replicates,
            epsilon0: self.epsilon0,
            normalization: self.normalization,
            base_seed: cli.seed,
            centering: centering_options(self.centering),
            execution: exec,
        }
    }

    fn record(&self, cfg: &mut Config) {
        let names: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        cfg.set("methods", names.join(" "));
        cfg.set("n_grid", self.n_grid);
        cfg.set("replicates", self.replicates);
        cfg.set("epsilon0", num(self.epsilon0));
        cfg.set("normalization", self.normalization);
        centering_config(cfg, self.centering);
    }
}

fn error_sweep(cli: &Cli, exec: Execution, input: &InputArgs, e: &ErrorArgs) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    e.record(&mut cfg);
    let boot = Bootstrap::new(&p.q, e.config(cli, exec))?;
    let mut r = Report::new("error", &cfg, &p.digest);
    r.meta("tau_unif_full", num(boot.tau_unif_full()?));
    r.row([
        "method",
        "n",
        "mean_d",
        "std_d",
        "tau",
        "tau_sq_se",
        "kappa_hat",
        "kappa_theory",
        "sigma_hat",
    ]);
    for &m in &e.methods {
        for rep in boot.sweep(m, &e.n_grid.0)? {
            r.row(error_row(&rep));
        }
    }
    Ok(r)
}

fn error_row(rep: &ErrorReport) -> Vec<String> {
    vec![
        rep.method.name().to_string(),
        rep.n.to_string(),
        num(rep.mean_d),
        num(rep.std_d),
        num(rep.tau),
        num(rep.tau_sq_se),
        opt(rep.kappa_hat),
        opt(rep.kappa_theory),
        opt(rep.sigma_hat),
    ]
}

fn min_n(cli: &Cli, exec: Execution, input: &InputArgs, e: &ErrorArgs, m: usize) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    e.record(&mut cfg);
    cfg.set("m", m);
    let boot = Bootstrap::new(&p.q, e.config(cli, exec))?;
    let mut r = Report::new("min-n", &cfg, &p.digest);
    r.row(["method", "m", "kappa_hat", "reached", "n", "mean_d", "std_d", "tau", "sigma_hat"]);
    for &method in &e.methods {
        match boot.find_min_n(method, m, &e.n_grid.0)? {
            MinN::Reached(rep) => r.row([
                method.name().to_string(),
                m.to_string(),
                opt(rep.kappa_hat),
                "true".into(),
                rep.n.to_string(),
                num(rep.mean_d),
                num(rep.std_d),
                num(rep.tau),
                opt(rep.sigma_hat),
            ]),
            MinN::NotReached { kappa_hat, .. } => r.row([
                method.name().to_string(),
                m.to_string(),
                num(kappa_hat),
                "false".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]),
        }
    }
    Ok(r)
}

fn align(cli: &Cli, exec: Execution) -> Result<Report, Failure> {
    let Command::Align {
        trials,
        input,
        format,
        clip_pct,
        method,
        n,
        replicates,
        centering,
    } = &cli.command
    else {
        unreachable!()
    };
    let mut cfg = Config::default();
    cfg.set("seed", cli.seed);
    let (reference, embeddings, digest) = match (trials, input) {
        (Some(path), _) => {
            cfg.set("source", "trials");
            let (mut all, digest) = read_trials(path)?;
            if all.is_empty() {
                return Err(Failure::Data("trial file has no rows".into()));
            }
            let reference = all[0].clone();
            if all.len() == 1 {
                all.push(reference.clone());
            }
            (reference, all, digest)
        }
        (None, Some(path)) => {
            let args = InputArgs {
                input: path.clone(),
                format: *format,
                clip_pct: *clip_pct,
                threshold: None,
                centered: false,
            };
            input_config(&mut cfg, cli, &args);
            cfg.set("source", "pca").set("method", method).set("n", n).set("replicates", replicates);
            centering_config(&mut cfg, centering);
            let p = prepare(&args)?;
            let pl = plan(*method, &p.q)?;
            let table = AliasTable::new(&pl);
            let opts = centering_options(centering);
            let reference = pca_embed(p.q.values(), p.q.model_ids(), "full")?;
            let built = exec
                .map_range(*replicates as usize, |t| -> modelmap::Result<_> {
                    let mut rng = replicate_rng(cli.seed, t as u64);
                    let d = draw_with(&pl, &table, *n, &mut rng, cli.seed)?;
                    let wc = weighted_center_q(&p.q, &d, opts)?;
                    pca_embed(feature_matrix(&wc).view(), p.q.model_ids(), &format!("r{t}"))
                })
                .into_iter()
                .collect::<modelmap::Result<Vec<_>>>()?;
            (reference, built, p.digest)
        }
        (None, None) => return Err(Failure::Usage("align needs --trials or --input".into())),
    };
    let aligned = align_trials(&reference, &embeddings, exec)?;
    let ellipses = centrography(&aligned)?;
    let mut r = Report::new("align", &cfg, &digest);
    r.meta("trials", aligned.len());
    r.row(["model_id", "mean_x", "mean_y", "cov_xx", "cov_xy", "cov_yy", "width", "height", "angle"]);
    for e in ellipses {
        r.row([
            e.model_id.clone(),
            num(e.mean[0]),
            num(e.mean[1]),
            num(e.cov[0][0]),
            num(e.cov[0][1]),
            num(e.cov[1][1]),
            num(e.width),
            num(e.height),
            num(e.angle),
        ]);
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn add_models_cmd(
    cli: &Cli,
    exec: Execution,
    input: &InputArgs,
    new: &std::path::Path,
    method: Method,
    n: usize,
    emit_distances: bool,
    centering: &CenteringArgs,
) -> Result<Report, Failure> {
    let p = prepare(input)?;
    let existing = p
        .clipped
        .as_ref()
        .ok_or_else(|| Failure::Usage("add-models needs raw log-likelihoods, not --centered input".into()))?;
    let (new_ids, new_texts, new_values) = read_raw(new, input.format)?;
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    cfg.set("method", method).set("n", n);
    centering_config(&mut cfg, centering);
    let d = draw(&plan(method, &p.q)?, n, cli.seed)?;
    let sub = existing.select_texts(&d.unique_indices)?;
    let columns = sub
        .text_ids()
        .iter()
        .map(|id| {
            new_texts
                .iter()
                .position(|t| t == id)
                .ok_or_else(|| Failure::Data(format!("new models lack sampled text {id:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = ModelRows {
        model_ids: new_ids.clone(),
        text_ids: sub.text_ids().to_vec(),
        values: new_values.select(ndarray::Axis(1), &columns),
    };
    let threshold = p.threshold.unwrap_or(f64::MIN);
    let wc = add_models(&sub, &rows, threshold, &d, centering_options(centering))?;
    let mut r = Report::new("add-models", &cfg, &p.digest);
    r.meta("new_models_digest", digest_matrix(new_values.view(), &new_ids, &new_texts));
    r.meta("clip_threshold", opt(p.threshold));
    r.meta("new_models", new_ids.len());
    if emit_distances {
        let g = weighted_distance_with(&wc, exec);
        labelled(&mut r, "model_id", &wc.model_ids, &wc.model_ids, g.values.view());
    } else {
        let weights: Vec<String> = wc.weights.iter().map(|w| num(*w)).collect();
        r.meta("weights", weights.join(" "));
        labelled(&mut r, "model_id", &wc.model_ids, &wc.text_ids, wc.values.view());
    }
    Ok(r)
}

fn predict(cli: &Cli, exec: Execution) -> Result<Report, Failure> {
    let Command::Predict {
        input,
        scores,
        task,
        target,
        method,
        n,
        seeds,
        outer_folds,
        inner_folds,
        centering,
    } = &cli.command
    else {
        unreachable!()
    };
    let p = prepare(input)?;
    let (table, scores_digest) = read_scores(scores)?;
    let table = table.aligned_to(p.q.model_ids())?;
    let tasks = if task.is_empty() { table.task_names.clone() } else { task.clone() };
    let mut cfg = Config::default();
    input_config(&mut cfg, cli, input);
    cfg.set("target", target)
        .set("method", method)
        .set("n", n)
        .set("seeds", seeds)
        .set("outer_folds", outer_folds)
        .set("inner_folds", inner_folds)
        .set("tasks", tasks.join(" "));
    centering_config(&mut cfg, centering);
    let d = draw(&plan(*method, &p.q)?, *n, cli.seed)?;
    let wc = weighted_center_q(&p.q, &d, centering_options(centering))?;
    let x = feature_matrix(&wc);
    let preset = match target {
        Target::Benchmark => CvConfig::benchmark(),
        Target::LogLikelihood => CvConfig::log_likelihood(),
    };
    let cv = CvConfig {
        outer_folds: *outer_folds,
        inner_folds: *inner_folds,
        seeds: (0..*seeds).map(|s| cli.seed.wrapping_add(s)).collect(),
        execution: exec,
        ..preset
    };
    let mut r = Report::new("predict", &cfg, &p.digest);
    r.meta("scores_digest", scores_digest);
    r.meta("unique_texts", d.unique_count());
    let mut header = vec!["task".to_string(), "method".into(), "n".into(), "d".into(), "r_mean".into(), "r_std".into()];
    header.extend(cv.seeds.iter().map(|s| format!("r_seed{s}")));
    r.row(header);
    for t in &tasks {
        let res = nested_cv_predict(x.view(), &table, t, &cv)?;
        let mut row = vec![
            t.clone(),
            method.name().to_string(),
            n.to_string(),
            d.unique_count().to_string(),
            num(res.r_mean),
            num(res.r_std),
        ];
        row.extend(res.r_per_seed.iter().map(|v| num(*v)));
        r.row(row);
    }
    Ok(r)
}

fn verify(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = Config::default();
    cfg.set("seed", cli.seed);
    let checks = modelmap::verify::run_all(cli.seed);
    let mut r = Report::new("verify", &cfg, "");
    r.row(["check", "status", "detail"]);
    for c in &checks {
        r.row([c.name, if c.passed { "PASS" } else { "FAIL" }, &c.detail.replace(',', ";")]);
    }
    r.emit(cli.output.as_deref())?;
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
