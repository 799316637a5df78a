use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use smoothcert::data::BlobConfig;
use smoothcert::distill::{accuracy, distill};
use smoothcert::eval::{
    attack_dataset, accuracy_curve, membership_inference_asr, noise_grid_search, radius_grid, robust_score,
    AccuracyCurve, GridSearchConfig, PgdConfig, SmoothedConfidence, SoftmaxConfidence,
};
use smoothcert::netcore::{train, Checkpoint, Targets};
use smoothcert::radius::certified_radii;
use smoothcert::rng::{seeded, substream};
use smoothcert::smoothing::{certify_batch, noise_train, purify};
use smoothcert::{
    Activation, BlackBoxHandle, Dataset, Decision, DenseNetwork, LossKind, NoiseFamily, NoiseSpec, Norm,
    OptimizerKind, QueryMode, RadiusSolverConfig, SmoothingConfig, TrainConfig,
};

use crate::args::*;
use crate::artifact::{write_atomic, RunHeader};
use crate::CliError;

const CERTIFY_COLUMNS: &str = "input_id,decision,pA_lower,pB_upper,R_l1,R_l2,R_linf,abstained";

pub(crate) fn dispatch(cli: Cli, header: RunHeader) -> Result<String, CliError> {
    let ctx = Context { seed: cli.seed, workers: cli.workers, header };
    if ctx.workers == 0 {
        return Err(CliError::usage("invalid-parameter", "workers must be positive"));
    }
    match cli.command {
        Command::GenData(a) => gen_data(&ctx, a),
        Command::TrainTarget(a) => train_target(&ctx, a),
        Command::Distill(a) => distill_cmd(&ctx, a),
        Command::Certify(a) => certify_cmd(&ctx, a),
        Command::Radius(a) => radius_cmd(&ctx, a),
        Command::NoiseSearch(a) => noise_search(&ctx, a),
        Command::Purify(a) => purify_cmd(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Mia(a) => mia(&ctx, a),
        Command::Attack(a) => attack(&ctx, a),
        Command::Replay(a) => replay(a),
    }
}

struct Context {
    seed: u64,
    workers: usize,
    header: RunHeader,
}

impl Context {
    /// Writes the header followed by `body`.
    fn emit(&self, path: &Path, body: &str) -> Result<(), CliError> {
        let mut text = self.header.render();
        text.push_str(body);
        write_atomic(path, &text).map_err(|e| CliError::runtime("io", format!("{}: {e}", path.display())))
    }
}

fn invalid(name: &str, message: impl std::fmt::Display) -> CliError {
    CliError::usage("invalid-parameter", format!("{name}: {message}"))
}

/// Configuration errors caught before any work starts count as usage errors.
fn precheck(r: smoothcert::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::usage(e.kind(), e.to_string()))
}

fn parse_list<T: std::str::FromStr>(name: &str, s: &str) -> Result<Vec<T>, CliError> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| invalid(name, format!("cannot parse `{t}`"))))
        .collect()
}

fn parse_norms(s: &str) -> Result<Vec<Norm>, CliError> {
    let norms = s
        .split(',')
        .map(|t| Norm::parse(t.trim()).ok_or_else(|| invalid("norms", format!("unknown norm `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if norms.is_empty() {
        return Err(invalid("norms", "at least one norm is required"));
    }
    Ok(norms)
}

fn parse_named<T>(name: &str, s: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T, CliError> {
    parse(s).ok_or_else(|| invalid(name, format!("unknown value `{s}`")))
}

fn noise_spec(a: &NoiseArgs, dim: usize) -> Result<NoiseSpec, CliError> {
    let family = parse_named("family", &a.family, NoiseFamily::parse)?;
    NoiseSpec::from_parts(family, a.beta, a.sigma, dim).map_err(|e| CliError::usage(e.kind(), e.to_string()))
}

fn solver_config(a: &SolverArgs, seed: u64) -> RadiusSolverConfig {
    RadiusSolverConfig {
        mc_n: a.mc_n,
        k_threshold: a.k_threshold,
        bisect_iters: a.bisect_iters,
        pso_particles: a.particles,
        pso_iters: a.pso_iters,
        seed,
        ..Default::default()
    }
}

fn smoothing_config(
    spec: NoiseSpec,
    s: &SmoothArgs,
    solver: RadiusSolverConfig,
    workers: usize,
) -> Result<SmoothingConfig, CliError> {
    let cfg = SmoothingConfig {
        spec,
        n0: s.n0,
        n: s.n,
        alpha: s.alpha,
        zeta: s.zeta,
        iota: s.iota,
        norms: parse_norms(&s.norms)?,
        solver,
        two_round: s.two_round,
        workers,
    };
    precheck(cfg.validate())?;
    Ok(cfg)
}

fn train_config(a: &TrainArgs, loss: LossKind, seed: u64) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        optimizer: parse_named("optimizer", &a.optimizer, OptimizerKind::parse)?,
        seed,
        loss,
    };
    precheck(cfg.validate())?;
    Ok(cfg)
}

fn architecture(input: usize, hidden: &str, classes: usize) -> Result<Vec<usize>, CliError> {
    let mut arch = vec![input];
    arch.extend(parse_list::<usize>("hidden", hidden)?);
    arch.push(classes);
    if arch.contains(&0) {
        return Err(invalid("hidden", "layer sizes must be positive"));
    }
    Ok(arch)
}

fn load_data(a: &DataArgs) -> Result<Dataset, CliError> {
    let data = match a.format.as_str() {
        "csv" => Dataset::load_csv(&a.data, a.classes),
        "idx" => Dataset::load_idx(&a.data, a.idx_labels.as_deref(), a.classes),
        other => return Err(invalid("format", format!("unknown format `{other}`"))),
    };
    data.map_err(|e| with_path(e, &a.data))
}

fn load_csv(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load_csv(path, None).map_err(|e| with_path(e, path))
}

fn load_model(path: &Path) -> Result<DenseNetwork, CliError> {
    Ok(Checkpoint::load(path).map_err(|e| with_path(e, path))?.network)
}

fn with_path(e: smoothcert::Error, path: &Path) -> CliError {
    CliError::runtime(e.kind(), format!("{}: {e}", path.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn gen_data(ctx: &Context, a: GenDataArgs) -> Result<String, CliError> {
    let cfg = BlobConfig {
        classes: a.classes,
        dim: a.dim,
        per_class: a.per_class,
        separation: a.separation,
        spread: a.spread,
        shift: a.shift,
    };
    let data = cfg.generate(&mut seeded(ctx.seed)).map_err(|e| CliError::usage(e.kind(), e.to_string()))?;
    let mut body = Vec::new();
    data.write_csv(&mut body)?;
    ctx.emit(&a.out, &String::from_utf8_lossy(&body))?;
    Ok(format!("gen-data: {} rows, dim {}, {} classes -> {}", data.len(), data.dim(), a.classes, a.out.display()))
}

fn train_target(ctx: &Context, a: TrainTargetArgs) -> Result<String, CliError> {
    let activation = parse_named("activation", &a.train.activation, Activation::parse)?;
    let loss = parse_named("loss", &a.loss, LossKind::parse)?;
    let mut rng = seeded(ctx.seed);
    let init_seed: u64 = rng.random();
    let cfg = train_config(&a.train, loss, rng.random())?;
    let noise = match a.noise.as_str() {
        "none" => None,
        name => Some(parse_named("noise", name, NoiseFamily::parse)?),
    };

    let data = load_data(&a.data)?;
    let labels = data.require_labels()?;
    let classes = a.data.classes.unwrap_or_else(|| data.num_classes()).max(2);
    let arch = architecture(data.dim(), &a.train.hidden, classes)?;
    let net = DenseNetwork::new(&arch, activation, init_seed)?;
    let trained = match noise {
        None => train(&net, &data.features, Targets::Labels(labels), &cfg)?.0,
        Some(family) => {
            let spec = NoiseSpec::from_parts(family, a.beta, a.sigma, data.dim())?;
            noise_train(&net, &data.features, labels, &spec, &cfg)?
        }
    };
    let acc = accuracy(&trained, &data)?;
    ctx.emit(&a.out, &Checkpoint::new(trained, loss).to_text())?;
    Ok(format!("train-target: layers {arch:?}, training accuracy {acc:.4} -> {}", a.out.display()))
}

fn distill_cmd(ctx: &Context, a: DistillArgs) -> Result<String, CliError> {
    let activation = parse_named("activation", &a.train.activation, Activation::parse)?;
    let mode = parse_named("mode", &a.mode, QueryMode::parse)?;
    let mut rng = seeded(ctx.seed);
    let cfg = train_config(&a.train, LossKind::L1Logit, rng.random())?;

    let teacher = load_model(&a.teacher)?;
    let arch = architecture(teacher.input_dim(), &a.train.hidden, teacher.num_classes())?;
    let transfer = load_data(&a.data)?;
    let eval = a.eval.as_deref().map(load_csv).transpose()?;
    let mut handle = BlackBoxHandle::new(teacher, a.budget, mode);
    let (student, report) =
        distill(&mut handle, &transfer.features, &arch, activation, a.budget, &cfg, eval.as_ref(), &mut rng)?;

    let mut history = String::from("epoch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        let _ = writeln!(history, "{},{l}", i + 1);
    }
    ctx.emit(&a.out, &Checkpoint::new(student, LossKind::L1Logit).to_text())?;
    ctx.emit(&a.report, &report.to_text())?;
    ctx.emit(&a.loss_history, &history)?;
    Ok(format!(
        "distill: agreement {:.4}, {} queries{} -> {}",
        report.agreement,
        report.queries_spent,
        if report.truncated { " (budget ran out)" } else { "" },
        a.out.display()
    ))
}

fn certify_cmd(ctx: &Context, a: CertifyArgs) -> Result<String, CliError> {
    let model = load_model(&a.model)?;
    let spec = noise_spec(&a.noise, model.input_dim())?;
    let cfg = smoothing_config(spec, &a.smooth, solver_config(&a.solver, ctx.seed), ctx.workers)?;
    let data = load_data(&a.data)?;
    let outcomes = certify_batch(&model, &data.features, &cfg, &mut seeded(ctx.seed))?;

    let mut body = format!("{CERTIFY_COLUMNS}\n");
    let mut certified = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let radius = |n: Norm| match (cfg.norms.contains(&n), o.decision) {
            (false, _) => String::new(),
            (true, Decision::Abstain) => "0".to_string(),
            (true, _) => fmt_opt(o.radius(n)),
        };
        let decision = o.decision.class().map_or_else(|| "abstain".to_string(), |c| c.to_string());
        certified += usize::from(!o.decision.is_abstain());
        let _ = writeln!(
            body,
            "{i},{decision},{},{},{},{},{},{}",
            o.pa_lower,
            o.pb_upper,
            radius(Norm::L1),
            radius(Norm::L2),
            radius(Norm::Linf),
            o.decision.is_abstain()
        );
        for (norm, note) in &o.radius_notes {
            eprintln!("warning: input {i} norm {}: {note}", norm.name());
        }
    }
    ctx.emit(&a.out, &body)?;
    Ok(format!(
        "certify: {} inputs, {certified} certified, {} abstained -> {}",
        outcomes.len(),
        outcomes.len() - certified,
        a.out.display()
    ))
}

fn radius_cmd(ctx: &Context, a: RadiusArgs) -> Result<String, CliError> {
    let norms = parse_norms(&a.norm)?;
    let spec = noise_spec(&a.noise, a.dim)?;
    let cfg = solver_config(&a.solver, ctx.seed);
    precheck(cfg.validate())?;
    let pas: Vec<f64> = match a.curve_stop {
        None => vec![a.pa],
        Some(stop) => {
            if a.curve_step.is_nan() || a.curve_step <= 0.0 || stop < a.pa {
                return Err(invalid("curve", "need a positive step and a stop at or above --pa"));
            }
            let n = ((stop - a.pa) / a.curve_step + 1e-9).floor() as usize;
            (0..=n).map(|i| a.pa + i as f64 * a.curve_step).collect()
        }
    };
    let mut body = String::from("pA,pB,norm,R,lambda,residual_K\n");
    for (i, &pa) in pas.iter().enumerate() {
        let pb = a.pb.unwrap_or(1.0 - pa);
        let results = certified_radii(pa, pb, &spec, &norms, &cfg, &mut substream(ctx.seed, i as u64))?;
        for r in results {
            let _ = writeln!(body, "{pa},{pb},{},{},{},{}", r.norm.name(), r.radius, r.lambda, r.residual_k);
            if !r.converged {
                eprintln!("warning: pA {pa} norm {}: boundary search stopped at |K| = {}", r.norm.name(), r.residual_k.abs());
            }
        }
    }
    ctx.emit(&a.out, &body)?;
    Ok(format!("radius: {} rows -> {}", pas.len() * norms.len(), a.out.display()))
}

fn noise_search(ctx: &Context, a: NoiseSearchArgs) -> Result<String, CliError> {
    let activation = parse_named("activation", &a.train.activation, Activation::parse)?;
    let betas = parse_list::<f64>("betas", &a.betas)?;
    let sigmas = parse_list::<f64>("sigmas", &a.sigmas)?;
    let train_set = load_csv(&a.train_data)?;
    let eval_set = load_csv(&a.eval_data)?;
    let classes = train_set.num_classes().max(eval_set.num_classes()).max(2);
    let arch = architecture(train_set.dim(), &a.train.hidden, classes)?;
    let template = NoiseSpec::gaussian(1.0, train_set.dim())?;
    let cfg = GridSearchConfig {
        betas,
        sigmas,
        arch,
        activation,
        train: train_config(&a.train, LossKind::CrossEntropy, 0)?,
        smoothing: smoothing_config(template, &a.smooth, solver_config(&a.solver, 0), 1)?,
        grid_step: a.grid_step,
        workers: ctx.workers,
    };
    let result = noise_grid_search(&cfg, &train_set, &eval_set, &mut seeded(ctx.seed))?;

    let mut body = String::from("norm,beta,score\n");
    for norm in &cfg.smoothing.norms {
        for (beta, scores) in &result.scores {
            let _ = writeln!(body, "{},{beta},{}", norm.name(), fmt_opt(scores.get(norm).copied().flatten()));
        }
    }
    let mut best = Vec::new();
    for (norm, beta) in &result.best {
        let _ = writeln!(body, "# best norm={} beta={beta}", norm.name());
        best.push(format!("{}={beta}", norm.name()));
    }
    for (beta, sigma, reason) in result.failures() {
        let _ = writeln!(body, "# failed beta={beta} sigma={sigma} reason={}", reason.replace('\n', " "));
    }
    ctx.emit(&a.out, &body)?;
    Ok(format!("noise-search: best shape {} (r_max {}) -> {}", best.join(" "), result.r_max, a.out.display()))
}

fn purify_cmd(ctx: &Context, a: PurifyArgs) -> Result<String, CliError> {
    let model = load_model(&a.model)?;
    let spec = noise_spec(&a.noise, model.input_dim())?;
    let cfg = smoothing_config(spec, &a.smooth, solver_config(&a.solver, ctx.seed), ctx.workers)?;
    let data = load_data(&a.data)?;
    let report = purify(&model, &data.features, &cfg, &mut seeded(ctx.seed))?;
    let mut body = String::from("input_id,passed\n");
    for (i, o) in report.outcomes.iter().enumerate() {
        let _ = writeln!(body, "{i},{}", !o.decision.is_abstain());
    }
    let summary = format!(
        "passed={} rejected={} pass_rate={}",
        report.certified.len(),
        report.abstained.len(),
        report.pass_rate
    );
    let _ = writeln!(body, "# summary {summary}");
    ctx.emit(&a.out, &body)?;
    Ok(format!("purify: {summary} -> {}", a.out.display()))
}

/// One certify output, read back for scoring.
struct CertifiedRun {
    path: PathBuf,
    beta: f64,
    sigma: f64,
    /// Per norm, `(decision, true label, radius)`; only norms that were certified.
    records: BTreeMap<Norm, Vec<(Decision, usize, f64)>>,
}

fn read_certified(path: &Path) -> Result<CertifiedRun, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::runtime("io", format!("{}: {e}", path.display())))?;
    let header = RunHeader::parse(&text);
    let bad = |msg: String| CliError::runtime("parse", format!("{}: {msg}", path.display()));
    if header.get("command") != Some("certify") {
        return Err(bad("not a certify output".into()));
    }
    let field = |k: &str| header.get(k).ok_or_else(|| bad(format!("header lacks `{k}`")));
    let num = |k: &str| -> Result<f64, CliError> { field(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
    let family = NoiseFamily::parse(field("family")?).ok_or_else(|| bad("unknown family".into()))?;
    let beta = match family {
        NoiseFamily::Gaussian => 2.0,
        NoiseFamily::Laplace => 1.0,
        _ => num("beta")?,
    };
    let data = DataArgs {
        data: field("data")?.into(),
        format: field("format")?.to_string(),
        idx_labels: header.get("idx-labels").map(PathBuf::from),
        classes: header.get("classes").map(|c| c.parse()).transpose().map_err(|_| bad("bad `classes`".into()))?,
    };
    let labels = load_data(&data)?.require_labels()?.to_vec();

    let mut rows = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match rows.next() {
        Some((_, l)) if l.trim() == CERTIFY_COLUMNS => {}
        _ => return Err(bad("missing certify column header".into())),
    }
    let mut records: BTreeMap<Norm, Vec<_>> = BTreeMap::new();
    for (line, row) in rows {
        let perr = |m: &str| bad(format!("line {}: {m}", line + 1));
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 8 {
            return Err(perr("expected 8 fields"));
        }
        let id: usize = f[0].parse().map_err(|_| perr("bad input_id"))?;
        let label = *labels.get(id).ok_or_else(|| perr("input_id beyond the dataset"))?;
        let decision = match f[1] {
            "abstain" => Decision::Abstain,
            c => Decision::Class(c.parse().map_err(|_| perr("bad decision"))?),
        };
        for (norm, cell) in Norm::ALL.iter().zip(&f[4..7]) {
            if cell.is_empty() {
                continue;
            }
            let r: f64 = cell.parse().map_err(|_| perr("bad radius"))?;
            records.entry(*norm).or_default().push((decision, label, r));
        }
    }
    Ok(CertifiedRun { path: path.to_path_buf(), beta, sigma: num("sigma")?, records })
}

fn score(ctx: &Context, a: ScoreArgs) -> Result<String, CliError> {
    let curve_norm = parse_norms(&a.norm)?[0];
    let paths: Vec<PathBuf> = a.inputs.split(',').map(|p| PathBuf::from(p.trim())).collect();
    let runs = paths.iter().map(|p| read_certified(p)).collect::<Result<Vec<_>, _>>()?;
    let r_max = match a.r_max {
        Some(r) => r,
        None => {
            let largest = runs
                .iter()
                .flat_map(|r| r.records.values().flatten().map(|(_, _, rad)| *rad))
                .fold(0.0, f64::max);
            largest + a.grid_step
        }
    };
    let grid = radius_grid(r_max, a.grid_step).map_err(|e| CliError::usage(e.kind(), e.to_string()))?;

    let mut curves: BTreeMap<Norm, Vec<(f64, AccuracyCurve)>> = BTreeMap::new();
    for run in &runs {
        for (norm, records) in &run.records {
            curves.entry(*norm).or_default().push((run.beta, accuracy_curve(records, &grid, run.sigma)?));
        }
    }

    let mut curve_body = String::from("sigma,R,acc\n");
    for run in &runs {
        let Some(records) = run.records.get(&curve_norm) else { continue };
        let curve = accuracy_curve(records, &grid, run.sigma)?;
        let _ = writeln!(curve_body, "# input={} beta={} norm={}", run.path.display(), run.beta, curve_norm.name());
        for (r, acc) in curve.points() {
            let _ = writeln!(curve_body, "{},{r},{acc}", run.sigma);
        }
    }

    let mut score_body = String::from("norm,beta,score\n");
    let mut best = Vec::new();
    for (norm, entries) in &curves {
        let mut betas: Vec<f64> = Vec::new();
        for (b, _) in entries {
            if !betas.contains(b) {
                betas.push(*b);
            }
        }
        let mut top: Option<(f64, f64)> = None;
        for beta in betas {
            let group: Vec<AccuracyCurve> =
                entries.iter().filter(|(b, _)| *b == beta).map(|(_, c)| c.clone()).collect();
            let s = robust_score(&group, r_max)?;
            let _ = writeln!(score_body, "{},{beta},{s}", norm.name());
            if top.is_none_or(|(_, t)| s > t) {
                top = Some((beta, s));
            }
        }
        if let Some((beta, _)) = top {
            let _ = writeln!(score_body, "# best norm={} beta={beta}", norm.name());
            best.push(format!("{}={beta}", norm.name()));
        }
    }
    ctx.emit(&a.curves_out, &curve_body)?;
    ctx.emit(&a.scores_out, &score_body)?;
    Ok(format!(
        "score: {} inputs, r_max {r_max}, best shape {} -> {}",
        runs.len(),
        best.join(" "),
        a.scores_out.display()
    ))
}

fn mia(ctx: &Context, a: MiaArgs) -> Result<String, CliError> {
    let target = load_model(&a.target)?;
    let spec = noise_spec(&a.noise, target.input_dim())?;
    let smoothing = smoothing_config(spec, &a.smooth, RadiusSolverConfig::default(), ctx.workers)?;
    let members = load_csv(&a.members)?;
    let nonmembers = load_csv(&a.nonmembers)?;

    // every model sees the same split
    let mut rows = vec![("target", membership_inference_asr(&SoftmaxConfidence(&target), &members, &nonmembers, &mut seeded(ctx.seed))?)];
    if let Some(path) = &a.surrogate {
        let surrogate = load_model(path)?;
        let plain = membership_inference_asr(&SoftmaxConfidence(&surrogate), &members, &nonmembers, &mut seeded(ctx.seed))?;
        let smoothed_scorer = SmoothedConfidence { base: &surrogate, cfg: smoothing };
        let smoothed = membership_inference_asr(&smoothed_scorer, &members, &nonmembers, &mut seeded(ctx.seed))?;
        rows.push(("surrogate", plain));
        rows.push(("smoothed-surrogate", smoothed));
    }
    let mut body = String::from("model,asr,threshold\n");
    let mut summary = Vec::new();
    for (name, r) in &rows {
        let _ = writeln!(body, "{name},{},{}", r.asr, r.threshold);
        summary.push(format!("{name}={:.4}", r.asr));
    }
    ctx.emit(&a.out, &body)?;
    Ok(format!("mia: asr {} -> {}", summary.join(" "), a.out.display()))
}

fn attack(ctx: &Context, a: AttackArgs) -> Result<String, CliError> {
    let cfg = PgdConfig {
        norm: parse_named("norm", &a.norm, Norm::parse)?,
        epsilon: a.epsilon,
        steps: a.steps,
        step_size: a.step_size,
        random_start: a.random_start,
    };
    precheck(cfg.validate())?;
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    let records = attack_dataset(&model, &data, &cfg, &mut seeded(ctx.seed))?;
    let mut body = String::from("id,success,perturbation_norm\n");
    for r in &records {
        let _ = writeln!(body, "{},{},{}", r.id, r.success, r.perturbation_norm);
    }
    let wins = records.iter().filter(|r| r.success).count();
    ctx.emit(&a.out, &body)?;
    Ok(format!("attack: {wins}/{} succeeded -> {}", records.len(), a.out.display()))
}

fn replay(a: ReplayArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&a.artifact)
        .map_err(|e| CliError::runtime("io", format!("{}: {e}", a.artifact.display())))?;
    let args = RunHeader::parse(&text)
        .to_args()
        .ok_or_else(|| CliError::runtime("parse", format!("{}: no run header", a.artifact.display())))?;
    let line = std::iter::once("smoothcert".to_string()).chain(args.iter().map(|s| shell_quote(s))).collect::<Vec<_>>();
    if a.print {
        return Ok(line.join(" "));
    }
    let code = crate::run(std::iter::once("smoothcert".to_string()).chain(args));
    if code != 0 {
        return Err(CliError { kind: "replay".into(), message: format!("replayed run exited with {code}"), usage: false });
    }
    Ok(format!("replay: reran `{}`", line.join(" ")))
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./,=:".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}
