use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::info;
use sha2::{Digest, Sha256};
use steingraph::checkpoint::Checkpoint;
use steingraph::config::{derive_seed, DatasetKind, RunConfig};
use steingraph::data::{
    erdos_renyi_baseline, extract_ego_small, gen_community_small, ingest_edge_list, load_graphs,
    save_graphs, split, synthetic_citation, Dataset,
};
use steingraph::gnn::{CriticNet, EnergyNet};
use steingraph::metrics::{evaluate, Report};
use steingraph::sampling::generate;
use steingraph::stein::{LogRecord, Point, TrainState, Trainer};
use steingraph::{Error, GraphSample};

use crate::{BaselineArgs, EvalArgs, GenDataArgs, SampleArgs, TrainArgs};

pub const PROVENANCE_FORMAT_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(usage),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::Io {
        path: dir.to_path_buf(),
        source: e,
    }))
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(d) = a.dataset {
        cfg.dataset = d.into();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(c) = a.count {
        cfg.graph_count = Some(c);
    }
    if let Some(f) = a.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(p) = a.edge_list {
        cfg.edge_list = Some(p);
    }
    cfg.validate().map_err(usage)?;

    let dataset = match cfg.dataset {
        DatasetKind::CommunitySmall => {
            gen_community_small(&cfg.community(), derive_seed(cfg.seed, "community"))?
        }
        DatasetKind::EgoSmall => {
            let full = match &cfg.edge_list {
                Some(p) => ingest_edge_list(p)?,
                None => synthetic_citation(&cfg.citation(), derive_seed(cfg.seed, "citation"))?,
            };
            info!(
                "source graph: {} nodes, {} edges",
                full.node_count(),
                full.edge_count()
            );
            extract_ego_small(&full, &cfg.ego(), derive_seed(cfg.seed, "ego"))?
        }
    };
    let (train, test) = split(&dataset, cfg.train_fraction, derive_seed(cfg.seed, "split"))?;
    create_dir(&a.out)?;
    let train_path = a.out.join("train.json");
    let test_path = a.out.join("test.json");
    save_graphs(&train, &train_path)?;
    save_graphs(&test, &test_path)?;
    let provenance = serde_json::json!({
        "format_version": PROVENANCE_FORMAT_VERSION,
        "command": "gen-data",
        "dataset": cfg.dataset.name(),
        "seed": cfg.seed,
        "config": cfg,
        "graphs": dataset.len(),
        "train": { "graphs": train.len(), "sha256": sha256_file(&train_path)? },
        "test": { "graphs": test.len(), "sha256": sha256_file(&test_path)? },
        "metadata": dataset.metadata,
    });
    let path = a.out.join("provenance.json");
    let text = serde_json::to_string_pretty(&provenance).map_err(Error::from)? + "\n";
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    info!(
        "{}: {} train and {} test graphs in {}",
        cfg.dataset.name(),
        train.len(),
        test.len(),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (mut cfg, resumed) = match &a.resume {
        Some(path) => {
            if a.config.is_some() || a.seed.is_some() {
                return Err(usage("--resume takes its config and seed from the checkpoint"));
            }
            let ck = Checkpoint::load(path)?;
            (ck.config.clone(), Some(ck))
        }
        None => (load_config(a.config.as_deref())?, None),
    };
    if let Some(d) = a.data {
        cfg.train_data = Some(d);
    }
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(k) = a.checkpoint_every {
        cfg.checkpoint_every = k;
    }
    cfg.validate().map_err(usage)?;
    if cfg.checkpoint_every == 0 {
        return Err(usage("checkpoint_every must be at least 1"));
    }
    let data_path = cfg
        .train_data
        .clone()
        .ok_or_else(|| usage("no training data: pass --data or set train_data"))?;

    let train_set = load_graphs(&data_path)?;
    if train_set.is_empty() {
        return Err(usage(format!("{} holds no graphs", data_path.display())));
    }
    let sizes = train_set.sizes();
    let points: Vec<Point> = train_set.graphs.iter().map(Point::from).collect();
    let model = cfg.model();
    let ladder = cfg.ladder()?;
    let energy = EnergyNet::new(&model)?;
    let critic = CriticNet::new(&model, ladder.len())?;
    let train_cfg = cfg.train();

    create_dir(&a.out)?;
    let log_path = a.out.join("log.jsonl");
    let mut state = match &resumed {
        Some(ck) => {
            if ck.meta.train_sizes != sizes {
                return Err(usage("training data differs from the checkpoint's"));
            }
            truncate_log(&log_path, ck.meta.iteration)?;
            ck.to_state()?
        }
        None => {
            File::create(&log_path).map_err(|e| io_error(&log_path, e))?;
            TrainState::new(
                energy.init_params(derive_seed(cfg.seed, "theta")),
                critic.init_params(derive_seed(cfg.seed, "psi")),
                &train_cfg,
            )
        }
    };
    let mut log = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| io_error(&log_path, e))?;
    let save = |state: &TrainState, name: &str| -> Result<()> {
        Checkpoint::from_state(&cfg, state, sizes.clone()).save(&a.out.join(name))?;
        Ok(())
    };
    if resumed.is_none() {
        save(&state, "latest.ckpt")?;
    }

    let trainer = Trainer {
        energy: &energy,
        critic: &critic,
        data: &points,
        ladder: &ladder,
        config: &train_cfg,
    };
    info!(
        "training {} parameters on {} graphs from iteration {}",
        state.theta.numel(),
        points.len(),
        state.iteration
    );
    let mut done = 0u64;
    while state.iteration < train_cfg.iterations && a.stop_after != Some(done) {
        let record = trainer.iterate(&mut state)?;
        write_record(&mut log, &log_path, &record)?;
        done += 1;
        if record.iteration % 10 == 0 || record.iteration == train_cfg.iterations {
            info!(
                "iteration {}: discrepancy {:?}",
                record.iteration,
                record.discrepancy
            );
        }
        if state.iteration % cfg.checkpoint_every == 0 {
            save(&state, "latest.ckpt")?;
        }
    }
    save(&state, "latest.ckpt")?;
    if state.iteration >= train_cfg.iterations {
        save(&state, "final.ckpt")?;
        info!("wrote {}", a.out.join("final.ckpt").display());
    } else {
        info!("stopped at iteration {}", state.iteration);
    }
    Ok(())
}

fn write_record(log: &mut File, path: &Path, record: &LogRecord) -> Result<()> {
    let line = serde_json::to_string(record).map_err(Error::from)?;
    writeln!(log, "{line}").map_err(|e| io_error(path, e))?;
    log.flush().map_err(|e| io_error(path, e))
}

/// Drops log records past `iteration`, the ones a resumed run will redo.
fn truncate_log(path: &Path, iteration: u64) -> Result<()> {
    let mut kept = String::new();
    if path.exists() {
        let f = File::open(path).map_err(|e| io_error(path, e))?;
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| io_error(path, e))?;
            let record: LogRecord = serde_json::from_str(&line).map_err(Error::from)?;
            if record.iteration <= iteration {
                kept.push_str(&line);
                kept.push('\n');
            }
        }
    }
    fs::write(path, kept).map_err(|e| io_error(path, e))
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let mut langevin = ck.config.langevin();
    if let Some(s) = a.langevin_steps {
        langevin.steps = s;
    }
    langevin.validate().map_err(usage)?;
    let seed = a.seed.unwrap_or_else(|| derive_seed(ck.config.seed, "sample"));
    let energy = EnergyNet::new(&ck.config.model())?;
    let generated = generate(
        &energy,
        &ck.theta(),
        &ck.meta.train_sizes,
        a.count,
        &langevin,
        seed,
    )?;
    let dataset = Dataset::new(ck.config.dataset.name(), generated.graphs)
        .with_meta("generator", "langevin")
        .with_meta("seed", seed)
        .with_meta("checkpoint_iteration", ck.meta.iteration)
        .with_meta("langevin", serde_json::to_value(&langevin).map_err(Error::from)?)
        .with_meta("chain_seeds", generated.seeds);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_graphs(&dataset, &a.out)?;
    if let Some(dir) = &a.dot {
        create_dir(dir)?;
        for (k, g) in dataset.graphs.iter().enumerate() {
            let path = dir.join(format!("sample_{k:04}.dot"));
            fs::write(&path, to_dot(g, k)).map_err(|e| io_error(&path, e))?;
        }
    }
    info!("wrote {} graphs to {}", dataset.len(), a.out.display());
    Ok(())
}

fn to_dot(g: &GraphSample, k: usize) -> String {
    let mut s = format!("graph sample_{k} {{\n");
    for v in 0..g.node_count() {
        writeln!(s, "  {v};").expect("string write");
    }
    for (u, v) in g.edges() {
        writeln!(s, "  {u} -- {v};").expect("string write");
    }
    s.push_str("}\n");
    s
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if a.unbiased {
        cfg.unbiased_mmd = true;
    }
    let samples = load_graphs(&a.samples)?;
    let test = load_graphs(&a.test)?;
    let model = a.model.unwrap_or_else(|| {
        samples
            .metadata
            .get("generator")
            .and_then(|v| v.as_str())
            .unwrap_or("samples")
            .to_string()
    });
    let eval_cfg = cfg.eval();
    let scores = evaluate(&samples.graphs, &test.graphs, &eval_cfg)?;
    let report = Report::new(&model, &test.name, scores, &eval_cfg, a.seed);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    report.save(&a.out)?;
    println!("model | deg | clus | orbit | avg");
    println!("{}", report.table_row());
    Ok(())
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let train = load_graphs(&a.train)?;
    let er = erdos_renyi_baseline(&train, a.count, a.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_graphs(&er, &a.out)?;
    info!("wrote {} graphs to {}", er.len(), a.out.display());
    Ok(())
}

