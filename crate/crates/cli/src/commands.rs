use crate::{Cli, Command, GenerateArgs, Model, ResilienceArgs};
use contagion::asymptotics::{
    amplification, asymptotic_fraction, contagion_susceptibility, delta_functions, ode_solution,
    resilience,
};
use contagion::cascade::run_cascade;
use contagion::experiments::{
    run_amplification_sweep, run_convergence_study, run_indegree_impact, run_topology_compare,
    Experiment, ExperimentConfig, Table,
};
use contagion::generators::{ExposureLaw, NetworkSpec, ParetoSpec, Topology};
use contagion::io::{self, CascadeFile, NetworkFile, Provenance};
use contagion::measures::{empirical_measures, LimitModel};
use contagion::percolation::{contagious_skeleton, empirical_condition, largest_scc, skeleton_scc_experiment};
use contagion::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(args) => generate(cli, args),
        Command::Cascade { network } => {
            let result = run_cascade(&io::read_network(network)?);
            emit_json(cli.out.as_deref(), &CascadeFile::from(&result))
        }
        Command::FixedPoint { model, epsilon } => fixed_point(cli, &io::read_model(model)?, *epsilon),
        Command::Resilience(args) => resilience_cmd(cli, args),
        Command::Ode { model, tau_grid } => ode(cli, &io::read_model(model)?, *tau_grid),
        Command::SkeletonScc { network, trials } => skeleton(cli, network.as_deref(), *trials),
        Command::AmplificationSweep => {
            let cfg = load_config(cli, Experiment::AmplificationSweep)?;
            let out = run_amplification_sweep(&cfg)?;
            let extra = json!({ "gamma_star": out.gamma_star, "grid": out.grid });
            write_experiment(cli, &cfg, &out.rows, extra)
        }
        Command::IndegreeImpact => {
            let cfg = load_config(cli, Experiment::IndegreeImpact)?;
            write_experiment(cli, &cfg, &run_indegree_impact(&cfg)?, json!({}))
        }
        Command::TopologyCompare => {
            let cfg = load_config(cli, Experiment::TopologyCompare)?;
            let out = run_topology_compare(&cfg)?;
            let extra = json!({ "gamma_star": out.gamma_star, "grid": out.grid });
            write_experiment(cli, &cfg, &out.rows, extra)
        }
        Command::ConvergenceStudy => {
            let cfg = load_config(cli, Experiment::ConvergenceStudy)?;
            write_experiment(cli, &cfg, &run_convergence_study(&cfg)?, json!({}))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

/// Command defaults, overlaid key by key with the `--config` file, then `--seed`.
fn load_config(cli: &Cli, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut merged = serde_json::to_value(experiment.preset())?;
    if let Some(path) = &cli.config {
        let user: Value = io::read_json(path)?;
        let Value::Object(user) = user else {
            return Err(Error::InvalidParameter("configuration must be a JSON object".into()));
        };
        let base = merged.as_object_mut().expect("configs serialize to objects");
        for (k, v) in user {
            base.insert(k, v);
        }
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(merged)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_csv_with_provenance<T: Table>(
    path: &Path,
    command: &str,
    seed: u64,
    config: Value,
    rows: &[T],
    extra: Value,
) -> Result<()> {
    io::write_table(path, &T::header(), rows)?;
    let mut prov = Provenance::new(command, seed, config, T::COLUMNS);
    if let Value::Object(map) = extra {
        prov.extra = map;
    }
    io::write_json(&io::provenance_path(path), &prov)
}

fn write_experiment<T: Table>(cli: &Cli, cfg: &ExperimentConfig, rows: &[T], extra: Value) -> Result<()> {
    let path = out_dir(cli)?.join(format!("{}.csv", cfg.name));
    write_csv_with_provenance(&path, &cfg.name, cfg.seed, serde_json::to_value(cfg)?, rows, extra)
}

fn parse_classes(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    text.split(',')
        .map(|c| {
            let parts: Vec<&str> = c.trim().split(':').collect();
            let bad = || Error::InvalidParameter(format!("class `{c}` is not of the form j:k:mass"));
            match parts.as_slice() {
                [j, k, m] => Ok((
                    j.parse().map_err(|_| bad())?,
                    k.parse().map_err(|_| bad())?,
                    m.parse().map_err(|_| bad())?,
                )),
                _ => Err(bad()),
            }
        })
        .collect()
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let topology = match args.model {
        Model::Blanchard => Topology::Blanchard {
            gamma_plus: args.gamma_plus,
            gamma_minus: args.alpha.map_or(args.gamma_minus, |a| args.gamma_plus / a),
        },
        Model::Er => Topology::ErdosRenyi {
            mean_degree: args.mean_degree,
        },
        Model::Classes => Topology::Classes {
            classes: parse_classes(&args.classes)?,
        },
    };
    let exposure = if args.exposure_tail > 0.0 {
        ExposureLaw::Pareto(ParetoSpec::continuous(args.exposure_tail, 1.0))
    } else {
        ExposureLaw::Equal { weight: 1.0 }
    };
    let spec = NetworkSpec {
        n: args.n,
        topology,
        exposure,
        gamma_min: args.gamma_min,
        recovery: args.recovery,
        collapse_parallel: !args.keep_parallel,
    };
    let seed = cli.seed.unwrap_or(0);
    let net = spec.generate(seed)?;
    if let Some(dir) = &args.csv_dir {
        fs::create_dir_all(dir)?;
        io::write_network_csv(dir, &net)?;
    }
    #[derive(Serialize)]
    struct WithProvenance {
        #[serde(flatten)]
        network: NetworkFile,
        provenance: Provenance,
    }
    let file = WithProvenance {
        network: NetworkFile::from(&net),
        provenance: Provenance::new("generate", seed, serde_json::to_value(&spec)?, &[]),
    };
    emit_json(cli.out.as_deref(), &file)
}

fn fixed_point(cli: &Cli, model: &LimitModel, epsilon: f64) -> Result<()> {
    let fp = asymptotic_fraction(model)?;
    let ratio = match amplification(model, epsilon) {
        Ok(a) => Some(a.ratio),
        Err(Error::Supercritical(_)) => None,
        Err(e) => return Err(e),
    };
    let body = json!({
        "pi_star": fp.fixed_point.pi_star,
        "stable": fp.fixed_point.stable,
        "near_critical": fp.fixed_point.near_critical,
        "regime": fp.regime.as_str(),
        "fraction": fp.fraction,
        "resilience": resilience(model),
        "amplification_ratio": ratio,
    });
    emit_json(cli.out.as_deref(), &body)
}

fn resilience_cmd(cli: &Cli, args: &ResilienceArgs) -> Result<()> {
    let model = match (&args.model, &args.network) {
        (Some(path), _) => io::read_model(path)?,
        (None, Some(path)) => {
            let cfg = load_config(cli, Experiment::AmplificationSweep)?;
            empirical_measures(&io::read_network(path)?, cfg.perm_budget, cfg.seed)?.to_model()?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let body = json!({
        "resilience": resilience(&model),
        "condition_value": contagion_susceptibility(&model),
        "lambda": model.lambda(),
    });
    emit_json(cli.out.as_deref(), &body)
}

fn ode(cli: &Cli, model: &LimitModel, points: usize) -> Result<()> {
    if points == 0 {
        return Err(Error::InvalidParameter("tau grid needs at least one point".into()));
    }
    let lam = model.lambda();
    let counters: Vec<(usize, usize, usize, usize)> = model
        .p_entries()
        .filter(|&(_, _, theta, _)| theta >= 1)
        .flat_map(|(j, k, theta, _)| (0..theta).map(move |l| (j, k, theta, l)))
        .collect();
    let deltas: Vec<(usize, usize, usize)> = model.p_entries().map(|(j, k, t, _)| (j, k, t)).collect();
    let mut header = vec!["tau".to_owned()];
    header.extend(counters.iter().map(|(j, k, t, l)| format!("s_{j}_{k}_{t}_{l}")));
    header.extend(deltas.iter().map(|(j, k, t)| format!("delta_{j}_{k}_{t}")));
    header.extend(["delta_minus".to_owned(), "delta_total".to_owned()]);
    let rows = (0..points)
        .map(|i| {
            let tau = lam * i as f64 / points as f64;
            let mut row = vec![tau];
            for &(j, k, t, l) in &counters {
                row.push(ode_solution(model, j, k, t, l, tau)?);
            }
            let d = delta_functions(model, tau)?;
            row.extend(d.per_class.iter().map(|e| e.3));
            row.extend([d.minus, d.total]);
            Ok(row)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    match &cli.out {
        Some(path) => {
            io::write_table(path, &header, &rows)?;
            let units: Vec<(&str, &str)> = header
                .iter()
                .map(|&h| (h, if h == "tau" { "steps / n" } else { "nodes / n" }))
                .collect();
            let config = json!({ "model": io::ModelFile::from(model), "tau_grid": points });
            io::write_json(
                &io::provenance_path(path),
                &Provenance::new("ode", cli.seed.unwrap_or(0), config, &units),
            )
        }
        None => io::write_table_to(std::io::stdout().lock(), &header, &rows),
    }
}

#[derive(Serialize)]
struct SkeletonRow {
    trial: usize,
    fraction: f64,
    condition: f64,
    rewired_fraction: f64,
}

impl Table for SkeletonRow {
    const COLUMNS: &'static [(&'static str, &'static str)] = &[
        ("trial", "index"),
        ("fraction", "nodes / n"),
        ("condition", "dimensionless"),
        ("rewired_fraction", "nodes / n"),
    ];
}

fn skeleton(cli: &Cli, network: Option<&Path>, trials: Option<usize>) -> Result<()> {
    if let Some(path) = network {
        let net = io::read_network(path)?;
        let sk = contagious_skeleton(&net);
        let scc = largest_scc(&sk);
        let body = json!({
            "scc_size": scc.nodes.len(),
            "fraction": scc.fraction,
            "condition_value": empirical_condition(&net, &sk),
        });
        return emit_json(cli.out.as_deref(), &body);
    }
    let mut cfg = load_config(cli, Experiment::AmplificationSweep)?;
    cfg.name = "skeleton-scc".into();
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let spec = cfg
        .network
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("skeleton trials need a generator spec".into()))?;
    let rows: Vec<SkeletonRow> = skeleton_scc_experiment(spec, cfg.trials, cfg.seed)?
        .into_iter()
        .map(|t| SkeletonRow {
            trial: t.trial,
            fraction: t.fraction,
            condition: t.condition,
            rewired_fraction: t.rewired_fraction,
        })
        .collect();
    write_experiment(cli, &cfg, &rows, json!({}))
}
